#include "dxann/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace dxann {

void adam_step(const std::vector<Parameter*>& params, AdamState& state,
               double lr, double beta1, double beta2, double epsilon) {
    if (state.m.empty()) {
        for (Parameter* p : params) {
            state.m.emplace_back(p->value().shape());
            state.v.emplace_back(p->value().shape());
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state tracks " +
                                    std::to_string(state.m.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, double(state.t));
    double bc2 = 1.0 - std::pow(beta2, double(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& val = params[k]->value();
        const Tensor& g = params[k]->gradient();
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        if (!m.same_shape(val))
            throw std::invalid_argument("adam_step: moment shape " + m.shape_str() +
                                        " != parameter shape " + val.shape_str());
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
        }
    }
}

Evaluation evaluate(const FlowModel& model, const LatentHeads& heads,
                    const Dataset& ds) {
    if (ds.samples.empty())
        throw std::invalid_argument("evaluate: empty dataset");
    Evaluation ev{0.0, 0.0, {{{0, 0}, {0, 0}}}};
    double loss_total = 0.0;
    for (const Sample& s : ds.samples) {
        auto [z, log_det] = model.forward(s.features);
        double logp0 = gaussian_logpdf(z, heads.mu0);
        double logp1 = gaussian_logpdf(z, heads.mu1);
        int pred = logp1 > logp0 ? 1 : 0;
        ev.confusion[std::size_t(s.label)][std::size_t(pred)]++;
        loss_total += -(s.label == 1 ? logp1 : logp0) - log_det;
    }
    std::size_t correct = ev.confusion[0][0] + ev.confusion[1][1];
    ev.accuracy = double(correct) / double(ds.size());
    ev.mean_loss = loss_total / double(ds.size());
    return ev;
}

TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg) {
    if (train_set.samples.empty())
        throw std::invalid_argument("train: empty training set");
    bool has0 = false, has1 = false;
    for (const Sample& s : train_set.samples)
        (s.label == 1 ? has1 : has0) = true;
    if (!has0 || !has1)
        throw std::invalid_argument("train: training set must contain both classes");
    if (cfg.batch_size == 0 || cfg.batch_size > train_set.size())
        throw std::invalid_argument("train: batch size " + std::to_string(cfg.batch_size) +
                                    " out of range for " + std::to_string(train_set.size()) +
                                    " samples");

    FlowConfig fcfg;
    fcfg.dim = train_set.dim;
    fcfg.blocks = cfg.blocks;
    fcfg.mask_kind = train_set.spatial ? MaskKind::Checkerboard : MaskKind::Alternating;
    fcfg.conditioner = cfg.conditioner;
    fcfg.alpha = cfg.alpha;
    fcfg.spatial = train_set.spatial;
    fcfg.seed = cfg.seed;
    TrainResult result{FlowModel(fcfg),
                       LatentHeads::symmetric(train_set.dim, cfg.separation),
                       {}};

    std::vector<Parameter*> params = result.model.parameters();
    AdamState adam;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<std::pair<Expr, Expr>> outs;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = train_set.samples[order[i]];
                outs.push_back(result.model.forward(constant(s.features)));
                labels.push_back(s.label);
            }
            Expr loss = dxann_loss_expr(outs, labels, result.heads);
            loss_sum += loss->value.item() * double(end - start);
            gradient(loss);
            if (std::isfinite(cfg.grad_clip)) {
                double norm2 = 0.0;
                for (Parameter* p : params)
                    for (std::size_t i = 0; i < p->gradient().size(); ++i)
                        norm2 += p->gradient()[i] * p->gradient()[i];
                double norm = std::sqrt(norm2);
                if (norm > cfg.grad_clip) {
                    double scale = cfg.grad_clip / norm;
                    for (Parameter* p : params)
                        for (std::size_t i = 0; i < p->gradient().size(); ++i)
                            p->gradient()[i] *= scale;
                }
            }
            adam_step(params, adam, cfg.learning_rate, cfg.beta1, cfg.beta2,
                      cfg.epsilon);
            zero_grads(params);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / double(train_set.size());
        rec.train_acc = evaluate(result.model, result.heads, train_set).accuracy;
        rec.test_acc = test_set.samples.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : evaluate(result.model, result.heads, test_set).accuracy;
        rec.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(rec);
    }
    return result;
}

void save_metrics_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_metrics_csv: cannot open " + path);
    out << "epoch,train_loss,train_acc,test_acc,seconds\n";
    char buf[160];
    for (const EpochRecord& r : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.3f\n",
                      r.epoch, r.train_loss, r.train_acc, r.test_acc, r.seconds);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format, version 1. All integers little-endian u64 unless noted.

namespace {

constexpr char kMagic[4] = {'D', 'X', 'A', 'N'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::string& buf) : buf_(buf) {}
    void u8(std::uint8_t v) { buf_.push_back(char(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }

private:
    std::string& buf_;
};

class Reader {
public:
    Reader(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}
    std::uint8_t u8(const char* field) {
        need(1, field);
        return std::uint8_t(buf_[pos_++]);
    }
    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t(std::uint8_t(buf_[pos_ + std::size_t(i)])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const char* field) {
        std::uint64_t bits = u64(field);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(const char* field) {
        std::uint64_t n = u64(field);
        need(n, field);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::uint64_t n, const char* field) {
        if (pos_ + n > buf_.size())
            throw std::runtime_error(std::string("load_checkpoint: truncated file reading ") +
                                     field);
    }
    const std::string& buf_;
    std::size_t pos_;
};

void write_heads_and_config(Writer& w, const FlowConfig& f, const LatentHeads& heads,
                            const TrainConfig& t) {
    w.u64(f.dim);
    w.u64(f.blocks);
    w.u8(std::uint8_t(f.mask_kind));
    w.f64(f.alpha);
    w.u8(f.spatial ? 1 : 0);
    if (f.spatial) {
        w.u64(f.spatial->first);
        w.u64(f.spatial->second);
    }
    w.u64(f.seed);
    w.u8(std::uint8_t(f.conditioner.kind));
    w.u64(f.conditioner.widths.size());
    for (std::size_t wd : f.conditioner.widths) w.u64(wd);
    w.u64(f.conditioner.kernel);
    w.f64(heads.separation);
    w.u8(heads.learnable ? 1 : 0);
    for (std::size_t i = 0; i < heads.mu0.size(); ++i) w.f64(heads.mu0[i]);
    for (std::size_t i = 0; i < heads.mu1.size(); ++i) w.f64(heads.mu1[i]);
    w.f64(t.learning_rate);
    w.u64(t.epochs);
    w.u64(t.batch_size);
    w.u64(t.seed);
    w.f64(t.beta1);
    w.f64(t.beta2);
    w.f64(t.epsilon);
    w.u8(t.dequantize ? 1 : 0);
    w.f64(t.grad_clip);
}

}  // namespace

void save_checkpoint(const std::string& path, const FlowModel& model,
                     const LatentHeads& heads, const TrainConfig& cfg) {
    std::string buf;
    buf.append(kMagic, 4);
    buf.push_back(char(kVersion));
    Writer w(buf);

    std::string config;
    Writer cw(config);
    write_heads_and_config(cw, model.config(), heads, cfg);
    w.str(config);

    std::vector<const Parameter*> params = model.parameters();
    w.u64(params.size());
    for (const Parameter* p : params) {
        w.str(p->id());
        const Tensor& v = p->value();
        w.u64(v.rank());
        for (std::size_t d = 0; d < v.rank(); ++d) w.u64(v.dim(d));
        for (std::size_t i = 0; i < v.size(); ++i) w.f64(v[i]);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out)
        throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (buf.size() < 5 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic");
    if (std::uint8_t(buf[4]) != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(int(std::uint8_t(buf[4]))));

    Reader top(buf, 5);
    std::string config = top.str("config block");
    Reader r(config, 0);

    FlowConfig f;
    f.dim = r.u64("dim");
    f.blocks = r.u64("blocks");
    f.mask_kind = MaskKind(r.u8("mask kind"));
    f.alpha = r.f64("alpha");
    if (r.u8("spatial flag")) {
        std::size_t h = r.u64("spatial height");
        std::size_t wdt = r.u64("spatial width");
        f.spatial = {{h, wdt}};
    }
    f.seed = r.u64("seed");
    f.conditioner.kind = ConditionerKind(r.u8("conditioner kind"));
    std::size_t nw = r.u64("conditioner width count");
    f.conditioner.widths.clear();
    for (std::size_t i = 0; i < nw; ++i)
        f.conditioner.widths.push_back(r.u64("conditioner width"));
    f.conditioner.kernel = r.u64("conditioner kernel");

    LatentHeads heads;
    heads.separation = r.f64("separation");
    heads.learnable = r.u8("learnable flag") != 0;
    heads.mu0 = Tensor({f.dim});
    heads.mu1 = Tensor({f.dim});
    for (std::size_t i = 0; i < f.dim; ++i) heads.mu0[i] = r.f64("mu0");
    for (std::size_t i = 0; i < f.dim; ++i) heads.mu1[i] = r.f64("mu1");

    TrainConfig t;
    t.learning_rate = r.f64("learning rate");
    t.epochs = r.u64("epochs");
    t.batch_size = r.u64("batch size");
    t.seed = r.u64("train seed");
    t.beta1 = r.f64("beta1");
    t.beta2 = r.f64("beta2");
    t.epsilon = r.f64("epsilon");
    t.dequantize = r.u8("dequantize flag") != 0;
    t.grad_clip = r.f64("grad clip");
    t.blocks = f.blocks;
    t.alpha = f.alpha;
    t.separation = heads.separation;
    t.conditioner = f.conditioner;

    Checkpoint ck{FlowModel(f), std::move(heads), t};

    Reader pr(buf, top.pos());
    std::uint64_t count = pr.u64("parameter count");
    std::vector<Parameter*> params = ck.model.parameters();
    if (count != params.size())
        throw std::runtime_error("load_checkpoint: parameter count " +
                                 std::to_string(count) + " does not match model (" +
                                 std::to_string(params.size()) + ")");
    for (Parameter* p : params) {
        std::string id = pr.str("parameter id");
        if (id != p->id())
            throw std::runtime_error("load_checkpoint: parameter id '" + id +
                                     "' does not match expected '" + p->id() + "'");
        std::uint64_t rank = pr.u64("parameter rank");
        std::vector<std::size_t> dims;
        for (std::uint64_t d = 0; d < rank; ++d)
            dims.push_back(pr.u64("parameter dim"));
        if (dims != p->value().shape())
            throw std::runtime_error("load_checkpoint: shape mismatch for parameter '" +
                                     id + "'");
        for (std::size_t i = 0; i < p->value().size(); ++i)
            p->value()[i] = pr.f64("parameter data");
    }
    return ck;
}

}  // namespace dxann
