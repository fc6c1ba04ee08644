#include "dxann/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace dxann {

Mask Mask::alternating(std::size_t d, bool even_pass) {
    Mask m;
    m.kind = MaskKind::Alternating;
    m.pattern.resize(d);
    for (std::size_t i = 0; i < d; ++i)
        m.pattern[i] = ((i % 2 == 0) == even_pass) ? 1.0 : 0.0;
    return m;
}

Mask Mask::checkerboard(std::size_t h, std::size_t w, bool even_pass) {
    Mask m;
    m.kind = MaskKind::Checkerboard;
    m.pattern.resize(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            m.pattern[i * w + j] = (((i + j) % 2 == 0) == even_pass) ? 1.0 : 0.0;
    return m;
}

Mask Mask::half_split(std::size_t d, bool first_pass) {
    Mask m;
    m.kind = MaskKind::HalfSplit;
    m.pattern.resize(d);
    for (std::size_t i = 0; i < d; ++i)
        m.pattern[i] = ((i < d / 2) == first_pass) ? 1.0 : 0.0;
    return m;
}

Mask Mask::complement() const {
    Mask m = *this;
    for (double& v : m.pattern) v = 1.0 - v;
    return m;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, double stddev,
                     std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace

Conditioner Conditioner::make(std::size_t d,
                              std::optional<std::pair<std::size_t, std::size_t>> spatial,
                              const ConditionerConfig& cfg, std::mt19937_64& rng,
                              const std::string& id_prefix) {
    Conditioner c;
    c.kind_ = cfg.kind;
    c.cfg_ = cfg;
    c.d_ = d;
    if (cfg.kind == ConditionerKind::Mlp) {
        std::size_t in = d;
        for (std::size_t l = 0; l < cfg.widths.size(); ++l) {
            std::size_t out = cfg.widths[l];
            std::string tag = id_prefix + ".fc" + std::to_string(l);
            c.params_.emplace_back(tag + ".w",
                random_tensor({out, in}, 1.0 / std::sqrt(double(in)), rng));
            c.params_.emplace_back(tag + ".b", Tensor({out}));
            in = out;
        }
        // zero final layer: identity flow at init
        c.params_.emplace_back(id_prefix + ".out.w", Tensor({2 * d, in}));
        c.params_.emplace_back(id_prefix + ".out.b", Tensor({2 * d}));
    } else {
        if (!spatial)
            throw std::invalid_argument("Conditioner: cnn kind needs a spatial shape");
        c.h_ = spatial->first;
        c.w_ = spatial->second;
        if (c.h_ * c.w_ != d)
            throw std::invalid_argument("Conditioner: spatial shape does not cover D");
        if (cfg.kernel % 2 == 0)
            throw std::invalid_argument("Conditioner: even cnn kernel unsupported");
        std::size_t cin = 1;
        for (std::size_t l = 0; l < cfg.widths.size(); ++l) {
            std::size_t cout = cfg.widths[l];
            std::string tag = id_prefix + ".conv" + std::to_string(l);
            double fan = double(cin * cfg.kernel * cfg.kernel);
            c.params_.emplace_back(tag + ".k",
                random_tensor({cout, cin, cfg.kernel, cfg.kernel},
                              1.0 / std::sqrt(fan), rng));
            c.params_.emplace_back(tag + ".b", Tensor({cout}));
            cin = cout;
        }
        c.params_.emplace_back(id_prefix + ".out.w", Tensor({2 * d, cin * d}));
        c.params_.emplace_back(id_prefix + ".out.b", Tensor({2 * d}));
    }
    return c;
}

std::pair<Expr, Expr> Conditioner::operator()(const Expr& masked) const {
    Expr h;
    if (kind_ == ConditionerKind::Mlp) {
        h = masked;
        std::size_t n_hidden = cfg_.widths.size();
        for (std::size_t l = 0; l < n_hidden; ++l) {
            const Parameter& w = params_[2 * l];
            const Parameter& b = params_[2 * l + 1];
            h = tanh_(add(matvec(w.expr(), h), b.expr()));
        }
    } else {
        h = reshape(masked, {1, h_, w_});
        std::size_t n_conv = cfg_.widths.size();
        for (std::size_t l = 0; l < n_conv; ++l) {
            const Parameter& k = params_[2 * l];
            const Parameter& b = params_[2 * l + 1];
            h = tanh_(conv2d(h, k.expr(), b.expr()));
        }
        h = reshape(h, {h->value.size()});
    }
    const Parameter& wo = params_[params_.size() - 2];
    const Parameter& bo = params_[params_.size() - 1];
    Expr out = add(matvec(wo.expr(), h), bo.expr());
    return {slice(out, 0, d_), slice(out, d_, d_)};
}

namespace {

Tensor plain_affine(const Tensor& w, const Tensor& x, const Tensor& b) {
    std::size_t m = w.dim(0), n = w.dim(1);
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * x[j];
        out[i] = s;
    }
    return out;
}

Tensor plain_conv(const Tensor& x, std::size_t cin, std::size_t h, std::size_t w,
                  const Tensor& k, const Tensor& b) {
    std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    std::ptrdiff_t ph = kh / 2, pw = kw / 2;
    Tensor out({cout * h * w});
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                double s = b[co];
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t u = 0; u < kh; ++u) {
                        std::ptrdiff_t ii = std::ptrdiff_t(i + u) - ph;
                        if (ii < 0 || ii >= std::ptrdiff_t(h)) continue;
                        for (std::size_t v = 0; v < kw; ++v) {
                            std::ptrdiff_t jj = std::ptrdiff_t(j + v) - pw;
                            if (jj < 0 || jj >= std::ptrdiff_t(w)) continue;
                            s += x[(ci * h + ii) * w + jj] *
                                 k[((co * cin + ci) * kh + u) * kw + v];
                        }
                    }
                out[(co * h + i) * w + j] = s;
            }
    return out;
}

}  // namespace

std::pair<Tensor, Tensor> Conditioner::eval(const Tensor& masked) const {
    Tensor h = masked;
    if (kind_ == ConditionerKind::Mlp) {
        for (std::size_t l = 0; l < cfg_.widths.size(); ++l) {
            h = plain_affine(params_[2 * l].value(), h, params_[2 * l + 1].value());
            for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
        }
    } else {
        std::size_t cin = 1;
        for (std::size_t l = 0; l < cfg_.widths.size(); ++l) {
            h = plain_conv(h, cin, h_, w_, params_[2 * l].value(),
                           params_[2 * l + 1].value());
            for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
            cin = cfg_.widths[l];
        }
    }
    Tensor out = plain_affine(params_[params_.size() - 2].value(), h,
                              params_[params_.size() - 1].value());
    Tensor s({d_}), t({d_});
    for (std::size_t i = 0; i < d_; ++i) {
        s[i] = out[i];
        t[i] = out[d_ + i];
    }
    return {std::move(s), std::move(t)};
}

std::vector<Parameter*> Conditioner::parameters() {
    std::vector<Parameter*> ps;
    for (Parameter& p : params_) ps.push_back(&p);
    return ps;
}

std::vector<const Parameter*> Conditioner::parameters() const {
    std::vector<const Parameter*> ps;
    for (const Parameter& p : params_) ps.push_back(&p);
    return ps;
}

std::pair<Expr, Expr> couple_forward(const Expr& x, const AffineCouplingBlock& block) {
    std::size_t d = block.mask.pattern.size();
    if (x->value.size() != d)
        throw std::invalid_argument("couple_forward: input length " +
                                    std::to_string(x->value.size()) +
                                    " != block dimension " + std::to_string(d));
    Expr m = constant(Tensor::vector(block.mask.pattern));
    Expr im = constant(Tensor::vector(block.mask.complement().pattern));
    Expr xm = mul(m, x);
    auto [s_raw, t] = block.conditioner(xm);
    double a = block.clamp;
    Expr log_s = mul(tanh_(mul(s_raw, constant(Tensor::scalar(1.0 / a)))),
                     constant(Tensor::scalar(a)));
    Expr y = add(xm, mul(im, add(mul(x, exp_(log_s)), t)));
    Expr log_det = reduce_sum(mul(im, log_s));
    return {y, log_det};
}

std::pair<Tensor, double> couple_forward(const Tensor& x, const AffineCouplingBlock& block) {
    std::size_t d = block.mask.pattern.size();
    if (x.size() != d)
        throw std::invalid_argument("couple_forward: input length " +
                                    std::to_string(x.size()) +
                                    " != block dimension " + std::to_string(d));
    Tensor xm(x.shape());
    for (std::size_t i = 0; i < d; ++i) xm[i] = block.mask.pattern[i] * x[i];
    auto [s_raw, t] = block.conditioner.eval(xm);
    double a = block.clamp;
    Tensor y(x.shape());
    double log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        if (block.mask.pattern[i] != 0.0) {
            y[i] = x[i];
        } else {
            double log_s = a * std::tanh(s_raw[i] / a);
            y[i] = x[i] * std::exp(log_s) + t[i];
            log_det += log_s;
        }
    }
    return {std::move(y), log_det};
}

Tensor couple_inverse(const Tensor& y, const AffineCouplingBlock& block) {
    std::size_t d = block.mask.pattern.size();
    if (y.size() != d)
        throw std::invalid_argument("couple_inverse: input length " +
                                    std::to_string(y.size()) +
                                    " != block dimension " + std::to_string(d));
    Tensor ym(y.shape());
    for (std::size_t i = 0; i < d; ++i) ym[i] = block.mask.pattern[i] * y[i];
    auto [s_raw, t] = block.conditioner.eval(ym);
    double a = block.clamp;
    Tensor x(y.shape());
    for (std::size_t i = 0; i < d; ++i) {
        if (block.mask.pattern[i] != 0.0) {
            x[i] = y[i];
        } else {
            double log_s = a * std::tanh(s_raw[i] / a);
            x[i] = (y[i] - t[i]) * std::exp(-log_s);
        }
    }
    return x;
}

FlowModel::FlowModel(FlowConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.dim < 2)
        throw std::invalid_argument("FlowModel: dimension must be >= 2, got " +
                                    std::to_string(cfg_.dim));
    if (cfg_.blocks < 2)
        throw std::invalid_argument("FlowModel: need at least 2 blocks, got " +
                                    std::to_string(cfg_.blocks));
    if (cfg_.mask_kind == MaskKind::Checkerboard && !cfg_.spatial)
        throw std::invalid_argument("FlowModel: checkerboard mask needs a spatial shape");
    std::mt19937_64 rng(cfg_.seed);
    for (std::size_t k = 0; k < cfg_.blocks; ++k) {
        bool even = (k % 2 == 0);
        Mask mask;
        switch (cfg_.mask_kind) {
            case MaskKind::Alternating: mask = Mask::alternating(cfg_.dim, even); break;
            case MaskKind::Checkerboard:
                mask = Mask::checkerboard(cfg_.spatial->first, cfg_.spatial->second, even);
                break;
            case MaskKind::HalfSplit: mask = Mask::half_split(cfg_.dim, even); break;
        }
        Conditioner cond = Conditioner::make(cfg_.dim, cfg_.spatial, cfg_.conditioner,
                                             rng, "block" + std::to_string(k));
        blocks_.push_back(AffineCouplingBlock{std::move(mask), std::move(cond), cfg_.alpha});
    }
}

std::pair<Expr, Expr> FlowModel::forward(const Expr& x) const {
    Expr z = x;
    Expr total = constant(Tensor::scalar(0.0));
    for (const auto& block : blocks_) {
        auto [y, ld] = couple_forward(z, block);
        z = y;
        total = add(total, ld);
    }
    return {z, total};
}

std::pair<Tensor, double> FlowModel::forward(const Tensor& x) const {
    Tensor z = x;
    double total = 0.0;
    for (const auto& block : blocks_) {
        auto [y, ld] = couple_forward(z, block);
        z = std::move(y);
        total += ld;
    }
    return {std::move(z), total};
}

Tensor FlowModel::inverse(const Tensor& z) const {
    Tensor x = z;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
        x = couple_inverse(x, *it);
    return x;
}

std::vector<Parameter*> FlowModel::parameters() {
    std::vector<Parameter*> ps;
    for (auto& block : blocks_)
        for (Parameter* p : block.conditioner.parameters()) ps.push_back(p);
    return ps;
}

std::vector<const Parameter*> FlowModel::parameters() const {
    std::vector<const Parameter*> ps;
    for (const auto& block : blocks_)
        for (const Parameter* p : block.conditioner.parameters()) ps.push_back(p);
    return ps;
}

FlowModel make_flow(const FlowConfig& cfg) { return FlowModel(cfg); }

}  // namespace dxann
