// End-to-end acceptance runner. Prints one PASS/FAIL line per criterion
// and exits nonzero if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dxann/classifier.hpp"
#include "dxann/data.hpp"
#include "dxann/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dxann;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s  (%s)\n", criterion, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void randomize(FlowModel& model, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (Parameter* p : model.parameters())
        for (std::size_t i = 0; i < p->value().size(); ++i) p->value()[i] = u(rng);
}

FlowModel random_model(std::size_t d, std::size_t k, std::uint64_t seed) {
    FlowConfig cfg;
    cfg.dim = d;
    cfg.blocks = k;
    cfg.conditioner.widths = {8};
    cfg.seed = seed;
    FlowModel model(cfg);
    randomize(model, seed * 977 + 13);
    return model;
}

// criterion 1: two-moons desk-scale accuracy and runtime
std::optional<TrainResult> criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    Dataset ds = gen_two_moons(1000, 0.1, 7);
    auto [tr, te] = split(ds, 0.8, 7);
    TrainConfig cfg;
    cfg.seed = 7;
    TrainResult res = train(tr, te, cfg);
    double elapsed = seconds_since(t0);
    double acc = res.log.back().test_acc;
    bool ok = acc >= 0.95 && elapsed <= 120.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "two-moons test acc %.4f (>=0.95), %.1fs (<=120s)",
                  acc, elapsed);
    report(1, ok, buf);
    return ok ? std::optional<TrainResult>(std::move(res)) : std::nullopt;
}

struct BlobRun {
    TrainResult result;
    Dataset test;
};

std::optional<BlobRun> criterion2() {
    auto t0 = std::chrono::steady_clock::now();
    Dataset ds = gen_blob_images(400, 16, 16, 2, 0.8, 0.1, 7);
    auto [tr, te] = split(ds, 0.8, 7);
    TrainConfig cfg;
    cfg.seed = 7;
    // A small conditioner and a tight log-scale clamp keep the flow from
    // memorizing the planted bump, which preserves per-pixel residual
    // contrast for the localization check (criterion 3) without hurting
    // accuracy on this task.
    cfg.alpha = 0.5;
    cfg.conditioner.widths = {4};
    TrainResult res = train(tr, te, cfg);
    double elapsed = seconds_since(t0);
    double acc = res.log.back().test_acc;
    bool ok = acc >= 0.90 && elapsed <= 600.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "planted-blob test acc %.4f (>=0.90), %.1fs (<=600s)",
                  acc, elapsed);
    report(2, ok, buf);
    if (!ok) return std::nullopt;
    return BlobRun{std::move(res), std::move(te)};
}

// Mann-Whitney ROC-AUC of scores against a binary mask.
double roc_auc(const Tensor& scores, const Tensor& mask) {
    std::vector<std::pair<double, int>> items;
    for (std::size_t i = 0; i < scores.size(); ++i)
        items.emplace_back(scores[i], int((mask)[i] != 0.0));
    std::sort(items.begin(), items.end());
    double pos = 0, neg = 0, rank_sum = 0;
    std::size_t i = 0;
    double rank = 1;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].first == items[i].first) ++j;
        double avg_rank = rank + double(j - i - 1) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (items[k].second) rank_sum += avg_rank;
        rank += double(j - i);
        i = j;
    }
    for (const auto& [s, y] : items) (y ? pos : neg) += 1;
    if (pos == 0 || neg == 0) return 0.5;
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

void criterion3(const std::optional<BlobRun>& run) {
    if (!run) {
        report(3, false, "skipped: criterion 2 model unavailable");
        return;
    }
    double inside_sum = 0, outside_sum = 0;
    std::size_t inside_n = 0, outside_n = 0;
    double auc_sum = 0;
    std::size_t auc_n = 0;
    for (const Sample& s : run->test.samples) {
        if (s.label != 1 || !s.truth_mask) continue;
        ECSMap ecs = explain(s.features, run->result.model, run->result.heads);
        for (std::size_t i = 0; i < ecs.normalized.size(); ++i) {
            if ((*s.truth_mask)[i] != 0.0) {
                inside_sum += ecs.normalized[i];
                ++inside_n;
            } else {
                outside_sum += ecs.normalized[i];
                ++outside_n;
            }
        }
        auc_sum += roc_auc(ecs.normalized, *s.truth_mask);
        ++auc_n;
    }
    double inside = inside_sum / double(inside_n);
    double outside = outside_sum / double(outside_n);
    double auc = auc_sum / double(auc_n);
    bool ok = inside >= 1.5 * outside && auc >= 0.75;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "ECS localization: inside/outside %.2f (>=1.5), mean AUC %.3f (>=0.75), "
                  "%zu class-1 test samples", inside / outside, auc, auc_n);
    report(3, ok, buf);
}

void criterion4() {
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> u(-2, 2);
    double worst = 0;
    std::size_t trials = 0;
    for (std::size_t d : {2ul, 8ul, 64ul})
        for (std::size_t k : {2ul, 4ul, 8ul}) {
            FlowModel model = random_model(d, k, d * 100 + k);
            for (int t = 0; t < 112; ++t) {
                Tensor x({d});
                for (std::size_t i = 0; i < d; ++i) x[i] = u(rng);
                auto [z, ld] = model.forward(x);
                (void)ld;
                Tensor back = model.inverse(z);
                for (std::size_t i = 0; i < d; ++i)
                    worst = std::max(worst, std::abs(back[i] - x[i]));
                ++trials;
            }
        }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "bijectivity: max round-trip error %.2e over %zu inputs (<=1e-8)",
                  worst, trials);
    report(4, worst <= 1e-8, buf);
}

void criterion5() {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(-2, 2);
    double worst = 0;
    for (std::uint64_t m = 0; m < 50; ++m) {
        std::size_t d = 2 + m % 7;  // 2..8
        FlowModel model = random_model(d, 2 + 2 * (m % 3), m);
        Tensor x({d});
        for (std::size_t i = 0; i < d; ++i) x[i] = u(rng);
        auto [z, analytic] = model.forward(x);
        (void)z;
        auto jac = oracles::fd_jacobian(
            [&](const Tensor& v) { return model.forward(v).first; }, x, 1e-5);
        double numeric = oracles::log_abs_det(jac);
        worst = std::max(worst, oracles::rel_err(analytic, numeric));
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "log-det oracle: worst relative error %.2e over 50 models (<=1e-4)",
                  worst);
    report(5, worst <= 1e-4, buf);
}

void criterion6() {
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        FlowConfig fcfg;
        fcfg.dim = 4;
        fcfg.blocks = 2;
        fcfg.conditioner.widths = {6};
        fcfg.seed = trial;
        FlowModel model(fcfg);
        randomize(model, trial * 131 + 7);
        LatentHeads heads = LatentHeads::symmetric(4, 1.0);

        std::vector<Tensor> xs;
        std::vector<int> labels;
        for (int n = 0; n < 4; ++n) {
            Tensor x({4});
            for (std::size_t i = 0; i < 4; ++i) x[i] = u(rng);
            xs.push_back(x);
            labels.push_back(int(rng() % 2));
        }

        auto scalar_loss = [&]() {
            std::vector<Tensor> zs;
            std::vector<double> lds;
            for (const Tensor& x : xs) {
                auto [z, ld] = model.forward(x);
                zs.push_back(z);
                lds.push_back(ld);
            }
            return dxann_loss(zs, labels, lds, heads);
        };

        std::vector<Parameter*> params = model.parameters();
        zero_grads(params);
        std::vector<std::pair<Expr, Expr>> outs;
        for (const Tensor& x : xs) outs.push_back(model.forward(constant(x)));
        gradient(dxann_loss_expr(outs, labels, heads));

        for (Parameter* p : params)
            for (std::size_t i = 0; i < p->value().size(); ++i) {
                double saved = p->value()[i];
                p->value()[i] = saved + 1e-5;
                double fp = scalar_loss();
                p->value()[i] = saved - 1e-5;
                double fm = scalar_loss();
                p->value()[i] = saved;
                double numeric = (fp - fm) / 2e-5;
                worst = std::max(worst,
                                 oracles::rel_err(p->gradient()[i], numeric));
            }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "gradient oracle: worst relative error %.2e over 20 pairs (<=1e-5)",
                  worst);
    report(6, worst <= 1e-5, buf);
}

void criterion7() {
    bool ok = true;
    std::string why = "nearest-mean equivalence, uniform-label loss, ecs-zero iff at mean";
    std::mt19937_64 rng(70);
    std::uniform_real_distribution<double> u(-3, 3);

    FlowModel model = random_model(3, 2, 7);
    LatentHeads heads = LatentHeads::symmetric(3, 0.9);
    for (int trial = 0; trial < 500 && ok; ++trial) {
        Tensor x({3});
        for (std::size_t i = 0; i < 3; ++i) x[i] = u(rng);
        Prediction p = predict(x, model, heads);
        auto [z, ld] = model.forward(x);
        (void)ld;
        double d0 = 0, d1 = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            d0 += (z[i] - heads.mu0[i]) * (z[i] - heads.mu0[i]);
            d1 += (z[i] - heads.mu1[i]) * (z[i] - heads.mu1[i]);
        }
        if (p.label != (d1 < d0 ? 1 : 0)) ok = false;
    }
    {   // exact tie breaks to 0
        FlowConfig fcfg;
        fcfg.dim = 2;
        fcfg.blocks = 2;
        fcfg.conditioner.widths = {4};
        FlowModel ident(fcfg);
        if (predict(Tensor({2}), ident, LatentHeads::symmetric(2, 1.0)).label != 0)
            ok = false;

        // ecs_raw is zero iff z equals the predicted-class mean
        LatentHeads heads2 = LatentHeads::symmetric(2, 1.0);
        Tensor at_mean = ecs_raw(heads2.mu1, ident, heads2);
        if (at_mean[0] != 0.0 || at_mean[1] != 0.0) ok = false;
        Tensor off = heads2.mu1;
        off[1] += 1e-9;
        Tensor off_raw = ecs_raw(off, ident, heads2);
        if (off_raw[1] == 0.0) ok = false;
    }
    for (int label : {0, 1}) {
        std::vector<Tensor> zs;
        std::vector<double> lds;
        std::vector<int> labels;
        for (int n = 0; n < 6; ++n) {
            Tensor z({3});
            for (std::size_t i = 0; i < 3; ++i) z[i] = u(rng);
            zs.push_back(z);
            lds.push_back(u(rng));
            labels.push_back(label);
        }
        const Tensor& mu = label == 1 ? heads.mu1 : heads.mu0;
        double mean = 0;
        for (std::size_t n = 0; n < zs.size(); ++n)
            mean += realnvp_loss(zs[n], lds[n], mu);
        mean /= double(zs.size());
        if (std::abs(dxann_loss(zs, labels, lds, heads) - mean) > 1e-12) ok = false;
    }
    report(7, ok, why);
}

#ifdef DXANN_CLI_PATH
int run_cli(const std::string& args) {
    int status = std::system((std::string(DXANN_CLI_PATH) + " " + args +
                              " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}
#endif

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Drop the trailing (wall-clock) field of every row; timing is the one
// column that cannot be byte-identical across runs.
std::string strip_seconds_column(const std::string& csv) {
    std::istringstream in(csv);
    std::string out, line;
    while (std::getline(in, line)) {
        auto pos = line.rfind(',');
        out += line.substr(0, pos);
        out += '\n';
    }
    return out;
}

void criterion8() {
#ifndef DXANN_CLI_PATH
    report(8, false, "CLI binary unavailable");
#else
    fs::path dir = fs::temp_directory_path() / "dxann_acceptance8";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string data = (dir / "data").string();
    std::string m1 = (dir / "a.dxann").string();
    std::string m2 = (dir / "b.dxann").string();
    bool ok = run_cli("gen-data --kind two-moons --n 100 --seed 11 --out " + data) == 0;
    std::string flags = " --epochs 5 --seed 11 --batch 20";
    ok = ok && run_cli("train --data " + data + " --out " + m1 + flags) == 0;
    ok = ok && run_cli("train --data " + data + " --out " + m2 + flags) == 0;
    bool ck_same = slurp(m1) == slurp(m2);
    bool csv_same = strip_seconds_column(slurp(m1 + ".metrics.csv")) ==
                    strip_seconds_column(slurp(m2 + ".metrics.csv"));

    // round trip preserves flow outputs bit for bit
    bool roundtrip = true;
    if (ok && ck_same) {
        Checkpoint ck = load_checkpoint(m1);
        fs::path m3 = dir / "c.dxann";
        save_checkpoint(m3.string(), ck.model, ck.heads, ck.config);
        Checkpoint ck2 = load_checkpoint(m3.string());
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-2, 2);
        for (int t = 0; t < 100; ++t) {
            Tensor x = Tensor::vector({u(rng), u(rng)});
            auto [z1, ld1] = ck.model.forward(x);
            auto [z2, ld2] = ck2.model.forward(x);
            if (ld1 != ld2 || z1[0] != z2[0] || z1[1] != z2[1]) roundtrip = false;
        }
    }
    ok = ok && ck_same && csv_same && roundtrip;
    std::string detail = std::string("determinism: checkpoints ") +
                         (ck_same ? "identical" : "DIFFER") + ", metrics " +
                         (csv_same ? "identical (seconds column excluded)" : "DIFFER") +
                         ", round-trip " + (roundtrip ? "bit-exact" : "DIFFERS");
    report(8, ok, detail);
    fs::remove_all(dir);
#endif
}

// Strict independent parse of the published P5/P6 header grammar.
bool parse_netpbm(const fs::path& p, const char* magic, std::size_t depth) {
    std::string bytes = slurp(p);
    std::istringstream in(bytes);
    std::string tok;
    in >> tok;
    if (tok != magic) return false;
    std::size_t w, h, maxval;
    if (!(in >> w >> h >> maxval)) return false;
    if (maxval != 255) return false;
    int sep = in.get();
    if (!std::isspace(sep)) return false;
    std::size_t raster = bytes.size() - std::size_t(in.tellg());
    return raster == w * h * depth;
}

void criterion9() {
#ifndef DXANN_CLI_PATH
    report(9, false, "CLI binary unavailable");
#else
    fs::path dir = fs::temp_directory_path() / "dxann_acceptance9";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string blobs = (dir / "blobs").string();
    std::string moons = (dir / "moons").string();
    bool ok = run_cli("gen-data --kind blobs --n 20 --seed 9 --out " + blobs) == 0;
    ok = ok && run_cli("gen-data --kind two-moons --n 20 --seed 9 --out " + moons) == 0;

    std::size_t pgms = 0;
    for (const auto& e : fs::recursive_directory_iterator(blobs))
        if (e.path().extension() == ".pgm") {
            ++pgms;
            if (!parse_netpbm(e.path(), "P5", 1)) ok = false;
        }
    ok = ok && pgms >= 20;

    std::string model = (dir / "m.dxann").string();
    ok = ok && run_cli("train --data " + blobs + " --out " + model +
                       " --epochs 1 --k 2 --seed 9") == 0;
    std::string prefix = (dir / "ex").string();
    ok = ok && run_cli("explain --model " + model + " --data " + blobs +
                       " --id b00001 --out " + prefix) == 0;
    ok = ok && parse_netpbm(prefix + ".heatmap.ppm", "P6", 3);
    ok = ok && parse_netpbm(prefix + ".overlay.ppm", "P6", 3);

    // lossless round trips per the data-module contract
    bool vec_exact = true;
    {
        Dataset ds = gen_two_moons(30, 0.2, 9);
        fs::path vdir = dir / "vec";
        save_dataset(ds, vdir.string());
        Dataset back = load_dataset(vdir.string());
        for (std::size_t s = 0; s < ds.size(); ++s)
            for (std::size_t i = 0; i < 2; ++i)
                if (back.samples[s].features[i] != ds.samples[s].features[i])
                    vec_exact = false;
    }
    bool img_exact = true;
    {
        Dataset loaded = load_dataset(blobs);
        fs::path idir = dir / "img";
        save_dataset(loaded, idir.string());
        Dataset again = load_dataset(idir.string());
        for (std::size_t s = 0; s < loaded.size(); ++s)
            for (std::size_t i = 0; i < loaded.dim; ++i)
                if (again.samples[s].features[i] != loaded.samples[s].features[i])
                    img_exact = false;
    }
    ok = ok && vec_exact && img_exact;
    std::string detail = std::string("format conformance: ") +
                         std::to_string(pgms) + " PGMs + 2 PPMs parse, vector round "
                         "trip " + (vec_exact ? "exact" : "INEXACT") +
                         ", image round trip " + (img_exact ? "lossless" : "LOSSY");
    report(9, ok, detail);
    fs::remove_all(dir);
#endif
}

}  // namespace

int main() {
    auto res1 = criterion1();
    (void)res1;
    auto res2 = criterion2();
    criterion3(res2);
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    if (g_failures) {
        std::printf("%d criteria FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
