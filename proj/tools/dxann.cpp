#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "dxann/classifier.hpp"
#include "dxann/data.hpp"
#include "dxann/heatmap.hpp"
#include "dxann/netpbm.hpp"
#include "dxann/train.hpp"

namespace fs = std::filesystem;
using namespace dxann;

namespace {

int cmd_gen_data(const std::string& kind, std::size_t n, std::uint64_t seed,
                 std::size_t h, std::size_t w, std::size_t r, double a,
                 double sigma, const std::string& out_dir) {
    Dataset ds;
    if (kind == "two-moons" || kind == "moons")
        ds = gen_two_moons(n, sigma, seed);
    else
        ds = gen_blob_images(n, h, w, r, a, sigma, seed);
    save_dataset(ds, out_dir);
    std::size_t n0 = 0, n1 = 0;
    for (const Sample& s : ds.samples) (s.label == 1 ? n1 : n0)++;
    std::cout << "wrote " << ds.size() << " samples to " << out_dir
              << " (class 0: " << n0 << ", class 1: " << n1 << ")\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_path,
              double split_fraction, TrainConfig cfg) {
    Dataset full = load_dataset(data_dir);
    auto [train_set, test_set] = split(full, split_fraction, cfg.seed);
    train_set = preprocess(train_set, cfg.dequantize, cfg.seed);
    test_set = preprocess(test_set, false, cfg.seed);
    if (cfg.batch_size > train_set.size()) cfg.batch_size = train_set.size();
    TrainResult result = train(train_set, test_set, cfg);
    save_checkpoint(out_path, result.model, result.heads, cfg);
    save_metrics_csv(result.log, out_path + ".metrics.csv");
    const EpochRecord& last = result.log.back();
    std::printf("final train accuracy: %.4f\n", last.train_acc);
    std::printf("final test accuracy:  %.4f\n", last.test_acc);
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir) {
    Checkpoint ck = load_checkpoint(model_path);
    Dataset ds = preprocess(load_dataset(data_dir), false, 0);
    if (ds.samples.empty())
        throw std::runtime_error("eval: dataset in " + data_dir + " is empty");
    if (ds.dim != ck.model.dim())
        throw std::runtime_error("eval: model dimension " +
                                 std::to_string(ck.model.dim()) +
                                 " does not match data dimension " +
                                 std::to_string(ds.dim));
    Evaluation ev = evaluate(ck.model, ck.heads, ds);
    std::printf("accuracy:  %.4f\n", ev.accuracy);
    std::printf("mean loss: %.6f\n", ev.mean_loss);
    std::printf("confusion (rows true, cols predicted):\n");
    std::printf("  %zu %zu\n  %zu %zu\n", ev.confusion[0][0], ev.confusion[0][1],
                ev.confusion[1][0], ev.confusion[1][1]);
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_dir,
                const std::string& id, const std::string& prefix, double alpha) {
    Checkpoint ck = load_checkpoint(model_path);
    Dataset ds = preprocess(load_dataset(data_dir), false, 0);
    const Sample* sample = nullptr;
    for (const Sample& s : ds.samples)
        if (s.id == id) { sample = &s; break; }
    if (!sample)
        throw std::runtime_error("explain: no sample with id '" + id + "' in " +
                                 data_dir);
    if (ds.dim != ck.model.dim())
        throw std::runtime_error("explain: model dimension " +
                                 std::to_string(ck.model.dim()) +
                                 " does not match data dimension " +
                                 std::to_string(ds.dim));

    ECSMap ecs = explain(sample->features, ck.model, ck.heads);
    Prediction pred = predict(sample->features, ck.model, ck.heads);

    std::ofstream csv(prefix + ".ecs.csv", std::ios::binary);
    if (!csv)
        throw std::runtime_error("explain: cannot write " + prefix + ".ecs.csv");
    csv << "feature,raw,normalized\n";
    char buf[96];
    for (std::size_t i = 0; i < ecs.raw.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, ecs.raw[i],
                      ecs.normalized[i]);
        csv << buf;
    }

    if (ds.spatial) {
        auto [h, w] = *ds.spatial;
        write_ppm(prefix + ".heatmap.ppm", render_heatmap(ecs.normalized, h, w));
        GrayImage gray{h, w, {}};
        gray.pixels.resize(h * w);
        for (std::size_t i = 0; i < h * w; ++i)
            gray.pixels[i] = std::uint8_t(
                std::clamp(std::lround(sample->features[i] * 255.0), 0L, 255L));
        write_ppm(prefix + ".overlay.ppm", render_overlay(ecs.normalized, gray, alpha));
    } else {
        std::cout << "vector dataset: wrote ECS CSV only (no heatmap images)\n";
    }
    std::printf("predicted label: %d\n", pred.label);
    std::printf("log-likelihood class 0: %.6f\n", pred.logp0);
    std::printf("log-likelihood class 1: %.6f\n", pred.logp1);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DxANN: flow-based binary classifier with built-in explanations"};
    // plain --help only: gen-data's --h (image height) would clash with -h
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    std::string gen_kind, gen_out;
    std::size_t gen_n = 100, gen_h = 16, gen_w = 16, gen_r = 2;
    double gen_a = 0.8, gen_sigma = 0.1;
    std::uint64_t gen_seed = 0;
    gen->add_option("--kind", gen_kind, "two-moons|blobs")
        ->required()
        ->check(CLI::IsMember({"two-moons", "moons", "blobs"}));
    gen->add_option("--n", gen_n, "sample count")->required()->check(CLI::Range(2u, 1000000u));
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--h", gen_h, "image height (blobs)");
    gen->add_option("--w", gen_w, "image width (blobs)");
    gen->add_option("--r", gen_r, "blob radius");
    gen->add_option("--a", gen_a, "blob amplitude");
    gen->add_option("--sigma", gen_sigma, "noise level");
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
    std::string tr_data, tr_out;
    double tr_split = 0.8;
    TrainConfig tr_cfg;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate");
    tr->add_option("--batch", tr_cfg.batch_size, "batch size");
    tr->add_option("--k", tr_cfg.blocks, "number of coupling blocks");
    tr->add_option("--c", tr_cfg.separation, "latent mean separation");
    tr->add_option("--alpha", tr_cfg.alpha, "log-scale clamp");
    tr->add_option("--seed", tr_cfg.seed, "RNG seed");
    tr->add_option("--split", tr_split, "train fraction")->check(CLI::Range(0.01, 0.99));

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
    std::string ev_model, ev_data;
    ev->add_option("--model", ev_model, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();

    // explain
    auto* ex = app.add_subcommand("explain", "Render the ECS explanation for one sample");
    std::string ex_model, ex_data, ex_id, ex_out;
    double ex_alpha = 0.5;
    ex->add_option("--model", ex_model, "checkpoint path")->required();
    ex->add_option("--data", ex_data, "dataset directory")->required();
    ex->add_option("--id", ex_id, "sample id")->required();
    ex->add_option("--out", ex_out, "output path prefix")->required();
    ex->add_option("--overlay-alpha", ex_alpha, "overlay blend factor")
        ->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_kind, gen_n, gen_seed, gen_h, gen_w, gen_r,
                                gen_a, gen_sigma, gen_out);
        if (tr->parsed()) return cmd_train(tr_data, tr_out, tr_split, tr_cfg);
        if (ev->parsed()) return cmd_eval(ev_model, ev_data);
        if (ex->parsed()) return cmd_explain(ex_model, ex_data, ex_id, ex_out, ex_alpha);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
