#ifndef DXANN_TRAIN_HPP
#define DXANN_TRAIN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dxann/classifier.hpp"
#include "dxann/data.hpp"
#include "dxann/flow.hpp"

namespace dxann {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch_size = 50;
    std::uint64_t seed = 0;
    std::size_t blocks = 4;
    double alpha = 3.0;       // coupling log-scale clamp
    double separation = 1.0;  // latent mean separation c
    ConditionerConfig conditioner;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool dequantize = false;
    double grad_clip = 100.0;  // global-norm clip; infinity disables
};

struct EpochRecord {
    std::size_t epoch;
    double train_loss;
    double train_acc;
    double test_acc;
    double seconds;  // wall clock, informational only
};

using MetricsLog = std::vector<EpochRecord>;

class AdamState {
public:
    // Lazily sized to the parameter set on the first step.
    std::vector<Tensor> m, v;
    std::size_t t = 0;
};

// Standard bias-corrected Adam. Gradients are left untouched.
void adam_step(const std::vector<Parameter*>& params, AdamState& state,
               double lr, double beta1, double beta2, double epsilon);

struct Evaluation {
    double accuracy;
    double mean_loss;
    std::array<std::array<std::size_t, 2>, 2> confusion;  // [true][predicted]
};

Evaluation evaluate(const FlowModel& model, const LatentHeads& heads,
                    const Dataset& ds);

struct TrainResult {
    FlowModel model;
    LatentHeads heads;
    MetricsLog log;
};

TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg);

void save_metrics_csv(const MetricsLog& log, const std::string& path);

// Versioned little-endian binary: magic "DXAN", u8 version, config block,
// then length-prefixed parameter records. Byte-exact round trip.
void save_checkpoint(const std::string& path, const FlowModel& model,
                     const LatentHeads& heads, const TrainConfig& cfg);

struct Checkpoint {
    FlowModel model;
    LatentHeads heads;
    TrainConfig config;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dxann

#endif
