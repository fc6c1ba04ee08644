#ifndef DXANN_FLOW_HPP
#define DXANN_FLOW_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "dxann/autodiff.hpp"
#include "dxann/tensor.hpp"

namespace dxann {

enum class MaskKind : std::uint8_t { Alternating = 0, Checkerboard = 1, HalfSplit = 2 };

// Binary partition of the D coordinates. pattern[i] == 1 means the
// coordinate passes through a coupling block unchanged.
struct Mask {
    std::vector<double> pattern;
    MaskKind kind = MaskKind::Alternating;

    static Mask alternating(std::size_t d, bool even_pass);
    static Mask checkerboard(std::size_t h, std::size_t w, bool even_pass);
    static Mask half_split(std::size_t d, bool first_pass);
    Mask complement() const;
};

enum class ConditionerKind : std::uint8_t { Mlp = 0, Cnn = 1 };

struct ConditionerConfig {
    ConditionerKind kind = ConditionerKind::Mlp;
    std::vector<std::size_t> widths{64, 64};  // hidden widths (mlp) or channels (cnn)
    std::size_t kernel = 3;                   // cnn only, odd
};

// Maps the masked (pass-through) part of x to per-coordinate raw log-scale
// and translation for the transformed part. The final layer is
// zero-initialized so a fresh block is exactly the identity.
class Conditioner {
public:
    static Conditioner make(std::size_t d,
                            std::optional<std::pair<std::size_t, std::size_t>> spatial,
                            const ConditionerConfig& cfg, std::mt19937_64& rng,
                            const std::string& id_prefix);

    // masked input [D] -> (raw log-scale [D], translation [D])
    std::pair<Expr, Expr> operator()(const Expr& masked) const;

    // graph-free evaluation for inference paths
    std::pair<Tensor, Tensor> eval(const Tensor& masked) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    const ConditionerConfig& config() const { return cfg_; }

private:
    Conditioner() = default;
    ConditionerKind kind_ = ConditionerKind::Mlp;
    ConditionerConfig cfg_;
    std::size_t d_ = 0, h_ = 0, w_ = 0;
    std::vector<Parameter> params_;
};

struct AffineCouplingBlock {
    Mask mask;
    Conditioner conditioner;
    double clamp;  // log-scale bound alpha
};

// y = m*x + (1-m)*(x*exp(log_s) + t), log_s = alpha*tanh(s_raw/alpha)
std::pair<Expr, Expr> couple_forward(const Expr& x, const AffineCouplingBlock& block);
std::pair<Tensor, double> couple_forward(const Tensor& x, const AffineCouplingBlock& block);
Tensor couple_inverse(const Tensor& y, const AffineCouplingBlock& block);

struct FlowConfig {
    std::size_t dim = 2;
    std::size_t blocks = 4;
    MaskKind mask_kind = MaskKind::Alternating;
    ConditionerConfig conditioner;
    double alpha = 3.0;
    std::optional<std::pair<std::size_t, std::size_t>> spatial;
    std::uint64_t seed = 0;
};

class FlowModel {
public:
    explicit FlowModel(FlowConfig cfg);

    std::pair<Expr, Expr> forward(const Expr& x) const;          // (z, total log-det)
    std::pair<Tensor, double> forward(const Tensor& x) const;
    Tensor inverse(const Tensor& z) const;

    std::size_t dim() const { return cfg_.dim; }
    const FlowConfig& config() const { return cfg_; }
    const std::vector<AffineCouplingBlock>& blocks() const { return blocks_; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    FlowConfig cfg_;
    std::vector<AffineCouplingBlock> blocks_;
};

FlowModel make_flow(const FlowConfig& cfg);

}  // namespace dxann

#endif
