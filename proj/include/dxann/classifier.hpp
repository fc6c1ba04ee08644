#ifndef DXANN_CLASSIFIER_HPP
#define DXANN_CLASSIFIER_HPP

#include <optional>
#include <utility>
#include <vector>

#include "dxann/flow.hpp"
#include "dxann/tensor.hpp"

namespace dxann {

// The two class-conditional latent Gaussians N(mu0, I) and N(mu1, I).
struct LatentHeads {
    Tensor mu0;
    Tensor mu1;
    double separation = 1.0;
    bool learnable = false;

    // mu0 = -c*1, mu1 = +c*1
    static LatentHeads symmetric(std::size_t d, double c);
};

struct Prediction {
    int label;      // argmax likelihood, ties -> 0
    double logp0;
    double logp1;
};

// Per-feature explanation scores for one sample.
struct ECSMap {
    Tensor raw;         // |z_m - mu_label,m|, >= 0
    Tensor normalized;  // min-max scaled into [0,1]; all zeros when raw is constant
    std::optional<std::pair<std::size_t, std::size_t>> spatial;
    int label;          // predicted class the scores are measured against
};

double gaussian_logpdf(const Tensor& z, const Tensor& mu);
Expr gaussian_logpdf_expr(const Expr& z, const Tensor& mu);

// Unsupervised flow loss: -log q(z) - total_log_det.
double realnvp_loss(const Tensor& z, double total_log_det, const Tensor& mu);

// Supervised loss, mean over the batch: each sample contributes
// -y*log q1(z) - (1-y)*log q0(z) - total_log_det.
double dxann_loss(const std::vector<Tensor>& zs, const std::vector<int>& labels,
                  const std::vector<double>& log_dets, const LatentHeads& heads);
Expr dxann_loss_expr(const std::vector<std::pair<Expr, Expr>>& z_and_log_det,
                     const std::vector<int>& labels, const LatentHeads& heads);

Prediction predict(const Tensor& x, const FlowModel& model, const LatentHeads& heads);

Tensor ecs_raw(const Tensor& x, const FlowModel& model, const LatentHeads& heads);
Tensor ecs_normalize(const Tensor& raw);
ECSMap explain(const Tensor& x, const FlowModel& model, const LatentHeads& heads);

}  // namespace dxann

#endif
