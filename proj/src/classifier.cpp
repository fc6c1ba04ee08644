#include "dxann/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace dxann {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
}

LatentHeads LatentHeads::symmetric(std::size_t d, double c) {
    if (c <= 0.0)
        throw std::invalid_argument("LatentHeads: separation must be positive");
    LatentHeads h;
    h.mu0 = Tensor({d}, -c);
    h.mu1 = Tensor({d}, c);
    h.separation = c;
    return h;
}

double gaussian_logpdf(const Tensor& z, const Tensor& mu) {
    require_same_shape(z, mu, "gaussian_logpdf");
    double q = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double d = z[i] - mu[i];
        q += d * d;
    }
    return -0.5 * double(z.size()) * kLog2Pi - 0.5 * q;
}

Expr gaussian_logpdf_expr(const Expr& z, const Tensor& mu) {
    require_same_shape(z->value, mu, "gaussian_logpdf");
    Expr diff = sub(z, constant(mu));
    Expr q = reduce_sum(square(diff));
    double c = -0.5 * double(mu.size()) * kLog2Pi;
    return add(constant(Tensor::scalar(c)),
               mul(q, constant(Tensor::scalar(-0.5))));
}

double realnvp_loss(const Tensor& z, double total_log_det, const Tensor& mu) {
    return -gaussian_logpdf(z, mu) - total_log_det;
}

double dxann_loss(const std::vector<Tensor>& zs, const std::vector<int>& labels,
                  const std::vector<double>& log_dets, const LatentHeads& heads) {
    if (zs.empty())
        throw std::invalid_argument("dxann_loss: empty batch");
    if (labels.size() != zs.size() || log_dets.size() != zs.size())
        throw std::invalid_argument("dxann_loss: batch length mismatch");
    double total = 0.0;
    for (std::size_t n = 0; n < zs.size(); ++n) {
        int y = labels[n];
        if (y != 0 && y != 1)
            throw std::invalid_argument("dxann_loss: label must be 0 or 1, got " +
                                        std::to_string(y));
        const Tensor& mu = (y == 1) ? heads.mu1 : heads.mu0;
        total += -gaussian_logpdf(zs[n], mu) - log_dets[n];
    }
    return total / double(zs.size());
}

Expr dxann_loss_expr(const std::vector<std::pair<Expr, Expr>>& z_and_log_det,
                     const std::vector<int>& labels, const LatentHeads& heads) {
    if (z_and_log_det.empty())
        throw std::invalid_argument("dxann_loss: empty batch");
    if (labels.size() != z_and_log_det.size())
        throw std::invalid_argument("dxann_loss: batch length mismatch");
    Expr total = constant(Tensor::scalar(0.0));
    for (std::size_t n = 0; n < z_and_log_det.size(); ++n) {
        int y = labels[n];
        if (y != 0 && y != 1)
            throw std::invalid_argument("dxann_loss: label must be 0 or 1, got " +
                                        std::to_string(y));
        const Tensor& mu = (y == 1) ? heads.mu1 : heads.mu0;
        Expr sample = sub(neg(gaussian_logpdf_expr(z_and_log_det[n].first, mu)),
                          z_and_log_det[n].second);
        total = add(total, sample);
    }
    return mul(total, constant(Tensor::scalar(1.0 / double(labels.size()))));
}

Prediction predict(const Tensor& x, const FlowModel& model, const LatentHeads& heads) {
    auto [z, log_det] = model.forward(x);
    (void)log_det;  // likelihood ratio of the two heads shares the log-det term
    Prediction p;
    p.logp0 = gaussian_logpdf(z, heads.mu0);
    p.logp1 = gaussian_logpdf(z, heads.mu1);
    p.label = (p.logp1 > p.logp0) ? 1 : 0;
    return p;
}

Tensor ecs_raw(const Tensor& x, const FlowModel& model, const LatentHeads& heads) {
    return explain(x, model, heads).raw;
}

Tensor ecs_normalize(const Tensor& raw) {
    double lo = raw[0], hi = raw[0];
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0.0)
            throw std::invalid_argument("ecs_normalize: negative score at index " +
                                        std::to_string(i));
        lo = std::min(lo, raw[i]);
        hi = std::max(hi, raw[i]);
    }
    Tensor out(raw.shape());
    if (hi > lo)
        for (std::size_t i = 0; i < raw.size(); ++i)
            out[i] = (raw[i] - lo) / (hi - lo);
    return out;
}

ECSMap explain(const Tensor& x, const FlowModel& model, const LatentHeads& heads) {
    ECSMap m;
    auto [z, log_det] = model.forward(x);
    (void)log_det;
    Prediction p;
    p.logp0 = gaussian_logpdf(z, heads.mu0);
    p.logp1 = gaussian_logpdf(z, heads.mu1);
    p.label = (p.logp1 > p.logp0) ? 1 : 0;
    const Tensor& mu = (p.label == 1) ? heads.mu1 : heads.mu0;
    m.raw = Tensor(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) m.raw[i] = std::abs(z[i] - mu[i]);
    m.normalized = ecs_normalize(m.raw);
    m.spatial = model.config().spatial;
    m.label = p.label;
    return m;
}

}  // namespace dxann
