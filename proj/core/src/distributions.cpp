#include "divad/distributions.hpp"

#include <cmath>

#include "divad/error.hpp"

namespace divad::nn {

void GaussianParams::validate() const {
    if (mean.size() != std.size()) throw DimensionError("Gaussian mean and std lengths differ");
    if ((std.array() <= 0.0).any()) throw ArgumentError("Gaussian std must be strictly positive");
}

double gaussian_log_prob(const GaussianParams& g, const Vector& x) {
    g.validate();
    if (x.size() != g.mean.size()) {
        throw DimensionError("gaussian_log_prob: expected dimension " + std::to_string(g.mean.size()) + ", got " +
                             std::to_string(x.size()));
    }
    const auto z = ((x - g.mean).array() / g.std.array());
    return (-0.5 * z.square() - g.std.array().log() - 0.5 * kLogTwoPi).sum();
}

Vector reparameterize(const GaussianParams& g, const Vector& noise) {
    if (noise.size() != g.mean.size()) throw DimensionError("reparameterize: noise length differs from mean length");
    return g.mean + g.std.cwiseProduct(noise);
}

double categorical_cross_entropy(const Vector& logits, int d) {
    if (d < 0 || d >= logits.size()) {
        throw IndexError("class index " + std::to_string(d) + " outside [0, " + std::to_string(logits.size()) + ")");
    }
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits(d);
}

double kl_diagonal(const GaussianParams& q, const GaussianParams& p) {
    q.validate();
    p.validate();
    if (q.mean.size() != p.mean.size()) throw DimensionError("kl_diagonal: dimensions differ");
    const auto vq = q.std.array().square();
    const auto vp = p.std.array().square();
    return (p.std.array().log() - q.std.array().log() + (vq + (q.mean - p.mean).array().square()) / (2.0 * vp) - 0.5)
        .sum();
}

double kl_standard_normal(const GaussianParams& q) {
    q.validate();
    const auto v = q.std.array().square();
    return 0.5 * (q.mean.array().square() + v - 1.0 - v.log()).sum();
}

Var gaussian_log_prob_rows(const Var& x, const GaussianVars& g) {
    Var z = div(sub(x, g.mean), g.std);
    Var per_dim = add_scalar(neg(add(scale(square(z), 0.5), log(g.std))), -0.5 * kLogTwoPi);
    return row_sum(per_dim);
}

Var standard_normal_log_prob_rows(const Var& x) {
    const double c = -0.5 * kLogTwoPi * static_cast<double>(x.cols());
    return add_scalar(scale(row_sum(square(x)), -0.5), c);
}

Var kl_diagonal_rows(const GaussianVars& q, const GaussianVars& p) {
    Var log_ratio = sub(log(p.std), log(q.std));
    Var quad = div(add(square(q.std), square(sub(q.mean, p.mean))), scale(square(p.std), 2.0));
    return row_sum(add_scalar(add(log_ratio, quad), -0.5));
}

Var kl_standard_normal_rows(const GaussianVars& q) {
    Var var = square(q.std);
    Var terms = sub(add(square(q.mean), var), log(var));
    return scale(add_scalar(row_sum(terms), -static_cast<double>(q.mean.cols())), 0.5);
}

Var categorical_cross_entropy_rows(const Var& logits, const std::vector<int>& labels) {
    return neg(pick(log_softmax_rows(logits), labels));
}

}  // namespace divad::nn
