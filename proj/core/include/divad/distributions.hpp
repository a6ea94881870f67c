#pragma once

#include <vector>

#include "divad/autodiff.hpp"
#include "divad/layers.hpp"

namespace divad::nn {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Diagonal Gaussian with strictly positive standard deviations.
struct GaussianParams {
    Vector mean;
    Vector std;

    void validate() const;
};

/// Sum over dimensions of the diagonal-Gaussian log density at `x`.
double gaussian_log_prob(const GaussianParams& g, const Vector& x);

/// mean + std * noise.
Vector reparameterize(const GaussianParams& g, const Vector& noise);

/// -log softmax(logits)[d]; throws IndexError when d is out of range.
double categorical_cross_entropy(const Vector& logits, int d);

/// Closed-form KL(q || p) between diagonal Gaussians.
double kl_diagonal(const GaussianParams& q, const GaussianParams& p);
/// Closed-form KL(q || N(0, I)).
double kl_standard_normal(const GaussianParams& q);

// Batched versions recorded on a tape; each returns one value per row (R x 1).

Var gaussian_log_prob_rows(const Var& x, const GaussianVars& g);
Var standard_normal_log_prob_rows(const Var& x);
Var kl_diagonal_rows(const GaussianVars& q, const GaussianVars& p);
Var kl_standard_normal_rows(const GaussianVars& q);
Var categorical_cross_entropy_rows(const Var& logits, const std::vector<int>& labels);

}  // namespace divad::nn
