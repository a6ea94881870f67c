#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace divad::density {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRidge = 1e-6;

/// Full-covariance multivariate Gaussian.
class MultivariateGaussian {
public:
    MultivariateGaussian() = default;
    MultivariateGaussian(Vector mean, Matrix covariance);

    /// Maximum-likelihood fit to the rows of `samples`, optionally weighted.
    /// A singular covariance gets `kRidge * I` added and a warning.
    static MultivariateGaussian fit(const Matrix& samples);
    static MultivariateGaussian fit(const Matrix& samples, const Vector& weights, bool warn_on_ridge = true);

    [[nodiscard]] double log_prob(const Vector& x) const;
    [[nodiscard]] Vector log_prob_rows(const Matrix& x) const;
    [[nodiscard]] double mahalanobis_squared(const Vector& x) const;

    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] const Matrix& covariance() const { return covariance_; }
    [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }

private:
    void factorize(bool warn_on_ridge);

    Vector mean_;
    Matrix covariance_;
    Matrix cholesky_l_;
    double log_norm_ = 0.0;  // -0.5 (D log 2pi + log det)
};

struct EmOptions {
    int max_iterations = 200;
    double tolerance = 1e-6;  // change in mean log-likelihood
};

/// K-component full-covariance Gaussian mixture fitted by expectation-maximization.
/// Initialization is deterministic (max-min spread of centers followed by a
/// few Lloyd iterations) so duplicating the data leaves the fit unchanged.
class GaussianMixture {
public:
    GaussianMixture() = default;
    GaussianMixture(Vector weights, std::vector<MultivariateGaussian> components);

    static GaussianMixture fit(const Matrix& samples, int n_components, EmOptions options = {});

    [[nodiscard]] double log_prob(const Vector& x) const;
    [[nodiscard]] Vector log_prob_rows(const Matrix& x) const;

    [[nodiscard]] const Vector& weights() const { return weights_; }
    [[nodiscard]] const std::vector<MultivariateGaussian>& components() const { return components_; }
    [[nodiscard]] int iterations() const { return iterations_; }
    [[nodiscard]] bool converged() const { return converged_; }

private:
    Matrix component_log_probs(const Matrix& x) const;

    Vector weights_;
    std::vector<MultivariateGaussian> components_;
    int iterations_ = 0;
    bool converged_ = false;
};

/// Either estimate, used as the fitted aggregated posterior.
class DensityEstimate {
public:
    DensityEstimate() = default;
    DensityEstimate(MultivariateGaussian g) : impl_(std::move(g)) {}
    DensityEstimate(GaussianMixture g) : impl_(std::move(g)) {}

    [[nodiscard]] bool fitted() const { return !std::holds_alternative<std::monostate>(impl_); }
    [[nodiscard]] double log_prob(const Vector& x) const;
    [[nodiscard]] Vector log_prob_rows(const Matrix& x) const;
    [[nodiscard]] std::string kind() const;

    /// JSON round trip (means, covariances, weights).
    [[nodiscard]] std::string to_json() const;
    static DensityEstimate from_json(const std::string& text);

    [[nodiscard]] const MultivariateGaussian* gaussian() const { return std::get_if<MultivariateGaussian>(&impl_); }
    [[nodiscard]] const GaussianMixture* mixture() const { return std::get_if<GaussianMixture>(&impl_); }

private:
    std::variant<std::monostate, MultivariateGaussian, GaussianMixture> impl_;
};

}  // namespace divad::density
