#include "divad/density.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "divad/error.hpp"

namespace divad::density {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

Vector logsumexp_rows(const Matrix& a) {
    Vector out(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.row(r).maxCoeff();
        out(r) = std::isinf(m) ? m : m + std::log((a.row(r).array() - m).exp().sum());
    }
    return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

// MultivariateGaussian

MultivariateGaussian::MultivariateGaussian(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
        throw DimensionError("covariance shape does not match mean length");
    }
    factorize(true);
}

void MultivariateGaussian::factorize(bool warn_on_ridge) {
    const auto d = mean_.size();
    auto try_llt = [&](const Matrix& cov) -> bool {
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) return false;
        Matrix l = llt.matrixL();
        const double scale = std::max(cov.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        if (l.diagonal().array().square().minCoeff() < 1e-14 * scale) return false;
        cholesky_l_ = std::move(l);
        return true;
    };
    if (!try_llt(covariance_)) {
        if (warn_on_ridge) warn("singular covariance; adding ridge 1e-6 * I");
        covariance_ += kRidge * Matrix::Identity(d, d);
        if (!try_llt(covariance_)) throw Error("covariance not positive definite even after ridge regularization");
    }
    log_norm_ = -0.5 * (static_cast<double>(d) * kLogTwoPi) - cholesky_l_.diagonal().array().log().sum();
}

MultivariateGaussian MultivariateGaussian::fit(const Matrix& samples) {
    return fit(samples, Vector::Ones(samples.rows()));
}

MultivariateGaussian MultivariateGaussian::fit(const Matrix& samples, const Vector& weights, bool warn_on_ridge) {
    if (samples.rows() == 0) throw EmptyInputError("cannot fit a Gaussian to zero samples");
    if (weights.size() != samples.rows()) throw DimensionError("one weight per sample required");
    const double total = weights.sum();
    if (!(total > 0)) throw ArgumentError("sample weights must have a positive sum");
    MultivariateGaussian g;
    g.mean_ = (samples.transpose() * weights) / total;
    const Matrix centered = samples.rowwise() - g.mean_.transpose();
    g.covariance_ = (centered.transpose() * weights.asDiagonal() * centered) / total;
    g.covariance_ = 0.5 * (g.covariance_ + g.covariance_.transpose());
    g.factorize(warn_on_ridge);
    return g;
}

Vector MultivariateGaussian::log_prob_rows(const Matrix& x) const {
    if (x.cols() != mean_.size()) {
        throw DimensionError("density expects dimension " + std::to_string(mean_.size()) + ", got " +
                             std::to_string(x.cols()));
    }
    const Matrix diff = (x.rowwise() - mean_.transpose()).transpose();
    const Matrix y = cholesky_l_.triangularView<Eigen::Lower>().solve(diff);
    return (log_norm_ - 0.5 * y.colwise().squaredNorm().array()).transpose();
}

double MultivariateGaussian::log_prob(const Vector& x) const { return log_prob_rows(x.transpose())(0); }

double MultivariateGaussian::mahalanobis_squared(const Vector& x) const {
    if (x.size() != mean_.size()) throw DimensionError("mahalanobis: dimension mismatch");
    const Vector y = cholesky_l_.triangularView<Eigen::Lower>().solve(x - mean_);
    return y.squaredNorm();
}

// GaussianMixture

GaussianMixture::GaussianMixture(Vector weights, std::vector<MultivariateGaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    if (weights_.size() != static_cast<Eigen::Index>(components_.size())) {
        throw DimensionError("one weight per mixture component required");
    }
    if (components_.empty()) throw ArgumentError("mixture needs at least one component");
    if ((weights_.array() <= 0).any()) throw ArgumentError("mixture weights must be positive");
    weights_ /= weights_.sum();
}

Matrix GaussianMixture::component_log_probs(const Matrix& x) const {
    Matrix out(x.rows(), static_cast<Eigen::Index>(components_.size()));
    for (std::size_t k = 0; k < components_.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) =
            components_[k].log_prob_rows(x).array() + std::log(weights_(static_cast<Eigen::Index>(k)));
    }
    return out;
}

Vector GaussianMixture::log_prob_rows(const Matrix& x) const { return logsumexp_rows(component_log_probs(x)); }

double GaussianMixture::log_prob(const Vector& x) const { return log_prob_rows(x.transpose())(0); }

GaussianMixture GaussianMixture::fit(const Matrix& samples, int n_components, EmOptions options) {
    const Eigen::Index n = samples.rows();
    const auto k = static_cast<Eigen::Index>(n_components);
    if (n_components < 1) throw ArgumentError("mixture needs at least one component");
    if (n < k) throw EmptyInputError("fewer samples than mixture components");

    // Max-min initialization: start at the sample closest to the mean, then
    // repeatedly add the sample farthest from every chosen center.
    Matrix centers(k, samples.cols());
    {
        const Vector mean = samples.colwise().mean().transpose();
        Eigen::Index first = 0;
        (samples.rowwise() - mean.transpose()).rowwise().squaredNorm().minCoeff(&first);
        centers.row(0) = samples.row(first);
        Vector min_dist = (samples.rowwise() - centers.row(0)).rowwise().squaredNorm();
        for (Eigen::Index c = 1; c < k; ++c) {
            Eigen::Index next = 0;
            min_dist.maxCoeff(&next);
            centers.row(c) = samples.row(next);
            min_dist = min_dist.cwiseMin((samples.rowwise() - centers.row(c)).rowwise().squaredNorm());
        }
    }
    std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < 10; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            (centers.rowwise() - samples.row(i)).rowwise().squaredNorm().minCoeff(&best);
            assignment[static_cast<std::size_t>(i)] = best;
        }
        Matrix sums = Matrix::Zero(k, samples.cols());
        Vector counts = Vector::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assignment[static_cast<std::size_t>(i)]) += samples.row(i);
            counts(assignment[static_cast<std::size_t>(i)]) += 1.0;
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
        }
    }

    Matrix resp = Matrix::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) resp(i, assignment[static_cast<std::size_t>(i)]) = 1.0;

    GaussianMixture current;
    GaussianMixture best;
    double best_ll = -std::numeric_limits<double>::infinity();
    double previous_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        // M step
        std::vector<MultivariateGaussian> comps;
        Vector weights(k);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double nk = resp.col(c).sum();
            if (nk < 1e-10 * static_cast<double>(n)) {
                // Empty component: keep the previous one (or a broad fallback on the first pass).
                if (!current.components_.empty()) {
                    comps.push_back(current.components_[static_cast<std::size_t>(c)]);
                } else {
                    comps.push_back(MultivariateGaussian::fit(samples, Vector::Ones(n), false));
                }
                weights(c) = 1e-10;
                continue;
            }
            comps.push_back(MultivariateGaussian::fit(samples, resp.col(c), false));
            weights(c) = nk / static_cast<double>(n);
        }
        current = GaussianMixture(weights, std::move(comps));

        // E step
        const Matrix lp = current.component_log_probs(samples);
        const Vector norm = logsumexp_rows(lp);
        resp = (lp.colwise() - norm).array().exp();
        const double ll = norm.mean();
        current.iterations_ = iter;
        if (ll > best_ll) {
            best_ll = ll;
            best = current;
        }
        if (std::abs(ll - previous_ll) < options.tolerance) {
            best.converged_ = true;
            best.iterations_ = iter;
            return best;
        }
        previous_ll = ll;
    }
    warn("EM did not converge after " + std::to_string(options.max_iterations) + " iterations; using best iterate");
    return best;
}

// DensityEstimate

double DensityEstimate::log_prob(const Vector& x) const { return log_prob_rows(x.transpose())(0); }

Vector DensityEstimate::log_prob_rows(const Matrix& x) const {
    if (const auto* g = gaussian()) return g->log_prob_rows(x);
    if (const auto* m = mixture()) return m->log_prob_rows(x);
    throw StateError("aggregated-posterior estimate used before fitting");
}

std::string DensityEstimate::kind() const {
    if (gaussian() != nullptr) return "gaussian";
    if (mixture() != nullptr) return "gaussian_mixture";
    return "unfitted";
}

std::string DensityEstimate::to_json() const {
    nlohmann::json j;
    j["kind"] = kind();
    auto component = [](const MultivariateGaussian& g) {
        return nlohmann::json{{"mean", vector_to_json(g.mean())}, {"covariance", matrix_to_json(g.covariance())}};
    };
    if (const auto* g = gaussian()) {
        j["components"] = nlohmann::json::array({component(*g)});
        j["weights"] = {1.0};
    } else if (const auto* m = mixture()) {
        j["components"] = nlohmann::json::array();
        for (const auto& c : m->components()) j["components"].push_back(component(c));
        j["weights"] = vector_to_json(m->weights());
    }
    return j.dump(2);
}

DensityEstimate DensityEstimate::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("density file: ") + e.what());
    }
    const auto kind = j.at("kind").get<std::string>();
    std::vector<MultivariateGaussian> comps;
    for (const auto& c : j.at("components")) {
        comps.emplace_back(vector_from_json(c.at("mean")), matrix_from_json(c.at("covariance")));
    }
    if (kind == "gaussian") return DensityEstimate(comps.at(0));
    if (kind == "gaussian_mixture") return DensityEstimate(GaussianMixture(vector_from_json(j.at("weights")), comps));
    return {};
}

}  // namespace divad::density
