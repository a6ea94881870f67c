#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "divad/layers.hpp"
#include "divad/scoring.hpp"
#include "divad/trainer.hpp"

namespace divad::baselines {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Either a fixed component count or the smallest count whose cumulative
/// explained variance reaches a fraction in (0, 1].
using PcaComponents = std::variant<Eigen::Index, double>;

/// Reconstruction error after projection on the leading principal directions.
class PcaModel {
public:
    PcaModel() = default;
    static PcaModel fit(const Matrix& train, PcaComponents components);

    /// Mean squared reconstruction error per row.
    [[nodiscard]] Vector score(const Matrix& x) const;
    [[nodiscard]] const Matrix& components() const { return components_; }  // D x k, orthonormal columns
    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] Eigen::Index n_components() const { return components_.cols(); }

    [[nodiscard]] std::string to_json() const;
    static PcaModel from_json(const std::string& text);

private:
    Vector mean_;
    Matrix components_;
};

/// Squared Mahalanobis distance with a 1e-6 ridge on the covariance.
class MahalanobisModel {
public:
    static constexpr double kRidge = 1e-6;

    MahalanobisModel() = default;
    static MahalanobisModel fit(const Matrix& train);

    [[nodiscard]] Vector score(const Matrix& x) const;
    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] const Matrix& covariance() const { return covariance_; }
    [[nodiscard]] const Matrix& precision() const { return precision_; }

    [[nodiscard]] std::string to_json() const;
    static MahalanobisModel from_json(const std::string& text);

private:
    void factorize();

    Vector mean_;
    Matrix covariance_;  // ridge included
    Matrix precision_;
};

struct AutoencoderSpec {
    Eigen::Index input_dim = 1;
    std::vector<Eigen::Index> hidden_dims{200};
    Eigen::Index encoding_dim = 16;

    [[nodiscard]] std::string to_json() const;
    static AutoencoderSpec from_json(const std::string& text);
};

/// Dense autoencoder trained and scored by mean squared reconstruction error.
/// The encoding layer uses a ReLU activation.
class DenseAutoencoder : public train::Trainable {
public:
    DenseAutoencoder() = default;
    DenseAutoencoder(AutoencoderSpec spec, std::uint64_t seed);

    std::vector<nn::Parameter*> parameters() override;
    train::LossOutput loss(nn::Tape& tape, const Matrix& x, const std::vector<int>& labels, nn::Rng& noise) override;

    [[nodiscard]] Matrix reconstruct(const Matrix& x);
    [[nodiscard]] Vector score(const Matrix& x);
    [[nodiscard]] const AutoencoderSpec& spec() const { return spec_; }

    void save(const std::filesystem::path& path);
    static DenseAutoencoder load(const std::filesystem::path& path);

private:
    AutoencoderSpec spec_;
    nn::DenseStack encoder_;
    nn::DenseStack decoder_;
};

/// Dense VAE with a standard-normal prior. The score of a window is the
/// negative reconstruction log-likelihood averaged over `n_samples` encoder
/// samples; sampling noise is seeded from the window's bytes so scores are a
/// pure function of the window.
class DenseVae : public train::Trainable {
public:
    static constexpr int kDefaultSamples = 256;

    DenseVae() = default;
    DenseVae(AutoencoderSpec spec, std::uint64_t seed);

    std::vector<nn::Parameter*> parameters() override;
    train::LossOutput loss(nn::Tape& tape, const Matrix& x, const std::vector<int>& labels, nn::Rng& noise) override;

    [[nodiscard]] Vector score(const Matrix& x, int n_samples = kDefaultSamples, std::uint64_t seed = 0);
    /// Score with explicit per-sample noise: noise[s] is B x encoding_dim.
    [[nodiscard]] Vector score_with_noise(const Matrix& x, const std::vector<Matrix>& noise);
    /// Encoder posterior means and standard deviations.
    [[nodiscard]] std::pair<Matrix, Matrix> encode(const Matrix& x);
    [[nodiscard]] const AutoencoderSpec& spec() const { return spec_; }

    nn::DenseStack& encoder() { return encoder_; }
    nn::DenseStack& decoder() { return decoder_; }

    void save(const std::filesystem::path& path);
    static DenseVae load(const std::filesystem::path& path);

private:
    AutoencoderSpec spec_;
    nn::DenseStack encoder_;
    nn::DenseStack decoder_;
};

/// WindowScorer adapters. The model objects must outlive the scorer.
class PcaScorer : public scoring::WindowScorer {
public:
    PcaScorer(const PcaModel& model, Eigen::Index window_length) : model_(&model), window_length_(window_length) {}
    Vector score(const Matrix& windows) override { return model_->score(windows); }
    [[nodiscard]] std::string method() const override { return "pca"; }
    [[nodiscard]] Eigen::Index window_length() const override { return window_length_; }

private:
    const PcaModel* model_;
    Eigen::Index window_length_;
};

class MahalanobisScorer : public scoring::WindowScorer {
public:
    MahalanobisScorer(const MahalanobisModel& model, Eigen::Index window_length)
        : model_(&model), window_length_(window_length) {}
    Vector score(const Matrix& windows) override { return model_->score(windows); }
    [[nodiscard]] std::string method() const override { return "maha"; }
    [[nodiscard]] Eigen::Index window_length() const override { return window_length_; }

private:
    const MahalanobisModel* model_;
    Eigen::Index window_length_;
};

class AutoencoderScorer : public scoring::WindowScorer {
public:
    AutoencoderScorer(DenseAutoencoder& model, Eigen::Index window_length)
        : model_(&model), window_length_(window_length) {}
    Vector score(const Matrix& windows) override { return model_->score(windows); }
    [[nodiscard]] std::string method() const override { return "dense-ae"; }
    [[nodiscard]] Eigen::Index window_length() const override { return window_length_; }

private:
    DenseAutoencoder* model_;
    Eigen::Index window_length_;
};

class VaeScorer : public scoring::WindowScorer {
public:
    VaeScorer(DenseVae& model, Eigen::Index window_length, int n_samples = DenseVae::kDefaultSamples)
        : model_(&model), window_length_(window_length), n_samples_(n_samples) {}
    Vector score(const Matrix& windows) override { return model_->score(windows, n_samples_); }
    [[nodiscard]] std::string method() const override { return "dense-vae"; }
    [[nodiscard]] Eigen::Index window_length() const override { return window_length_; }

private:
    DenseVae* model_;
    Eigen::Index window_length_;
    int n_samples_;
};

}  // namespace divad::baselines
