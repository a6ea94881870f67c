#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "divad/autodiff.hpp"

namespace divad::nn {

/// Shift added to softplus outputs so every predicted standard deviation is
/// at least this large.
inline constexpr double kStdEpsilon = 1e-4;

using Rng = std::mt19937_64;

enum class Activation { Relu, Tanh, Identity };

Var activate(const Var& x, Activation activation);

/// Mean and standard deviation of a diagonal Gaussian, as tape nodes.
struct GaussianVars {
    Var mean;
    Var std;
};

/// y = x W + b, with W of shape (in x out). Weights use a symmetric uniform
/// fan-in initialization, biases start at zero.
class Linear {
public:
    Linear() = default;
    Linear(Eigen::Index in, Eigen::Index out, const std::string& name, Rng& rng);

    [[nodiscard]] Var forward(Tape& tape, const Var& x);
    void collect(std::vector<Parameter*>& out);

    [[nodiscard]] Eigen::Index in_dim() const { return weight_.value.rows(); }
    [[nodiscard]] Eigen::Index out_dim() const { return weight_.value.cols(); }
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;
    Parameter bias_;
};

/// Two linear maps producing mean and softplus(.) + kStdEpsilon.
class GaussianHead {
public:
    GaussianHead() = default;
    GaussianHead(Eigen::Index in, Eigen::Index out, const std::string& name, Rng& rng);

    [[nodiscard]] GaussianVars forward(Tape& tape, const Var& x);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] Eigen::Index out_dim() const { return mean_.out_dim(); }

    Linear& mean_layer() { return mean_; }
    Linear& std_layer() { return std_; }

private:
    Linear mean_;
    Linear std_;
};

enum class HeadKind { Gaussian, Categorical, Linear };

struct DenseStackSpec {
    Eigen::Index input_dim = 1;
    std::vector<Eigen::Index> hidden_dims{200};
    Eigen::Index output_dim = 1;
    HeadKind head = HeadKind::Gaussian;
    Activation activation = Activation::Relu;
    /// Activation applied to a Linear head's output (the Dense AE encoding uses ReLU).
    Activation output_activation = Activation::Identity;

    void validate() const;
};

/// Fully connected stack ending in a Gaussian, categorical (logits) or linear head.
class DenseStack {
public:
    DenseStack() = default;
    DenseStack(DenseStackSpec spec, const std::string& name, Rng& rng);

    [[nodiscard]] GaussianVars forward_gaussian(Tape& tape, const Var& x);
    /// Logits for a categorical head or the plain output of a linear head.
    [[nodiscard]] Var forward(Tape& tape, const Var& x);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] const DenseStackSpec& spec() const { return spec_; }

private:
    Var trunk(Tape& tape, const Var& x);

    DenseStackSpec spec_;
    std::vector<Linear> hidden_;
    GaussianHead gaussian_;
    Linear linear_;
};

/// Gated recurrent unit with tanh candidate activation.
class Gru {
public:
    Gru() = default;
    Gru(Eigen::Index in, Eigen::Index units, const std::string& name, Rng& rng);

    /// One output per step (B x units).
    [[nodiscard]] std::vector<Var> forward(Tape& tape, const std::vector<Var>& steps);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] Eigen::Index units() const { return units_; }

private:
    Eigen::Index units_ = 0;
    Linear input_gates_;      // x -> [z | r | h]
    Parameter recurrent_zr_;  // h -> [z | r]
    Parameter recurrent_h_;   // (r * h) -> h
};

/// Valid 1-D convolution over time steps.
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(Eigen::Index in_channels, Eigen::Index filters, Eigen::Index kernel, Eigen::Index stride,
           const std::string& name, Rng& rng);

    [[nodiscard]] std::vector<Var> forward(Tape& tape, const std::vector<Var>& steps, Activation activation);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] Eigen::Index output_length(Eigen::Index input_length) const;

private:
    Eigen::Index kernel_ = 1;
    Eigen::Index stride_ = 1;
    Linear taps_;  // (kernel * in) -> filters
};

/// Transposed 1-D convolution; output steps past the natural length
/// (output padding) receive only the bias.
class ConvTranspose1d {
public:
    ConvTranspose1d() = default;
    ConvTranspose1d(Eigen::Index in_channels, Eigen::Index filters, Eigen::Index kernel, Eigen::Index stride,
                    const std::string& name, Rng& rng);

    [[nodiscard]] std::vector<Var> forward(Tape& tape, const std::vector<Var>& steps, Eigen::Index output_length,
                                           Activation activation);
    void collect(std::vector<Parameter*>& out);

private:
    Eigen::Index kernel_ = 1;
    Eigen::Index stride_ = 1;
    Eigen::Index filters_ = 1;
    Parameter weight_;  // in -> (kernel * filters)
    Parameter bias_;
};

struct RecurrentEncoderSpec {
    Eigen::Index window_length = 20;
    Eigen::Index n_features = 1;
    Eigen::Index conv_filters = 64;
    Eigen::Index conv_kernel = 5;
    Eigen::Index conv_stride = 1;
    Eigen::Index gru_units = 64;
    Eigen::Index output_dim = 32;

    [[nodiscard]] Eigen::Index latent_length() const;
    void validate() const;
};

/// Conv1D -> GRU (last step) -> Gaussian head. Input is a flattened window batch (B x L*M).
class RecurrentEncoder {
public:
    RecurrentEncoder() = default;
    RecurrentEncoder(RecurrentEncoderSpec spec, const std::string& name, Rng& rng);

    [[nodiscard]] GaussianVars forward_gaussian(Tape& tape, const Var& x);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] const RecurrentEncoderSpec& spec() const { return spec_; }

private:
    RecurrentEncoderSpec spec_;
    Conv1d conv_;
    Gru gru_;
    GaussianHead head_;
};

struct RecurrentDecoderSpec {
    Eigen::Index input_dim = 32;  // encoding size fed to the decoder
    Eigen::Index window_length = 20;
    Eigen::Index n_features = 1;
    Eigen::Index conv_filters = 64;
    Eigen::Index conv_kernel = 5;
    Eigen::Index conv_stride = 1;
    Eigen::Index gru_units = 64;

    [[nodiscard]] Eigen::Index latent_length() const;
    void validate() const;
};

/// Repeat L' times -> GRU (all steps) -> transposed Conv1D -> per-step Gaussian
/// head over M features. Output is flattened (B x L*M).
class RecurrentDecoder {
public:
    RecurrentDecoder() = default;
    RecurrentDecoder(RecurrentDecoderSpec spec, const std::string& name, Rng& rng);

    [[nodiscard]] GaussianVars forward_gaussian(Tape& tape, const Var& z);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] const RecurrentDecoderSpec& spec() const { return spec_; }

private:
    RecurrentDecoderSpec spec_;
    Gru gru_;
    ConvTranspose1d deconv_;
    GaussianHead head_;
};

/// Any network producing a diagonal Gaussian from a flattened input.
class GaussianNetwork {
public:
    GaussianNetwork() = default;
    GaussianNetwork(DenseStack net) : net_(std::move(net)) {}
    GaussianNetwork(RecurrentEncoder net) : net_(std::move(net)) {}
    GaussianNetwork(RecurrentDecoder net) : net_(std::move(net)) {}

    [[nodiscard]] GaussianVars forward(Tape& tape, const Var& x);
    void collect(std::vector<Parameter*>& out);
    [[nodiscard]] Eigen::Index input_dim() const;
    [[nodiscard]] Eigen::Index output_dim() const;

private:
    std::variant<DenseStack, RecurrentEncoder, RecurrentDecoder> net_;
};

/// Splits a flattened (B x L*M) batch into L step matrices of B x M.
std::vector<Var> split_steps(const Var& flat, Eigen::Index window_length, Eigen::Index n_features);

/// sample = mean + std * noise, recorded on the tape so gradients reach both.
Var reparameterize(const GaussianVars& g, const Var& noise);

}  // namespace divad::nn
