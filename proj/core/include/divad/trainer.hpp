#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "divad/autodiff.hpp"
#include "divad/layers.hpp"
#include "divad/optimizer.hpp"

namespace divad::train {

using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;

/// Scalar batch loss plus named numeric components for the history.
struct LossOutput {
    Var total;
    std::vector<std::pair<std::string, double>> components;
};

/// A model trainable by mini-batch gradient descent. `labels` carries one
/// integer per row (domain indices for DIVAD, ignored by the autoencoders).
class Trainable {
public:
    virtual ~Trainable() = default;
    virtual std::vector<Parameter*> parameters() = 0;
    virtual LossOutput loss(Tape& tape, const Matrix& x, const std::vector<int>& labels, nn::Rng& noise) = 0;
};

struct FitOptions {
    int epochs = 300;
    int patience = 100;
    Eigen::Index batch_size = 128;
    nn::AdamWConfig optimizer;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::vector<std::pair<std::string, double>> val_components;
};

struct History {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 0 when no epoch completed
    double best_val_loss = std::numeric_limits<double>::infinity();
    double learning_rate = 0.0;
    bool diverged = false;
    std::string message;

    void write_csv(const std::filesystem::path& path) const;
};

/// Mini-batch AdamW with per-epoch validation under fixed noise, early
/// stopping after `patience` epochs without improvement, and restoration of
/// the best parameters on return. A non-finite loss stops training with the
/// best parameters restored and `diverged` set.
History fit(Trainable& model, const Matrix& train_x, const std::vector<int>& train_labels, const Matrix& val_x,
            const std::vector<int>& val_labels, const FitOptions& options);

/// Mean loss over `x` in chunks, with noise drawn from `seed`.
double validation_loss(Trainable& model, const Matrix& x, const std::vector<int>& labels, std::uint64_t seed,
                       std::vector<std::pair<std::string, double>>* components = nullptr);

template <typename Model>
struct Selection {
    std::unique_ptr<Model> model;
    History history;
    std::vector<History> candidates;  // one per learning rate, grid order
};

/// Trains one fresh model per learning rate and keeps the one with the
/// lowest best validation loss (earlier grid entries win ties).
template <typename Model>
Selection<Model> select_learning_rate(const std::function<std::unique_ptr<Model>()>& factory,
                                      const std::vector<double>& learning_rates, const Matrix& train_x,
                                      const std::vector<int>& train_labels, const Matrix& val_x,
                                      const std::vector<int>& val_labels, FitOptions options) {
    Selection<Model> best;
    for (double lr : learning_rates) {
        auto model = factory();
        options.optimizer.learning_rate = lr;
        History h = fit(*model, train_x, train_labels, val_x, val_labels, options);
        best.candidates.push_back(h);
        if (!best.model || h.best_val_loss < best.history.best_val_loss) {
            best.model = std::move(model);
            best.history = std::move(h);
        }
    }
    return best;
}

}  // namespace divad::train
