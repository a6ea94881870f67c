#pragma once

#include <vector>

#include "divad/autodiff.hpp"

namespace divad::nn {

struct AdamWConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double weight_decay = 0.01;
};

/// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    /// Applies one update from each parameter's accumulated gradient.
    void step(const std::vector<Parameter*>& params);
    [[nodiscard]] long steps() const { return t_; }
    [[nodiscard]] const AdamWConfig& config() const { return config_; }

private:
    AdamWConfig config_;
    long t_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

}  // namespace divad::nn
