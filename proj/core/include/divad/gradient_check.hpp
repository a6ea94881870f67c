#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divad/autodiff.hpp"

namespace divad::nn {

struct GradientCheckReport {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t n_parameters = 0;
    std::string worst_parameter;
    Eigen::Index worst_index = -1;

    [[nodiscard]] bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares the tape gradient of `loss` with central finite differences of
/// step `step` on every entry of `params`. Relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). Throws
/// DivergenceError on a non-finite loss.
GradientCheckReport gradient_check(const LossBuilder& loss, const std::vector<Parameter*>& params,
                                   double step = 1e-5, double floor = 1e-7);

}  // namespace divad::nn
