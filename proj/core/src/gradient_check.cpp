#include "divad/gradient_check.hpp"

#include <cmath>

#include "divad/error.hpp"

namespace divad::nn {
namespace {

double evaluate(const LossBuilder& loss) {
    Tape tape;
    const double v = loss(tape).value()(0, 0);
    if (!std::isfinite(v)) throw DivergenceError("gradient check: loss is not finite");
    return v;
}

}  // namespace

GradientCheckReport gradient_check(const LossBuilder& loss, const std::vector<Parameter*>& params, double step,
                                   double floor) {
    for (auto* p : params) p->zero_grad();
    {
        Tape tape;
        Var root = loss(tape);
        if (!std::isfinite(root.value()(0, 0))) throw DivergenceError("gradient check: loss is not finite");
        tape.backward(root);
    }

    GradientCheckReport report;
    for (auto* p : params) {
        for (Eigen::Index k = 0; k < p->value.size(); ++k) {
            const double saved = p->value(k);
            p->value(k) = saved + step;
            const double up = evaluate(loss);
            p->value(k) = saved - step;
            const double down = evaluate(loss);
            p->value(k) = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double analytic = p->grad(k);
            const double abs_err = std::abs(analytic - numeric);
            const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
            report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
            if (rel_err > report.max_relative_error) {
                report.max_relative_error = rel_err;
                report.worst_parameter = p->name;
                report.worst_index = k;
            }
            ++report.n_parameters;
        }
    }
    return report;
}

}  // namespace divad::nn
