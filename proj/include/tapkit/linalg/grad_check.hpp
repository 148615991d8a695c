#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tapkit/linalg/matrix.hpp"

namespace tapkit {

/// A scalar function of a parameter set. When `grads` is non-null it must be
/// filled with one gradient matrix per parameter, in parameter order.
using DiffFn = std::function<double(std::vector<Matrix>* grads)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_entry = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t entries_checked = 0;

    double loss = 0.0;       // unperturbed loss
    double resolution = 0.0; // spacing of representable difference quotients near `loss`
    double max_excess = 0.0; // worst |analytic - numeric| beyond rtol * max(|a|, |n|), in units of `resolution`
};

/// Compares analytic gradients against central differences for every entry
/// of every parameter. Relative error uses max(|analytic|, |numeric|, 1e-8)
/// as the denominator. Parameters are perturbed in place and restored.
///
/// Central differences cannot resolve changes smaller than one ulp of the
/// loss, so gradients far below ulp(loss) / (2 eps) show large relative error
/// even when exact. `max_excess` measures misses in those units; for a correct
/// gradient it stays at the rounding noise of the loss evaluation, which grows
/// with the number of operations (tens of units for a full model loss).
inline GradCheckReport grad_check(const DiffFn& loss_fn, std::span<Matrix* const> params, double eps,
                                  double rtol = 1e-5) {
    if (!(eps > 0.0)) throw Error(ErrorKind::input, "grad_check eps must be positive");

    std::vector<Matrix> analytic;
    const double base = loss_fn(&analytic);
    if (!std::isfinite(base)) throw Error(ErrorKind::numeric, "non-finite loss at unperturbed parameters");
    if (analytic.size() != params.size()) {
        throw Error(ErrorKind::dimension, "loss function returned " + std::to_string(analytic.size()) +
                                              " gradients for " + std::to_string(params.size()) + " parameters");
    }

    GradCheckReport report;
    report.loss = base;
    report.resolution = (std::nextafter(std::abs(base), INFINITY) - std::abs(base)) / (2.0 * eps);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& theta = *params[p];
        if (!analytic[p].same_shape(theta)) {
            throw Error(ErrorKind::dimension, "gradient " + std::to_string(p) + " has shape " +
                                                  analytic[p].shape_string() + ", parameter has " +
                                                  theta.shape_string());
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double saved = theta[i];
            theta[i] = saved + eps;
            const double plus = loss_fn(nullptr);
            theta[i] = saved - eps;
            const double minus = loss_fn(nullptr);
            theta[i] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw Error(ErrorKind::numeric, "non-finite loss perturbing parameter " + std::to_string(p) +
                                                    " entry " + std::to_string(i));
            }
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic[p][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            const double miss = std::abs(a - numeric) - rtol * std::max(std::abs(a), std::abs(numeric));
            report.max_excess = std::max(report.max_excess, miss / report.resolution);
            ++report.entries_checked;
            if (rel > report.max_rel_error || report.entries_checked == 1) {
                report.max_rel_error = rel;
                report.worst_param = p;
                report.worst_entry = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace tapkit
