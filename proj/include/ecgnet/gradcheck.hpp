#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ecgnet/common.hpp"

namespace ecgnet {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
};

/// Compare an analytic gradient against central differences
/// (f(p+eps) - f(p-eps)) / 2eps componentwise. Relative error uses the
/// denominator max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult grad_check(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<double>& analytic_grad,
                                  std::vector<double> point, double eps) {
    if (!(eps > 0.0)) throw UsageError("grad_check: eps must be > 0");
    if (analytic_grad.size() != point.size())
        throw UsageError("grad_check: gradient/point size mismatch");
    if (!all_finite(point) || !all_finite(analytic_grad))
        throw NumericError("grad_check: non-finite input");
    GradCheckResult res;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + eps;
        const double fp = f(point);
        point[i] = saved - eps;
        const double fm = f(point);
        point[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite function value");
        const double num = (fp - fm) / (2.0 * eps);
        const double ana = analytic_grad[i];
        const double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
        const double rel = std::abs(ana - num) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
        }
    }
    return res;
}

} // namespace ecgnet
