#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "pmr/matrix.hpp"
#include "pmr/params.hpp"

namespace pmr {

// Compares analytic gradients against central finite differences.
// `loss_fn(params, grads_out)` returns the scalar loss and, when
// grads_out is non-null, fills it with the analytic gradient for every
// parameter it touches. Returns the max relative error with denominator
// max(|analytic|, |fd|, 1e-8).
template <class F>
double grad_check(F&& loss_fn, ParamStore& params, double h = 1e-5) {
    std::map<std::string, Matrix> analytic;
    const double base = loss_fn(params, &analytic);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

    double max_rel = 0.0;
    for (auto& [name, w] : params.values) {
        const Matrix* ga = nullptr;
        if (auto it = analytic.find(name); it != analytic.end()) ga = &it->second;
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            const double saved = w.data[i];
            w.data[i] = saved + h;
            const double up = loss_fn(params, nullptr);
            w.data[i] = saved - h;
            const double dn = loss_fn(params, nullptr);
            w.data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(dn))
                throw std::runtime_error("grad_check: non-finite loss near params");
            const double fd = (up - dn) / (2.0 * h);
            const double an = ga ? ga->data[i] : 0.0;
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
            max_rel = std::max(max_rel, std::abs(an - fd) / denom);
        }
    }
    return max_rel;
}

}  // namespace pmr
