#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "firzen/core/matrix.hpp"

namespace testutil {

// Central finite differences of a scalar function of several matrices.
// Returns one gradient matrix per input.
inline std::vector<firzen::Mat> finite_diff(
    const std::function<double(const std::vector<firzen::Mat>&)>& f,
    std::vector<firzen::Mat> params, double h = 1e-5) {
    std::vector<firzen::Mat> grads;
    for (std::size_t p = 0; p < params.size(); ++p) {
        firzen::Mat g(params[p].rows(), params[p].cols());
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            double orig = params[p].raw()[i];
            params[p].raw()[i] = orig + h;
            double fp = f(params);
            params[p].raw()[i] = orig - h;
            double fm = f(params);
            params[p].raw()[i] = orig;
            g.raw()[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

// max over entries of |a-b| / max(1, |a|, |b|)
inline double max_rel_err(const firzen::Mat& a, const firzen::Mat& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a.raw()[i], y = b.raw()[i];
        double denom = std::max({1.0, std::fabs(x), std::fabs(y)});
        worst = std::max(worst, std::fabs(x - y) / denom);
    }
    return worst;
}

}  // namespace testutil
