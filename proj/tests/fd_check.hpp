#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "afhn/tensor.hpp"

namespace afhn::testing {

// Central finite differences against analytic gradients, one parameter
// tensor at a time. `loss` must recompute the forward pass from the current
// contents of the parameter tensors.
inline bool gradients_match(std::vector<Tensor*> params, const std::vector<Tensor>& analytic,
                            const std::function<double()>& loss, double rtol, double h = 1e-5,
                            double atol = 1e-6) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + h;
            const double up = loss();
            w[i] = orig - h;
            const double down = loss();
            w[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic[p][i];
            const double tol = atol + rtol * std::max(std::abs(a), std::abs(fd));
            if (std::abs(a - fd) > tol) return false;
        }
    }
    return true;
}

}  // namespace afhn::testing
