#pragma once

#include <cmath>
#include <vector>

#include "afhn/tensor.hpp"

namespace afhn {

// One optimizer instance per network; moments are kept in parameter order.
struct AdamState {
    long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard Adam with bias correction. Moments are allocated on first use.
inline void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads,
                      AdamState& state, double lr) {
    if (params.size() != grads.size())
        throw DimensionError("adam_step: param/grad count mismatch");
    if (!(lr > 0.0)) throw ValidationError("adam_step: lr must be > 0");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!grads[p].same_shape(*params[p]))
            throw DimensionError("adam_step: grad shape mismatch at param " + std::to_string(p));
        if (!grads[p].all_finite())
            throw NumericalError("adam_step: non-finite gradient at param " + std::to_string(p));
    }
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        const Tensor& g = grads[p];
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace afhn
