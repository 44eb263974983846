#pragma once

#include <cmath>
#include <cstdint>

#include "ddg/autograd.hpp"
#include "ddg/errors.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(const Shape& shape, double b1, double b2, double e = 1e-8)
        : m(shape), v(shape), t(0), beta1(b1), beta2(b2), eps(e) {}
};

// Bias-corrected Adam update from param.grad; zeroes the gradient afterward.
inline void adam_step(Param& param, AdamState& state, double lr) {
    if (lr <= 0.0) throw ConfigError("adam_step: learning rate must be positive");
    if (!param.grad.same_shape(param.value))
        throw ShapeError("adam_step: grad/value shape mismatch for " + param.name);
    if (state.m.numel() == 0) state.m = Tensor::zeros_like(param.value);
    if (state.v.numel() == 0) state.v = Tensor::zeros_like(param.value);

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < param.value.numel(); ++k) {
        const double g = param.grad[k];
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[k] / bc1;
        const double vhat = state.v[k] / bc2;
        param.value[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    param.value.require_finite("adam_step");
    param.zero_grad();
}

}  // namespace ddg
