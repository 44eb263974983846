#pragma once

#include <functional>

#include "ddg/errors.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

// Central-difference gradient estimate, the independent oracle used to check
// reverse-mode results: (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               double h = 1e-5) {
    if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be positive");
    Tensor grad = Tensor::zeros_like(x);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace ddg
