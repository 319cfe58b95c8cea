// Central finite-difference verification of reverse-mode gradients.
#pragma once

#include <functional>

#include "sstk/tensor.hpp"

namespace sstk {

// Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-12),
// where central = (f(x + h e_i) - f(x - h e_i)) / 2h. f must return a scalar
// tensor; it may read x through the passed handle or through a captured alias
// of the same storage. x's values are perturbed in place and restored.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace sstk
