#include "sstk/grad_check.hpp"

#include <cmath>

namespace sstk {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0 && h <= 1e-2)) throw ArgumentError("grad_check: h must be in (0, 1e-2]");

  Tensor& mx = const_cast<Tensor&>(x);
  const bool saved_rg = x.requires_grad();
  mx.set_requires_grad(true);
  mx.zero_grad();

  Tensor loss = f(x);
  if (loss.numel() != 1) throw ShapeError("grad_check: f must return a scalar");
  if (!std::isfinite(loss.value())) throw EvalError("grad_check: non-finite f(x)");
  backward(loss);
  Eigen::ArrayXd analytic =
      x.has_grad() ? x.grad() : Eigen::ArrayXd(Eigen::ArrayXd::Zero(x.numel()));

  double max_rel = 0.0;
  {
    NoGradGuard ng;
    for (Index i = 0; i < x.numel(); ++i) {
      const double orig = mx.at(i);
      mx.at(i) = orig + h;
      const double fp = f(x).value();
      mx.at(i) = orig - h;
      const double fm = f(x).value();
      mx.at(i) = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw EvalError("grad_check: non-finite f near x");
      const double central = (fp - fm) / (2.0 * h);
      const double a = analytic(i);
      const double rel = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
      if (rel > max_rel) max_rel = rel;
    }
  }

  mx.set_requires_grad(saved_rg);
  mx.zero_grad();
  return max_rel;
}

}  // namespace sstk
