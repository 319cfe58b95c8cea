#include "sstk/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace sstk {

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

bool shape_equal(const Shape& a, const Shape& b) { return a == b; }

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Storage& Tensor::st() {
  if (!s_) throw ShapeError("use of undefined tensor");
  return *s_;
}

const Tensor::Storage& Tensor::st() const {
  if (!s_) throw ShapeError("use of undefined tensor");
  return *s_;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto s = std::make_shared<Storage>();
  Index n = shape_numel(shape);
  s->shape = std::move(shape);
  s->values = Eigen::ArrayXd::Zero(n);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::constant(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  t.values().setConstant(v);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  Index n = shape_numel(shape);
  if (n != static_cast<Index>(data.size()))
    throw ShapeError("data size " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  Tensor t = zeros(std::move(shape));
  for (Index i = 0; i < n; ++i) t.values()(i) = data[static_cast<size_t>(i)];
  return t;
}

Tensor Tensor::scalar(double v) { return constant({1}, v); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (Index i = 0; i < t.numel(); ++i) t.values()(i) = rng.normal() * stddev;
  return t;
}

const Shape& Tensor::shape() const { return st().shape; }
int Tensor::ndim() const { return static_cast<int>(st().shape.size()); }
Index Tensor::numel() const { return st().values.size(); }

Index Tensor::dim(int i) const {
  const Shape& sh = st().shape;
  if (i < 0 || i >= static_cast<int>(sh.size()))
    throw ShapeError("axis " + std::to_string(i) + " out of range for " + shape_str(sh));
  return sh[static_cast<size_t>(i)];
}

Index Tensor::last_dim() const {
  const Shape& sh = st().shape;
  return sh.empty() ? 1 : sh.back();
}

Index Tensor::outer() const { return numel() / last_dim(); }

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value() requires a scalar tensor, got " + shape_str(shape()));
  return st().values(0);
}

double& Tensor::at(Index i) { return st().values(i); }
double Tensor::at(Index i) const { return st().values(i); }
double& Tensor::at(Index r, Index c) { return st().values(r * last_dim() + c); }
double Tensor::at(Index r, Index c) const { return st().values(r * last_dim() + c); }

Eigen::ArrayXd& Tensor::values() { return st().values; }
const Eigen::ArrayXd& Tensor::values() const { return st().values; }

MatMap Tensor::mat() { return MatMap(st().values.data(), outer(), last_dim()); }
ConstMatMap Tensor::mat() const { return ConstMatMap(st().values.data(), outer(), last_dim()); }

bool Tensor::requires_grad() const { return st().requires_grad; }
void Tensor::set_requires_grad(bool v) { st().requires_grad = v; }

bool Tensor::has_grad() const { return defined() && st().grad.size() == numel(); }

Eigen::ArrayXd& Tensor::grad() {
  if (!has_grad()) throw ShapeError("grad not allocated; run backward first");
  return st().grad;
}

const Eigen::ArrayXd& Tensor::grad() const {
  if (!has_grad()) throw ShapeError("grad not allocated; run backward first");
  return st().grad;
}

void Tensor::ensure_grad() {
  if (!has_grad()) st().grad = Eigen::ArrayXd::Zero(numel());
}

void Tensor::zero_grad() {
  if (s_) st().grad.resize(0);
}

std::shared_ptr<GradNode>& Tensor::node() { return st().node; }
const std::shared_ptr<GradNode>& Tensor::node() const { return st().node; }

Tensor Tensor::detach() const {
  auto s = std::make_shared<Storage>();
  s->shape = shape();
  s->values = st().values;  // copy; detached view must not alias graph storage
  s->requires_grad = false;
  return Tensor(std::move(s));
}

Tensor Tensor::clone() const {
  Tensor t = zeros(shape(), requires_grad());
  t.values() = values();
  return t;
}

bool Tensor::all_finite() const { return st().values.isFinite().all(); }

void accumulate_grad(const Tensor& t, const Eigen::ArrayXd& delta) {
  if (!t.defined() || !t.requires_grad()) return;
  Tensor& mt = const_cast<Tensor&>(t);
  mt.ensure_grad();
  mt.grad() += delta;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward requires a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS: inputs come out before outputs, so the
  // reversed order is a valid reverse-topological sweep.
  std::vector<Tensor> topo;
  std::unordered_set<const void*> visited;
  struct Frame {
    Tensor t;
    size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({loss});
  visited.insert(loss.id());
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& node = f.t.node();
    size_t n_parents = node ? node->parents.size() : 0;
    if (f.next_parent < n_parents) {
      Tensor p = node->parents[f.next_parent++];
      if (p.defined() && p.requires_grad() && !visited.count(p.id())) {
        visited.insert(p.id());
        stack.push_back({p});
      }
    } else {
      topo.push_back(f.t);
      stack.pop_back();
    }
  }

  Tensor& mloss = const_cast<Tensor&>(loss);
  mloss.ensure_grad();
  mloss.grad()(0) += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const auto& node = it->node();
    if (!node || !node->backward) continue;
    if (!it->has_grad()) continue;  // unreachable from the loss gradient
    node->backward(*it);
  }
}

}  // namespace sstk
