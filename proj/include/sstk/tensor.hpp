// Dense 64-bit float tensor with reverse-mode gradients.
//
// A Tensor is a cheap shared handle to flat row-major storage. Operations in
// ops.hpp build a per-forward-pass graph of GradNodes; backward() runs one
// reverse sweep from a scalar loss and accumulates into leaf grads. Graphs
// are never shared between passes, so concurrent forward passes over
// immutable parameters are safe.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

#include "sstk/errors.hpp"
#include "sstk/rng.hpp"

namespace sstk {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrixXd>;
using ConstMatMap = Eigen::Map<const RowMatrixXd>;

Index shape_numel(const Shape& shape);
bool shape_equal(const Shape& a, const Shape& b);
std::string shape_str(const Shape& shape);

class Tensor;

struct GradNode {
  std::vector<Tensor> parents;
  std::function<void(const Tensor& out)> backward;
};

// Thread-local switch: when disabled, ops skip graph recording entirely.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double v);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const;
  int ndim() const;
  Index numel() const;
  Index dim(int i) const;
  Index last_dim() const;
  Index outer() const;  // numel / last_dim

  double value() const;  // scalar tensors only
  double& at(Index i);
  double at(Index i) const;
  double& at(Index r, Index c);  // (outer, last_dim) row-major indexing
  double at(Index r, Index c) const;

  Eigen::ArrayXd& values();
  const Eigen::ArrayXd& values() const;
  MatMap mat();  // (outer x last_dim) matrix view over the flat storage
  ConstMatMap mat() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);

  bool has_grad() const;
  Eigen::ArrayXd& grad();
  const Eigen::ArrayXd& grad() const;
  void ensure_grad();
  void zero_grad();

  std::shared_ptr<GradNode>& node();
  const std::shared_ptr<GradNode>& node() const;
  const void* id() const { return s_.get(); }

  // Same values, detached from any graph; shares storage.
  Tensor detach() const;
  // Deep copy of values into a fresh leaf.
  Tensor clone() const;

  bool all_finite() const;

 private:
  struct Storage {
    Shape shape;
    Eigen::ArrayXd values;
    Eigen::ArrayXd grad;  // size 0 until a backward pass touches it
    bool requires_grad = false;
    std::shared_ptr<GradNode> node;
  };

  explicit Tensor(std::shared_ptr<Storage> s) : s_(std::move(s)) {}
  Storage& st();
  const Storage& st() const;

  std::shared_ptr<Storage> s_;
};

// Reverse sweep from a scalar loss. Grad buffers of reachable tensors are
// zero-initialised on first touch within the sweep; leaf grads persisting
// from earlier sweeps keep accumulating (batch accumulation).
void backward(const Tensor& loss);

// Accumulate `delta` into `t`'s grad if it participates in the graph.
void accumulate_grad(const Tensor& t, const Eigen::ArrayXd& delta);

}  // namespace sstk
