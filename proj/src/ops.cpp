#include "sstk/ops.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace sstk {

namespace {

constexpr double kMaskValue = -1e30;

bool want_grad(const Tensor& t) { return grad_enabled() && t.defined() && t.requires_grad(); }

void attach(Tensor& out, std::vector<Tensor> parents,
            std::function<void(const Tensor&)> backward) {
  out.set_requires_grad(true);
  auto node = std::make_shared<GradNode>();
  node->parents = std::move(parents);
  node->backward = std::move(backward);
  out.node() = node;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!shape_equal(a.shape(), b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() + b.values();
  if (want_grad(a) || want_grad(b)) {
    attach(out, {a, b}, [](const Tensor& o) {
      accumulate_grad(o.node()->parents[0], o.grad());
      accumulate_grad(o.node()->parents[1], o.grad());
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() - b.values();
  if (want_grad(a) || want_grad(b)) {
    attach(out, {a, b}, [](const Tensor& o) {
      accumulate_grad(o.node()->parents[0], o.grad());
      accumulate_grad(o.node()->parents[1], -o.grad());
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() * b.values();
  if (want_grad(a) || want_grad(b)) {
    attach(out, {a, b}, [](const Tensor& o) {
      const Tensor& pa = o.node()->parents[0];
      const Tensor& pb = o.node()->parents[1];
      accumulate_grad(pa, o.grad() * pb.values());
      accumulate_grad(pb, o.grad() * pa.values());
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() * c;
  if (want_grad(a)) {
    attach(out, {a}, [c](const Tensor& o) {
      accumulate_grad(o.node()->parents[0], o.grad() * c);
    });
  }
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  if (row.numel() != x.last_dim())
    throw ShapeError("add_row: row length " + std::to_string(row.numel()) +
                     " != last dim " + std::to_string(x.last_dim()));
  Tensor out = Tensor::zeros(x.shape());
  out.mat() = x.mat().rowwise() + row.values().matrix().transpose();
  if (want_grad(x) || want_grad(row)) {
    attach(out, {x, row}, [](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      const Tensor& pr = o.node()->parents[1];
      accumulate_grad(px, o.grad());
      if (pr.requires_grad()) {
        ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
        accumulate_grad(pr, g.colwise().sum().transpose().array());
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  out.mat() = a.mat() * b.mat();
  if (want_grad(a) || want_grad(b)) {
    attach(out, {a, b}, [](const Tensor& o) {
      const Tensor& pa = o.node()->parents[0];
      const Tensor& pb = o.node()->parents[1];
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      if (pa.requires_grad()) {
        RowMatrixXd ga = g * pb.mat().transpose();
        accumulate_grad(pa, Eigen::Map<const Eigen::ArrayXd>(ga.data(), ga.size()));
      }
      if (pb.requires_grad()) {
        RowMatrixXd gb = pa.mat().transpose() * g;
        accumulate_grad(pb, Eigen::Map<const Eigen::ArrayXd>(gb.data(), gb.size()));
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  Tensor out = Tensor::zeros({a.dim(0), b.dim(0)});
  out.mat() = a.mat() * b.mat().transpose();
  if (want_grad(a) || want_grad(b)) {
    attach(out, {a, b}, [](const Tensor& o) {
      const Tensor& pa = o.node()->parents[0];
      const Tensor& pb = o.node()->parents[1];
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      if (pa.requires_grad()) {
        RowMatrixXd ga = g * pb.mat();
        accumulate_grad(pa, Eigen::Map<const Eigen::ArrayXd>(ga.data(), ga.size()));
      }
      if (pb.requires_grad()) {
        RowMatrixXd gb = g.transpose() * pa.mat();
        accumulate_grad(pb, Eigen::Map<const Eigen::ArrayXd>(gb.data(), gb.size()));
      }
    });
  }
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps) {
  const Index d = x.last_dim();
  if (d < 1) throw ShapeError("rms_norm: empty last dimension");
  if (gain.numel() != d)
    throw ShapeError("rms_norm: gain length " + std::to_string(gain.numel()) +
                     " != last dim " + std::to_string(d));
  if (eps < 0) throw ArgumentError("rms_norm: eps must be non-negative");

  const Index rows = x.outer();
  Tensor out = Tensor::zeros(x.shape());
  Eigen::ArrayXd inv_rms(rows);
  ConstMatMap xm = x.mat();
  MatMap om = out.mat();
  for (Index r = 0; r < rows; ++r) {
    double ms = xm.row(r).array().square().mean();
    double ir = 1.0 / std::sqrt(ms + eps);
    inv_rms(r) = ir;
    om.row(r) = xm.row(r).array() * gain.values().transpose() * ir;
  }
  if (want_grad(x) || want_grad(gain)) {
    attach(out, {x, gain}, [inv_rms, d](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      const Tensor& pg = o.node()->parents[1];
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      ConstMatMap xm2 = px.mat();
      const Eigen::ArrayXd gain_v = pg.values();
      if (px.requires_grad()) {
        Eigen::ArrayXd gx(px.numel());
        MatMap gxm(gx.data(), o.outer(), d);
        for (Index r = 0; r < o.outer(); ++r) {
          const double ir = inv_rms(r);
          const Eigen::ArrayXd z = xm2.row(r).transpose().array();
          const Eigen::ArrayXd go = g.row(r).transpose().array();
          const double dot = (go * gain_v * z).sum();
          gxm.row(r) = (go * gain_v * ir - z * (ir * ir * ir / static_cast<double>(d)) * dot)
                           .matrix()
                           .transpose();
        }
        accumulate_grad(px, gx);
      }
      if (pg.requires_grad()) {
        Eigen::ArrayXd gg = Eigen::ArrayXd::Zero(d);
        for (Index r = 0; r < o.outer(); ++r)
          gg += g.row(r).transpose().array() * xm2.row(r).transpose().array() * inv_rms(r);
        accumulate_grad(pg, gg);
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr double kA = 0.7978845608028653558;  // sqrt(2/pi)
  constexpr double kB = 0.044715;
  Tensor out = Tensor::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    double v = x.at(i);
    out.at(i) = 0.5 * v * (1.0 + std::tanh(kA * (v + kB * v * v * v)));
  }
  if (want_grad(x)) {
    attach(out, {x}, [](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      Eigen::ArrayXd gx(px.numel());
      for (Index i = 0; i < px.numel(); ++i) {
        double v = px.at(i);
        double u = kA * (v + kB * v * v * v);
        double t = std::tanh(u);
        double du = kA * (1.0 + 3.0 * kB * v * v);
        gx(i) = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      }
      accumulate_grad(px, gx * o.grad());
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.last_dim() < 1) throw ShapeError("softmax_rows: empty last dimension");
  Tensor out = Tensor::zeros(x.shape());
  ConstMatMap xm = x.mat();
  MatMap om = out.mat();
  for (Index r = 0; r < x.outer(); ++r) {
    Eigen::ArrayXd row = xm.row(r).transpose().array();
    row -= row.maxCoeff();
    Eigen::ArrayXd e = row.exp();
    om.row(r) = (e / e.sum()).matrix().transpose();
  }
  if (want_grad(x)) {
    attach(out, {x}, [](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      ConstMatMap s = o.mat();
      Eigen::ArrayXd gx(px.numel());
      MatMap gxm(gx.data(), o.outer(), o.last_dim());
      for (Index r = 0; r < o.outer(); ++r) {
        const Eigen::ArrayXd sr = s.row(r).transpose().array();
        const Eigen::ArrayXd gr = g.row(r).transpose().array();
        double dot = (gr * sr).sum();
        gxm.row(r) = (sr * (gr - dot)).matrix().transpose();
      }
      accumulate_grad(px, gx);
    });
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale, bool causal) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw ShapeError("attention: q,k,v must be 2-D");
  const Index n = q.dim(0);
  if (n == 0) throw ShapeError("attention: empty sequence");
  if (k.dim(0) != n || v.dim(0) != n || k.dim(1) != q.dim(1))
    throw ShapeError("attention: mismatched q/k/v shapes");
  if (scale <= 0) throw ArgumentError("attention: scale must be positive");

  Tensor scores = scale == 1.0 ? matmul_nt(q, k) : sstk::scale(matmul_nt(q, k), scale);
  if (causal) {
    Tensor mask = Tensor::zeros({n, n});
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) mask.at(i, j) = kMaskValue;
    scores = add(scores, mask);
  }
  return matmul(softmax_rows(scores), v);
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  return attention(q, k, v, scale, /*causal=*/true);
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  const Index rows = x.outer();
  const Index d = x.last_dim();
  if (begin < 0 || count <= 0 || begin + count > rows)
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + std::to_string(rows));
  Tensor out = Tensor::zeros({count, d});
  out.mat() = x.mat().middleRows(begin, count);
  if (want_grad(x)) {
    attach(out, {x}, [begin, count](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      if (!px.requires_grad()) return;
      Eigen::ArrayXd gx = Eigen::ArrayXd::Zero(px.numel());
      MatMap gxm(gx.data(), px.outer(), px.last_dim());
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      gxm.middleRows(begin, count) = g;
      accumulate_grad(px, gx);
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, Index begin, Index count) {
  const Index rows = x.outer();
  const Index d = x.last_dim();
  if (begin < 0 || count <= 0 || begin + count > d)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + std::to_string(d));
  Tensor out = Tensor::zeros({rows, count});
  out.mat() = x.mat().middleCols(begin, count);
  if (want_grad(x)) {
    attach(out, {x}, [begin, count](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      if (!px.requires_grad()) return;
      Eigen::ArrayXd gx = Eigen::ArrayXd::Zero(px.numel());
      MatMap gxm(gx.data(), px.outer(), px.last_dim());
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      gxm.middleCols(begin, count) = g;
      accumulate_grad(px, gx);
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty list");
  const Index d = parts[0].last_dim();
  Index rows = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    if (p.last_dim() != d) throw ShapeError("concat_rows: inconsistent last dims");
    rows += p.outer();
    track = track || want_grad(p);
  }
  Tensor out = Tensor::zeros({rows, d});
  Index at = 0;
  for (const Tensor& p : parts) {
    out.mat().middleRows(at, p.outer()) = p.mat();
    at += p.outer();
  }
  if (track) {
    attach(out, parts, [](const Tensor& o) {
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      Index at2 = 0;
      for (const Tensor& p : o.node()->parents) {
        if (p.requires_grad()) {
          RowMatrixXd gp = g.middleRows(at2, p.outer());
          accumulate_grad(p, Eigen::Map<const Eigen::ArrayXd>(gp.data(), gp.size()));
        }
        at2 += p.outer();
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty list");
  const Index rows = parts[0].outer();
  Index d = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    if (p.outer() != rows) throw ShapeError("concat_cols: inconsistent row counts");
    d += p.last_dim();
    track = track || want_grad(p);
  }
  Tensor out = Tensor::zeros({rows, d});
  Index at = 0;
  for (const Tensor& p : parts) {
    out.mat().middleCols(at, p.last_dim()) = p.mat();
    at += p.last_dim();
  }
  if (track) {
    attach(out, parts, [](const Tensor& o) {
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      Index at2 = 0;
      for (const Tensor& p : o.node()->parents) {
        if (p.requires_grad()) {
          RowMatrixXd gp = g.middleCols(at2, p.last_dim());
          accumulate_grad(p, Eigen::Map<const Eigen::ArrayXd>(gp.data(), gp.size()));
        }
        at2 += p.last_dim();
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<Index>& idx) {
  const Index rows = x.outer();
  const Index d = x.last_dim();
  if (idx.empty()) throw ShapeError("gather_rows: empty index list");
  for (Index i : idx)
    if (i < 0 || i >= rows)
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " +
                       std::to_string(rows));
  Tensor out = Tensor::zeros({static_cast<Index>(idx.size()), d});
  for (size_t r = 0; r < idx.size(); ++r)
    out.mat().row(static_cast<Index>(r)) = x.mat().row(idx[r]);
  if (want_grad(x)) {
    attach(out, {x}, [idx](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      if (!px.requires_grad()) return;
      Eigen::ArrayXd gx = Eigen::ArrayXd::Zero(px.numel());
      MatMap gxm(gx.data(), px.outer(), px.last_dim());
      ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
      for (size_t r = 0; r < idx.size(); ++r)
        gxm.row(idx[r]) += g.row(static_cast<Index>(r));
      accumulate_grad(px, gx);
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  std::vector<Index> idx(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) idx[i] = static_cast<Index>(ids[i]);
  return gather_rows(table, idx);
}

Tensor scatter_add_rows(const Tensor& base, const Tensor& rows, const std::vector<uint8_t>& mask) {
  const Index n = base.outer();
  const Index d = base.last_dim();
  if (static_cast<Index>(mask.size()) != n)
    throw ShapeError("scatter_add_rows: mask length != row count");
  Index ones = 0;
  for (uint8_t m : mask) ones += (m != 0);
  if (rows.outer() != ones || rows.last_dim() != d)
    throw ShapeError("scatter_add_rows: rows shape " + shape_str(rows.shape()) +
                     " does not match " + std::to_string(ones) + " masked positions of width " +
                     std::to_string(d));
  Tensor out = Tensor::zeros(base.shape());
  out.values() = base.values();
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    if (mask[static_cast<size_t>(i)]) {
      out.mat().row(i) += rows.mat().row(k);
      ++k;
    }
  }
  if (want_grad(base) || want_grad(rows)) {
    attach(out, {base, rows}, [mask](const Tensor& o) {
      const Tensor& pb = o.node()->parents[0];
      const Tensor& pr = o.node()->parents[1];
      accumulate_grad(pb, o.grad());
      if (pr.requires_grad()) {
        ConstMatMap g(o.grad().data(), o.outer(), o.last_dim());
        Eigen::ArrayXd gr(pr.numel());
        MatMap grm(gr.data(), pr.outer(), pr.last_dim());
        Index k2 = 0;
        for (Index i = 0; i < o.outer(); ++i)
          if (mask[static_cast<size_t>(i)]) grm.row(k2++) = g.row(i);
        accumulate_grad(pr, gr);
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                     shape_str(shape));
  Tensor out = Tensor::zeros(std::move(shape));
  out.values() = x.values();
  if (want_grad(x)) {
    attach(out, {x}, [](const Tensor& o) {
      accumulate_grad(o.node()->parents[0], o.grad());
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::scalar(x.values().sum());
  if (want_grad(x)) {
    attach(out, {x}, [](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      accumulate_grad(px, Eigen::ArrayXd::Constant(px.numel(), o.grad()(0)));
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(x.values().sum() * inv);
  if (want_grad(x)) {
    attach(out, {x}, [inv](const Tensor& o) {
      const Tensor& px = o.node()->parents[0];
      accumulate_grad(px, Eigen::ArrayXd::Constant(px.numel(), o.grad()(0) * inv));
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  const Index n = logits.outer();
  const Index v = logits.last_dim();
  if (static_cast<Index>(targets.size()) != n)
    throw ShapeError("cross_entropy: target count != row count");
  for (int t : targets)
    if (t < 0 || static_cast<Index>(t) >= v)
      throw ShapeError("cross_entropy: target id " + std::to_string(t) + " out of vocab " +
                       std::to_string(v));

  ConstMatMap lm = logits.mat();
  RowMatrixXd probs(n, v);
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    Eigen::ArrayXd row = lm.row(r).transpose().array();
    double mx = row.maxCoeff();
    Eigen::ArrayXd e = (row - mx).exp();
    double z = e.sum();
    probs.row(r) = (e / z).matrix().transpose();
    total += std::log(z) + mx - lm(r, targets[static_cast<size_t>(r)]);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (want_grad(logits)) {
    attach(out, {logits}, [probs, targets](const Tensor& o) {
      const Tensor& pl = o.node()->parents[0];
      const double g = o.grad()(0) / static_cast<double>(probs.rows());
      RowMatrixXd gl = probs;
      for (Index r = 0; r < gl.rows(); ++r) gl(r, targets[static_cast<size_t>(r)]) -= 1.0;
      gl *= g;
      accumulate_grad(pl, Eigen::Map<const Eigen::ArrayXd>(gl.data(), gl.size()));
    });
  }
  return out;
}

}  // namespace sstk
