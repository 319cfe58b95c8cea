// Differentiable primitives over Tensor.
//
// Every function is pure: it reads its inputs, allocates a fresh output and,
// when gradients are being recorded, attaches a backward closure. Matrix
// semantics treat a tensor as (outer x last_dim) row-major.
#pragma once

#include <cstdint>
#include <vector>

#include "sstk/tensor.hpp"

namespace sstk {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// x: (n x d), row: (d); broadcast add over rows.
Tensor add_row(const Tensor& x, const Tensor& row);

Tensor matmul(const Tensor& a, const Tensor& b);     // (n x k)(k x m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T, b: (m x k)

// Per last-dim slice: out = x * gain / sqrt(mean(x^2) + eps).
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps = 1e-6);

// GELU, tanh approximation:
//   0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
Tensor gelu(const Tensor& x);

// Rows are last-dim slices; each output row is nonnegative and sums to 1.
Tensor softmax_rows(const Tensor& x);

// Scaled dot-product attention over one head. q,k,v: (n x d_h).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale, bool causal);
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale);

Tensor slice_rows(const Tensor& x, Index begin, Index count);
Tensor slice_cols(const Tensor& x, Index begin, Index count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// out.row(i) = x.row(idx[i]); duplicate indices accumulate in backward.
Tensor gather_rows(const Tensor& x, const std::vector<Index>& idx);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// out = base, plus rows[k] added at the k-th masked position (mask is one
// byte per base row; ones count must equal rows' row count).
Tensor scatter_add_rows(const Tensor& base, const Tensor& rows, const std::vector<uint8_t>& mask);

Tensor reshape(const Tensor& x, Shape shape);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean over rows of -log softmax(logits.row(i))[targets[i]].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

}  // namespace sstk
