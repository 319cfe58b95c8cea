#include "sstk/blocks.hpp"

#include <cmath>

namespace sstk {

namespace {

Tensor weight(Index rows, Index cols, Rng& rng) {
  return Tensor::randn({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

}  // namespace

AttentionParams make_attention_params(int dim, Rng& rng, double out_scale) {
  AttentionParams p;
  p.wq = weight(dim, dim, rng);
  p.bq = Tensor::zeros({dim});
  p.wk = weight(dim, dim, rng);
  p.bk = Tensor::zeros({dim});
  p.wv = weight(dim, dim, rng);
  p.bv = Tensor::zeros({dim});
  p.wo = weight(dim, dim, rng);
  if (out_scale != 1.0) p.wo.values() *= out_scale;
  p.bo = Tensor::zeros({dim});
  return p;
}

MlpParams make_mlp_params(int dim_in, int dim_hidden, int dim_out, Rng& rng, double out_scale) {
  MlpParams p;
  p.w1 = weight(dim_in, dim_hidden, rng);
  p.b1 = Tensor::zeros({dim_hidden});
  p.w2 = weight(dim_hidden, dim_out, rng);
  if (out_scale != 1.0) p.w2.values() *= out_scale;
  p.b2 = Tensor::zeros({dim_out});
  return p;
}

BlockParams make_block_params(int dim, int mlp_width, Rng& rng, double out_scale) {
  BlockParams p;
  p.attn_gain = Tensor::constant({dim}, 1.0);
  p.attn = make_attention_params(dim, rng, out_scale);
  p.mlp_gain = Tensor::constant({dim}, 1.0);
  p.mlp = make_mlp_params(dim, mlp_width, dim, rng, out_scale);
  return p;
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, int heads, bool causal,
                            KvRecord* kv) {
  const Index dim = x.last_dim();
  if (heads <= 0 || dim % heads != 0)
    throw ShapeError("attention dim " + std::to_string(dim) + " not divisible by " +
                     std::to_string(heads) + " heads");
  Tensor q = add_row(matmul(x, p.wq), p.bq);
  Tensor k = add_row(matmul(x, p.wk), p.bk);
  Tensor v = add_row(matmul(x, p.wv), p.bv);
  if (kv) {
    kv->k = k.mat();
    kv->v = v.mat();
  }
  const Index dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_out;
  head_out.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Index c0 = static_cast<Index>(h) * dh;
    head_out.push_back(attention(slice_cols(q, c0, dh), slice_cols(k, c0, dh),
                                 slice_cols(v, c0, dh), scale, causal));
  }
  Tensor merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  return add_row(matmul(merged, p.wo), p.bo);
}

Tensor mlp_forward(const Tensor& x, const MlpParams& p) {
  return add_row(matmul(gelu(add_row(matmul(x, p.w1), p.b1)), p.w2), p.b2);
}

Tensor transformer_block(const Tensor& x, const BlockParams& p, int heads, bool causal, double eps,
                         KvRecord* kv) {
  Tensor h = add(x, multi_head_attention(rms_norm(x, p.attn_gain, eps), p.attn, heads, causal, kv));
  return add(h, mlp_forward(rms_norm(h, p.mlp_gain, eps), p.mlp));
}

}  // namespace sstk
