// Pre-norm transformer block shared by both encoders and the decoder:
// rms_norm -> multi-head attention -> residual, rms_norm -> GELU MLP -> residual.
#pragma once

#include "sstk/ops.hpp"
#include "sstk/tensor.hpp"

namespace sstk {

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct MlpParams {
  Tensor w1, b1, w2, b2;
};

struct BlockParams {
  Tensor attn_gain;
  AttentionParams attn;
  Tensor mlp_gain;
  MlpParams mlp;
};

// out_scale shrinks the attention/MLP output projections; blocks then act as
// mild perturbations of the residual stream, which keeps frozen random
// encoders informative stand-ins for pretrained towers.
AttentionParams make_attention_params(int dim, Rng& rng, double out_scale = 1.0);
MlpParams make_mlp_params(int dim_in, int dim_hidden, int dim_out, Rng& rng,
                          double out_scale = 1.0);
BlockParams make_block_params(int dim, int mlp_width, Rng& rng, double out_scale = 1.0);

// Projected keys/values of one block forward, recorded for incremental decode.
struct KvRecord {
  RowMatrixXd k;
  RowMatrixXd v;
};

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, int heads, bool causal,
                            KvRecord* kv = nullptr);

Tensor mlp_forward(const Tensor& x, const MlpParams& p);

Tensor transformer_block(const Tensor& x, const BlockParams& p, int heads, bool causal,
                         double eps = 1e-6, KvRecord* kv = nullptr);

}  // namespace sstk
