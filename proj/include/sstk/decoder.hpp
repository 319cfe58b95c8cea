// Toy autoregressive language decoder over multimodal sequences: prefill-time
// geometry fusion, the answer-token loss, and greedy decoding with a KV cache.
#pragma once

#include <map>
#include <vector>

#include "sstk/blocks.hpp"
#include "sstk/fusion.hpp"
#include "sstk/tensor.hpp"
#include "sstk/vocab.hpp"

namespace sstk {

struct DecoderConfig {
  int depth = 4;
  int dim = 64;
  int heads = 4;
  int mlp_width = 128;
  int vocab_size = 0;  // filled from the vocab at model build
  int max_seq = 64;
  double norm_eps = 1e-6;
  void validate() const;
};

struct DecoderParams {
  Tensor tok_embed;  // (vocab x dim)
  Tensor pos_embed;  // (max_seq x dim), learned absolute positions
  std::vector<BlockParams> blocks;
  Tensor final_gain;
  Tensor head_w;  // (dim x vocab); untied from tok_embed
  Tensor head_b;
};

DecoderParams make_decoder_params(const DecoderConfig& cfg, Rng& rng);

// Decoder input: embedded vision rows followed by embedded text tokens, with
// the vision mask and the answer-loss mask. token_ids is -1 at vision rows.
struct MultimodalSequence {
  Tensor rows;  // (n_tot x dim)
  VisionMask vision_mask;
  std::vector<uint8_t> loss_mask;
  std::vector<int> token_ids;
  std::vector<Index> position_ids;

  Index length() const { return rows.defined() ? rows.outer() : 0; }
  Index n_vision() const { return vision_mask.ones(); }
};

// Layout: [vision rows | prompt embeddings | answer embeddings]. The prompt
// must not contain the vision placeholder (expansion happens upstream); an
// empty answer leaves the loss mask all zero (evaluation mode).
MultimodalSequence build_sequence(const Tensor& merged_vision, const std::vector<int>& prompt_ids,
                                  const std::vector<int>& answer_ids, const Vocab& vocab,
                                  const DecoderParams& params, const DecoderConfig& cfg);

// Key/value cache for one decode session; owns the per-layer projected K/V of
// everything processed so far.
struct DecodeSession {
  std::vector<RowMatrixXd> k_cache;
  std::vector<RowMatrixXd> v_cache;
  Index length = 0;
};

// Causal prefill forward. Geometry features (per tap layer, (N_p x dim)) are
// scattered into the vision slice at the plan's decoder layers, at the
// configured site: pre_block adds to the input hidden state of layer j (j=0
// touches the embeddings), post_block adds after block j has run.
Tensor forward_with_fusion(const MultimodalSequence& seq, const FusionPlan& plan,
                           const std::map<int, Tensor>& geo_by_tap, const DecoderParams& params,
                           const DecoderConfig& cfg, InjectSite site = InjectSite::kPreBlock,
                           DecodeSession* capture = nullptr);

// Mean over answer positions i of -log softmax(logits[i-1])[token_ids[i]].
Tensor next_token_loss(const Tensor& logits, const MultimodalSequence& seq);

// One incremental step: appends the token's K/V to the session and returns
// the next-token logits row. No fusion ever applies here.
Eigen::ArrayXd decode_step(DecodeSession& session, int token_id, const DecoderParams& params,
                           const DecoderConfig& cfg);

// Greedy ties break toward the lowest token id.
Index argmax_lowest(const Eigen::ArrayXd& row);

// Greedy generation: fusion happens only in the initial prefill; stops at eos
// or max_new tokens. Returns generated ids only (prompt excluded).
std::vector<int> greedy_decode(const MultimodalSequence& prompt_seq, const FusionPlan& plan,
                               const std::map<int, Tensor>& geo_by_tap, const DecoderParams& params,
                               const DecoderConfig& cfg, const Vocab& vocab, int max_new,
                               InjectSite site = InjectSite::kPreBlock);

}  // namespace sstk
