#include "sstk/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "sstk/ops.hpp"

namespace sstk {

void DecoderConfig::validate() const {
  if (depth < 1) throw ConfigError("decoder depth must be >= 1");
  if (dim < 1 || heads < 1 || dim % heads != 0)
    throw ConfigError("decoder dim must be divisible by heads");
  if (mlp_width < 1) throw ConfigError("decoder mlp width must be positive");
  if (vocab_size < 2) throw ConfigError("decoder vocab size must be >= 2");
  if (max_seq < 1) throw ConfigError("decoder max sequence length must be positive");
}

DecoderParams make_decoder_params(const DecoderConfig& cfg, Rng& rng) {
  cfg.validate();
  DecoderParams p;
  p.tok_embed = Tensor::randn({cfg.vocab_size, cfg.dim}, rng,
                              1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  p.pos_embed = Tensor::randn({cfg.max_seq, cfg.dim}, rng, 0.1);
  p.blocks.reserve(static_cast<size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i)
    p.blocks.push_back(make_block_params(cfg.dim, cfg.mlp_width, rng));
  p.final_gain = Tensor::constant({cfg.dim}, 1.0);
  p.head_w = Tensor::randn({cfg.dim, cfg.vocab_size}, rng,
                           1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  p.head_b = Tensor::zeros({cfg.vocab_size});
  return p;
}

MultimodalSequence build_sequence(const Tensor& merged_vision, const std::vector<int>& prompt_ids,
                                  const std::vector<int>& answer_ids, const Vocab& vocab,
                                  const DecoderParams& params, const DecoderConfig& cfg) {
  if (!merged_vision.defined() || merged_vision.outer() < 1)
    throw SequenceError("merged vision rows required");
  if (merged_vision.last_dim() != cfg.dim)
    throw SequenceError("vision rows dim " + std::to_string(merged_vision.last_dim()) +
                        " != decoder dim " + std::to_string(cfg.dim));

  std::vector<int> text_ids = prompt_ids;
  text_ids.insert(text_ids.end(), answer_ids.begin(), answer_ids.end());
  for (int id : prompt_ids)
    if (id == vocab.vis())
      throw SequenceError("vision placeholder in prompt; expansion happens upstream");
  for (int id : text_ids)
    if (id < 0 || id >= vocab.size())
      throw SequenceError("token id " + std::to_string(id) + " outside the vocabulary");

  const Index nv = merged_vision.outer();
  const Index n_tot = nv + static_cast<Index>(text_ids.size());
  if (n_tot > cfg.max_seq)
    throw SequenceError("sequence length " + std::to_string(n_tot) + " exceeds max " +
                        std::to_string(cfg.max_seq));

  MultimodalSequence seq;
  seq.rows = text_ids.empty()
                 ? merged_vision
                 : concat_rows({merged_vision, embedding(params.tok_embed, text_ids)});
  seq.vision_mask.bits.assign(static_cast<size_t>(n_tot), 0);
  for (Index i = 0; i < nv; ++i) seq.vision_mask.bits[static_cast<size_t>(i)] = 1;
  seq.loss_mask.assign(static_cast<size_t>(n_tot), 0);
  for (size_t i = 0; i < answer_ids.size(); ++i)
    seq.loss_mask[static_cast<size_t>(nv) + prompt_ids.size() + i] = 1;
  seq.token_ids.assign(static_cast<size_t>(n_tot), -1);
  for (size_t i = 0; i < text_ids.size(); ++i)
    seq.token_ids[static_cast<size_t>(nv) + i] = text_ids[i];
  seq.position_ids.resize(static_cast<size_t>(n_tot));
  for (Index i = 0; i < n_tot; ++i) seq.position_ids[static_cast<size_t>(i)] = i;
  return seq;
}

Tensor forward_with_fusion(const MultimodalSequence& seq, const FusionPlan& plan,
                           const std::map<int, Tensor>& geo_by_tap, const DecoderParams& params,
                           const DecoderConfig& cfg, InjectSite site, DecodeSession* capture) {
  if (seq.length() < 1) throw SequenceError("empty sequence");
  for (const auto& pr : plan.pairs) {
    if (pr.second < 0 || pr.second >= cfg.depth)
      throw ConfigError("plan decoder layer " + std::to_string(pr.second) +
                        " outside decoder depth " + std::to_string(cfg.depth));
    if (!geo_by_tap.count(pr.first))
      throw FusionError("missing projected features for geometry tap " +
                        std::to_string(pr.first));
  }

  Tensor h = add(seq.rows, gather_rows(params.pos_embed, seq.position_ids));
  if (capture) {
    capture->k_cache.assign(static_cast<size_t>(cfg.depth), RowMatrixXd());
    capture->v_cache.assign(static_cast<size_t>(cfg.depth), RowMatrixXd());
    capture->length = seq.length();
  }
  for (int j = 0; j < cfg.depth; ++j) {
    const Tensor* geo = nullptr;
    for (const auto& pr : plan.pairs)
      if (pr.second == j) geo = &geo_by_tap.at(pr.first);
    if (geo && site == InjectSite::kPreBlock)
      h = scatter_add_fusion(h, *geo, seq.vision_mask);
    KvRecord kv;
    h = transformer_block(h, params.blocks[static_cast<size_t>(j)], cfg.heads, /*causal=*/true,
                          cfg.norm_eps, capture ? &kv : nullptr);
    if (capture) {
      capture->k_cache[static_cast<size_t>(j)] = std::move(kv.k);
      capture->v_cache[static_cast<size_t>(j)] = std::move(kv.v);
    }
    if (geo && site == InjectSite::kPostBlock)
      h = scatter_add_fusion(h, *geo, seq.vision_mask);
  }
  return add_row(matmul(rms_norm(h, params.final_gain, cfg.norm_eps), params.head_w),
                 params.head_b);
}

Tensor next_token_loss(const Tensor& logits, const MultimodalSequence& seq) {
  if (logits.outer() != seq.length()) throw LossError("logit rows != sequence length");
  std::vector<Index> pred_rows;
  std::vector<int> targets;
  for (size_t i = 0; i < seq.loss_mask.size(); ++i) {
    if (!seq.loss_mask[i]) continue;
    if (i == 0) throw LossError("answer token at position 0 has no predictor state");
    int target = seq.token_ids[i];
    if (target < 0) throw LossError("loss mask covers a non-text position");
    pred_rows.push_back(static_cast<Index>(i) - 1);
    targets.push_back(target);
  }
  if (targets.empty()) throw LossError("empty loss mask");
  return cross_entropy(gather_rows(logits, pred_rows), targets);
}

Index argmax_lowest(const Eigen::ArrayXd& row) {
  Index best = 0;
  for (Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return best;
}

Eigen::ArrayXd decode_step(DecodeSession& session, int token_id, const DecoderParams& params,
                           const DecoderConfig& cfg) {
  NoGradGuard ng;
  const Index t = session.length;
  if (t >= cfg.max_seq)
    throw SequenceError("decode position " + std::to_string(t) + " exceeds max sequence length");
  if (static_cast<int>(session.k_cache.size()) != cfg.depth)
    throw SequenceError("decode session not primed by a prefill forward");

  const Index dim = cfg.dim;
  const Index dh = dim / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor x = add(embedding(params.tok_embed, {token_id}), gather_rows(params.pos_embed, {t}));
  for (int l = 0; l < cfg.depth; ++l) {
    const BlockParams& b = params.blocks[static_cast<size_t>(l)];
    Tensor nrm = rms_norm(x, b.attn_gain, cfg.norm_eps);
    Tensor q = add_row(matmul(nrm, b.attn.wq), b.attn.bq);
    Tensor k = add_row(matmul(nrm, b.attn.wk), b.attn.bk);
    Tensor v = add_row(matmul(nrm, b.attn.wv), b.attn.bv);

    RowMatrixXd& kc = session.k_cache[static_cast<size_t>(l)];
    RowMatrixXd& vc = session.v_cache[static_cast<size_t>(l)];
    kc.conservativeResize(t + 1, dim);
    vc.conservativeResize(t + 1, dim);
    kc.row(t) = k.mat().row(0);
    vc.row(t) = v.mat().row(0);

    Tensor attn_out = Tensor::zeros({1, dim});
    for (int hh = 0; hh < cfg.heads; ++hh) {
      const Index c0 = static_cast<Index>(hh) * dh;
      Eigen::VectorXd scores =
          kc.middleCols(c0, dh) * q.mat().row(0).segment(c0, dh).transpose() * scale;
      Eigen::ArrayXd e = (scores.array() - scores.maxCoeff()).exp();
      Eigen::VectorXd probs = (e / e.sum()).matrix();
      attn_out.mat().row(0).segment(c0, dh) = probs.transpose() * vc.middleCols(c0, dh);
    }
    x = add(x, add_row(matmul(attn_out, b.attn.wo), b.attn.bo));
    x = add(x, mlp_forward(rms_norm(x, b.mlp_gain, cfg.norm_eps), b.mlp));
  }
  session.length = t + 1;
  Tensor logits =
      add_row(matmul(rms_norm(x, params.final_gain, cfg.norm_eps), params.head_w), params.head_b);
  return logits.values();
}

std::vector<int> greedy_decode(const MultimodalSequence& prompt_seq, const FusionPlan& plan,
                               const std::map<int, Tensor>& geo_by_tap, const DecoderParams& params,
                               const DecoderConfig& cfg, const Vocab& vocab, int max_new,
                               InjectSite site) {
  if (max_new < 1) throw ArgumentError("greedy_decode: max_new must be >= 1");
  for (uint8_t m : prompt_seq.loss_mask)
    if (m) throw SequenceError("greedy_decode expects a prompt-only sequence");

  NoGradGuard ng;
  DecodeSession session;
  Tensor logits =
      forward_with_fusion(prompt_seq, plan, geo_by_tap, params, cfg, site, &session);
  Eigen::ArrayXd last =
      logits.values().segment((logits.outer() - 1) * logits.last_dim(), logits.last_dim());

  std::vector<int> out;
  int next = static_cast<int>(argmax_lowest(last));
  out.push_back(next);
  while (next != vocab.eos() && static_cast<int>(out.size()) < max_new &&
         session.length < cfg.max_seq) {
    Eigen::ArrayXd row = decode_step(session, next, params, cfg);
    next = static_cast<int>(argmax_lowest(row));
    out.push_back(next);
  }
  return out;
}

}  // namespace sstk
