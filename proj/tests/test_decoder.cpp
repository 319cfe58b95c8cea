#include <doctest.h>

#include <cmath>

#include "sstk/decoder.hpp"
#include "sstk/ops.hpp"
#include "test_util.hpp"

using namespace sstk;

namespace {

// Naive oracle: per-position -log softmax, averaged by hand.
double nll_oracle(const Tensor& logits, const std::vector<Index>& pred_rows,
                  const std::vector<int>& targets) {
  double total = 0;
  for (size_t i = 0; i < pred_rows.size(); ++i) {
    double mx = -1e300, z = 0;
    for (Index j = 0; j < logits.last_dim(); ++j) mx = std::max(mx, logits.at(pred_rows[i], j));
    for (Index j = 0; j < logits.last_dim(); ++j) z += std::exp(logits.at(pred_rows[i], j) - mx);
    total += std::log(z) + mx - logits.at(pred_rows[i], targets[i]);
  }
  return total / static_cast<double>(pred_rows.size());
}

MultimodalSequence make_manual_seq(const Tensor& rows, std::vector<uint8_t> vis,
                                   std::vector<uint8_t> loss, std::vector<int> ids) {
  MultimodalSequence seq;
  seq.rows = rows;
  seq.vision_mask.bits = std::move(vis);
  seq.loss_mask = std::move(loss);
  seq.token_ids = std::move(ids);
  seq.position_ids.resize(static_cast<size_t>(rows.outer()));
  for (Index i = 0; i < rows.outer(); ++i) seq.position_ids[static_cast<size_t>(i)] = i;
  return seq;
}

}  // namespace

TEST_SUITE_BEGIN("decoder");

TEST_CASE("build_sequence layout arithmetic and contract errors") {
  const Vocab& vocab = Vocab::standard();
  DecoderConfig cfg;
  cfg.dim = 16;
  cfg.vocab_size = vocab.size();
  cfg.max_seq = 32;
  Rng rng(1);
  DecoderParams params = make_decoder_params(cfg, rng);

  Tensor vis = Tensor::randn({8, 16}, rng);  // K=2, N'=4
  std::vector<int> prompt{vocab.bos(), vocab.id("which"), vocab.id("point"), vocab.id("closer"),
                          vocab.id("?")};
  std::vector<int> answer{vocab.id("A"), vocab.id("B"), vocab.eos()};
  MultimodalSequence seq = build_sequence(vis, prompt, answer, vocab, params, cfg);
  CHECK(seq.length() == 16);
  CHECK(seq.n_vision() == 8);
  int loss_ones = 0;
  for (uint8_t b : seq.loss_mask) loss_ones += b;
  CHECK(loss_ones == 3);

  MultimodalSequence eval_seq = build_sequence(vis, prompt, {}, vocab, params, cfg);
  for (uint8_t b : eval_seq.loss_mask) CHECK(b == 0);

  std::vector<int> bad_prompt{vocab.bos(), vocab.vis()};
  CHECK_THROWS_AS(build_sequence(vis, bad_prompt, answer, vocab, params, cfg), SequenceError);
  std::vector<int> long_prompt(40, vocab.bos());
  CHECK_THROWS_AS(build_sequence(vis, long_prompt, answer, vocab, params, cfg), SequenceError);
}

TEST_CASE("next_token_loss closed forms") {
  // Uniform logits over a 32-token vocabulary.
  Tensor logits = Tensor::constant({6, 32}, 0.7);
  MultimodalSequence seq = make_manual_seq(Tensor::zeros({6, 4}), {1, 1, 0, 0, 0, 0},
                                           {0, 0, 0, 0, 1, 1}, {-1, -1, 3, 4, 5, 6});
  Tensor loss = next_token_loss(logits, seq);
  CHECK(loss.value() == doctest::Approx(std::log(32.0)).epsilon(1e-12));

  // Saturated correct logit.
  Tensor sat = Tensor::zeros({6, 32});
  sat.at(3, 5) = 1000.0;
  sat.at(4, 6) = 1000.0;
  CHECK(next_token_loss(sat, seq).value() < 1e-6);

  // Mean of two per-token losses, against the naive oracle.
  Rng rng(5);
  Tensor rl = Tensor::randn({6, 32}, rng);
  CHECK(next_token_loss(rl, seq).value() ==
        doctest::Approx(nll_oracle(rl, {3, 4}, {5, 6})).epsilon(1e-12));

  MultimodalSequence empty = make_manual_seq(Tensor::zeros({6, 4}), {1, 1, 0, 0, 0, 0},
                                             {0, 0, 0, 0, 0, 0}, {-1, -1, 3, 4, 5, 6});
  CHECK_THROWS_AS(next_token_loss(logits, empty), LossError);
}

TEST_CASE("decoder forward is causal and fusion respects the mask") {
  DecoderConfig cfg;
  cfg.depth = 2;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.mlp_width = 32;
  cfg.vocab_size = Vocab::standard().size();
  cfg.max_seq = 24;
  Rng rng(7);
  DecoderParams params = make_decoder_params(cfg, rng);

  const Index n = 12;
  Tensor rows = Tensor::randn({n, 16}, rng);
  // Vision span in the middle so there are real positions before the mask.
  std::vector<uint8_t> vis{0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0};
  MultimodalSequence seq = make_manual_seq(rows, vis, std::vector<uint8_t>(12, 0),
                                           std::vector<int>(12, 2));
  FusionPlan plan = make_fusion_plan(PlanMode::kStack, {0, 1}, {0, 1});
  std::map<int, Tensor> geo;
  geo[0] = Tensor::randn({4, 16}, rng);
  geo[1] = Tensor::randn({4, 16}, rng);

  Tensor base = forward_with_fusion(seq, plan, geo, params, cfg);

  // Causality under perturbation of later input rows: 3 positions x 5 seeds.
  for (uint64_t s = 1; s <= 5; ++s) {
    Rng prng(s);
    for (int rep = 0; rep < 3; ++rep) {
      Index i = static_cast<Index>(prng.uniform_int(0, n - 2));
      Index j = static_cast<Index>(prng.uniform_int(i + 1, n - 1));
      Tensor rows2 = rows.clone();
      rows2.at(j, static_cast<Index>(prng.uniform_int(0, 15))) += 0.37;
      MultimodalSequence seq2 = make_manual_seq(rows2, vis, seq.loss_mask, seq.token_ids);
      Tensor out2 = forward_with_fusion(seq2, plan, geo, params, cfg);
      for (Index col = 0; col < out2.last_dim(); ++col)
        CHECK(out2.at(i, col) == base.at(i, col));
    }
  }

  // Perturbing geo row 0 leaves logits before the first masked position
  // unchanged (fusion lands at position 4).
  std::map<int, Tensor> geo2 = geo;
  geo2[0] = geo[0].clone();
  geo2[0].at(0, 3) += 1.0;
  Tensor out3 = forward_with_fusion(seq, plan, geo2, params, cfg);
  for (Index i = 0; i < 4; ++i)
    for (Index col = 0; col < out3.last_dim(); ++col) CHECK(out3.at(i, col) == base.at(i, col));

  // Mode none twice: bit-identical (pure function).
  FusionPlan none;
  Tensor p1 = forward_with_fusion(seq, none, {}, params, cfg);
  Tensor p2 = forward_with_fusion(seq, none, {}, params, cfg);
  CHECK(test::bit_equal(p1, p2));

  // Missing tap features must be a fusion error.
  std::map<int, Tensor> missing{{0, geo[0]}};
  CHECK_THROWS_AS(forward_with_fusion(seq, plan, missing, params, cfg), FusionError);

  // Argmax invariance: adding a constant to a logit row keeps the winner.
  Eigen::ArrayXd row = Eigen::ArrayXd::Zero(base.last_dim());
  for (Index c = 0; c < base.last_dim(); ++c) row(c) = base.at(5, c);
  Index before = argmax_lowest(row);
  CHECK(argmax_lowest(row + 7.5) == before);
}

TEST_CASE("greedy decode: eos model, determinism, incremental vs re-forward") {
  const Vocab& vocab = Vocab::standard();
  ModelConfig mc = test::tiny_model_config();
  mc.mode = PlanMode::kStack;
  Model model = make_model(mc, 21);
  Rng mrng(77);
  randomize_merger_outputs(model, mrng, 0.3);
  // Keep structural tokens out of the argmax race so the re-forward oracle
  // can feed generated tokens back through build_sequence.
  model.params.decoder.head_b.at(vocab.vis()) = -1e6;
  model.params.decoder.head_b.at(vocab.pad()) = -1e6;

  DataConfig data = test::tiny_data_config();
  QASample sample = gen_sample(610, TaskLevel::kLow, data, vocab);

  // A head that always prefers eos emits exactly [eos].
  {
    Model eos_model = make_model(mc, 21);
    eos_model.params.decoder.head_b.at(vocab.eos()) = 1e6;
    std::vector<int> out = model_greedy_decode(eos_model, sample, 8);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == vocab.eos());
  }

  std::vector<int> a = model_greedy_decode(model, sample, 5);
  std::vector<int> b = model_greedy_decode(model, sample, 5);
  CHECK(a == b);

  // Re-forward oracle: no cache, recompute the whole prefix every step.
  {
    NoGradGuard ng;
    Tensor vis = encode_vision_merged(model, sample.vision_frames);
    std::map<int, Tensor> geo =
        project_geometry_taps(model, sample.geometry_frames, model.plan.taps_needed());
    std::vector<int> generated;
    std::vector<int> prompt = sample.question_ids;
    for (int step = 0; step < 5; ++step) {
      MultimodalSequence seq = build_sequence(vis, prompt, {}, vocab, model.params.decoder,
                                              model.cfg.decoder);
      Tensor logits = forward_with_fusion(seq, model.plan, geo, model.params.decoder,
                                          model.cfg.decoder, model.cfg.inject_site);
      Eigen::ArrayXd last = Eigen::ArrayXd::Zero(logits.last_dim());
      for (Index c = 0; c < logits.last_dim(); ++c) last(c) = logits.at(logits.outer() - 1, c);
      int next = static_cast<int>(argmax_lowest(last));
      generated.push_back(next);
      if (next == vocab.eos()) break;
      prompt.push_back(next);
    }
    std::vector<int> incremental = model_greedy_decode(model, sample, 5);
    REQUIRE(incremental.size() >= std::min<size_t>(generated.size(), incremental.size()));
    for (size_t i = 0; i < std::min(generated.size(), incremental.size()); ++i)
      CHECK(incremental[i] == generated[i]);
    CHECK(incremental.size() == generated.size());
  }
}

TEST_CASE("prefill-only fusion: later steps never touch geometry") {
  const Vocab& vocab = Vocab::standard();
  ModelConfig mc = test::tiny_model_config();
  mc.mode = PlanMode::kStack;
  Model model = make_model(mc, 33);
  Rng mrng(34);
  randomize_merger_outputs(model, mrng, 0.3);
  DataConfig data = test::tiny_data_config();
  QASample sample = gen_sample(611, TaskLevel::kLow, data, vocab);

  NoGradGuard ng;
  Tensor vis = encode_vision_merged(model, sample.vision_frames);
  std::map<int, Tensor> geo =
      project_geometry_taps(model, sample.geometry_frames, model.plan.taps_needed());
  MultimodalSequence seq =
      build_sequence(vis, sample.question_ids, {}, vocab, model.params.decoder, model.cfg.decoder);

  DecodeSession s1, s2;
  (void)forward_with_fusion(seq, model.plan, geo, model.params.decoder, model.cfg.decoder,
                            model.cfg.inject_site, &s1);
  (void)forward_with_fusion(seq, model.plan, geo, model.params.decoder, model.cfg.decoder,
                            model.cfg.inject_site, &s2);
  geo.clear();  // withheld after prefill

  int tok = vocab.bos();
  for (int step = 0; step < 4; ++step) {
    Eigen::ArrayXd r1 = decode_step(s1, tok, model.params.decoder, model.cfg.decoder);
    Eigen::ArrayXd r2 = decode_step(s2, tok, model.params.decoder, model.cfg.decoder);
    for (Index c = 0; c < r1.size(); ++c) CHECK(r1(c) == r2(c));
    tok = static_cast<int>(argmax_lowest(r1));
  }
}

TEST_SUITE_END();
