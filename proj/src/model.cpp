#include "sstk/model.hpp"

#include <algorithm>

#include "sstk/ops.hpp"

namespace sstk {

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kVisionEncoder: return "vision_encoder";
    case ParamGroup::kGeometryEncoder: return "geometry_encoder";
    case ParamGroup::kMergers: return "mergers";
    case ParamGroup::kDecoder: return "decoder";
  }
  throw ConfigError("unhandled param group");
}

ParamGroup param_group_from_string(const std::string& s) {
  if (s == "vision_encoder") return ParamGroup::kVisionEncoder;
  if (s == "geometry_encoder") return ParamGroup::kGeometryEncoder;
  if (s == "mergers") return ParamGroup::kMergers;
  if (s == "decoder") return ParamGroup::kDecoder;
  throw ConfigError("unknown param group '" + s + "'");
}

std::vector<int> ModelConfig::effective_gvf_taps() const {
  if (!gvf_taps.empty()) return gvf_taps;
  std::vector<int> all = taps();
  if (mode == PlanMode::kGvfSingle) return {all.back()};
  return all;
}

int ModelConfig::effective_merger_mlp() const {
  return merger_mlp_dim > 0 ? merger_mlp_dim
                            : 2 * vision.merge * vision.merge * geometry.dim;
}

void ModelConfig::validate() const {
  if (lang_dim < 1) throw ConfigError("lang_dim must be positive");
  vision.validate();
  geometry.validate();
  decoder.validate();
  if (vision.lang_dim != lang_dim || decoder.dim != lang_dim)
    throw ConfigError("vision merger output and decoder dim must equal lang_dim");
  if (vision.patch != geometry.patch)
    throw ConfigError("vision and geometry encoders must share the patch size");
  std::vector<int> tap_set = taps();
  if (mode == PlanMode::kStack || mode == PlanMode::kStackReverse) {
    if (fusion_decoder_layers.size() != tap_set.size())
      throw ConfigError("fusion decoder layer count must match tap count");
    for (int d : fusion_decoder_layers)
      if (d < 0 || d >= decoder.depth)
        throw ConfigError("fusion decoder layer " + std::to_string(d) + " outside decoder depth");
  }
  for (int t : effective_gvf_taps())
    if (std::find(tap_set.begin(), tap_set.end(), t) == tap_set.end())
      throw ConfigError("gvf tap " + std::to_string(t) + " is not a configured tap layer");
}

const Tensor& ModelParams::find(const std::string& name) const {
  for (const ParamEntry& e : entries)
    if (e.name == name) return e.tensor;
  throw ArgumentError("unknown parameter '" + name + "'");
}

PatchGrid Model::grid_for(Index h, Index w) const {
  PatchGrid grid;
  grid.p = cfg.vision.patch;
  grid.s = cfg.vision.merge;
  grid.h_patch = h / grid.p;
  grid.w_patch = w / grid.p;
  grid.validate();
  return grid;
}

FusionPlan plan_from_config(const ModelConfig& cfg) {
  switch (cfg.mode) {
    case PlanMode::kNone:
      return make_fusion_plan(PlanMode::kNone, {}, {});
    case PlanMode::kStack:
    case PlanMode::kStackReverse:
      return make_fusion_plan(cfg.mode, cfg.taps(), cfg.fusion_decoder_layers);
    case PlanMode::kGvfSingle:
    case PlanMode::kGvfMulti:
      return make_fusion_plan(cfg.mode, cfg.effective_gvf_taps(), {});
  }
  throw ConfigError("unhandled plan mode");
}

namespace {

struct Registrar {
  std::vector<ParamEntry>* entries;
  void add(const std::string& name, const Tensor& t, ParamGroup g) {
    entries->push_back({name, t, g});
  }
  void add_block(const std::string& prefix, const BlockParams& b, ParamGroup g) {
    add(prefix + ".attn_gain", b.attn_gain, g);
    add(prefix + ".attn.wq", b.attn.wq, g);
    add(prefix + ".attn.bq", b.attn.bq, g);
    add(prefix + ".attn.wk", b.attn.wk, g);
    add(prefix + ".attn.bk", b.attn.bk, g);
    add(prefix + ".attn.wv", b.attn.wv, g);
    add(prefix + ".attn.bv", b.attn.bv, g);
    add(prefix + ".attn.wo", b.attn.wo, g);
    add(prefix + ".attn.bo", b.attn.bo, g);
    add(prefix + ".mlp_gain", b.mlp_gain, g);
    add(prefix + ".mlp.w1", b.mlp.w1, g);
    add(prefix + ".mlp.b1", b.mlp.b1, g);
    add(prefix + ".mlp.w2", b.mlp.w2, g);
    add(prefix + ".mlp.b2", b.mlp.b2, g);
  }
};

}  // namespace

Model make_model(ModelConfig cfg, uint64_t seed) {
  cfg.vision.lang_dim = cfg.lang_dim;
  cfg.decoder.dim = cfg.lang_dim;
  cfg.decoder.vocab_size = Vocab::standard().size();
  cfg.validate();

  Model m;
  m.cfg = cfg;
  m.vocab = &Vocab::standard();
  m.plan = plan_from_config(cfg);

  Rng rng(seed);
  m.params.vision = make_vision_encoder_params(cfg.vision, rng);
  m.params.vision_merger = make_spatial_merger_params(cfg.vision, rng);
  m.params.geometry = make_geometry_encoder_params(cfg.geometry, rng);
  const std::vector<int> tap_set = cfg.taps();
  for (size_t i = 0; i < tap_set.size(); ++i)
    m.params.mergers.push_back(make_geometry_merger_params(
        cfg.geometry.dim, cfg.vision.merge, cfg.effective_merger_mlp(), cfg.lang_dim, rng));
  m.params.decoder = make_decoder_params(cfg.decoder, rng);

  Registrar reg{&m.params.entries};
  {
    const auto g = ParamGroup::kVisionEncoder;
    reg.add("vision.patch_w", m.params.vision.patch_w, g);
    reg.add("vision.patch_b", m.params.vision.patch_b, g);
    reg.add("vision.pos_row", m.params.vision.pos_row, g);
    reg.add("vision.pos_col", m.params.vision.pos_col, g);
    for (size_t i = 0; i < m.params.vision.blocks.size(); ++i)
      reg.add_block("vision.block" + std::to_string(i), m.params.vision.blocks[i], g);
  }
  {
    // The spatial merger is a fusion module: trainable alongside the
    // geometry mergers while the encoder towers stay frozen.
    const auto g = ParamGroup::kMergers;
    reg.add("vision_merger.norm_gain", m.params.vision_merger.norm_gain, g);
    reg.add("vision_merger.w1", m.params.vision_merger.w1, g);
    reg.add("vision_merger.b1", m.params.vision_merger.b1, g);
    reg.add("vision_merger.w2", m.params.vision_merger.w2, g);
    reg.add("vision_merger.b2", m.params.vision_merger.b2, g);
  }
  {
    const auto g = ParamGroup::kGeometryEncoder;
    reg.add("geometry.patch_w", m.params.geometry.patch_w, g);
    reg.add("geometry.patch_b", m.params.geometry.patch_b, g);
    reg.add("geometry.pos_row", m.params.geometry.pos_row, g);
    reg.add("geometry.pos_col", m.params.geometry.pos_col, g);
    reg.add("geometry.camera_token", m.params.geometry.camera_token, g);
    reg.add("geometry.register_tokens", m.params.geometry.register_tokens, g);
    reg.add("geometry.view_embed", m.params.geometry.view_embed, g);
    for (size_t i = 0; i < m.params.geometry.blocks.size(); ++i)
      reg.add_block("geometry.block" + std::to_string(i), m.params.geometry.blocks[i], g);
  }
  for (size_t i = 0; i < m.params.mergers.size(); ++i) {
    const auto g = ParamGroup::kMergers;
    const std::string prefix = "merger.tap" + std::to_string(tap_set[i]);
    reg.add(prefix + ".gain", m.params.mergers[i].gain, g);
    reg.add(prefix + ".w1", m.params.mergers[i].w1, g);
    reg.add(prefix + ".b1", m.params.mergers[i].b1, g);
    reg.add(prefix + ".w2", m.params.mergers[i].w2, g);
    reg.add(prefix + ".b2", m.params.mergers[i].b2, g);
  }
  {
    const auto g = ParamGroup::kDecoder;
    reg.add("decoder.tok_embed", m.params.decoder.tok_embed, g);
    reg.add("decoder.pos_embed", m.params.decoder.pos_embed, g);
    for (size_t i = 0; i < m.params.decoder.blocks.size(); ++i)
      reg.add_block("decoder.block" + std::to_string(i), m.params.decoder.blocks[i], g);
    reg.add("decoder.final_gain", m.params.decoder.final_gain, g);
    reg.add("decoder.head_w", m.params.decoder.head_w, g);
    reg.add("decoder.head_b", m.params.decoder.head_b, g);
  }
  return m;
}

Tensor encode_vision_merged(const Model& m, const Tensor& vision_frames) {
  if (!vision_frames.defined() || vision_frames.ndim() != 3)
    throw ShapeError("vision frames must be (K x H x W)");
  PatchGrid grid = m.grid_for(vision_frames.dim(1), vision_frames.dim(2));
  std::vector<Tensor> tokens = vision_encode(vision_frames, m.cfg.vision, m.params.vision);
  if (tokens.empty()) throw ShapeError("no frames to encode");
  std::vector<Tensor> merged;
  merged.reserve(tokens.size());
  for (const Tensor& t : tokens)
    merged.push_back(spatial_merge(t, grid, m.cfg.vision, m.params.vision_merger));
  return merged.size() == 1 ? merged[0] : concat_rows(merged);
}

std::map<int, Tensor> project_geometry_taps(const Model& m, const Tensor& geometry_frames,
                                            const std::vector<int>& taps) {
  std::map<int, Tensor> out;
  if (taps.empty()) return out;
  PatchGrid grid = m.grid_for(geometry_frames.dim(1), geometry_frames.dim(2));
  GeometryTokenSet set = geometry_encode(geometry_frames, m.cfg.geometry, m.params.geometry);
  const std::vector<int> tap_set = m.cfg.taps();
  for (int tap : taps) {
    auto it = std::find(tap_set.begin(), tap_set.end(), tap);
    if (it == tap_set.end())
      throw FusionError("tap " + std::to_string(tap) + " is not configured");
    const size_t pos = static_cast<size_t>(it - tap_set.begin());
    std::vector<Tensor> views;
    views.reserve(static_cast<size_t>(set.views));
    for (int v = 0; v < set.views; ++v)
      views.push_back(window_reorder(set.patch_tokens(pos, v), grid));
    Tensor stacked = views.size() == 1 ? views[0] : concat_rows(views);
    out[tap] = project_geometry(stacked, m.params.mergers[pos], grid, m.cfg.geometry.norm_eps);
  }
  return out;
}

SampleForward model_forward(const Model& m, const QASample& sample, bool with_answer,
                            DecodeSession* capture) {
  Tensor vis = encode_vision_merged(m, sample.vision_frames);
  std::map<int, Tensor> geo =
      project_geometry_taps(m, sample.geometry_frames, m.plan.taps_needed());
  if (!m.plan.gvf_layers.empty()) {
    std::vector<Tensor> layers;
    layers.reserve(m.plan.gvf_layers.size());
    for (int t : m.plan.gvf_layers) layers.push_back(geo.at(t));
    vis = gvf_fuse(vis, layers);
  }
  SampleForward fw;
  fw.seq = build_sequence(vis, sample.question_ids,
                          with_answer ? sample.answer_ids : std::vector<int>{}, *m.vocab,
                          m.params.decoder, m.cfg.decoder);
  fw.logits = forward_with_fusion(fw.seq, m.plan, geo, m.params.decoder, m.cfg.decoder,
                                  m.cfg.inject_site, capture);
  return fw;
}

std::vector<int> model_greedy_decode(const Model& m, const QASample& sample, int max_new) {
  NoGradGuard ng;
  Tensor vis = encode_vision_merged(m, sample.vision_frames);
  std::map<int, Tensor> geo =
      project_geometry_taps(m, sample.geometry_frames, m.plan.taps_needed());
  if (!m.plan.gvf_layers.empty()) {
    std::vector<Tensor> layers;
    for (int t : m.plan.gvf_layers) layers.push_back(geo.at(t));
    vis = gvf_fuse(vis, layers);
  }
  MultimodalSequence seq = build_sequence(vis, sample.question_ids, {}, *m.vocab,
                                          m.params.decoder, m.cfg.decoder);
  return greedy_decode(seq, m.plan, geo, m.params.decoder, m.cfg.decoder, *m.vocab, max_new,
                       m.cfg.inject_site);
}

int predict_choice(const Model& m, const QASample& sample) {
  NoGradGuard ng;
  SampleForward fw = model_forward(m, sample, /*with_answer=*/false);
  const Index last = fw.logits.outer() - 1;
  const int a = m.vocab->options()[0];
  const int b = m.vocab->options()[1];
  const double la = fw.logits.at(last, a);
  const double lb = fw.logits.at(last, b);
  if (la == lb) return std::min(a, b);
  return la > lb ? a : b;
}

double eval_suite_accuracy(const Model& m, const DataConfig& data, TaskLevel level, int count) {
  if (count < 1) throw ArgumentError("eval count must be >= 1");
  int correct = 0;
  for (int i = 0; i < count; ++i) {
    QASample sample = gen_sample(eval_sample_seed(data, level, i), level, data, *m.vocab);
    if (predict_choice(m, sample) == sample.answer_ids.at(0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(count);
}

void randomize_merger_outputs(Model& m, Rng& rng, double stddev) {
  for (GeometryMergerParams& g : m.params.mergers) {
    for (Index i = 0; i < g.w2.numel(); ++i) g.w2.at(i) = rng.normal() * stddev;
    for (Index i = 0; i < g.b2.numel(); ++i) g.b2.at(i) = rng.normal() * stddev;
  }
}

}  // namespace sstk
