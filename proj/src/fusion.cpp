#include "sstk/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sstk/ops.hpp"

namespace sstk {

std::string to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::kNone: return "none";
    case PlanMode::kStack: return "stack";
    case PlanMode::kStackReverse: return "stack_reverse";
    case PlanMode::kGvfSingle: return "gvf_single";
    case PlanMode::kGvfMulti: return "gvf_multi";
  }
  throw ConfigError("unhandled plan mode");
}

PlanMode plan_mode_from_string(const std::string& s) {
  if (s == "none") return PlanMode::kNone;
  if (s == "stack") return PlanMode::kStack;
  if (s == "stack_reverse") return PlanMode::kStackReverse;
  if (s == "gvf_single") return PlanMode::kGvfSingle;
  if (s == "gvf_multi") return PlanMode::kGvfMulti;
  throw ConfigError("unknown plan mode '" + s + "'");
}

std::string to_string(InjectSite site) {
  return site == InjectSite::kPreBlock ? "pre_block" : "post_block";
}

InjectSite inject_site_from_string(const std::string& s) {
  if (s == "pre_block") return InjectSite::kPreBlock;
  if (s == "post_block") return InjectSite::kPostBlock;
  throw ConfigError("unknown inject site '" + s + "'");
}

std::vector<int> FusionPlan::taps_needed() const {
  std::vector<int> taps;
  for (const auto& pr : pairs) taps.push_back(pr.first);
  for (int t : gvf_layers) taps.push_back(t);
  std::sort(taps.begin(), taps.end());
  taps.erase(std::unique(taps.begin(), taps.end()), taps.end());
  return taps;
}

int FusionPlan::decoder_layer_for_tap(int tap) const {
  for (const auto& pr : pairs)
    if (pr.first == tap) return pr.second;
  return -1;
}

FusionPlan make_fusion_plan(PlanMode mode, std::vector<int> tap_indices,
                            std::vector<int> decoder_layers) {
  FusionPlan plan;
  plan.mode = mode;
  switch (mode) {
    case PlanMode::kNone:
      return plan;
    case PlanMode::kStack:
    case PlanMode::kStackReverse: {
      if (tap_indices.empty()) throw ConfigError("stack plan requires at least one tap");
      if (tap_indices.size() != decoder_layers.size())
        throw ConfigError("stack plan needs matching tap and decoder-layer lists");
      std::set<int> tap_set(tap_indices.begin(), tap_indices.end());
      if (tap_set.size() != tap_indices.size())
        throw ConfigError("duplicate geometry tap indices in plan");
      std::set<int> layer_set(decoder_layers.begin(), decoder_layers.end());
      if (layer_set.size() != decoder_layers.size())
        throw ConfigError("duplicate decoder layers in plan");
      for (int d : decoder_layers)
        if (d < 0) throw ConfigError("negative decoder layer in plan");
      std::sort(tap_indices.begin(), tap_indices.end());
      std::sort(decoder_layers.begin(), decoder_layers.end());
      if (mode == PlanMode::kStackReverse)
        std::reverse(decoder_layers.begin(), decoder_layers.end());
      for (size_t i = 0; i < tap_indices.size(); ++i)
        plan.pairs.emplace_back(tap_indices[i], decoder_layers[i]);
      return plan;
    }
    case PlanMode::kGvfSingle:
      if (tap_indices.size() != 1)
        throw ConfigError("gvf_single takes exactly one tap, got " +
                          std::to_string(tap_indices.size()));
      plan.gvf_layers = std::move(tap_indices);
      return plan;
    case PlanMode::kGvfMulti: {
      if (tap_indices.empty()) throw ConfigError("gvf_multi requires at least one tap");
      std::set<int> tap_set(tap_indices.begin(), tap_indices.end());
      if (tap_set.size() != tap_indices.size())
        throw ConfigError("duplicate geometry tap indices in plan");
      std::sort(tap_indices.begin(), tap_indices.end());
      plan.gvf_layers = std::move(tap_indices);
      return plan;
    }
  }
  throw ConfigError("unhandled plan mode");
}

Index VisionMask::ones() const {
  Index n = 0;
  for (uint8_t b : bits) n += (b != 0);
  return n;
}

GeometryMergerParams make_geometry_merger_params(int d_geo, int merge, int d_mlp, int d_lang,
                                                 Rng& rng) {
  if (d_geo < 1 || merge < 1 || d_mlp < 1 || d_lang < 1)
    throw ConfigError("geometry merger dims must be positive");
  GeometryMergerParams p;
  const Index win = static_cast<Index>(merge) * merge * d_geo;
  p.gain = Tensor::constant({d_geo}, 1.0);
  p.w1 = Tensor::randn({win, d_mlp}, rng, 1.0 / std::sqrt(static_cast<double>(win)));
  p.b1 = Tensor::zeros({d_mlp});
  p.w2 = Tensor::zeros({d_mlp, d_lang});
  p.b2 = Tensor::zeros({d_lang});
  return p;
}

Tensor project_geometry(const Tensor& tap_patch_tokens, const GeometryMergerParams& merger,
                        const PatchGrid& grid, double eps) {
  grid.validate();
  const Index win = grid.s * grid.s;
  const Index rows = tap_patch_tokens.outer();
  if (rows % grid.patches() != 0)
    throw AlignmentError("project_geometry: " + std::to_string(rows) +
                         " tokens is not a whole number of views of " +
                         std::to_string(grid.patches()));
  if (rows % win != 0)
    throw AlignmentError("project_geometry: token count not divisible by window size");
  if (tap_patch_tokens.last_dim() != merger.gain.numel())
    throw AlignmentError("project_geometry: token dim does not match merger gain");

  Tensor normed = rms_norm(tap_patch_tokens, merger.gain, eps);
  Tensor grouped = reshape(normed, {rows / win, win * tap_patch_tokens.last_dim()});
  return add_row(matmul(gelu(add_row(matmul(grouped, merger.w1), merger.b1)), merger.w2),
                 merger.b2);
}

Tensor scatter_add_fusion(const Tensor& hidden, const Tensor& geo, const VisionMask& mask) {
  if (static_cast<Index>(mask.bits.size()) != hidden.outer())
    throw FusionError("vision mask length " + std::to_string(mask.bits.size()) +
                      " != sequence length " + std::to_string(hidden.outer()));
  if (geo.outer() != mask.ones())
    throw FusionError("geometry rows " + std::to_string(geo.outer()) + " != " +
                      std::to_string(mask.ones()) + " masked positions");
  if (geo.last_dim() != hidden.last_dim())
    throw FusionError("geometry feature dim != hidden dim");
  return scatter_add_rows(hidden, geo, mask.bits);
}

Tensor gvf_fuse(const Tensor& merged_vision, const std::vector<Tensor>& projected_geo) {
  if (projected_geo.empty()) return merged_vision;
  for (const Tensor& g : projected_geo)
    if (!shape_equal(g.shape(), merged_vision.shape()))
      throw FusionError("gvf_fuse: operand shape " + shape_str(g.shape()) +
                        " != vision shape " + shape_str(merged_vision.shape()));
  // Layers are summed first so that cancelling contributions add exactly
  // nothing to the vision tokens.
  Tensor total = projected_geo[0];
  for (size_t i = 1; i < projected_geo.size(); ++i) total = add(total, projected_geo[i]);
  return add(merged_vision, total);
}

}  // namespace sstk
