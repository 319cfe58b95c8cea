// Layer-specific geometry token mergers, masked additive injection into the
// decoder, and the fusion plans (stack / reverse / GVF baselines).
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sstk/alignment.hpp"
#include "sstk/tensor.hpp"

namespace sstk {

enum class PlanMode { kNone, kStack, kStackReverse, kGvfSingle, kGvfMulti };
enum class InjectSite { kPreBlock, kPostBlock };

std::string to_string(PlanMode mode);
PlanMode plan_mode_from_string(const std::string& s);
std::string to_string(InjectSite site);
InjectSite inject_site_from_string(const std::string& s);

// Ordered (geometry tap layer -> decoder layer) assignment. Stack maps
// increasing taps onto increasing decoder layers; stack_reverse onto
// decreasing ones. GVF modes carry only the tap list (vision-path fusion).
struct FusionPlan {
  PlanMode mode = PlanMode::kNone;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> gvf_layers;

  bool uses_decoder_injection() const { return !pairs.empty(); }
  std::vector<int> taps_needed() const;
  int decoder_layer_for_tap(int tap) const;  // -1 if absent
};

FusionPlan make_fusion_plan(PlanMode mode, std::vector<int> tap_indices,
                            std::vector<int> decoder_layers);

// Bit per sequence position; ones mark the vision-token span.
struct VisionMask {
  std::vector<uint8_t> bits;
  Index ones() const;
};

// Per tap layer: rms gain over D_geo, then the two-layer projection of each
// s^2-token window into the language dimension.
struct GeometryMergerParams {
  Tensor gain;  // (d_geo)
  Tensor w1;    // (s^2 * d_geo x d_mlp)
  Tensor b1;    // (d_mlp)
  Tensor w2;    // (d_mlp x d_lang)
  Tensor b2;    // (d_lang)
};

// w2 and b2 start at zero so an untrained merger leaves the base model's
// behaviour bit-exact; w1 is small-random so its gradient path opens up as
// soon as w2 moves.
GeometryMergerParams make_geometry_merger_params(int d_geo, int merge, int d_mlp, int d_lang,
                                                 Rng& rng);

// tap_patch_tokens: (K*N x d_geo), already stripped of camera/register tokens
// and window-reordered. Output: (K*N/s^2 x d_lang); token k depends only on
// window k's s^2 inputs.
Tensor project_geometry(const Tensor& tap_patch_tokens, const GeometryMergerParams& merger,
                        const PatchGrid& grid, double eps = 1e-6);

// hidden: (N_tot x d_lang); geo row k is added at the k-th masked position;
// unmasked rows pass through bit-identical.
Tensor scatter_add_fusion(const Tensor& hidden, const Tensor& geo, const VisionMask& mask);

// merged_vision plus the sum of projected geometry layers (the vision-path
// GVF baseline); identity for an empty list.
Tensor gvf_fuse(const Tensor& merged_vision, const std::vector<Tensor>& projected_geo);

}  // namespace sstk
