#include "sstk/alignment.hpp"

#include <cmath>

#include "sstk/ops.hpp"

namespace sstk {

void PatchGrid::validate() const {
  if (h_patch <= 0 || w_patch <= 0 || s <= 0 || p <= 0)
    throw AlignmentError("patch grid extents must be positive");
  if (h_patch % s != 0 || w_patch % s != 0)
    throw AlignmentError("patch grid " + std::to_string(h_patch) + "x" + std::to_string(w_patch) +
                         " not divisible by merge size " + std::to_string(s));
}

std::vector<Index> window_permutation(const PatchGrid& grid) {
  grid.validate();
  const Index wh = grid.h_patch / grid.s;
  const Index ww = grid.w_patch / grid.s;
  std::vector<Index> perm;
  perm.reserve(static_cast<size_t>(grid.patches()));
  for (Index bh = 0; bh < wh; ++bh)
    for (Index bw = 0; bw < ww; ++bw)
      for (Index sh = 0; sh < grid.s; ++sh)
        for (Index sw = 0; sw < grid.s; ++sw)
          perm.push_back((bh * grid.s + sh) * grid.w_patch + (bw * grid.s + sw));
  return perm;
}

Tensor window_reorder(const Tensor& tokens, const PatchGrid& grid) {
  if (tokens.outer() != grid.patches())
    throw AlignmentError("window_reorder: token count " + std::to_string(tokens.outer()) +
                         " does not match grid patches " + std::to_string(grid.patches()));
  return gather_rows(tokens, window_permutation(grid));
}

Tensor strip_special_tokens(const Tensor& layer_output, int views, int registers,
                            Index patches_per_view) {
  if (views <= 0 || registers < 0 || patches_per_view <= 0)
    throw AlignmentError("strip_special_tokens: invalid layout");
  const Index per_view = 1 + registers + patches_per_view;
  if (layer_output.outer() != static_cast<Index>(views) * per_view)
    throw AlignmentError("strip_special_tokens: expected " + std::to_string(views) + " views of " +
                         std::to_string(per_view) + " tokens, got " +
                         std::to_string(layer_output.outer()));
  std::vector<Tensor> parts;
  parts.reserve(static_cast<size_t>(views));
  for (int v = 0; v < views; ++v)
    parts.push_back(
        slice_rows(layer_output, static_cast<Index>(v) * per_view + 1 + registers, patches_per_view));
  return views == 1 ? parts[0] : concat_rows(parts);
}

namespace {

Index round_half_away(double x) {
  return static_cast<Index>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

}  // namespace

std::pair<Index, Index> plan_resolution(Index h_in, Index w_in, Index target, Index p, Index s,
                                        ResizeSide side) {
  const Index unit = p * s;
  if (p <= 0 || s <= 0) throw ResolutionError("patch and merge sizes must be positive");
  if (h_in < unit || w_in < unit || target < unit)
    throw ResolutionError("input or target smaller than effective patch unit " +
                          std::to_string(unit));

  const bool h_is_ref = (side == ResizeSide::kShort) ? (h_in <= w_in) : (h_in >= w_in);
  double scale = static_cast<double>(target) / static_cast<double>(h_is_ref ? h_in : w_in);
  Index h = h_is_ref ? target : round_half_away(static_cast<double>(h_in) * scale);
  Index w = h_is_ref ? round_half_away(static_cast<double>(w_in) * scale) : target;

  h -= h % unit;
  w -= w % unit;
  if (h < unit || w < unit)
    throw ResolutionError("planned resolution collapses below one patch unit");
  return {h, w};
}

FramePlan plan_frames(double t_sec, double interval_sec, int k_min, int k_max, Index frames) {
  if (interval_sec <= 0) throw SamplingError("frame interval must be positive");
  if (k_min < 1 || k_min > k_max) throw SamplingError("invalid frame-count bounds");
  if (frames < k_min)
    throw SamplingError("only " + std::to_string(frames) + " source frames for k_min=" +
                        std::to_string(k_min));

  Index k = round_half_away(t_sec / interval_sec);
  if (k < k_min) k = k_min;
  if (k > k_max) k = k_max;
  if (k > frames) k = frames;

  FramePlan plan;
  plan.k = static_cast<int>(k);
  plan.interval_sec = interval_sec;
  plan.k_min = k_min;
  plan.k_max = k_max;
  if (k == 1) {
    plan.indices = {0};
  } else {
    plan.indices.reserve(static_cast<size_t>(k));
    for (Index i = 0; i < k; ++i) plan.indices.push_back(i * (frames - 1) / (k - 1));
  }
  return plan;
}

}  // namespace sstk
