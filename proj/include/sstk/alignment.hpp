// Index arithmetic that keeps geometry tokens spatially congruent with merged
// vision tokens: window reordering, special-token stripping, resolution
// planning, frame sampling.
#pragma once

#include <vector>

#include "sstk/tensor.hpp"

namespace sstk {

struct PatchGrid {
  Index h_patch = 0;  // rows of patch tokens (H / p)
  Index w_patch = 0;  // columns of patch tokens (W / p)
  Index s = 1;        // spatial merge size
  Index p = 1;        // patch edge in pixels

  Index patches() const { return h_patch * w_patch; }
  Index merged() const { return (h_patch / s) * (w_patch / s); }
  void validate() const;
};

struct FramePlan {
  int k = 0;                        // frame count
  std::vector<Index> indices;      // strictly increasing source-frame indices
  double interval_sec = 0.0;
  int k_min = 0;
  int k_max = 0;
};

// Permutation that enumerates s x s merge windows row-major, row-major within
// each window. Consecutive groups of s^2 outputs cover exactly one window.
std::vector<Index> window_permutation(const PatchGrid& grid);

// Apply the window permutation to a token sequence (differentiable for
// tensors: rows move, gradients move back).
Tensor window_reorder(const Tensor& tokens, const PatchGrid& grid);

template <typename T>
std::vector<T> window_reorder(const std::vector<T>& items, const PatchGrid& grid) {
  if (static_cast<Index>(items.size()) != grid.patches())
    throw AlignmentError("window_reorder: item count does not match grid");
  std::vector<Index> perm = window_permutation(grid);
  std::vector<T> out;
  out.reserve(items.size());
  for (Index src : perm) out.push_back(items[static_cast<size_t>(src)]);
  return out;
}

// Drop the leading camera (1) and register (R) tokens of each view; the
// trailing N patch tokens per view are kept in order and views stay
// concatenated in input order. layer_output: (K*(1+R+N)) x D.
Tensor strip_special_tokens(const Tensor& layer_output, int views, int registers,
                            Index patches_per_view);

enum class ResizeSide { kShort, kLong };

// Scale one side to `target` (aspect preserved, nearest-integer rounding),
// then trim each side down to the largest multiple of p*s (center trim:
// floor(excess/2) off the leading edge).
std::pair<Index, Index> plan_resolution(Index h_in, Index w_in, Index target, Index p, Index s,
                                        ResizeSide side = ResizeSide::kShort);

// K = clip(round(T_sec / interval), k_min, k_max), half away from zero;
// indices[i] = floor(i * (F - 1) / (K - 1)) for K > 1, else {0}.
FramePlan plan_frames(double t_sec, double interval_sec, int k_min, int k_max, Index frames);

}  // namespace sstk
