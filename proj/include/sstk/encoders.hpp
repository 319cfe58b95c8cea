// Toy vision encoder with spatial merger and toy geometry encoder with
// camera/register/patch token structure and tappable intermediate layers.
#pragma once

#include <map>
#include <vector>

#include "sstk/alignment.hpp"
#include "sstk/blocks.hpp"
#include "sstk/tensor.hpp"

namespace sstk {

struct VisionEncoderConfig {
  int depth = 4;
  int dim = 32;
  int heads = 4;
  int patch = 4;
  int merge = 2;
  int lang_dim = 64;            // merger output dimension
  int max_patches_per_side = 16;
  double norm_eps = 1e-6;
  void validate() const;
};

struct GeometryEncoderConfig {
  int depth = 8;
  int dim = 48;
  int heads = 4;
  int registers = 2;
  int patch = 4;
  std::vector<double> tap_fractions{0.5, 0.75, 1.0};
  int max_views = 8;
  int max_patches_per_side = 16;
  double norm_eps = 1e-6;
  void validate() const;
};

// Zero-based tap layer indices: round(frac * depth) - 1, validated distinct
// and within [0, depth).
std::vector<int> tap_layer_indices(const GeometryEncoderConfig& cfg);

struct VisionEncoderParams {
  Tensor patch_w;  // (p^2 x dim)
  Tensor patch_b;
  Tensor pos_row;  // (max_patches_per_side x dim), added per patch row
  Tensor pos_col;
  std::vector<BlockParams> blocks;
};

// The merger that collapses each s x s window of vision patch tokens into one
// language-dimension token: rms_norm -> window concat -> two-layer GELU map.
struct SpatialMergerParams {
  Tensor norm_gain;  // (dim)
  Tensor w1;         // (s^2 * dim x s^2 * dim)
  Tensor b1;
  Tensor w2;         // (s^2 * dim x lang_dim)
  Tensor b2;
};

struct GeometryEncoderParams {
  Tensor patch_w;
  Tensor patch_b;
  Tensor pos_row;
  Tensor pos_col;
  Tensor camera_token;     // (1 x dim), shared across views
  Tensor register_tokens;  // (registers x dim), shared across views
  Tensor view_embed;       // (max_views x dim), added to every token of a view
  std::vector<BlockParams> blocks;
};

VisionEncoderParams make_vision_encoder_params(const VisionEncoderConfig& cfg, Rng& rng);
SpatialMergerParams make_spatial_merger_params(const VisionEncoderConfig& cfg, Rng& rng);
GeometryEncoderParams make_geometry_encoder_params(const GeometryEncoderConfig& cfg, Rng& rng);

// Per-view, per-tap-layer hidden states of the geometry encoder. Each tensor
// holds all views concatenated: (views * (1 + registers + patches)) x dim.
struct GeometryTokenSet {
  int views = 0;
  int registers = 0;
  Index patches_per_view = 0;
  std::vector<int> tap_layers;
  std::vector<Tensor> tap_hidden;

  const Tensor& hidden_for_layer(int layer) const;
  Tensor view_tokens(size_t tap_pos, int view) const;
  Tensor camera_token(size_t tap_pos, int view) const;
  Tensor register_tokens(size_t tap_pos, int view) const;
  Tensor patch_tokens(size_t tap_pos, int view) const;
};

// Non-overlapping p x p pixel blocks of one frame, flattened row-major into a
// constant (N x p^2) tensor.
Tensor patchify_frame(const Tensor& frames, int frame, int patch);

// frames: (K x H x W). Returns one (N x dim) token sequence per frame.
std::vector<Tensor> vision_encode(const Tensor& frames, const VisionEncoderConfig& cfg,
                                  const VisionEncoderParams& params);

// tokens: (N x dim) for one frame. Returns (N/s^2 x lang_dim); merged token k
// depends only on the s^2 tokens of window k, in window_reorder group order.
Tensor spatial_merge(const Tensor& tokens, const PatchGrid& grid, const VisionEncoderConfig& cfg,
                     const SpatialMergerParams& params);

// Joint forward over all views (attention spans the concatenated sequence),
// recording hidden states at each tap layer.
GeometryTokenSet geometry_encode(const Tensor& frames, const GeometryEncoderConfig& cfg,
                                 const GeometryEncoderParams& params);

// Same forward, recording at an explicit ascending list of zero-based layers
// (analysis probes depths outside the fusion tap set).
GeometryTokenSet geometry_encode_layers(const Tensor& frames, const GeometryEncoderConfig& cfg,
                                        const GeometryEncoderParams& params,
                                        const std::vector<int>& layers);

// Hidden patch tokens of one frame after each requested block (zero-based,
// ascending), keyed by layer index.
std::map<int, Tensor> vision_hidden_layers(const Tensor& frames, int frame,
                                           const VisionEncoderConfig& cfg,
                                           const VisionEncoderParams& params,
                                           const std::vector<int>& layers);

}  // namespace sstk
