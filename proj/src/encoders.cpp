#include "sstk/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "sstk/ops.hpp"

namespace sstk {

void VisionEncoderConfig::validate() const {
  if (depth < 1) throw ConfigError("vision encoder depth must be >= 1");
  if (dim < 1 || heads < 1 || dim % heads != 0)
    throw ConfigError("vision encoder dim must be divisible by heads");
  if (patch < 1 || merge < 1) throw ConfigError("vision patch/merge sizes must be positive");
  if (lang_dim < 1) throw ConfigError("vision merger output dim must be positive");
}

void GeometryEncoderConfig::validate() const {
  if (depth < 1) throw ConfigError("geometry encoder depth must be >= 1");
  if (dim < 1 || heads < 1 || dim % heads != 0)
    throw ConfigError("geometry encoder dim must be divisible by heads");
  if (registers < 0) throw ConfigError("register count must be >= 0");
  if (patch < 1) throw ConfigError("geometry patch size must be positive");
  if (max_views < 1) throw ConfigError("geometry max_views must be >= 1");
  if (tap_fractions.empty()) throw ConfigError("at least one tap fraction required");
  for (size_t i = 0; i < tap_fractions.size(); ++i) {
    if (!(tap_fractions[i] > 0.0 && tap_fractions[i] <= 1.0))
      throw ConfigError("tap fractions must lie in (0, 1]");
    if (i > 0 && tap_fractions[i] <= tap_fractions[i - 1])
      throw ConfigError("tap fractions must be strictly increasing");
  }
  tap_layer_indices(*this);  // throws if derived indices collide
}

std::vector<int> tap_layer_indices(const GeometryEncoderConfig& cfg) {
  std::vector<int> taps;
  taps.reserve(cfg.tap_fractions.size());
  for (double f : cfg.tap_fractions) {
    int idx = static_cast<int>(std::llround(f * cfg.depth)) - 1;
    if (idx < 0) idx = 0;
    if (idx >= cfg.depth)
      throw ConfigError("tap index " + std::to_string(idx) + " >= encoder depth " +
                        std::to_string(cfg.depth));
    taps.push_back(idx);
  }
  for (size_t i = 1; i < taps.size(); ++i)
    if (taps[i] <= taps[i - 1]) throw ConfigError("derived tap indices are not distinct");
  return taps;
}

namespace {

Tensor weight(Index rows, Index cols, Rng& rng) {
  return Tensor::randn({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

// Encoder towers stay frozen at their random initialization, so their blocks
// use damped output projections: each layer perturbs rather than scrambles
// the patch-embedding residual stream.
constexpr double kEncoderBlockOutScale = 0.35;

std::vector<BlockParams> make_blocks(int depth, int dim, int mlp_width, Rng& rng) {
  std::vector<BlockParams> blocks;
  blocks.reserve(static_cast<size_t>(depth));
  for (int i = 0; i < depth; ++i)
    blocks.push_back(make_block_params(dim, mlp_width, rng, kEncoderBlockOutScale));
  return blocks;
}

// Learned additive 2-D position embedding, factored into row and column terms.
Tensor position_bias(const Tensor& pos_row, const Tensor& pos_col, Index h_patch, Index w_patch) {
  if (h_patch > pos_row.outer() || w_patch > pos_col.outer())
    throw AlignmentError("patch grid exceeds the position-embedding capacity");
  std::vector<Index> row_idx, col_idx;
  row_idx.reserve(static_cast<size_t>(h_patch * w_patch));
  col_idx.reserve(static_cast<size_t>(h_patch * w_patch));
  for (Index r = 0; r < h_patch; ++r)
    for (Index c = 0; c < w_patch; ++c) {
      row_idx.push_back(r);
      col_idx.push_back(c);
    }
  return add(gather_rows(pos_row, row_idx), gather_rows(pos_col, col_idx));
}

}  // namespace

VisionEncoderParams make_vision_encoder_params(const VisionEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  VisionEncoderParams p;
  const Index pp = static_cast<Index>(cfg.patch) * cfg.patch;
  p.patch_w = weight(pp, cfg.dim, rng);
  p.patch_b = Tensor::zeros({cfg.dim});
  p.pos_row = Tensor::randn({cfg.max_patches_per_side, cfg.dim}, rng, 0.1);
  p.pos_col = Tensor::randn({cfg.max_patches_per_side, cfg.dim}, rng, 0.1);
  p.blocks = make_blocks(cfg.depth, cfg.dim, 2 * cfg.dim, rng);
  return p;
}

SpatialMergerParams make_spatial_merger_params(const VisionEncoderConfig& cfg, Rng& rng) {
  SpatialMergerParams p;
  const Index win = static_cast<Index>(cfg.merge) * cfg.merge * cfg.dim;
  p.norm_gain = Tensor::constant({cfg.dim}, 1.0);
  p.w1 = weight(win, win, rng);
  p.b1 = Tensor::zeros({win});
  p.w2 = weight(win, cfg.lang_dim, rng);
  p.b2 = Tensor::zeros({cfg.lang_dim});
  return p;
}

GeometryEncoderParams make_geometry_encoder_params(const GeometryEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  GeometryEncoderParams p;
  const Index pp = static_cast<Index>(cfg.patch) * cfg.patch;
  p.patch_w = weight(pp, cfg.dim, rng);
  p.patch_b = Tensor::zeros({cfg.dim});
  p.pos_row = Tensor::randn({cfg.max_patches_per_side, cfg.dim}, rng, 0.1);
  p.pos_col = Tensor::randn({cfg.max_patches_per_side, cfg.dim}, rng, 0.1);
  p.camera_token = Tensor::randn({1, cfg.dim}, rng, 0.5);
  p.register_tokens = cfg.registers > 0 ? Tensor::randn({cfg.registers, cfg.dim}, rng, 0.5)
                                        : Tensor::zeros({1, cfg.dim});
  p.view_embed = Tensor::randn({cfg.max_views, cfg.dim}, rng, 0.1);
  p.blocks = make_blocks(cfg.depth, cfg.dim, 2 * cfg.dim, rng);
  return p;
}

Tensor patchify_frame(const Tensor& frames, int frame, int patch) {
  if (frames.ndim() != 3) throw ShapeError("frames must be (K x H x W)");
  const Index k = frames.dim(0);
  const Index h = frames.dim(1);
  const Index w = frames.dim(2);
  if (frame < 0 || frame >= k) throw ShapeError("frame index out of range");
  if (h % patch != 0 || w % patch != 0)
    throw AlignmentError("frame " + std::to_string(h) + "x" + std::to_string(w) +
                         " not a multiple of patch size " + std::to_string(patch));
  const Index hp = h / patch;
  const Index wp = w / patch;
  Tensor out = Tensor::zeros({hp * wp, static_cast<Index>(patch) * patch});
  const double* base = frames.values().data() + static_cast<Index>(frame) * h * w;
  for (Index pr = 0; pr < hp; ++pr)
    for (Index pc = 0; pc < wp; ++pc) {
      Index row = pr * wp + pc;
      Index o = 0;
      for (Index dr = 0; dr < patch; ++dr)
        for (Index dc = 0; dc < patch; ++dc)
          out.at(row, o++) = base[(pr * patch + dr) * w + pc * patch + dc];
    }
  return out;
}

std::vector<Tensor> vision_encode(const Tensor& frames, const VisionEncoderConfig& cfg,
                                  const VisionEncoderParams& params) {
  cfg.validate();
  std::vector<Tensor> out;
  if (!frames.defined() || frames.numel() == 0) return out;
  if (frames.ndim() != 3) throw ShapeError("frames must be (K x H x W)");
  const Index k = frames.dim(0);
  const Index h = frames.dim(1);
  const Index w = frames.dim(2);
  const Index unit = static_cast<Index>(cfg.patch) * cfg.merge;
  if (h % unit != 0 || w % unit != 0)
    throw AlignmentError("frame sides must be multiples of patch*merge = " + std::to_string(unit));

  Tensor pos = position_bias(params.pos_row, params.pos_col, h / cfg.patch, w / cfg.patch);
  out.reserve(static_cast<size_t>(k));
  for (Index f = 0; f < k; ++f) {
    Tensor tok = add(add_row(matmul(patchify_frame(frames, static_cast<int>(f), cfg.patch),
                                    params.patch_w),
                             params.patch_b),
                     pos);
    for (const BlockParams& b : params.blocks)
      tok = transformer_block(tok, b, cfg.heads, /*causal=*/false, cfg.norm_eps);
    out.push_back(tok);
  }
  return out;
}

Tensor spatial_merge(const Tensor& tokens, const PatchGrid& grid, const VisionEncoderConfig& cfg,
                     const SpatialMergerParams& params) {
  grid.validate();
  if (tokens.outer() != grid.patches())
    throw AlignmentError("spatial_merge: token count " + std::to_string(tokens.outer()) +
                         " != grid patches " + std::to_string(grid.patches()));
  const Index win = grid.s * grid.s;
  Tensor normed = rms_norm(tokens, params.norm_gain, cfg.norm_eps);
  Tensor grouped = reshape(window_reorder(normed, grid), {grid.merged(), win * tokens.last_dim()});
  return add_row(matmul(gelu(add_row(matmul(grouped, params.w1), params.b1)), params.w2),
                 params.b2);
}

const Tensor& GeometryTokenSet::hidden_for_layer(int layer) const {
  for (size_t i = 0; i < tap_layers.size(); ++i)
    if (tap_layers[i] == layer) return tap_hidden[i];
  throw FusionError("no tap recorded for geometry layer " + std::to_string(layer));
}

Tensor GeometryTokenSet::view_tokens(size_t tap_pos, int view) const {
  const Index per_view = 1 + registers + patches_per_view;
  return slice_rows(tap_hidden.at(tap_pos), static_cast<Index>(view) * per_view, per_view);
}

Tensor GeometryTokenSet::camera_token(size_t tap_pos, int view) const {
  const Index per_view = 1 + registers + patches_per_view;
  return slice_rows(tap_hidden.at(tap_pos), static_cast<Index>(view) * per_view, 1);
}

Tensor GeometryTokenSet::register_tokens(size_t tap_pos, int view) const {
  if (registers == 0) throw ShapeError("no register tokens configured");
  const Index per_view = 1 + registers + patches_per_view;
  return slice_rows(tap_hidden.at(tap_pos), static_cast<Index>(view) * per_view + 1, registers);
}

Tensor GeometryTokenSet::patch_tokens(size_t tap_pos, int view) const {
  const Index per_view = 1 + registers + patches_per_view;
  return slice_rows(tap_hidden.at(tap_pos), static_cast<Index>(view) * per_view + 1 + registers,
                    patches_per_view);
}

GeometryTokenSet geometry_encode(const Tensor& frames, const GeometryEncoderConfig& cfg,
                                 const GeometryEncoderParams& params) {
  return geometry_encode_layers(frames, cfg, params, tap_layer_indices(cfg));
}

GeometryTokenSet geometry_encode_layers(const Tensor& frames, const GeometryEncoderConfig& cfg,
                                        const GeometryEncoderParams& params,
                                        const std::vector<int>& layers) {
  cfg.validate();
  if (layers.empty()) throw ConfigError("at least one layer must be recorded");
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] < 0 || layers[i] >= cfg.depth)
      throw ConfigError("recorded layer " + std::to_string(layers[i]) + " outside encoder depth");
    if (i > 0 && layers[i] <= layers[i - 1])
      throw ConfigError("recorded layers must be strictly increasing");
  }
  if (!frames.defined() || frames.ndim() != 3) throw ShapeError("frames must be (K x H x W)");
  const Index k = frames.dim(0);
  const Index h = frames.dim(1);
  const Index w = frames.dim(2);
  if (k > cfg.max_views)
    throw ConfigError("got " + std::to_string(k) + " views, max_views=" +
                      std::to_string(cfg.max_views));
  if (h % cfg.patch != 0 || w % cfg.patch != 0)
    throw AlignmentError("frame sides must be multiples of the patch size");

  const Index n = (h / cfg.patch) * (w / cfg.patch);
  Tensor pos = position_bias(params.pos_row, params.pos_col, h / cfg.patch, w / cfg.patch);

  std::vector<Tensor> views;
  views.reserve(static_cast<size_t>(k));
  for (Index f = 0; f < k; ++f) {
    Tensor patches = add(add_row(matmul(patchify_frame(frames, static_cast<int>(f), cfg.patch),
                                        params.patch_w),
                                 params.patch_b),
                         pos);
    std::vector<Tensor> parts;
    parts.push_back(params.camera_token);
    if (cfg.registers > 0) parts.push_back(params.register_tokens);
    parts.push_back(patches);
    Tensor seq = concat_rows(parts);
    // View identity: every token of view f carries the same learned offset.
    Tensor ve = slice_rows(params.view_embed, f, 1);
    views.push_back(add_row(seq, reshape(ve, {ve.numel()})));
  }
  Tensor hidden = k == 1 ? views[0] : concat_rows(views);

  GeometryTokenSet set;
  set.views = static_cast<int>(k);
  set.registers = cfg.registers;
  set.patches_per_view = n;
  set.tap_layers = layers;

  size_t next_tap = 0;
  for (int l = 0; l < cfg.depth && next_tap < set.tap_layers.size(); ++l) {
    hidden = transformer_block(hidden, params.blocks[static_cast<size_t>(l)], cfg.heads,
                               /*causal=*/false, cfg.norm_eps);
    if (l == set.tap_layers[next_tap]) {
      set.tap_hidden.push_back(hidden);
      ++next_tap;
    }
  }
  return set;
}

std::map<int, Tensor> vision_hidden_layers(const Tensor& frames, int frame,
                                           const VisionEncoderConfig& cfg,
                                           const VisionEncoderParams& params,
                                           const std::vector<int>& layers) {
  cfg.validate();
  if (layers.empty()) throw ConfigError("at least one layer must be recorded");
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] < 0 || layers[i] >= cfg.depth)
      throw ConfigError("recorded layer " + std::to_string(layers[i]) + " outside encoder depth");
    if (i > 0 && layers[i] <= layers[i - 1])
      throw ConfigError("recorded layers must be strictly increasing");
  }
  if (!frames.defined() || frames.ndim() != 3) throw ShapeError("frames must be (K x H x W)");
  const Index h = frames.dim(1);
  const Index w = frames.dim(2);
  if (h % cfg.patch != 0 || w % cfg.patch != 0)
    throw AlignmentError("frame sides must be multiples of the patch size");

  Tensor pos = position_bias(params.pos_row, params.pos_col, h / cfg.patch, w / cfg.patch);
  Tensor tok = add(add_row(matmul(patchify_frame(frames, frame, cfg.patch), params.patch_w),
                           params.patch_b),
                   pos);
  std::map<int, Tensor> out;
  size_t next = 0;
  for (int l = 0; l < cfg.depth && next < layers.size(); ++l) {
    tok = transformer_block(tok, params.blocks[static_cast<size_t>(l)], cfg.heads,
                            /*causal=*/false, cfg.norm_eps);
    if (l == layers[next]) {
      out[l] = tok;
      ++next;
    }
  }
  return out;
}

}  // namespace sstk
