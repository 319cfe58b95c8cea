// Representation analysis: fractional-depth layer selection, ROI patch
// cosine-similarity maps over encoder features, PGM heatmap emission, and the
// relative-accuracy metric for numeric answers.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "sstk/tensor.hpp"

namespace sstk {

struct SimilarityMap {
  Index h = 0, w = 0;
  RowMatrixXd values;  // cosine similarities in [-1, 1]
  std::string encoder_tag;
  double depth_fraction = 0.0;
  std::array<Index, 4> roi{0, 0, 0, 0};  // r0, c0, r1, c1 inclusive
};

// 1-based layer index at a fractional depth: round(frac * depth), clamped to
// [1, depth].
int depth_to_layer(double frac, int encoder_depth);

// features: (h_patch*w_patch x D), row-major over the grid. The ROI
// descriptor is the mean of the ROI patch vectors; zero-norm vectors map to
// similarity 0.
SimilarityMap roi_similarity_map(const Tensor& features, Index h_patch, Index w_patch,
                                 std::array<Index, 4> roi);

// Binary PGM (P5): "P5\n{w} {h}\n255\n" then w*h bytes with
// pixel = round_half_up((v + 1) / 2 * 255).
void emit_heatmap(const SimilarityMap& map, const std::string& path);

// Fraction of thresholds c with |pred - truth| / |truth| < 1 - c (strict).
double mra_metric(double pred, double truth, const std::vector<double>& thresholds);

// c = 0.50, 0.55, ..., 0.95.
std::vector<double> standard_mra_thresholds();

}  // namespace sstk
