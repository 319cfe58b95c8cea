#include "sstk/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace sstk {

int depth_to_layer(double frac, int encoder_depth) {
  if (encoder_depth < 1) throw ArgumentError("encoder depth must be >= 1");
  if (!(frac > 0.0)) throw ArgumentError("depth fraction must be positive");
  int layer = static_cast<int>(std::llround(frac * encoder_depth));
  return std::clamp(layer, 1, encoder_depth);
}

SimilarityMap roi_similarity_map(const Tensor& features, Index h_patch, Index w_patch,
                                 std::array<Index, 4> roi) {
  if (features.outer() != h_patch * w_patch)
    throw ArgumentError("feature count does not match the patch grid");
  const auto [r0, c0, r1, c1] = roi;
  if (r0 < 0 || c0 < 0 || r1 < r0 || c1 < c0 || r1 >= h_patch || c1 >= w_patch)
    throw ArgumentError("ROI outside the patch grid");

  ConstMatMap f = features.mat();
  Eigen::VectorXd descriptor = Eigen::VectorXd::Zero(features.last_dim());
  for (Index r = r0; r <= r1; ++r)
    for (Index c = c0; c <= c1; ++c) descriptor += f.row(r * w_patch + c).transpose();
  descriptor /= static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
  const double dnorm = descriptor.norm();

  SimilarityMap map;
  map.h = h_patch;
  map.w = w_patch;
  map.roi = roi;
  map.values.resize(h_patch, w_patch);
  for (Index r = 0; r < h_patch; ++r)
    for (Index c = 0; c < w_patch; ++c) {
      const Eigen::VectorXd v = f.row(r * w_patch + c).transpose();
      const double vnorm = v.norm();
      map.values(r, c) =
          (dnorm == 0.0 || vnorm == 0.0) ? 0.0 : descriptor.dot(v) / (dnorm * vnorm);
    }
  return map;
}

void emit_heatmap(const SimilarityMap& map, const std::string& path) {
  if (map.h < 1 || map.w < 1) throw ArgumentError("empty similarity map");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out << "P5\n" << map.w << " " << map.h << "\n255\n";
  for (Index r = 0; r < map.h; ++r)
    for (Index c = 0; c < map.w; ++c) {
      const double byte = std::floor((map.values(r, c) + 1.0) / 2.0 * 255.0 + 0.5);
      out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(byte, 0.0, 255.0))));
    }
  if (!out) throw FileError("short write to '" + path + "'");
}

double mra_metric(double pred, double truth, const std::vector<double>& thresholds) {
  if (truth == 0.0) throw MetricError("mra_metric undefined for zero truth");
  if (thresholds.empty()) throw MetricError("mra_metric requires thresholds");
  const double rel = std::abs(pred - truth) / std::abs(truth);
  int hits = 0;
  for (double c : thresholds)
    if (rel < 1.0 - c) ++hits;
  return static_cast<double>(hits) / static_cast<double>(thresholds.size());
}

std::vector<double> standard_mra_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.50 + 0.05 * i);
  return t;
}

}  // namespace sstk
