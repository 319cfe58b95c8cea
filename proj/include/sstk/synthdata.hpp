// Deterministic multimodal spatial-QA sample generator. Scenes are rendered
// into two single-channel frame stacks: an appearance channel whose pixel
// values never depend on depth, and a geometry channel whose disk values
// encode distance to the camera. Low-level samples compare the depth of two
// marked points; high-level samples compare cross-view object distances.
#pragma once

#include <utility>
#include <vector>

#include "sstk/alignment.hpp"
#include "sstk/tensor.hpp"
#include "sstk/vocab.hpp"

namespace sstk {

enum class TaskLevel { kLow, kHigh };
std::string to_string(TaskLevel level);
TaskLevel task_level_from_string(const std::string& s);

struct SceneObject {
  int id = 0;
  double x = 0, y = 0, z = 0;  // meters
  double radius = 0;
  int appearance = 0;  // class index, distinct per object within a scene
};

struct SceneBounds {
  double x_min = -3.5, x_max = 3.5;
  double y_min = -3.5, y_max = 3.5;
  double z_min = 1.5, z_max = 8.5;
};

struct SyntheticScene {
  std::vector<SceneObject> objects;
  SceneBounds bounds;
  int stations = 4;  // orthographic camera stations around the scene
};

// Orthographic projection of a world point onto camera station `station`.
struct Projection {
  double u = 0, v = 0;  // image-plane coordinates, world units
  double depth = 0;     // distance from the camera plane, meters
};
Projection project_point(double x, double y, double z, int station);

// Rendering constants (documented contract, asserted in tests). The two
// query markers share a high magnitude and differ by sign so they are
// separable from scene content and from each other.
constexpr double kDepthScaleMeters = 10.0;  // value = clip(1 - depth/10, 0, 1)
constexpr double kBackgroundValue = 0.0;
constexpr double kMarkerValueA = 2.5;
constexpr double kMarkerValueB = -2.5;
constexpr double kVisionNoiseSigma = 0.02;
double appearance_value(int appearance_class);
double depth_to_intensity(double depth_meters);

std::pair<Index, Index> world_to_pixel(double u, double v, Index h, Index w);

// 3 to 6 non-overlapping objects with distinct appearance classes; projected
// disks never overlap in any station view.
SyntheticScene gen_scene(uint64_t seed);

// Renders the listed stations at h x w. Vision channel: appearance value plus
// seeded per-pixel noise (never a function of depth). Geometry channel: depth
// intensity inside disks, background elsewhere. No markers here.
void render_views(const SyntheticScene& scene, const std::vector<Index>& stations, Index h,
                  Index w, uint64_t noise_seed, Tensor* vision_frames, Tensor* geometry_frames);

struct DataConfig {
  uint64_t seed = 7;
  Index height_in = 20;
  Index width_in = 20;
  Index target = 16;
  int patch = 4;
  int merge = 2;
  ResizeSide resize_side = ResizeSide::kShort;
  double task_mix_low = 0.5;  // fraction of low-level samples in training
  int eval_count = 128;
  double t_sec = 4.0;
  double frame_interval = 2.0;
  int k_min = 2;
  int k_max = 2;
  int stations = 4;
};

struct QASample {
  uint64_t seed = 0;
  TaskLevel level = TaskLevel::kLow;
  Tensor vision_frames;    // (K x H x W)
  Tensor geometry_frames;  // (K x H x W)
  std::vector<int> question_ids;
  std::vector<int> answer_ids;
  // Provenance for checkers and analysis (not serialized).
  SyntheticScene scene;
  FramePlan plan;
  std::vector<std::pair<Index, Index>> marks;  // pixel (row, col) of A then B
  std::vector<int> query_objects;              // object ids referenced by the question
  bool has_scene = false;
};

QASample gen_sample(uint64_t seed, TaskLevel level, const DataConfig& cfg, const Vocab& vocab);

// Recompute the answer token from the scene's 3-D ground truth.
int ground_truth_answer(const QASample& sample, const Vocab& vocab);

// Held-out evaluation stream; disjoint from the training seed range.
uint64_t eval_sample_seed(const DataConfig& cfg, TaskLevel level, int index);
// Training stream seed for the global sample index.
uint64_t train_sample_seed(const DataConfig& cfg, int64_t global_index);

}  // namespace sstk
