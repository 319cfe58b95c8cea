#include "sstk/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sstk {

namespace {

constexpr double kWorldHalf = 5.0;      // pixel window covers [-5, 5] in u and v
constexpr double kRadiusMin = 0.7;
constexpr double kRadiusMax = 1.1;
constexpr double kProjectedMargin = 0.8;   // extra gap between projected disks
constexpr double kLowDepthGap = 1.0;       // min |z_A - z_B| for low-level pairs
constexpr double kHighDistanceGap = 0.5;   // min |d12 - d13| for high-level triples
constexpr int kAppearanceClasses = 6;

}  // namespace

std::string to_string(TaskLevel level) { return level == TaskLevel::kLow ? "low" : "high"; }

TaskLevel task_level_from_string(const std::string& s) {
  if (s == "low") return TaskLevel::kLow;
  if (s == "high") return TaskLevel::kHigh;
  throw ArgumentError("unknown task level '" + s + "'");
}

Projection project_point(double x, double y, double z, int station) {
  switch (station) {
    case 0: return {x, y, z};            // looking along +z
    case 1: return {z - 5.0, y, x + 5.0};  // looking along +x
    case 2: return {-x, y, 10.0 - z};    // looking along -z
    case 3: return {5.0 - z, y, 5.0 - x};  // looking along -x
    default: throw ArgumentError("camera station " + std::to_string(station) + " out of range");
  }
}

double appearance_value(int appearance_class) { return 0.30 + 0.10 * appearance_class; }

double depth_to_intensity(double depth_meters) {
  return std::clamp(1.0 - depth_meters / kDepthScaleMeters, 0.0, 1.0);
}

std::pair<Index, Index> world_to_pixel(double u, double v, Index h, Index w) {
  auto clamp_to = [](double t, Index n) {
    Index i = static_cast<Index>(std::floor(t));
    return std::clamp<Index>(i, 0, n - 1);
  };
  Index c = clamp_to((u + kWorldHalf) * static_cast<double>(w) / (2.0 * kWorldHalf), w);
  Index r = clamp_to((v + kWorldHalf) * static_cast<double>(h) / (2.0 * kWorldHalf), h);
  return {r, c};
}

SyntheticScene gen_scene(uint64_t seed) {
  Rng rng(seed);
  SyntheticScene scene;
  const SceneBounds& b = scene.bounds;

  for (int restart = 0; restart < 50; ++restart) {
    const int n = static_cast<int>(rng.uniform_int(3, 6));
    std::vector<int> classes(kAppearanceClasses);
    for (int i = 0; i < kAppearanceClasses; ++i) classes[static_cast<size_t>(i)] = i;
    for (int i = kAppearanceClasses - 1; i > 0; --i)
      std::swap(classes[static_cast<size_t>(i)],
                classes[static_cast<size_t>(rng.uniform_int(0, i))]);

    scene.objects.clear();
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        SceneObject o;
        o.id = i;
        o.x = b.x_min + rng.uniform() * (b.x_max - b.x_min);
        o.y = b.y_min + rng.uniform() * (b.y_max - b.y_min);
        o.z = b.z_min + rng.uniform() * (b.z_max - b.z_min);
        o.radius = kRadiusMin + rng.uniform() * (kRadiusMax - kRadiusMin);
        o.appearance = classes[static_cast<size_t>(i)];
        bool valid = true;
        for (const SceneObject& q : scene.objects) {
          const double dx = o.x - q.x, dy = o.y - q.y, dz = o.z - q.z;
          const double sep = o.radius + q.radius + kProjectedMargin;
          if (std::sqrt(dx * dx + dy * dy + dz * dz) < 2.0 * kRadiusMax ||
              std::hypot(dx, dy) < sep ||  // +-z station views
              std::hypot(dz, dy) < sep) {  // +-x station views
            valid = false;
            break;
          }
        }
        if (valid) {
          scene.objects.push_back(o);
          placed = true;
        }
      }
      ok = placed;
    }
    if (ok) return scene;
  }
  throw GenerationError("scene constraints unsatisfied after bounded resampling");
}

void render_views(const SyntheticScene& scene, const std::vector<Index>& stations, Index h,
                  Index w, uint64_t noise_seed, Tensor* vision_frames, Tensor* geometry_frames) {
  if (stations.empty()) throw GenerationError("no camera stations requested");
  const Index k = static_cast<Index>(stations.size());
  Tensor vis = Tensor::zeros({k, h, w});
  Tensor geo = Tensor::zeros({k, h, w});
  Rng noise(noise_seed);

  const double cell_u = 2.0 * kWorldHalf / static_cast<double>(w);
  const double cell_v = 2.0 * kWorldHalf / static_cast<double>(h);

  for (Index f = 0; f < k; ++f) {
    const int station = static_cast<int>(stations[static_cast<size_t>(f)]);
    if (station < 0 || station >= scene.stations)
      throw GenerationError("camera station index out of range");
    std::vector<Projection> proj;
    proj.reserve(scene.objects.size());
    for (const SceneObject& o : scene.objects) {
      Projection p = project_point(o.x, o.y, o.z, station);
      if (std::abs(p.u) + o.radius > kWorldHalf || std::abs(p.v) + o.radius > kWorldHalf)
        throw GenerationError("object projects outside the frame");
      proj.push_back(p);
    }
    for (Index r = 0; r < h; ++r) {
      const double v = (static_cast<double>(r) + 0.5) * cell_v - kWorldHalf;
      for (Index c = 0; c < w; ++c) {
        const double u = (static_cast<double>(c) + 0.5) * cell_u - kWorldHalf;
        double best_depth = std::numeric_limits<double>::infinity();
        int best = -1;
        for (size_t i = 0; i < scene.objects.size(); ++i) {
          const double du = u - proj[i].u, dv = v - proj[i].v;
          const double rad = scene.objects[i].radius;
          if (du * du + dv * dv <= rad * rad && proj[i].depth < best_depth) {
            best_depth = proj[i].depth;
            best = static_cast<int>(i);
          }
        }
        // Noise is drawn for every pixel in a fixed order so the vision
        // channel is a pure function of (appearance layout, noise seed).
        const double n = kVisionNoiseSigma * noise.normal();
        const Index off = (f * h + r) * w + c;
        vis.at(off) = (best >= 0 ? appearance_value(scene.objects[static_cast<size_t>(best)].appearance)
                                 : kBackgroundValue) + n;
        geo.at(off) = best >= 0 ? depth_to_intensity(best_depth) : kBackgroundValue;
      }
    }
  }
  if (vision_frames) *vision_frames = vis;
  if (geometry_frames) *geometry_frames = geo;
}

namespace {

uint64_t derived_seed(uint64_t seed, uint64_t stream) { return Rng(seed, stream).next_u64(); }

struct LowPick {
  size_t a = 0, b = 0;
  std::pair<Index, Index> pix_a, pix_b;
};

// First object pair (in index order) with a clear depth gap whose station-0
// pixels land in distinct merge windows.
bool pick_low_pair(const SyntheticScene& scene, Index h, Index w, Index window_px, LowPick* out) {
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    for (size_t j = i + 1; j < scene.objects.size(); ++j) {
      const SceneObject& a = scene.objects[i];
      const SceneObject& bo = scene.objects[j];
      if (std::abs(a.z - bo.z) < kLowDepthGap) continue;
      Projection pa = project_point(a.x, a.y, a.z, 0);
      Projection pb = project_point(bo.x, bo.y, bo.z, 0);
      auto pixa = world_to_pixel(pa.u, pa.v, h, w);
      auto pixb = world_to_pixel(pb.u, pb.v, h, w);
      if (pixa == pixb) continue;
      if (pixa.first / window_px == pixb.first / window_px &&
          pixa.second / window_px == pixb.second / window_px)
        continue;
      out->a = i;
      out->b = j;
      out->pix_a = pixa;
      out->pix_b = pixb;
      return true;
    }
  }
  return false;
}

double surface_distance(const SceneObject& a, const SceneObject& b) {
  const double d = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                             (a.z - b.z) * (a.z - b.z));
  return d - a.radius - b.radius;
}

bool pick_high_triple(const SyntheticScene& scene, std::array<size_t, 3>* out) {
  const size_t n = scene.objects.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (size_t k = j + 1; k < n; ++k) {
        if (k == i) continue;
        double d1 = surface_distance(scene.objects[i], scene.objects[j]);
        double d2 = surface_distance(scene.objects[i], scene.objects[k]);
        if (std::abs(d1 - d2) < kHighDistanceGap) continue;
        *out = {i, j, k};
        return true;
      }
    }
  return false;
}

}  // namespace

QASample gen_sample(uint64_t seed, TaskLevel level, const DataConfig& cfg, const Vocab& vocab) {
  auto [h, w] = plan_resolution(cfg.height_in, cfg.width_in, cfg.target, cfg.patch, cfg.merge,
                                cfg.resize_side);
  const Index window_px = static_cast<Index>(cfg.patch) * cfg.merge;

  for (uint64_t attempt = 0; attempt < 100; ++attempt) {
    SyntheticScene scene = gen_scene(derived_seed(seed, 1000 + attempt));
    QASample sample;
    sample.seed = seed;
    sample.level = level;
    sample.scene = scene;
    sample.has_scene = true;

    if (level == TaskLevel::kLow) {
      LowPick pick;
      if (!pick_low_pair(scene, h, w, window_px, &pick)) continue;
      sample.plan.k = 1;
      sample.plan.indices = {0};
      render_views(scene, sample.plan.indices, h, w, derived_seed(seed, 77),
                   &sample.vision_frames, &sample.geometry_frames);
      auto set_both = [&](std::pair<Index, Index> px, double value) {
        Index off = px.first * w + px.second;
        sample.vision_frames.at(off) = value;
        sample.geometry_frames.at(off) = value;
      };
      set_both(pick.pix_a, kMarkerValueA);
      set_both(pick.pix_b, kMarkerValueB);
      sample.marks = {pick.pix_a, pick.pix_b};
      sample.query_objects = {static_cast<int>(pick.a), static_cast<int>(pick.b)};
      sample.question_ids = {vocab.bos(), vocab.id("which"), vocab.id("point"), vocab.id("is"),
                             vocab.id("closer"), vocab.id("?")};
      const bool a_closer = scene.objects[pick.a].z < scene.objects[pick.b].z;
      sample.answer_ids = {vocab.id(a_closer ? "A" : "B"), vocab.eos()};
      return sample;
    }

    if (scene.objects.size() < 3) continue;
    std::array<size_t, 3> triple{};
    if (!pick_high_triple(scene, &triple)) continue;
    sample.plan = plan_frames(cfg.t_sec, cfg.frame_interval, cfg.k_min, cfg.k_max, cfg.stations);
    render_views(scene, sample.plan.indices, h, w, derived_seed(seed, 77), &sample.vision_frames,
                 &sample.geometry_frames);
    const SceneObject& o1 = scene.objects[triple[0]];
    const SceneObject& o2 = scene.objects[triple[1]];
    const SceneObject& o3 = scene.objects[triple[2]];
    sample.query_objects = {o1.id, o2.id, o3.id};
    auto cls = [&](const SceneObject& o) {
      return vocab.id("class" + std::to_string(o.appearance));
    };
    sample.question_ids = {vocab.bos(),      vocab.id("is"),   cls(o1),
                           vocab.id("closer"), vocab.id("to"), cls(o2),
                           vocab.id("than"),   cls(o3),        vocab.id("?")};
    const bool closer = surface_distance(o1, o2) < surface_distance(o1, o3);
    sample.answer_ids = {vocab.id(closer ? "A" : "B"), vocab.eos()};
    return sample;
  }
  throw GenerationError("no valid sample after 100 scene attempts (seed " + std::to_string(seed) +
                        ")");
}

int ground_truth_answer(const QASample& sample, const Vocab& vocab) {
  if (!sample.has_scene) throw ArgumentError("sample carries no scene ground truth");
  if (sample.level == TaskLevel::kLow) {
    const SceneObject& a = sample.scene.objects[static_cast<size_t>(sample.query_objects.at(0))];
    const SceneObject& b = sample.scene.objects[static_cast<size_t>(sample.query_objects.at(1))];
    return vocab.id(a.z < b.z ? "A" : "B");
  }
  const SceneObject& o1 = sample.scene.objects[static_cast<size_t>(sample.query_objects.at(0))];
  const SceneObject& o2 = sample.scene.objects[static_cast<size_t>(sample.query_objects.at(1))];
  const SceneObject& o3 = sample.scene.objects[static_cast<size_t>(sample.query_objects.at(2))];
  return vocab.id(surface_distance(o1, o2) < surface_distance(o1, o3) ? "A" : "B");
}

uint64_t eval_sample_seed(const DataConfig& cfg, TaskLevel level, int index) {
  return cfg.seed + (level == TaskLevel::kLow ? 1'000'000ULL : 2'000'000ULL) +
         static_cast<uint64_t>(index);
}

uint64_t train_sample_seed(const DataConfig& cfg, int64_t global_index) {
  return cfg.seed + 1ULL + static_cast<uint64_t>(global_index);
}

}  // namespace sstk
