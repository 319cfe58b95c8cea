// Full model assembly: configuration, parameter registry with freeze groups,
// and the forward paths that wire encoders, fusion and decoder together.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sstk/decoder.hpp"
#include "sstk/encoders.hpp"
#include "sstk/fusion.hpp"
#include "sstk/synthdata.hpp"

namespace sstk {

enum class ParamGroup { kVisionEncoder, kGeometryEncoder, kMergers, kDecoder };
std::string to_string(ParamGroup group);
ParamGroup param_group_from_string(const std::string& s);

struct ModelConfig {
  int lang_dim = 64;
  VisionEncoderConfig vision;
  GeometryEncoderConfig geometry;
  DecoderConfig decoder;
  PlanMode mode = PlanMode::kStack;
  std::vector<int> fusion_decoder_layers{0, 1, 2};
  std::vector<int> gvf_taps;  // empty: top tap (gvf_single) / all taps (gvf_multi)
  InjectSite inject_site = InjectSite::kPreBlock;
  int merger_mlp_dim = 0;  // 0 -> 2 * merge^2 * geometry.dim

  std::vector<int> taps() const { return tap_layer_indices(geometry); }
  std::vector<int> effective_gvf_taps() const;
  int effective_merger_mlp() const;
  void validate() const;
};

struct ParamEntry {
  std::string name;
  Tensor tensor;
  ParamGroup group;
};

struct ModelParams {
  VisionEncoderParams vision;
  SpatialMergerParams vision_merger;
  GeometryEncoderParams geometry;
  std::vector<GeometryMergerParams> mergers;  // parallel to ModelConfig::taps()
  DecoderParams decoder;
  std::vector<ParamEntry> entries;  // stable registration order

  const Tensor& find(const std::string& name) const;
};

struct Model {
  ModelConfig cfg;
  ModelParams params;
  FusionPlan plan;
  const Vocab* vocab = nullptr;

  PatchGrid grid_for(Index h, Index w) const;
};

FusionPlan plan_from_config(const ModelConfig& cfg);
Model make_model(ModelConfig cfg, uint64_t seed);

// Vision pathway: per-frame encode, spatial merge, frames concatenated.
Tensor encode_vision_merged(const Model& m, const Tensor& vision_frames);

// Geometry pathway for the requested taps: joint encode, strip special
// tokens per view, window-reorder, project through the tap's merger.
std::map<int, Tensor> project_geometry_taps(const Model& m, const Tensor& geometry_frames,
                                            const std::vector<int>& taps);

struct SampleForward {
  Tensor logits;
  MultimodalSequence seq;
};

SampleForward model_forward(const Model& m, const QASample& sample, bool with_answer,
                            DecodeSession* capture = nullptr);

std::vector<int> model_greedy_decode(const Model& m, const QASample& sample, int max_new);

// Choice-restricted scoring: argmax over the A/B option logits at the first
// answer position. An untrained model scores at chance on balanced labels.
int predict_choice(const Model& m, const QASample& sample);

double eval_suite_accuracy(const Model& m, const DataConfig& data, TaskLevel level, int count);

// Test helper: give every merger's output layer nonzero weights so gradients
// flow end to end (training-start zero init leaves w2/b2 at zero).
void randomize_merger_outputs(Model& m, Rng& rng, double stddev = 0.1);

}  // namespace sstk
