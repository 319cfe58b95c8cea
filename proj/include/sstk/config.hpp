// Strict JSON run configuration: four sections (model, data, train, analysis)
// plus paths. Unknown keys are rejected so tap/layer indices cannot be
// silently misconfigured; parse(emit(cfg)) round-trips exactly.
#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "sstk/training.hpp"

namespace sstk {

extern const char* const kArtifactVersion;

struct AnalysisConfig {
  std::array<Index, 4> roi{1, 1, 2, 2};
  std::vector<double> depths{0.5, 0.75, 1.0};
};

struct PathsConfig {
  std::string out_dir = "out";
  std::string train_data;  // optional JSONL produced by gen-data
  std::string eval_data;   // optional JSONL; empty -> generated on the fly
};

struct RunConfig {
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
  AnalysisConfig analysis;
  PathsConfig paths;

  void validate() const;
};

// The documented desk-scale defaults (what an empty config file means).
RunConfig default_run_config();

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json emit_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical serialized config.
std::string config_hash_hex(const RunConfig& cfg);

}  // namespace sstk
