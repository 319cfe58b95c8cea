// Paired-comparison ablation harness: every variant trains from the same
// parameter seed over the same data stream, then scores held-out suites.
#pragma once

#include <nlohmann/json.hpp>

#include "sstk/config.hpp"

namespace sstk {

enum class Variant { kBase, kGvfSingle, kGvfMulti, kStack, kStackReverse };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::vector<Variant> default_variants();

struct VariantResult {
  std::string name;
  std::vector<std::pair<int, int>> plan_pairs;
  std::vector<int> gvf_layers;
  double low_accuracy = 0.0;
  double high_accuracy = 0.0;
  double overall = 0.0;  // mean of the two suite accuracies
  bool failed = false;
  std::string error;
};

struct AblationReport {
  std::string artifact_version;
  std::string config_hash;
  std::vector<uint64_t> seeds;
  int steps = 0;
  std::vector<VariantResult> variants;
};

// Applies a variant's fusion mode on top of a base configuration.
ModelConfig variant_model_config(const ModelConfig& base, Variant v);

// Trains and evaluates one variant for one seed.
VariantResult run_variant(const RunConfig& cfg, Variant v, uint64_t seed);

// Seed-averaged report over all variants; a variant that fails to train is
// recorded as failed and the run continues.
AblationReport run_ablation(const RunConfig& cfg, const std::vector<Variant>& variants,
                            const std::vector<uint64_t>& seeds, bool parallel = false);

nlohmann::json report_to_json(const AblationReport& report);

}  // namespace sstk
