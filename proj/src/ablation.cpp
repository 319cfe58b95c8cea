#include "sstk/ablation.hpp"

#include <thread>

namespace sstk {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBase: return "base";
    case Variant::kGvfSingle: return "gvf_single";
    case Variant::kGvfMulti: return "gvf_multi";
    case Variant::kStack: return "stack";
    case Variant::kStackReverse: return "stack_reverse";
  }
  throw ConfigError("unhandled variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "base") return Variant::kBase;
  if (s == "gvf_single") return Variant::kGvfSingle;
  if (s == "gvf_multi") return Variant::kGvfMulti;
  if (s == "stack") return Variant::kStack;
  if (s == "stack_reverse") return Variant::kStackReverse;
  throw ConfigError("unknown variant '" + s + "'");
}

std::vector<Variant> default_variants() {
  return {Variant::kBase, Variant::kGvfSingle, Variant::kGvfMulti, Variant::kStack,
          Variant::kStackReverse};
}

ModelConfig variant_model_config(const ModelConfig& base, Variant v) {
  ModelConfig cfg = base;
  cfg.gvf_taps.clear();
  switch (v) {
    case Variant::kBase: cfg.mode = PlanMode::kNone; break;
    case Variant::kGvfSingle: cfg.mode = PlanMode::kGvfSingle; break;
    case Variant::kGvfMulti: cfg.mode = PlanMode::kGvfMulti; break;
    case Variant::kStack: cfg.mode = PlanMode::kStack; break;
    case Variant::kStackReverse: cfg.mode = PlanMode::kStackReverse; break;
  }
  return cfg;
}

VariantResult run_variant(const RunConfig& cfg, Variant v, uint64_t seed) {
  VariantResult result;
  result.name = to_string(v);
  ModelConfig mc = variant_model_config(cfg.model, v);
  Model model = make_model(mc, seed);
  result.plan_pairs = model.plan.pairs;
  result.gvf_layers = model.plan.gvf_layers;
  try {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    Optimizer opt;
    Rng level_rng(tc.seed);
    run_training(model, opt, tc, cfg.data, level_rng, 0, tc.total_steps);
    result.low_accuracy = eval_suite_accuracy(model, cfg.data, TaskLevel::kLow,
                                              cfg.data.eval_count);
    result.high_accuracy = eval_suite_accuracy(model, cfg.data, TaskLevel::kHigh,
                                               cfg.data.eval_count);
    result.overall = 0.5 * (result.low_accuracy + result.high_accuracy);
  } catch (const Error& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

AblationReport run_ablation(const RunConfig& cfg, const std::vector<Variant>& variants,
                            const std::vector<uint64_t>& seeds, bool parallel) {
  if (variants.empty()) throw ConfigError("ablation needs at least one variant");
  std::vector<uint64_t> seed_list = seeds.empty() ? std::vector<uint64_t>{cfg.train.seed} : seeds;

  AblationReport report;
  report.artifact_version = kArtifactVersion;
  report.config_hash = config_hash_hex(cfg);
  report.seeds = seed_list;
  report.steps = cfg.train.total_steps;
  report.variants.resize(variants.size());

  auto run_one = [&](size_t vi) {
    VariantResult agg;
    agg.name = to_string(variants[vi]);
    int successes = 0;
    for (uint64_t seed : seed_list) {
      VariantResult r = run_variant(cfg, variants[vi], seed);
      agg.plan_pairs = r.plan_pairs;
      agg.gvf_layers = r.gvf_layers;
      if (r.failed) {
        agg.failed = true;
        agg.error = r.error;
        continue;
      }
      agg.low_accuracy += r.low_accuracy;
      agg.high_accuracy += r.high_accuracy;
      ++successes;
    }
    if (successes > 0) {
      agg.low_accuracy /= successes;
      agg.high_accuracy /= successes;
      agg.overall = 0.5 * (agg.low_accuracy + agg.high_accuracy);
    }
    report.variants[vi] = std::move(agg);
  };

  if (parallel && variants.size() > 1) {
    std::vector<std::thread> workers;
    workers.reserve(variants.size());
    for (size_t vi = 0; vi < variants.size(); ++vi) workers.emplace_back(run_one, vi);
    for (std::thread& t : workers) t.join();
  } else {
    for (size_t vi = 0; vi < variants.size(); ++vi) run_one(vi);
  }
  return report;
}

nlohmann::json report_to_json(const AblationReport& report) {
  nlohmann::json j;
  j["artifact_version"] = report.artifact_version;
  j["config_hash"] = report.config_hash;
  j["seeds"] = report.seeds;
  j["steps"] = report.steps;
  j["variants"] = nlohmann::json::array();
  for (const VariantResult& v : report.variants) {
    nlohmann::json e;
    e["name"] = v.name;
    e["plan_pairs"] = v.plan_pairs;
    e["gvf_layers"] = v.gvf_layers;
    e["low_accuracy"] = v.low_accuracy;
    e["high_accuracy"] = v.high_accuracy;
    e["overall"] = v.overall;
    e["failed"] = v.failed;
    if (v.failed) e["error"] = v.error;
    j["variants"].push_back(std::move(e));
  }
  return j;
}

}  // namespace sstk
