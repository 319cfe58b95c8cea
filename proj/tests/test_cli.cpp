#include <doctest.h>

#include "sstk/ablation.hpp"
#include "sstk/config.hpp"
#include "sstk/data_io.hpp"
#include "test_util.hpp"

using namespace sstk;

TEST_SUITE_BEGIN("cli");

TEST_CASE("config round-trips and rejects unknown keys") {
  RunConfig cfg = default_run_config();
  cfg.model.mode = PlanMode::kStackReverse;
  cfg.train.total_steps = 42;
  cfg.data.seed = 99;
  cfg.analysis.depths = {0.25, 1.0};

  nlohmann::json j = emit_run_config(cfg);
  RunConfig back = parse_run_config(j);
  CHECK(emit_run_config(back) == j);

  nlohmann::json defaults_rt = emit_run_config(parse_run_config(nlohmann::json::object()));
  CHECK(defaults_rt == emit_run_config(default_run_config()));

  nlohmann::json bad1 = j;
  bad1["experiment_name"] = "x";
  CHECK_THROWS_AS(parse_run_config(bad1), ConfigError);
  nlohmann::json bad2 = j;
  bad2["train"]["learning_rate"] = 1e-3;  // wrong spelling must not pass silently
  CHECK_THROWS_AS(parse_run_config(bad2), ConfigError);
  nlohmann::json bad3 = j;
  bad3["model"]["fusion"]["decoder_layers"] = {0, 1, 99};
  CHECK_THROWS_AS(parse_run_config(bad3), ConfigError);
  nlohmann::json bad4 = j;
  bad4["model"]["fusion"]["mode"] = "cascade";
  CHECK_THROWS_AS(parse_run_config(bad4), ConfigError);

  CHECK(config_hash_hex(cfg) == config_hash_hex(back));
  CHECK(config_hash_hex(cfg) != config_hash_hex(default_run_config()));
}

TEST_CASE("jsonl samples round-trip bit-exactly") {
  DataConfig data = test::tiny_data_config();
  const Vocab& vocab = Vocab::standard();
  std::vector<QASample> samples;
  samples.push_back(gen_sample(11, TaskLevel::kLow, data, vocab));
  samples.push_back(gen_sample(12, TaskLevel::kHigh, data, vocab));

  auto path = std::filesystem::temp_directory_path() / "sstk_samples.jsonl";
  write_samples_jsonl(path.string(), samples);
  std::vector<QASample> back = read_samples_jsonl(path.string());
  REQUIRE(back.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(back[i].seed == samples[i].seed);
    CHECK(back[i].level == samples[i].level);
    CHECK(test::bit_equal(back[i].vision_frames, samples[i].vision_frames));
    CHECK(test::bit_equal(back[i].geometry_frames, samples[i].geometry_frames));
    CHECK(back[i].question_ids == samples[i].question_ids);
    CHECK(back[i].answer_ids == samples[i].answer_ids);
  }
  std::filesystem::remove(path);
}

TEST_CASE("ablation harness: structure, chance band at zero steps, determinism") {
  RunConfig cfg = default_run_config();
  cfg.model = test::tiny_model_config();
  cfg.data = test::tiny_data_config();
  cfg.data.eval_count = 256;
  cfg.train.total_steps = 0;  // untrained models score at chance
  cfg.train.batch_size = 1;

  AblationReport report = run_ablation(cfg, default_variants(), {cfg.train.seed});
  REQUIRE(report.variants.size() == 5);
  CHECK(report.artifact_version == kArtifactVersion);
  CHECK(report.config_hash == config_hash_hex(cfg));

  // Stack plans echo the (tap -> decoder layer) assignments.
  std::vector<int> taps = cfg.model.taps();
  const VariantResult* stack = nullptr;
  const VariantResult* rev = nullptr;
  for (const auto& v : report.variants) {
    if (v.name == "stack") stack = &v;
    if (v.name == "stack_reverse") rev = &v;
    CHECK_FALSE(v.failed);
    CHECK(v.low_accuracy >= 0.0);
    CHECK(v.low_accuracy <= 1.0);
    CHECK(v.overall == doctest::Approx(0.5 * (v.low_accuracy + v.high_accuracy)));
  }
  REQUIRE(stack != nullptr);
  REQUIRE(rev != nullptr);
  REQUIRE(stack->plan_pairs.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(stack->plan_pairs[i] == std::make_pair(taps[i], static_cast<int>(i)));
    CHECK(rev->plan_pairs[i] == std::make_pair(taps[i], static_cast<int>(2 - i)));
  }

  // Base variant at zero training steps sits in the chance band.
  for (const auto& v : report.variants)
    if (v.name == "base") {
      CHECK(v.low_accuracy >= 0.40);
      CHECK(v.low_accuracy <= 0.60);
    }

  AblationReport again = run_ablation(cfg, default_variants(), {cfg.train.seed});
  CHECK(report_to_json(again) == report_to_json(report));
}

TEST_SUITE_END();
