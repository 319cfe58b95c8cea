#include "sstk/config.hpp"

#include <fstream>

#include "sstk/hashing.hpp"

namespace sstk {

const char* const kArtifactVersion = "0.1.0";

namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T* out) {
  if (obj.contains(key)) *out = obj.at(key).get<T>();
}

void parse_model(const json& j, ModelConfig* m) {
  check_keys(j, "model", {"lang_dim", "vision", "geometry", "decoder", "fusion"});
  get_if(j, "lang_dim", &m->lang_dim);
  if (j.contains("vision")) {
    const json& v = j.at("vision");
    check_keys(v, "model.vision", {"depth", "dim", "heads", "patch", "merge",
                                   "max_patches_per_side"});
    get_if(v, "depth", &m->vision.depth);
    get_if(v, "dim", &m->vision.dim);
    get_if(v, "heads", &m->vision.heads);
    get_if(v, "patch", &m->vision.patch);
    get_if(v, "merge", &m->vision.merge);
    get_if(v, "max_patches_per_side", &m->vision.max_patches_per_side);
  }
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    check_keys(g, "model.geometry", {"depth", "dim", "heads", "registers", "patch",
                                     "tap_fractions", "max_views", "max_patches_per_side"});
    get_if(g, "depth", &m->geometry.depth);
    get_if(g, "dim", &m->geometry.dim);
    get_if(g, "heads", &m->geometry.heads);
    get_if(g, "registers", &m->geometry.registers);
    get_if(g, "patch", &m->geometry.patch);
    get_if(g, "tap_fractions", &m->geometry.tap_fractions);
    get_if(g, "max_views", &m->geometry.max_views);
    get_if(g, "max_patches_per_side", &m->geometry.max_patches_per_side);
  }
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    check_keys(d, "model.decoder", {"depth", "heads", "mlp_width", "max_seq"});
    get_if(d, "depth", &m->decoder.depth);
    get_if(d, "heads", &m->decoder.heads);
    get_if(d, "mlp_width", &m->decoder.mlp_width);
    get_if(d, "max_seq", &m->decoder.max_seq);
  }
  if (j.contains("fusion")) {
    const json& f = j.at("fusion");
    check_keys(f, "model.fusion",
               {"mode", "decoder_layers", "gvf_taps", "inject_site", "merger_mlp_dim"});
    if (f.contains("mode")) m->mode = plan_mode_from_string(f.at("mode").get<std::string>());
    get_if(f, "decoder_layers", &m->fusion_decoder_layers);
    get_if(f, "gvf_taps", &m->gvf_taps);
    if (f.contains("inject_site"))
      m->inject_site = inject_site_from_string(f.at("inject_site").get<std::string>());
    get_if(f, "merger_mlp_dim", &m->merger_mlp_dim);
  }
}

void parse_data(const json& j, DataConfig* d) {
  check_keys(j, "data",
             {"seed", "height", "width", "target", "resize_side", "task_mix_low", "eval_count",
              "t_sec", "frame_interval", "k_min", "k_max", "stations"});
  get_if(j, "seed", &d->seed);
  get_if(j, "height", &d->height_in);
  get_if(j, "width", &d->width_in);
  get_if(j, "target", &d->target);
  if (j.contains("resize_side")) {
    const std::string s = j.at("resize_side").get<std::string>();
    if (s == "short")
      d->resize_side = ResizeSide::kShort;
    else if (s == "long")
      d->resize_side = ResizeSide::kLong;
    else
      throw ConfigError("resize_side must be 'short' or 'long'");
  }
  get_if(j, "task_mix_low", &d->task_mix_low);
  get_if(j, "eval_count", &d->eval_count);
  get_if(j, "t_sec", &d->t_sec);
  get_if(j, "frame_interval", &d->frame_interval);
  get_if(j, "k_min", &d->k_min);
  get_if(j, "k_max", &d->k_max);
  get_if(j, "stations", &d->stations);
}

void parse_train(const json& j, TrainConfig* t) {
  check_keys(j, "train",
             {"peak_lr", "warmup_fraction", "weight_decay", "batch_size", "total_steps", "seed",
              "freeze", "grad_clip", "beta1", "beta2", "adam_eps"});
  get_if(j, "peak_lr", &t->peak_lr);
  get_if(j, "warmup_fraction", &t->warmup_fraction);
  get_if(j, "weight_decay", &t->weight_decay);
  get_if(j, "batch_size", &t->batch_size);
  get_if(j, "total_steps", &t->total_steps);
  get_if(j, "seed", &t->seed);
  if (j.contains("freeze")) {
    t->freeze.clear();
    for (const auto& s : j.at("freeze"))
      t->freeze.push_back(param_group_from_string(s.get<std::string>()));
  }
  get_if(j, "grad_clip", &t->grad_clip);
  get_if(j, "beta1", &t->beta1);
  get_if(j, "beta2", &t->beta2);
  get_if(j, "adam_eps", &t->adam_eps);
}

void parse_analysis(const json& j, AnalysisConfig* a) {
  check_keys(j, "analysis", {"roi", "depths"});
  if (j.contains("roi")) {
    auto roi = j.at("roi").get<std::vector<Index>>();
    if (roi.size() != 4) throw ConfigError("analysis.roi must be [r0, c0, r1, c1]");
    for (size_t i = 0; i < 4; ++i) a->roi[i] = roi[i];
  }
  get_if(j, "depths", &a->depths);
}

void parse_paths(const json& j, PathsConfig* p) {
  check_keys(j, "paths", {"out_dir", "train_data", "eval_data"});
  get_if(j, "out_dir", &p->out_dir);
  get_if(j, "train_data", &p->train_data);
  get_if(j, "eval_data", &p->eval_data);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data.task_mix_low < 0.0 || data.task_mix_low > 1.0)
    throw ConfigError("task_mix_low must lie in [0, 1]");
  if (data.eval_count < 1) throw ConfigError("eval_count must be >= 1");
  if (data.k_min < 1 || data.k_min > data.k_max) throw ConfigError("invalid frame-count bounds");
  if (data.k_max > data.stations)
    throw ConfigError("k_max exceeds the number of camera stations");
  if (data.k_max > model.geometry.max_views)
    throw ConfigError("k_max exceeds the geometry encoder's max_views");
  if (data.patch != model.vision.patch || data.merge != model.vision.merge)
    throw ConfigError("data patch/merge out of sync with the model");
  for (double f : analysis.depths)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("analysis depths must lie in (0, 1]");
}

RunConfig default_run_config() {
  RunConfig cfg;
  // Desk-scale training needs a real learning rate to move a from-scratch
  // model within 300 steps; the schedule shape matches the reference setup.
  cfg.train.peak_lr = 1e-2;
  cfg.data.patch = cfg.model.vision.patch;
  cfg.data.merge = cfg.model.vision.merge;
  return cfg;
}

RunConfig parse_run_config(const nlohmann::json& j) {
  check_keys(j, "config root", {"model", "data", "train", "analysis", "paths"});
  RunConfig cfg = default_run_config();
  try {
    if (j.contains("model")) parse_model(j.at("model"), &cfg.model);
    if (j.contains("data")) parse_data(j.at("data"), &cfg.data);
    if (j.contains("train")) parse_train(j.at("train"), &cfg.train);
    if (j.contains("analysis")) parse_analysis(j.at("analysis"), &cfg.analysis);
    if (j.contains("paths")) parse_paths(j.at("paths"), &cfg.paths);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }
  cfg.data.patch = cfg.model.vision.patch;
  cfg.data.merge = cfg.model.vision.merge;
  cfg.model.vision.lang_dim = cfg.model.lang_dim;
  cfg.model.decoder.dim = cfg.model.lang_dim;
  cfg.model.decoder.vocab_size = Vocab::standard().size();
  cfg.validate();
  return cfg;
}

nlohmann::json emit_run_config(const RunConfig& cfg) {
  json j;
  j["model"] = {
      {"lang_dim", cfg.model.lang_dim},
      {"vision",
       {{"depth", cfg.model.vision.depth},
        {"dim", cfg.model.vision.dim},
        {"heads", cfg.model.vision.heads},
        {"patch", cfg.model.vision.patch},
        {"merge", cfg.model.vision.merge},
        {"max_patches_per_side", cfg.model.vision.max_patches_per_side}}},
      {"geometry",
       {{"depth", cfg.model.geometry.depth},
        {"dim", cfg.model.geometry.dim},
        {"heads", cfg.model.geometry.heads},
        {"registers", cfg.model.geometry.registers},
        {"patch", cfg.model.geometry.patch},
        {"tap_fractions", cfg.model.geometry.tap_fractions},
        {"max_views", cfg.model.geometry.max_views},
        {"max_patches_per_side", cfg.model.geometry.max_patches_per_side}}},
      {"decoder",
       {{"depth", cfg.model.decoder.depth},
        {"heads", cfg.model.decoder.heads},
        {"mlp_width", cfg.model.decoder.mlp_width},
        {"max_seq", cfg.model.decoder.max_seq}}},
      {"fusion",
       {{"mode", to_string(cfg.model.mode)},
        {"decoder_layers", cfg.model.fusion_decoder_layers},
        {"gvf_taps", cfg.model.gvf_taps},
        {"inject_site", to_string(cfg.model.inject_site)},
        {"merger_mlp_dim", cfg.model.merger_mlp_dim}}},
  };
  j["data"] = {{"seed", cfg.data.seed},
               {"height", cfg.data.height_in},
               {"width", cfg.data.width_in},
               {"target", cfg.data.target},
               {"resize_side", cfg.data.resize_side == ResizeSide::kShort ? "short" : "long"},
               {"task_mix_low", cfg.data.task_mix_low},
               {"eval_count", cfg.data.eval_count},
               {"t_sec", cfg.data.t_sec},
               {"frame_interval", cfg.data.frame_interval},
               {"k_min", cfg.data.k_min},
               {"k_max", cfg.data.k_max},
               {"stations", cfg.data.stations}};
  json freeze = json::array();
  for (ParamGroup g : cfg.train.freeze) freeze.push_back(to_string(g));
  j["train"] = {{"peak_lr", cfg.train.peak_lr},
                {"warmup_fraction", cfg.train.warmup_fraction},
                {"weight_decay", cfg.train.weight_decay},
                {"batch_size", cfg.train.batch_size},
                {"total_steps", cfg.train.total_steps},
                {"seed", cfg.train.seed},
                {"freeze", freeze},
                {"grad_clip", cfg.train.grad_clip},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps}};
  j["analysis"] = {{"roi", std::vector<Index>(cfg.analysis.roi.begin(), cfg.analysis.roi.end())},
                   {"depths", cfg.analysis.depths}};
  j["paths"] = {{"out_dir", cfg.paths.out_dir},
                {"train_data", cfg.paths.train_data},
                {"eval_data", cfg.paths.eval_data}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON in '") + path + "': " + e.what());
  }
  return parse_run_config(j);
}

std::string config_hash_hex(const RunConfig& cfg) {
  const std::string s = emit_run_config(cfg).dump();
  return hex_u64(fnv1a64(s.data(), s.size()));
}

}  // namespace sstk
