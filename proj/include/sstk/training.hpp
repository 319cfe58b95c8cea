// Instruction-tuning loop at desk scale: AdamW with decoupled weight decay,
// linear warmup into cosine decay, parameter-group freezing.
#pragma once

#include <functional>
#include <map>
#include <vector>

#include "sstk/model.hpp"

namespace sstk {

struct TrainConfig {
  double peak_lr = 1e-5;
  double warmup_fraction = 0.03;
  double weight_decay = 0.01;
  int batch_size = 8;
  int total_steps = 300;
  uint64_t seed = 1;
  std::vector<ParamGroup> freeze{ParamGroup::kVisionEncoder, ParamGroup::kGeometryEncoder};
  double grad_clip = 0.0;  // 0 = off
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  bool frozen(ParamGroup g) const;
  void validate() const;
};

// Linear warmup over W = round(warmup_fraction * total) steps, then cosine
// decay from the peak to zero at total_steps.
double lr_at_step(int t, const TrainConfig& cfg);

struct AdamSlot {
  Eigen::ArrayXd m, v;
};

struct Optimizer {
  std::map<std::string, AdamSlot> slots;
  int64_t step_count = 0;
};

void apply_freeze(Model& m, const TrainConfig& cfg);

// One optimizer step over the batch-mean loss. Frozen groups receive neither
// updates nor optimizer state; decoupled weight decay touches only 2-D
// weight matrices (never gains or biases). Returns the mean loss.
double train_step(Model& m, Optimizer& opt, const TrainConfig& cfg,
                  const std::vector<QASample>& batch, int step);

std::vector<QASample> make_train_batch(const DataConfig& data, const TrainConfig& cfg,
                                       Rng& level_rng, int step);

struct TrainLog {
  std::vector<double> losses;  // one entry per step
  double mean_loss(int first_step, int last_step) const;  // 1-based inclusive
};

// Runs steps [start_step, end_step). level_rng drives the low/high task mix
// and is the state that checkpoints persist.
TrainLog run_training(Model& m, Optimizer& opt, const TrainConfig& cfg, const DataConfig& data,
                      Rng& level_rng, int start_step, int end_step,
                      const std::function<void(int, double)>& on_step = {},
                      const std::vector<QASample>* fixed_data = nullptr);

}  // namespace sstk
