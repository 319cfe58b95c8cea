#include "sstk/training.hpp"

#include <algorithm>
#include <cmath>

#include "sstk/ops.hpp"

namespace sstk {

bool TrainConfig::frozen(ParamGroup g) const {
  return std::find(freeze.begin(), freeze.end(), g) != freeze.end();
}

void TrainConfig::validate() const {
  if (peak_lr <= 0) throw ConfigError("peak learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup fraction must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("weight decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (total_steps < 0) throw ConfigError("total steps must be >= 0");
  if (grad_clip < 0) throw ConfigError("grad clip must be >= 0");
}

double lr_at_step(int t, const TrainConfig& cfg) {
  if (cfg.total_steps <= 0) throw ConfigError("total steps must be positive");
  if (t < 0 || t > cfg.total_steps)
    throw ConfigError("step " + std::to_string(t) + " outside [0, total]");
  const int warm = static_cast<int>(std::llround(cfg.warmup_fraction * cfg.total_steps));
  if (t < warm) return cfg.peak_lr * static_cast<double>(t) / static_cast<double>(warm);
  if (cfg.total_steps == warm) return cfg.peak_lr;
  const double progress =
      static_cast<double>(t - warm) / static_cast<double>(cfg.total_steps - warm);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void apply_freeze(Model& m, const TrainConfig& cfg) {
  for (ParamEntry& e : m.params.entries) e.tensor.set_requires_grad(!cfg.frozen(e.group));
}

double train_step(Model& m, Optimizer& opt, const TrainConfig& cfg,
                  const std::vector<QASample>& batch, int step) {
  if (batch.empty()) throw TrainingError("empty batch at step " + std::to_string(step));

  for (ParamEntry& e : m.params.entries)
    if (e.tensor.requires_grad()) e.tensor.zero_grad();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double mean_loss = 0.0;
  for (const QASample& sample : batch) {
    SampleForward fw = model_forward(m, sample, /*with_answer=*/true);
    Tensor loss = next_token_loss(fw.logits, fw.seq);
    mean_loss += loss.value() * inv_b;
    backward(scale(loss, inv_b));
  }
  if (!std::isfinite(mean_loss))
    throw TrainingError("non-finite loss at step " + std::to_string(step));

  if (cfg.grad_clip > 0) {
    double sq = 0.0;
    for (ParamEntry& e : m.params.entries)
      if (e.tensor.requires_grad() && e.tensor.has_grad()) sq += e.tensor.grad().square().sum();
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) {
      const double f = cfg.grad_clip / norm;
      for (ParamEntry& e : m.params.entries)
        if (e.tensor.requires_grad() && e.tensor.has_grad()) e.tensor.grad() *= f;
    }
  }

  const double lr = lr_at_step(step, cfg);
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step_count));
  for (ParamEntry& e : m.params.entries) {
    if (!e.tensor.requires_grad()) continue;
    AdamSlot& slot = opt.slots[e.name];
    if (slot.m.size() != e.tensor.numel()) {
      slot.m = Eigen::ArrayXd::Zero(e.tensor.numel());
      slot.v = Eigen::ArrayXd::Zero(e.tensor.numel());
    }
    const Eigen::ArrayXd g = e.tensor.has_grad()
                                 ? e.tensor.grad()
                                 : Eigen::ArrayXd(Eigen::ArrayXd::Zero(e.tensor.numel()));
    slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * g;
    slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * g.square();
    e.tensor.values() -= lr * (slot.m / bc1) / ((slot.v / bc2).sqrt() + cfg.adam_eps);
    if (cfg.weight_decay > 0 && e.tensor.ndim() >= 2)
      e.tensor.values() -= lr * cfg.weight_decay * e.tensor.values();
  }
  return mean_loss;
}

std::vector<QASample> make_train_batch(const DataConfig& data, const TrainConfig& cfg,
                                       Rng& level_rng, int step) {
  std::vector<QASample> batch;
  batch.reserve(static_cast<size_t>(cfg.batch_size));
  for (int i = 0; i < cfg.batch_size; ++i) {
    TaskLevel level =
        level_rng.uniform() < data.task_mix_low ? TaskLevel::kLow : TaskLevel::kHigh;
    const int64_t global = static_cast<int64_t>(step) * cfg.batch_size + i;
    batch.push_back(gen_sample(train_sample_seed(data, global), level, data, Vocab::standard()));
  }
  return batch;
}

double TrainLog::mean_loss(int first_step, int last_step) const {
  if (first_step < 1 || last_step > static_cast<int>(losses.size()) || first_step > last_step)
    throw ArgumentError("loss window outside the recorded range");
  double sum = 0.0;
  for (int s = first_step; s <= last_step; ++s) sum += losses[static_cast<size_t>(s - 1)];
  return sum / static_cast<double>(last_step - first_step + 1);
}

TrainLog run_training(Model& m, Optimizer& opt, const TrainConfig& cfg, const DataConfig& data,
                      Rng& level_rng, int start_step, int end_step,
                      const std::function<void(int, double)>& on_step,
                      const std::vector<QASample>* fixed_data) {
  cfg.validate();
  apply_freeze(m, cfg);
  TrainLog log;
  for (int step = start_step; step < end_step; ++step) {
    std::vector<QASample> batch;
    if (fixed_data && !fixed_data->empty()) {
      for (int i = 0; i < cfg.batch_size; ++i) {
        // Level draws stay on the rng stream so resume behaviour is
        // identical with and without a preloaded dataset.
        (void)level_rng.uniform();
        const size_t idx = (static_cast<size_t>(step) * static_cast<size_t>(cfg.batch_size) +
                            static_cast<size_t>(i)) %
                           fixed_data->size();
        batch.push_back((*fixed_data)[idx]);
      }
    } else {
      batch = make_train_batch(data, cfg, level_rng, step);
    }
    double loss = train_step(m, opt, cfg, batch, step);
    log.losses.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  return log;
}

}  // namespace sstk
