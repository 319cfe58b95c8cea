// Checkpoint container: "SSTK" magic, u32 LE format version, u64 LE manifest
// length, UTF-8 JSON manifest, contiguous little-endian f64 payload (params in
// manifest order, then Adam m/v per optimizer entry), trailing 64-bit FNV-1a
// checksum of the payload.
#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "sstk/training.hpp"

namespace sstk {

constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<double> payload;
};

void save_checkpoint(const std::string& path, const Model& m, const Optimizer& opt,
                     const TrainConfig& cfg, int64_t step, const Rng& rng,
                     const nlohmann::json& config_echo);

// Reads and checksum-verifies the whole file.
Checkpoint read_checkpoint(const std::string& path);

int64_t checkpoint_step(const Checkpoint& ck);
Rng checkpoint_rng(const Checkpoint& ck);
nlohmann::json checkpoint_config(const Checkpoint& ck);

// Copies parameter values and optimizer state into a model built from the
// same configuration; names and shapes must match exactly.
void restore_checkpoint(const Checkpoint& ck, Model* m, Optimizer* opt);

}  // namespace sstk
