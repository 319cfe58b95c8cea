// JSONL sample records: one JSON object per line with seed, level, frames
// (nested arrays), geometry_frames, question_ids, answer_ids.
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sstk/synthdata.hpp"

namespace sstk {

nlohmann::json sample_to_json(const QASample& sample);
QASample sample_from_json(const nlohmann::json& j);

void write_samples_jsonl(const std::string& path, const std::vector<QASample>& samples);
std::vector<QASample> read_samples_jsonl(const std::string& path);

}  // namespace sstk
