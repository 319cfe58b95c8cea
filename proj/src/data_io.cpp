#include "sstk/data_io.hpp"

#include <fstream>

namespace sstk {

namespace {

using nlohmann::json;

json frames_to_json(const Tensor& frames) {
  json out = json::array();
  const Index k = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
  for (Index f = 0; f < k; ++f) {
    json rows = json::array();
    for (Index r = 0; r < h; ++r) {
      json row = json::array();
      for (Index c = 0; c < w; ++c) row.push_back(frames.at((f * h + r) * w + c));
      rows.push_back(std::move(row));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

Tensor frames_from_json(const json& j) {
  const Index k = static_cast<Index>(j.size());
  if (k == 0) throw FileError("sample record has no frames");
  const Index h = static_cast<Index>(j.at(0).size());
  const Index w = static_cast<Index>(j.at(0).at(0).size());
  Tensor t = Tensor::zeros({k, h, w});
  for (Index f = 0; f < k; ++f)
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c)
        t.at((f * h + r) * w + c) =
            j.at(static_cast<size_t>(f)).at(static_cast<size_t>(r)).at(static_cast<size_t>(c))
                .get<double>();
  return t;
}

}  // namespace

nlohmann::json sample_to_json(const QASample& sample) {
  json j;
  j["seed"] = sample.seed;
  j["level"] = to_string(sample.level);
  j["frames"] = frames_to_json(sample.vision_frames);
  j["geometry_frames"] = frames_to_json(sample.geometry_frames);
  j["question_ids"] = sample.question_ids;
  j["answer_ids"] = sample.answer_ids;
  return j;
}

QASample sample_from_json(const nlohmann::json& j) {
  QASample s;
  s.seed = j.at("seed").get<uint64_t>();
  s.level = task_level_from_string(j.at("level").get<std::string>());
  s.vision_frames = frames_from_json(j.at("frames"));
  s.geometry_frames = frames_from_json(j.at("geometry_frames"));
  s.question_ids = j.at("question_ids").get<std::vector<int>>();
  s.answer_ids = j.at("answer_ids").get<std::vector<int>>();
  s.has_scene = false;
  return s;
}

void write_samples_jsonl(const std::string& path, const std::vector<QASample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  for (const QASample& s : samples) out << sample_to_json(s).dump() << "\n";
  if (!out) throw FileError("short write to '" + path + "'");
}

std::vector<QASample> read_samples_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open '" + path + "'");
  std::vector<QASample> samples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FileError("bad JSONL record at " + path + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return samples;
}

}  // namespace sstk
