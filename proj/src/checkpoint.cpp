#include "sstk/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sstk/hashing.hpp"

namespace sstk {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'T', 'K'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& s, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)])) << (8 * i);
  return v;
}

uint64_t get_u64(const std::string& s, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, const Optimizer& opt,
                     const TrainConfig& cfg, int64_t step, const Rng& rng,
                     const nlohmann::json& config_echo) {
  nlohmann::json manifest;
  manifest["format"] = "SSTK";
  manifest["step"] = step;
  manifest["rng"] = {{"algorithm", std::string(Rng::kAlgorithm)},
                     {"seed", rng.seed()},
                     {"counter", rng.counter()}};
  manifest["config"] = config_echo;

  std::vector<double> payload;
  nlohmann::json params = nlohmann::json::array();
  for (const ParamEntry& e : m.params.entries) {
    nlohmann::json p;
    p["name"] = e.name;
    p["shape"] = e.tensor.shape();
    p["group"] = to_string(e.group);
    p["frozen"] = cfg.frozen(e.group);
    params.push_back(p);
    const Eigen::ArrayXd& v = e.tensor.values();
    payload.insert(payload.end(), v.data(), v.data() + v.size());
  }
  manifest["params"] = params;

  nlohmann::json opt_entries = nlohmann::json::array();
  for (const auto& [name, slot] : opt.slots) {
    opt_entries.push_back({{"name", name}, {"size", slot.m.size()}});
    payload.insert(payload.end(), slot.m.data(), slot.m.data() + slot.m.size());
    payload.insert(payload.end(), slot.v.data(), slot.v.data() + slot.v.size());
  }
  manifest["opt"] = {{"step_count", opt.step_count}, {"entries", opt_entries}};

  const std::string mstr = manifest.dump();
  std::string header;
  header.append(kMagic, 4);
  put_u32(header, kCheckpointVersion);
  put_u64(header, static_cast<uint64_t>(mstr.size()));

  const size_t payload_bytes = payload.size() * sizeof(double);
  const uint64_t checksum = fnv1a64(payload.data(), payload_bytes);
  std::string trailer;
  put_u64(trailer, checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open checkpoint path '" + path + "' for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload_bytes));
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw FileError("short write while saving checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ChecksumError("not an SSTK checkpoint: '" + path + "'");
  const uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion)
    throw ChecksumError("unsupported checkpoint version " + std::to_string(version));
  const uint64_t mlen = get_u64(bytes, 8);
  if (bytes.size() < 16 + mlen + 8) throw ChecksumError("truncated checkpoint manifest");

  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(bytes.substr(16, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw ChecksumError(std::string("corrupt checkpoint manifest: ") + e.what());
  }

  const size_t payload_off = 16 + static_cast<size_t>(mlen);
  const size_t payload_bytes = bytes.size() - payload_off - 8;
  if (payload_bytes % sizeof(double) != 0) throw ChecksumError("payload not a whole number of f64");
  const uint64_t stored = get_u64(bytes, bytes.size() - 8);
  const uint64_t computed = fnv1a64(bytes.data() + payload_off, payload_bytes);
  if (stored != computed)
    throw ChecksumError("payload checksum mismatch in '" + path + "'");

  ck.payload.resize(payload_bytes / sizeof(double));
  std::memcpy(ck.payload.data(), bytes.data() + payload_off, payload_bytes);
  return ck;
}

int64_t checkpoint_step(const Checkpoint& ck) { return ck.manifest.at("step").get<int64_t>(); }

Rng checkpoint_rng(const Checkpoint& ck) {
  const auto& r = ck.manifest.at("rng");
  if (r.at("algorithm").get<std::string>() != std::string(Rng::kAlgorithm))
    throw ChecksumError("checkpoint rng algorithm mismatch");
  return Rng(r.at("seed").get<uint64_t>(), r.at("counter").get<uint64_t>());
}

nlohmann::json checkpoint_config(const Checkpoint& ck) { return ck.manifest.at("config"); }

void restore_checkpoint(const Checkpoint& ck, Model* m, Optimizer* opt) {
  size_t at = 0;
  auto take = [&](Index n, double* dst) {
    if (at + static_cast<size_t>(n) > ck.payload.size())
      throw ChecksumError("checkpoint payload shorter than the manifest promises");
    std::memcpy(dst, ck.payload.data() + at, static_cast<size_t>(n) * sizeof(double));
    at += static_cast<size_t>(n);
  };

  for (const auto& p : ck.manifest.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    Shape shape = p.at("shape").get<Shape>();
    const Tensor& t = m->params.find(name);
    if (!shape_equal(t.shape(), shape))
      throw ChecksumError("checkpoint shape mismatch for '" + name + "'");
    take(t.numel(), const_cast<Tensor&>(t).values().data());
  }

  if (opt) {
    opt->slots.clear();
    opt->step_count = ck.manifest.at("opt").at("step_count").get<int64_t>();
  }
  for (const auto& e : ck.manifest.at("opt").at("entries")) {
    const std::string name = e.at("name").get<std::string>();
    const Index n = e.at("size").get<Index>();
    AdamSlot slot;
    slot.m.resize(n);
    slot.v.resize(n);
    take(n, slot.m.data());
    take(n, slot.v.data());
    if (opt) opt->slots.emplace(name, std::move(slot));
  }
  if (at != ck.payload.size())
    throw ChecksumError("checkpoint payload longer than the manifest promises");
}

}  // namespace sstk
