#include "sstk/hashing.hpp"

#include <cstdio>

namespace sstk {

uint64_t fnv1a64(const void* data, size_t len, uint64_t basis) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = basis;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex_u64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace sstk
