#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace sstk {

// 64-bit FNV-1a.
uint64_t fnv1a64(const void* data, size_t len, uint64_t basis = 14695981039346656037ULL);
std::string hex_u64(uint64_t v);

}  // namespace sstk
