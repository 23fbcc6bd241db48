// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ltok {

// h x w grid of code indices; entries equal to mask_sentinel(K) are unfilled.
struct CodeMap {
  int h = 0, w = 0;
  std::vector<uint16_t> entries;

  CodeMap() = default;
  CodeMap(int h_, int w_, uint16_t fill = 0)
      : h(h_), w(w_), entries(static_cast<size_t>(h_) * w_, fill) {}

  uint16_t& at(int r, int c) { return entries[static_cast<size_t>(r) * w + c]; }
  uint16_t at(int r, int c) const {
    return entries[static_cast<size_t>(r) * w + c];
  }
  int64_t size() const { return static_cast<int64_t>(entries.size()); }

  bool operator==(const CodeMap&) const = default;
};

// The MASK sentinel for a codebook of size K.
constexpr uint16_t mask_sentinel(int K) { return static_cast<uint16_t>(K); }

inline bool sentinel_free(const CodeMap& m, int K) {
  for (uint16_t e : m.entries)
    if (e >= K) return false;
  return true;
}

// "ULCM": magic, version u16=1, h/w u32, h*w little-endian u16 indices.
void save_ulcm(const CodeMap& map, const std::string& path);
CodeMap load_ulcm(const std::string& path);

}  // namespace ltok
