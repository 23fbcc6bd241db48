// SPDX-License-Identifier: Apache-2.0
#include "ltok/codemap.hpp"

#include <fstream>

#include "ltok/io_util.hpp"

namespace ltok {

static constexpr char kUlcmMagic[4] = {'U', 'L', 'C', 'M'};

void save_ulcm(const CodeMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  io::write_magic(os, kUlcmMagic);
  io::write_le<uint16_t>(os, 1);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(map.h));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(map.w));
  for (uint16_t e : map.entries) io::write_le<uint16_t>(os, e);
  if (!os) throw std::runtime_error("write failed: " + path);
}

CodeMap load_ulcm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  io::expect_magic(is, kUlcmMagic, "ULCM");
  io::expect_version(is, 1, "ULCM");
  int h = static_cast<int>(io::read_le<uint32_t>(is));
  int w = static_cast<int>(io::read_le<uint32_t>(is));
  CodeMap map(h, w);
  for (uint16_t& e : map.entries) e = io::read_le<uint16_t>(is);
  return map;
}

}  // namespace ltok
