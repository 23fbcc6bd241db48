// SPDX-License-Identifier: Apache-2.0
#include "ltok/pointcloud.hpp"

#include <fstream>

#include "ltok/io_util.hpp"

namespace ltok {

static constexpr char kUlpcMagic[4] = {'U', 'L', 'P', 'C'};

void save_ulpc(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  io::write_magic(os, kUlpcMagic);
  io::write_le<uint16_t>(os, 1);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(cloud.size()));
  for (const Vec3& p : cloud) {
    io::write_le<float>(os, p.x);
    io::write_le<float>(os, p.y);
    io::write_le<float>(os, p.z);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

PointCloud load_ulpc(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  io::expect_magic(is, kUlpcMagic, "ULPC");
  io::expect_version(is, 1, "ULPC");
  uint32_t count = io::read_le<uint32_t>(is);
  PointCloud cloud(count);
  for (Vec3& p : cloud) {
    p.x = io::read_le<float>(is);
    p.y = io::read_le<float>(is);
    p.z = io::read_le<float>(is);
  }
  return cloud;
}

void save_cloud_csv(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.precision(9);
  for (const Vec3& p : cloud) os << p.x << "," << p.y << "," << p.z << "\n";
}

}  // namespace ltok
