// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace ltok {

struct Vec3 {
  float x = 0, y = 0, z = 0;
  bool operator==(const Vec3&) const = default;
};

// Unordered 3D points in meters, sensor at the origin.
using PointCloud = std::vector<Vec3>;

// "ULPC": magic, version u16=1, count u32, count x3 little-endian f32.
void save_ulpc(const PointCloud& cloud, const std::string& path);
PointCloud load_ulpc(const std::string& path);

// Debug text form, one "x,y,z" per line.
void save_cloud_csv(const PointCloud& cloud, const std::string& path);

}  // namespace ltok
