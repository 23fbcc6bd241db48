// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ltok/pointcloud.hpp"

namespace ltok {

// BEV voxel grid geometry. Extents must divide evenly by the voxel sizes and
// H, W must be divisible by 8 (the code-map downsample).
struct GridConfig {
  double x_min = 0.0, x_max = 51.2;
  double y_min = -25.6, y_max = 25.6;
  double z_min = -2.4, z_max = 2.4;
  double vx = 0.4, vy = 0.4, vz = 0.3;
  int H = 0, W = 0, C = 0;  // derived

  bool operator==(const GridConfig&) const = default;
};

GridConfig make_grid_config(double x_min, double x_max, double y_min,
                            double y_max, double z_min, double z_max,
                            double vx, double vy, double vz);

inline GridConfig desk_grid_config() { return make_grid_config(0.0, 51.2, -25.6, 25.6, -2.4, 2.4, 0.4, 0.4, 0.3); }

// Paper-scale region of interest; the z extent is a free parameter.
inline GridConfig paper_grid_config(double z_min = -3.0, double z_max = 3.0) {
  return make_grid_config(0.0, 80.0, -40.0, 40.0, z_min, z_max, 0.15625,
                          0.15625, 0.15);
}

// Binary occupancy, row-major with the x index outermost, then y, then z.
struct OccupancyGrid {
  GridConfig config;
  std::vector<uint8_t> bits;  // H*W*C entries of 0/1

  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridConfig& cfg)
      : config(cfg),
        bits(static_cast<size_t>(cfg.H) * cfg.W * cfg.C, 0) {}

  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * config.W + j) * config.C + k;
  }
  uint8_t get(int i, int j, int k) const { return bits[index(i, j, k)]; }
  void set(int i, int j, int k, uint8_t v) { bits[index(i, j, k)] = v; }
  int64_t occupied_count() const;

  bool operator==(const OccupancyGrid&) const = default;
};

enum class HistMode { kOccupancy, kPoints };

// 100x100 counts over the grid's (x, y) region of interest.
struct BevHistogram {
  static constexpr int kBins = 100;
  std::array<double, kBins * kBins> bins{};
  HistMode mode = HistMode::kOccupancy;

  double& at(int bx, int by) { return bins[static_cast<size_t>(bx) * kBins + by]; }
  double at(int bx, int by) const { return bins[static_cast<size_t>(bx) * kBins + by]; }
  double total() const;
};

// Half-open binning [min, max) with floor; out-of-region points are dropped.
OccupancyGrid voxelize(const PointCloud& cloud, const GridConfig& cfg);

// One point at the center of every occupied voxel, row-major order.
PointCloud devoxelize(const OccupancyGrid& grid);

// Occupancy mode: each occupied voxel counts once into its (x, y) bin.
BevHistogram bev_histogram(const OccupancyGrid& grid,
                           HistMode mode = HistMode::kOccupancy);
// Points mode over raw points.
BevHistogram bev_histogram(const PointCloud& cloud, const GridConfig& cfg);

// coeff[b] = real[b] / gen[b] where gen[b] > 0, else 0.
std::array<double, BevHistogram::kBins * BevHistogram::kBins>
duplication_coefficients(const BevHistogram& real_hist,
                         const BevHistogram& gen_hist);

// Each occupied voxel emits round(coeff) copies of its center point
// (minimum 1 while coeff > 0; none when coeff == 0).
PointCloud apply_duplication(
    const OccupancyGrid& grid,
    const std::array<double, BevHistogram::kBins * BevHistogram::kBins>& coeffs);

// Voxel IoU between two grids under the same config.
double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b);

// "ULOG": magic, version u16=1, H/W/C u32, bit-packed occupancy, LSB-first.
// The file carries only grid dimensions; physical extents come from the
// caller's config, which must match the stored H/W/C.
void save_ulog(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid load_ulog(const std::string& path, const GridConfig& cfg);

}  // namespace ltok
