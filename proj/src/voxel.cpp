// SPDX-License-Identifier: Apache-2.0
#include "ltok/voxel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ltok/io_util.hpp"

namespace ltok {

namespace {

int checked_dim(double extent, double v, const char* axis) {
  if (!(v > 0)) throw std::invalid_argument("voxel size must be > 0");
  double n = extent / v;
  double rounded = std::round(n);
  if (rounded < 1 || std::abs(n - rounded) > 1e-6 * rounded)
    throw std::invalid_argument(std::string("extent along ") + axis +
                                " does not divide evenly by its voxel size");
  return static_cast<int>(rounded);
}

}  // namespace

GridConfig make_grid_config(double x_min, double x_max, double y_min,
                            double y_max, double z_min, double z_max,
                            double vx, double vy, double vz) {
  if (!(x_min < x_max && y_min < y_max && z_min < z_max))
    throw std::invalid_argument("grid extents must be nonempty");
  GridConfig cfg{x_min, x_max, y_min, y_max, z_min, z_max, vx, vy, vz};
  cfg.H = checked_dim(x_max - x_min, vx, "x");
  cfg.W = checked_dim(y_max - y_min, vy, "y");
  cfg.C = checked_dim(z_max - z_min, vz, "z");
  if (cfg.H % 8 != 0 || cfg.W % 8 != 0)
    throw std::invalid_argument("H and W must be divisible by 8");
  return cfg;
}

int64_t OccupancyGrid::occupied_count() const {
  int64_t n = 0;
  for (uint8_t b : bits) n += b;
  return n;
}

double BevHistogram::total() const {
  double t = 0;
  for (double b : bins) t += b;
  return t;
}

OccupancyGrid voxelize(const PointCloud& cloud, const GridConfig& cfg) {
  OccupancyGrid grid(cfg);
  for (const Vec3& p : cloud) {
    int i = static_cast<int>(std::floor((p.x - cfg.x_min) / cfg.vx));
    int j = static_cast<int>(std::floor((p.y - cfg.y_min) / cfg.vy));
    int k = static_cast<int>(std::floor((p.z - cfg.z_min) / cfg.vz));
    if (i < 0 || i >= cfg.H || j < 0 || j >= cfg.W || k < 0 || k >= cfg.C)
      continue;
    grid.set(i, j, k, 1);
  }
  return grid;
}

PointCloud devoxelize(const OccupancyGrid& grid) {
  const GridConfig& cfg = grid.config;
  PointCloud cloud;
  for (int i = 0; i < cfg.H; ++i)
    for (int j = 0; j < cfg.W; ++j)
      for (int k = 0; k < cfg.C; ++k)
        if (grid.get(i, j, k)) {
          cloud.push_back(
              Vec3{static_cast<float>(cfg.x_min + (i + 0.5) * cfg.vx),
                   static_cast<float>(cfg.y_min + (j + 0.5) * cfg.vy),
                   static_cast<float>(cfg.z_min + (k + 0.5) * cfg.vz)});
        }
  return cloud;
}

namespace {

// Bin index over [min, max) in kBins equal slices, or -1 if outside.
int bev_bin(double v, double lo, double hi) {
  int b = static_cast<int>(
      std::floor((v - lo) / (hi - lo) * BevHistogram::kBins));
  return (b >= 0 && b < BevHistogram::kBins) ? b : -1;
}

}  // namespace

BevHistogram bev_histogram(const OccupancyGrid& grid, HistMode mode) {
  if (mode == HistMode::kPoints)
    throw std::invalid_argument(
        "points mode needs a point cloud; use the PointCloud overload");
  const GridConfig& cfg = grid.config;
  BevHistogram h;
  h.mode = HistMode::kOccupancy;
  for (int i = 0; i < cfg.H; ++i) {
    int bx = bev_bin(cfg.x_min + (i + 0.5) * cfg.vx, cfg.x_min, cfg.x_max);
    if (bx < 0) continue;
    for (int j = 0; j < cfg.W; ++j) {
      int by = bev_bin(cfg.y_min + (j + 0.5) * cfg.vy, cfg.y_min, cfg.y_max);
      if (by < 0) continue;
      int cnt = 0;
      for (int k = 0; k < cfg.C; ++k) cnt += grid.get(i, j, k);
      h.at(bx, by) += cnt;
    }
  }
  return h;
}

BevHistogram bev_histogram(const PointCloud& cloud, const GridConfig& cfg) {
  BevHistogram h;
  h.mode = HistMode::kPoints;
  for (const Vec3& p : cloud) {
    int bx = bev_bin(p.x, cfg.x_min, cfg.x_max);
    int by = bev_bin(p.y, cfg.y_min, cfg.y_max);
    if (bx < 0 || by < 0) continue;
    h.at(bx, by) += 1.0;
  }
  return h;
}

std::array<double, BevHistogram::kBins * BevHistogram::kBins>
duplication_coefficients(const BevHistogram& real_hist,
                         const BevHistogram& gen_hist) {
  std::array<double, BevHistogram::kBins * BevHistogram::kBins> coeffs{};
  for (size_t b = 0; b < coeffs.size(); ++b)
    coeffs[b] = gen_hist.bins[b] > 0 ? real_hist.bins[b] / gen_hist.bins[b] : 0.0;
  return coeffs;
}

PointCloud apply_duplication(
    const OccupancyGrid& grid,
    const std::array<double, BevHistogram::kBins * BevHistogram::kBins>& coeffs) {
  const GridConfig& cfg = grid.config;
  PointCloud cloud;
  for (int i = 0; i < cfg.H; ++i) {
    double x = cfg.x_min + (i + 0.5) * cfg.vx;
    int bx = bev_bin(x, cfg.x_min, cfg.x_max);
    for (int j = 0; j < cfg.W; ++j) {
      double y = cfg.y_min + (j + 0.5) * cfg.vy;
      int by = bev_bin(y, cfg.y_min, cfg.y_max);
      int copies = 0;
      if (bx >= 0 && by >= 0) {
        double c = coeffs[static_cast<size_t>(bx) * BevHistogram::kBins + by];
        if (c > 0) copies = std::max(1, static_cast<int>(std::llround(c)));
      }
      if (copies == 0) continue;
      for (int k = 0; k < cfg.C; ++k) {
        if (!grid.get(i, j, k)) continue;
        Vec3 p{static_cast<float>(x), static_cast<float>(y),
               static_cast<float>(cfg.z_min + (k + 0.5) * cfg.vz)};
        for (int r = 0; r < copies; ++r) cloud.push_back(p);
      }
    }
  }
  return cloud;
}

double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (a.bits.size() != b.bits.size())
    throw std::invalid_argument("grid_iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

static constexpr char kUlogMagic[4] = {'U', 'L', 'O', 'G'};

void save_ulog(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  io::write_magic(os, kUlogMagic);
  io::write_le<uint16_t>(os, 1);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.config.H));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.config.W));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(grid.config.C));
  size_t n = grid.bits.size();
  std::vector<uint8_t> packed((n + 7) / 8, 0);
  for (size_t i = 0; i < n; ++i)
    if (grid.bits[i]) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(packed.data()),
           static_cast<std::streamsize>(packed.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

OccupancyGrid load_ulog(const std::string& path, const GridConfig& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  io::expect_magic(is, kUlogMagic, "ULOG");
  io::expect_version(is, 1, "ULOG");
  uint32_t H = io::read_le<uint32_t>(is);
  uint32_t W = io::read_le<uint32_t>(is);
  uint32_t C = io::read_le<uint32_t>(is);
  if (static_cast<int>(H) != cfg.H || static_cast<int>(W) != cfg.W ||
      static_cast<int>(C) != cfg.C)
    throw std::runtime_error("grid dimensions in " + path +
                             " do not match the configured grid");
  OccupancyGrid grid(cfg);
  size_t n = grid.bits.size();
  std::vector<uint8_t> packed((n + 7) / 8);
  is.read(reinterpret_cast<char*>(packed.data()),
          static_cast<std::streamsize>(packed.size()));
  if (!is) throw std::runtime_error("unexpected end of file: " + path);
  for (size_t i = 0; i < n; ++i)
    grid.bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return grid;
}

}  // namespace ltok
