// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ltok/pointcloud.hpp"

namespace ltok {

struct OrientedBox {
  double cx = 0, cy = 0, cz = 0;  // center, meters
  double hx = 0, hy = 0, hz = 0;  // half extents, > 0
  double yaw = 0;                 // radians, [0, 2pi)
};

// Tilted ground plane z = ground_z0 + ground_slope * x, plus car-scale boxes.
struct Scene {
  double ground_slope = 0;  // dz/dx
  double ground_z0 = -2.0;  // meters
  std::vector<OrientedBox> boxes;
  uint64_t seed = 0;
};

struct SceneConfig {
  int boxes_min = 5;
  int boxes_max = 8;
  // Box center sampling region (kept clear of the sensor at the origin).
  double center_x_min = 4.0, center_x_max = 48.0;
  double center_y_min = -22.0, center_y_max = 22.0;
  // Half extents approximate cars at toy resolution.
  double half_x_min = 0.8, half_x_max = 1.2;
  double half_y_min = 1.8, half_y_max = 2.6;
  double half_z_min = 0.6, half_z_max = 0.9;
  double slope_min = -0.05, slope_max = 0.05;
  double z0_min = -2.1, z0_max = -1.9;
  int retry_budget = 1000;
};

// Simulated spinning LiDAR: n_beams elevations linearly spaced between
// elevation_min and elevation_max, azimuth_steps rays per revolution.
struct BeamConfig {
  int n_beams = 8;
  double elevation_min_deg = -30.0;
  double elevation_max_deg = -2.0;
  int azimuth_steps = 256;
  double max_range = 60.0;
};

struct PairedSample {
  PointCloud sparse;
  PointCloud dense;
};

struct RayHit {
  int beam = 0;     // elevation index
  int azimuth = 0;  // azimuth step index
  Vec3 point;
};

// Boxes must not overlap: pairwise center distance > sum of half-diagonals.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

// Deterministic function of (seed, cfg). Throws "scene too dense" if
// rejection sampling exceeds cfg.retry_budget.
Scene random_scene(uint64_t seed, const SceneConfig& cfg);

std::vector<double> beam_elevations_deg(const BeamConfig& beams);

// Sensor at the origin. One candidate ray per (beam, azimuth step); emits the
// nearest hit within max_range or nothing.
PointCloud raycast(const Scene& scene, const BeamConfig& beams);

// Same, with explicit elevations (degrees) and per-hit beam bookkeeping.
std::vector<RayHit> raycast_elevations(const Scene& scene,
                                       const std::vector<double>& elev_deg,
                                       int azimuth_steps, double max_range);

// Dense beam set interleaves the sparse one: n_beams*densify_factor
// elevations, with every sparse elevation preserved bit-exactly so the sparse
// cloud is a strict subset of the dense one.
PairedSample make_pair(const Scene& scene, const BeamConfig& sparse_beams,
                       int densify_factor);

std::vector<double> densified_elevations_deg(const BeamConfig& sparse_beams,
                                             int densify_factor);

}  // namespace ltok
