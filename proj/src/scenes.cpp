// SPDX-License-Identifier: Apache-2.0
#include "ltok/scenes.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ltok/rng.hpp"

namespace ltok {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Ray {
  double dx, dy, dz;  // unit direction; origin is (0,0,0)
};

double ground_range(const Scene& s, const Ray& r) {
  // z = z0 + slope*x along the ray: t*dz = z0 + slope*t*dx
  double denom = r.dz - s.ground_slope * r.dx;
  if (denom == 0.0) return -1.0;
  double t = s.ground_z0 / denom;
  return t > 0.0 ? t : -1.0;
}

// Slab test in the box frame. Returns the hit range or -1.
double box_range(const OrientedBox& b, const Ray& r) {
  double c = std::cos(-b.yaw), s = std::sin(-b.yaw);
  // Sensor origin and direction expressed in the box frame.
  double ox = -b.cx, oy = -b.cy, oz = -b.cz;
  double px = c * ox - s * oy;
  double py = s * ox + c * oy;
  double pz = oz;
  double dx = c * r.dx - s * r.dy;
  double dy = s * r.dx + c * r.dy;
  double dz = r.dz;

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double p[3] = {px, py, pz};
  const double d[3] = {dx, dy, dz};
  const double h[3] = {b.hx, b.hy, b.hz};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-12) {
      if (p[i] < -h[i] || p[i] > h[i]) return -1.0;
      continue;
    }
    double t0 = (-h[i] - p[i]) / d[i];
    double t1 = (h[i] - p[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) tmin = t0;
    if (t1 < tmax) tmax = t1;
    if (tmin > tmax) return -1.0;
  }
  double t = tmin > 0.0 ? tmin : tmax;  // tmax covers a ray starting inside
  return t > 0.0 ? t : -1.0;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  double dx = a.cx - b.cx, dy = a.cy - b.cy, dz = a.cz - b.cz;
  double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
  double ra = std::sqrt(a.hx * a.hx + a.hy * a.hy + a.hz * a.hz);
  double rb = std::sqrt(b.hx * b.hx + b.hy * b.hy + b.hz * b.hz);
  return dist <= ra + rb;
}

Scene random_scene(uint64_t seed, const SceneConfig& cfg) {
  if (cfg.boxes_min < 0 || cfg.boxes_max < cfg.boxes_min)
    throw std::invalid_argument("invalid box count range");
  Rng rng(seed);
  Scene scene;
  scene.seed = seed;
  scene.ground_slope = rng.uniform(cfg.slope_min, cfg.slope_max);
  scene.ground_z0 = rng.uniform(cfg.z0_min, cfg.z0_max);

  int n_boxes = cfg.boxes_min +
                static_cast<int>(rng.below(
                    static_cast<uint64_t>(cfg.boxes_max - cfg.boxes_min + 1)));
  int rejections = 0;
  while (static_cast<int>(scene.boxes.size()) < n_boxes) {
    OrientedBox b;
    b.cx = rng.uniform(cfg.center_x_min, cfg.center_x_max);
    b.cy = rng.uniform(cfg.center_y_min, cfg.center_y_max);
    b.hx = rng.uniform(cfg.half_x_min, cfg.half_x_max);
    b.hy = rng.uniform(cfg.half_y_min, cfg.half_y_max);
    b.hz = rng.uniform(cfg.half_z_min, cfg.half_z_max);
    b.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Boxes sit on the ground plane.
    b.cz = scene.ground_z0 + scene.ground_slope * b.cx + b.hz;

    bool ok = true;
    for (const OrientedBox& other : scene.boxes) {
      if (boxes_overlap(b, other)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      scene.boxes.push_back(b);
    } else if (++rejections > cfg.retry_budget) {
      throw std::runtime_error("scene too dense");
    }
  }
  return scene;
}

std::vector<double> beam_elevations_deg(const BeamConfig& beams) {
  if (beams.n_beams < 2) throw std::invalid_argument("n_beams must be >= 2");
  if (!(beams.elevation_min_deg < beams.elevation_max_deg))
    throw std::invalid_argument("elevation_min must be < elevation_max");
  std::vector<double> elev(beams.n_beams);
  double step = (beams.elevation_max_deg - beams.elevation_min_deg) /
                (beams.n_beams - 1);
  for (int i = 0; i < beams.n_beams; ++i)
    elev[i] = beams.elevation_min_deg + step * i;
  return elev;
}

std::vector<RayHit> raycast_elevations(const Scene& scene,
                                       const std::vector<double>& elev_deg,
                                       int azimuth_steps, double max_range) {
  if (azimuth_steps < 4) throw std::invalid_argument("azimuth_steps must be >= 4");
  if (!(max_range > 0)) throw std::invalid_argument("max_range must be > 0");
  std::vector<RayHit> hits;
  hits.reserve(elev_deg.size() * static_cast<size_t>(azimuth_steps) / 2);
  for (size_t bi = 0; bi < elev_deg.size(); ++bi) {
    double e = elev_deg[bi] * kDegToRad;
    double ce = std::cos(e), se = std::sin(e);
    for (int ai = 0; ai < azimuth_steps; ++ai) {
      double a = 2.0 * std::numbers::pi * ai / azimuth_steps;
      Ray ray{ce * std::cos(a), ce * std::sin(a), se};

      double best = ground_range(scene, ray);
      bool best_is_box = false;
      for (const OrientedBox& b : scene.boxes) {
        double t = box_range(b, ray);
        if (t <= 0.0) continue;
        // Exact range tie against the ground resolves to the box.
        if (best <= 0.0 || t < best || (!best_is_box && t == best)) {
          best = t;
          best_is_box = true;
        }
      }
      if (best > 0.0 && best <= max_range) {
        Vec3 p{static_cast<float>(best * ray.dx),
               static_cast<float>(best * ray.dy),
               static_cast<float>(best * ray.dz)};
        hits.push_back(RayHit{static_cast<int>(bi), ai, p});
      }
    }
  }
  return hits;
}

PointCloud raycast(const Scene& scene, const BeamConfig& beams) {
  auto hits = raycast_elevations(scene, beam_elevations_deg(beams),
                                 beams.azimuth_steps, beams.max_range);
  PointCloud cloud;
  cloud.reserve(hits.size());
  for (const RayHit& h : hits) cloud.push_back(h.point);
  return cloud;
}

std::vector<double> densified_elevations_deg(const BeamConfig& sparse_beams,
                                             int densify_factor) {
  if (densify_factor < 2)
    throw std::invalid_argument("densify_factor must be >= 2");
  std::vector<double> sparse = beam_elevations_deg(sparse_beams);
  double step = (sparse_beams.elevation_max_deg -
                 sparse_beams.elevation_min_deg) /
                (sparse_beams.n_beams - 1);
  std::vector<double> dense(sparse.size() * static_cast<size_t>(densify_factor));
  for (size_t j = 0; j < dense.size(); ++j) {
    if (j % densify_factor == 0) {
      // Sparse elevations are preserved bit-exactly, never recomputed.
      dense[j] = sparse[j / densify_factor];
    } else {
      dense[j] = sparse[j / densify_factor] +
                 step * (static_cast<double>(j % densify_factor) /
                         densify_factor);
    }
  }
  return dense;
}

PairedSample make_pair(const Scene& scene, const BeamConfig& sparse_beams,
                       int densify_factor) {
  std::vector<double> dense_elev =
      densified_elevations_deg(sparse_beams, densify_factor);
  auto dense_hits = raycast_elevations(scene, dense_elev,
                                       sparse_beams.azimuth_steps,
                                       sparse_beams.max_range);
  PairedSample pair;
  pair.dense.reserve(dense_hits.size());
  for (const RayHit& h : dense_hits) {
    pair.dense.push_back(h.point);
    if (h.beam % densify_factor == 0) pair.sparse.push_back(h.point);
  }
  return pair;
}

}  // namespace ltok
