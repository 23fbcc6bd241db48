// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "ltok/generator.hpp"
#include "ltok/scenes.hpp"
#include "ltok/voxel.hpp"
#include "ltok/vqvae.hpp"

namespace ltok {

// Plain-text key=value configuration ('#' comments). Every key has a default;
// unknown keys are rejected.
struct RunConfig {
  // data generation
  uint64_t data_seed = 42;
  int data_train_scenes = 96;
  int data_val_scenes = 32;
  SceneConfig scene;
  BeamConfig beams;
  int densify_factor = 4;

  // voxel grid
  double grid_x_min = 0.0, grid_x_max = 51.2;
  double grid_y_min = -25.6, grid_y_max = 25.6;
  double grid_z_min = -2.4, grid_z_max = 2.4;
  double grid_vx = 0.4, grid_vy = 0.4, grid_vz = 0.3;

  // vq-vae
  VqVaeConfig vqvae;
  VqVaeTrainConfig vqvae_train;

  // generator
  int gen_blocks = 6;
  int gen_dim = 128;
  int gen_heads = 4;
  GenTrainConfig gen_train;
  double blank_coverage = 0.5;
  GenConfig gen;
  int denoise_rounds = 2;
  double denoise_fraction = 0.25;

  // evaluation
  double eval_bandwidth = 0;  // 0 = median heuristic

  int log_every = 200;

  GridConfig grid_config() const {
    return make_grid_config(grid_x_min, grid_x_max, grid_y_min, grid_y_max,
                            grid_z_min, grid_z_max, grid_vx, grid_vy, grid_vz);
  }
};

// Throws std::runtime_error on unknown keys or malformed lines.
RunConfig load_run_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& line, int lineno);

// The full key=value listing with current values (also documents defaults).
std::string dump_run_config(const RunConfig& cfg);

}  // namespace ltok
