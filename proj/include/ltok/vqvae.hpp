// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ltok/blocks.hpp"
#include "ltok/codebook.hpp"
#include "ltok/codemap.hpp"
#include "ltok/scenes.hpp"
#include "ltok/voxel.hpp"

namespace ltok {

enum class EncoderKind { kDense, kSparse };

struct VqVaeConfig {
  int n_blocks = 4;
  int dim = 64;  // also the codebook width D
  int n_heads = 4;
  int codebook_size = 128;
  int bank_capacity = 8192;
};

// Dense encoder, sparse encoder, shared codebook, shared dense decoder.
struct VqVaeModel {
  GridConfig grid;
  VqVaeConfig cfg;
  nn::ParamStore params;
  Codebook codebook;
  MemoryBank bank;
  int64_t iters_done = 0;
  bool codebook_seeded = false;  // data-dependent init happened

  int tokens() const { return (grid.H / nn::kPatch) * (grid.W / nn::kPatch); }
  int patch_features() const { return nn::kPatch * nn::kPatch * grid.C; }
};

VqVaeModel make_vqvae(const GridConfig& grid, const VqVaeConfig& cfg,
                      uint64_t seed);

struct VqVaeTrainConfig {
  int64_t iterations = 2000;
  int batch_size = 1;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.96f;
  int64_t warmup_iters = 500;
  float commitment_beta = 0.25f;
  bool reinit_enabled = true;
  double reinit_threshold = 0.5;
  int64_t reinit_every = 256;  // matches the dead-code window
  uint64_t seed = 1;
  int log_every = 0;  // 0 = silent
  // Hook for an optional feature-space reconstruction loss from a pretrained
  // voxel backbone; unused when empty.
  std::function<double(const OccupancyGrid& target, const nn::TensorF& logits)>
      feature_loss_hook;
};

struct ReconstructResult {
  nn::TensorF logits;  // H x W x C
  CodeMap codemap;
  double bce = 0;
  double codebook_loss = 0;
  double commitment_loss = 0;  // already weighted by beta
};

enum class BinarizeMode { kThreshold, kGumbel };

// z map for a grid through the requested encoder: (h*w) x D.
nn::TensorF encode(const OccupancyGrid& grid, EncoderKind which,
                   VqVaeModel& model);

// Logits H x W x C from a quantized map (h*w) x D.
nn::TensorF decode(const nn::TensorF& quantized, VqVaeModel& model);
nn::TensorF decode(const CodeMap& map, VqVaeModel& model);

// threshold: bit = logit > 0. gumbel: bit = (logit + tau*(g1 - g0)) > 0 with
// per-voxel noise drawn from the seed.
OccupancyGrid binarize(const nn::TensorF& logits, const GridConfig& cfg,
                       BinarizeMode mode, float temperature = 1.0f,
                       uint64_t seed = 0);

// encode -> quantize -> decode (pure quantized input at inference).
ReconstructResult reconstruct(const OccupancyGrid& grid, EncoderKind which,
                              VqVaeModel& model,
                              float commitment_beta = 0.25f);

// Sparse encoder -> shared codebook -> dense decoder -> threshold binarize.
OccupancyGrid complete(const OccupancyGrid& sparse_grid, VqVaeModel& model);

CodeMap encode_to_codemap(const OccupancyGrid& grid, EncoderKind which,
                          VqVaeModel& model);

struct TrainStats {
  std::vector<double> loss_history;
  double final_utilization = 0;
  int reinit_events = 0;
};

// Joint training: both branches reconstruct the dense target each step.
TrainStats train_vqvae(VqVaeModel& model, const std::vector<PairedSample>& pairs,
                       const VqVaeTrainConfig& cfg);

// Checkpoint round trip ("ULCK"); geometry and arch ride along as meta
// tensors so a model can be restored from the file alone.
void save_vqvae(const VqVaeModel& model, const std::string& path);
VqVaeModel load_vqvae(const std::string& path);

}  // namespace ltok
