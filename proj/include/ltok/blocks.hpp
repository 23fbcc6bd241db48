// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ltok/params.hpp"
#include "ltok/tape.hpp"
#include "ltok/voxel.hpp"

namespace ltok::nn {

constexpr int kPatch = 8;  // BEV-to-token downsample

// Pre-norm residual blocks (x + MHSA(LN(x)), then + MLP(LN(.))) with a final
// layer norm; GELU MLP with 4x expansion.
struct BlockStackConfig {
  int n_blocks = 4;
  int dim = 64;
  int n_heads = 4;
};

void init_block_stack(ParamStore& ps, const std::string& prefix,
                      const BlockStackConfig& cfg, Rng& rng);
// Patch embed: affine from p*p*C bits to dim, plus learned position embedding.
void init_patch_embed(ParamStore& ps, const std::string& prefix,
                      int in_features, int dim, int n_tokens, Rng& rng);
void init_patch_unembed(ParamStore& ps, const std::string& prefix, int dim,
                        int out_features, Rng& rng);

// x: [T x dim] -> [T x dim]. Position is added by the caller; the block is
// permutation-equivariant. Optional per-token key mask for attention.
NodeId attention_block(Tape& t, NodeId x, ParamStore& ps,
                       const std::string& prefix, int n_heads,
                       const std::vector<uint8_t>* key_mask = nullptr);

// Runs n_blocks attention blocks followed by the final layer norm.
NodeId block_stack(Tape& t, NodeId x, ParamStore& ps, const std::string& prefix,
                   const BlockStackConfig& cfg,
                   const std::vector<uint8_t>* key_mask = nullptr);

// Grid bits flattened per 8x8xC patch, row-major over (di, dj, k): [T x 64C].
TensorF patchify(const OccupancyGrid& grid);

// Tape builders used during training.
NodeId patch_embed_node(Tape& t, const OccupancyGrid& grid, ParamStore& ps,
                        const std::string& prefix);
NodeId patch_unembed_node(Tape& t, NodeId tokens, ParamStore& ps,
                          const std::string& prefix, const GridConfig& g);

// Value-level forms of the spec operations.
TensorF patch_embed(const OccupancyGrid& grid, ParamStore& ps,
                    const std::string& prefix);
TensorF patch_unembed(const TensorF& tokens, ParamStore& ps,
                      const std::string& prefix, const GridConfig& g);

}  // namespace ltok::nn
