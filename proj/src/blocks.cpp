// SPDX-License-Identifier: Apache-2.0
#include "ltok/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace ltok::nn {

namespace {
constexpr float kInitStd = 0.02f;
}

void init_block_stack(ParamStore& ps, const std::string& prefix,
                      const BlockStackConfig& cfg, Rng& rng) {
  if (cfg.dim % cfg.n_heads != 0)
    throw std::invalid_argument("dim must be divisible by n_heads");
  int D = cfg.dim, hidden = 4 * cfg.dim;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    std::string p = prefix + ".blk" + std::to_string(b);
    ps.create(p + ".ln1.g", TensorF::full({D}, 1.0f));
    ps.create(p + ".ln1.b", TensorF::zeros({D}));
    for (const char* w : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"})
      ps.create(p + w, TensorF::randn(rng, {D, D}, kInitStd));
    for (const char* bnames : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"})
      ps.create(p + bnames, TensorF::zeros({D}));
    ps.create(p + ".ln2.g", TensorF::full({D}, 1.0f));
    ps.create(p + ".ln2.b", TensorF::zeros({D}));
    ps.create(p + ".mlp.w1", TensorF::randn(rng, {D, hidden}, kInitStd));
    ps.create(p + ".mlp.b1", TensorF::zeros({hidden}));
    ps.create(p + ".mlp.w2", TensorF::randn(rng, {hidden, D}, kInitStd));
    ps.create(p + ".mlp.b2", TensorF::zeros({D}));
  }
  ps.create(prefix + ".lnf.g", TensorF::full({D}, 1.0f));
  ps.create(prefix + ".lnf.b", TensorF::zeros({D}));
}

void init_patch_embed(ParamStore& ps, const std::string& prefix,
                      int in_features, int dim, int n_tokens, Rng& rng) {
  ps.create(prefix + ".embed.w",
            TensorF::randn(rng, {in_features, dim}, kInitStd));
  ps.create(prefix + ".embed.b", TensorF::zeros({dim}));
  ps.create(prefix + ".pos", TensorF::randn(rng, {n_tokens, dim}, kInitStd));
}

void init_patch_unembed(ParamStore& ps, const std::string& prefix, int dim,
                        int out_features, Rng& rng) {
  ps.create(prefix + ".unembed.w",
            TensorF::randn(rng, {dim, out_features}, kInitStd));
  ps.create(prefix + ".unembed.b", TensorF::zeros({out_features}));
}

NodeId attention_block(Tape& t, NodeId x, ParamStore& ps,
                       const std::string& prefix, int n_heads,
                       const std::vector<uint8_t>* key_mask) {
  int D = t.value(x).cols();
  if (D % n_heads != 0)
    throw std::invalid_argument("attention_block: dim % n_heads != 0");
  int dh = D / n_heads;
  auto P = [&](const std::string& suffix) {
    return t.param(&ps.get(prefix + suffix), prefix + suffix);
  };

  NodeId h = t.layer_norm(x, P(".ln1.g"), P(".ln1.b"));
  NodeId q = t.add_bias(t.matmul(h, P(".attn.wq")), P(".attn.bq"));
  NodeId k = t.add_bias(t.matmul(h, P(".attn.wk")), P(".attn.bk"));
  NodeId v = t.add_bias(t.matmul(h, P(".attn.wv")), P(".attn.bv"));

  std::vector<NodeId> heads;
  float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  for (int i = 0; i < n_heads; ++i) {
    NodeId qi = t.slice_cols(q, i * dh, (i + 1) * dh);
    NodeId ki = t.slice_cols(k, i * dh, (i + 1) * dh);
    NodeId vi = t.slice_cols(v, i * dh, (i + 1) * dh);
    NodeId s = t.scale(t.matmul_nt(qi, ki), inv_sqrt);
    NodeId p = t.softmax_rows(s, key_mask);
    heads.push_back(t.matmul(p, vi));
  }
  NodeId o = n_heads == 1 ? heads[0] : t.concat_cols(heads);
  NodeId attn = t.add_bias(t.matmul(o, P(".attn.wo")), P(".attn.bo"));
  NodeId x1 = t.add(x, attn);

  NodeId h2 = t.layer_norm(x1, P(".ln2.g"), P(".ln2.b"));
  NodeId m = t.add_bias(t.matmul(h2, P(".mlp.w1")), P(".mlp.b1"));
  m = t.gelu(m);
  m = t.add_bias(t.matmul(m, P(".mlp.w2")), P(".mlp.b2"));
  return t.add(x1, m);
}

NodeId block_stack(Tape& t, NodeId x, ParamStore& ps, const std::string& prefix,
                   const BlockStackConfig& cfg,
                   const std::vector<uint8_t>* key_mask) {
  for (int b = 0; b < cfg.n_blocks; ++b)
    x = attention_block(t, x, ps, prefix + ".blk" + std::to_string(b),
                        cfg.n_heads, key_mask);
  return t.layer_norm(x, t.param(&ps.get(prefix + ".lnf.g"), prefix + ".lnf.g"),
                      t.param(&ps.get(prefix + ".lnf.b"), prefix + ".lnf.b"));
}

TensorF patchify(const OccupancyGrid& grid) {
  const GridConfig& g = grid.config;
  if (g.H % kPatch != 0 || g.W % kPatch != 0)
    throw std::invalid_argument("patchify: H, W must be divisible by 8");
  int h = g.H / kPatch, w = g.W / kPatch, F = kPatch * kPatch * g.C;
  TensorF out({h * w, F});
  for (int i = 0; i < g.H; ++i)
    for (int j = 0; j < g.W; ++j) {
      int tok = (i / kPatch) * w + (j / kPatch);
      int base = ((i % kPatch) * kPatch + (j % kPatch)) * g.C;
      float* dst = &out.data[static_cast<size_t>(tok) * F + base];
      const uint8_t* src = &grid.bits[(static_cast<size_t>(i) * g.W + j) * g.C];
      for (int k = 0; k < g.C; ++k) dst[k] = static_cast<float>(src[k]);
    }
  return out;
}

NodeId patch_embed_node(Tape& t, const OccupancyGrid& grid, ParamStore& ps,
                        const std::string& prefix) {
  NodeId patches = t.constant(patchify(grid));
  NodeId x = t.add_bias(
      t.matmul(patches, t.param(&ps.get(prefix + ".embed.w"), prefix + ".embed.w")),
      t.param(&ps.get(prefix + ".embed.b"), prefix + ".embed.b"));
  return t.add(x, t.param(&ps.get(prefix + ".pos"), prefix + ".pos"));
}

NodeId patch_unembed_node(Tape& t, NodeId tokens, ParamStore& ps,
                          const std::string& prefix, const GridConfig& g) {
  NodeId y = t.add_bias(
      t.matmul(tokens,
               t.param(&ps.get(prefix + ".unembed.w"), prefix + ".unembed.w")),
      t.param(&ps.get(prefix + ".unembed.b"), prefix + ".unembed.b"));
  return t.unpatchify(y, g.H, g.W, g.C, kPatch);
}

TensorF patch_embed(const OccupancyGrid& grid, ParamStore& ps,
                    const std::string& prefix) {
  Tape t;
  return t.value(patch_embed_node(t, grid, ps, prefix));
}

TensorF patch_unembed(const TensorF& tokens, ParamStore& ps,
                      const std::string& prefix, const GridConfig& g) {
  Tape t;
  NodeId tok = t.constant(tokens);
  return t.value(patch_unembed_node(t, tok, ps, prefix, g));
}

}  // namespace ltok::nn
