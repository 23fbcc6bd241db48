// SPDX-License-Identifier: Apache-2.0
#include "ltok/vqvae.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "ltok/rng.hpp"

namespace ltok {

using nn::NodeId;
using nn::Tape;
using nn::TensorF;

namespace {

nn::BlockStackConfig stack_cfg(const VqVaeConfig& c) {
  return {c.n_blocks, c.dim, c.n_heads};
}

std::string encoder_prefix(EncoderKind which) {
  return which == EncoderKind::kDense ? "enc_dense" : "enc_sparse";
}

TensorF grid_bits_tensor(const OccupancyGrid& grid) {
  TensorF t({grid.config.H, grid.config.W, grid.config.C});
  for (size_t i = 0; i < grid.bits.size(); ++i)
    t.data[i] = static_cast<float>(grid.bits[i]);
  return t;
}

NodeId encoder_node(Tape& t, VqVaeModel& m, const OccupancyGrid& grid,
                    EncoderKind which) {
  const std::string prefix = encoder_prefix(which);
  NodeId x = patch_embed_node(t, grid, m.params, prefix);
  return block_stack(t, x, m.params, prefix, stack_cfg(m.cfg));
}

NodeId decoder_node(Tape& t, VqVaeModel& m, NodeId input) {
  NodeId x = t.add(input, t.param(&m.params.get("dec.pos"), "dec.pos"));
  x = block_stack(t, x, m.params, "dec", stack_cfg(m.cfg));
  return patch_unembed_node(t, x, m.params, "dec", m.grid);
}

double bce_value(const TensorF& logits, const TensorF& targets) {
  double sum = 0;
  for (size_t i = 0; i < logits.data.size(); ++i) {
    double l = logits.data[i], tg = targets.data[i];
    sum += std::max(l, 0.0) - l * tg + std::log1p(std::exp(-std::abs(l)));
  }
  return sum / static_cast<double>(logits.numel());
}

double mse_value(const TensorF& a, const TensorF& b) {
  double sum = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.numel());
}

CodeMap codemap_from_indices(const std::vector<int>& indices, int h, int w) {
  CodeMap map(h, w);
  for (size_t i = 0; i < indices.size(); ++i)
    map.entries[i] = static_cast<uint16_t>(indices[i]);
  return map;
}

void check_geometry(const OccupancyGrid& grid, const VqVaeModel& model) {
  if (!(grid.config == model.grid))
    throw std::invalid_argument("grid geometry does not match the model");
}

}  // namespace

VqVaeModel make_vqvae(const GridConfig& grid, const VqVaeConfig& cfg,
                      uint64_t seed) {
  if (cfg.dim % cfg.n_heads != 0)
    throw std::invalid_argument("dim must be divisible by n_heads");
  VqVaeModel m;
  m.grid = grid;
  m.cfg = cfg;
  m.codebook = Codebook(cfg.codebook_size, cfg.dim);
  m.bank = MemoryBank(cfg.bank_capacity, cfg.dim);

  Rng rng(hash_u64(seed ^ 0x76717661ull));
  int T = m.tokens(), F = m.patch_features();
  for (const char* enc : {"enc_dense", "enc_sparse"}) {
    init_patch_embed(m.params, enc, F, cfg.dim, T, rng);
    init_block_stack(m.params, enc, stack_cfg(cfg), rng);
  }
  m.params.create("dec.pos", TensorF::randn(rng, {T, cfg.dim}, 0.02f));
  init_block_stack(m.params, "dec", stack_cfg(cfg), rng);
  init_patch_unembed(m.params, "dec", cfg.dim, F, rng);

  // Conventional uniform codebook init; data-dependent k-means replaces dead
  // codes once the memory bank first fills (when reinit is enabled).
  float lim = 1.0f / cfg.codebook_size;
  m.codebook.codes = TensorF::uniform(rng, {cfg.codebook_size, cfg.dim}, -lim, lim);
  return m;
}

TensorF encode(const OccupancyGrid& grid, EncoderKind which, VqVaeModel& model) {
  check_geometry(grid, model);
  Tape t;
  return t.value(encoder_node(t, model, grid, which));
}

TensorF decode(const TensorF& quantized, VqVaeModel& model) {
  if (quantized.rank() != 2 || quantized.rows() != model.tokens() ||
      quantized.cols() != model.cfg.dim)
    throw std::invalid_argument("decode: quantized map geometry mismatch");
  Tape t;
  NodeId input = t.constant(quantized);
  return t.value(decoder_node(t, model, input));
}

TensorF decode(const CodeMap& map, VqVaeModel& model) {
  int h = model.grid.H / nn::kPatch, w = model.grid.W / nn::kPatch;
  if (map.h != h || map.w != w)
    throw std::invalid_argument("decode: code map geometry mismatch");
  if (!sentinel_free(map, model.codebook.K))
    throw std::invalid_argument("decode: code map contains MASK entries");
  TensorF q({map.h * map.w, model.cfg.dim});
  for (int i = 0; i < map.h * map.w; ++i)
    std::copy_n(
        &model.codebook.codes.data[static_cast<size_t>(map.entries[i]) *
                                   model.cfg.dim],
        model.cfg.dim, &q.data[static_cast<size_t>(i) * model.cfg.dim]);
  return decode(q, model);
}

OccupancyGrid binarize(const TensorF& logits, const GridConfig& cfg,
                       BinarizeMode mode, float temperature, uint64_t seed) {
  if (logits.numel() != static_cast<int64_t>(cfg.H) * cfg.W * cfg.C)
    throw std::invalid_argument("binarize: logit count mismatch");
  OccupancyGrid grid(cfg);
  if (mode == BinarizeMode::kThreshold) {
    for (size_t i = 0; i < grid.bits.size(); ++i)
      grid.bits[i] = logits.data[i] > 0.0f ? 1 : 0;
    return grid;
  }
  if (!(temperature > 0))
    throw std::invalid_argument("binarize: gumbel needs temperature > 0");
  Rng rng(seed);
  for (size_t i = 0; i < grid.bits.size(); ++i) {
    double g1 = rng.gumbel(), g0 = rng.gumbel();
    grid.bits[i] = (logits.data[i] + temperature * (g1 - g0)) > 0 ? 1 : 0;
  }
  return grid;
}

ReconstructResult reconstruct(const OccupancyGrid& grid, EncoderKind which,
                              VqVaeModel& model, float commitment_beta) {
  check_geometry(grid, model);
  Tape t;
  NodeId z = encoder_node(t, model, grid, which);
  QuantizeResult q = quantize(t.value(z), model.codebook);
  NodeId dec_in = t.constant(q.quantized);
  NodeId logits = decoder_node(t, model, dec_in);

  ReconstructResult out;
  out.logits = t.value(logits);
  out.codemap = codemap_from_indices(q.indices, model.grid.H / nn::kPatch,
                                     model.grid.W / nn::kPatch);
  TensorF target = grid_bits_tensor(grid);
  out.bce = bce_value(out.logits, target);
  double vq_mse = mse_value(t.value(z), q.quantized);
  out.codebook_loss = vq_mse;
  out.commitment_loss = commitment_beta * vq_mse;
  return out;
}

OccupancyGrid complete(const OccupancyGrid& sparse_grid, VqVaeModel& model) {
  check_geometry(sparse_grid, model);
  Tape t;
  NodeId z = encoder_node(t, model, sparse_grid, EncoderKind::kSparse);
  QuantizeResult q = quantize(t.value(z), model.codebook);
  NodeId logits = decoder_node(t, model, t.constant(q.quantized));
  return binarize(t.value(logits), model.grid, BinarizeMode::kThreshold);
}

CodeMap encode_to_codemap(const OccupancyGrid& grid, EncoderKind which,
                          VqVaeModel& model) {
  TensorF z = encode(grid, which, model);
  QuantizeResult q = quantize(z, model.codebook);
  return codemap_from_indices(q.indices, model.grid.H / nn::kPatch,
                              model.grid.W / nn::kPatch);
}

namespace {

struct BranchLoss {
  NodeId total;  // bce + codebook + beta*commitment
  double bce;
};

// One branch: encode `input`, quantize against the shared codebook, blend,
// decode, score against the (always dense) target.
BranchLoss build_branch(Tape& t, VqVaeModel& m, const OccupancyGrid& input,
                        const TensorF& target_bits, EncoderKind which,
                        NodeId codes_param, int64_t iter,
                        const VqVaeTrainConfig& cfg) {
  NodeId z = encoder_node(t, m, input, which);
  QuantizeResult q = quantize(t.value(z), m.codebook);
  record_usage(m.codebook, m.bank, q.indices, t.value(z), iter);

  VqLossNodes vq = vq_loss_terms(t, z, codes_param, q);
  NodeId dec_in = warmup_blend(t, z, q.quantized, iter, cfg.warmup_iters);
  NodeId logits = decoder_node(t, m, dec_in);
  NodeId bce = t.bce_with_logits(logits, target_bits);

  NodeId total =
      t.add(bce, t.add(vq.codebook_loss,
                       t.scale(vq.commitment_loss, cfg.commitment_beta)));
  return {total, t.scalar_value(bce)};
}

}  // namespace

TrainStats train_vqvae(VqVaeModel& model, const std::vector<PairedSample>& pairs,
                       const VqVaeTrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("train_vqvae: no training data");
  if (cfg.iterations < 1 || cfg.batch_size < 1 || !(cfg.lr > 0))
    throw std::invalid_argument("train_vqvae: invalid config");
  TrainStats stats;
  Rng rng(hash_u64(cfg.seed ^ 0x747261696eull));
  nn::AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, 1e-8f};

  for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
    Tape t;
    NodeId codes_param = t.param(&model.codebook.codes, "codebook.codes");
    NodeId total = -1;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const PairedSample& pair =
          pairs[rng.below(static_cast<uint64_t>(pairs.size()))];
      OccupancyGrid sparse_grid = voxelize(pair.sparse, model.grid);
      OccupancyGrid dense_grid = voxelize(pair.dense, model.grid);
      TensorF target = grid_bits_tensor(dense_grid);

      BranchLoss dense = build_branch(t, model, dense_grid, target,
                                      EncoderKind::kDense, codes_param, iter, cfg);
      BranchLoss sparse = build_branch(t, model, sparse_grid, target,
                                       EncoderKind::kSparse, codes_param, iter,
                                       cfg);
      NodeId item = t.add(dense.total, sparse.total);
      total = (total < 0) ? item : t.add(total, item);
    }
    if (cfg.batch_size > 1)
      total = t.scale(total, 1.0f / static_cast<float>(cfg.batch_size));

    double loss = t.scalar_value(total);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_vqvae: non-finite loss at iteration " +
                               std::to_string(iter));
    stats.loss_history.push_back(loss);

    try {
      t.backward(total);
    } catch (const std::exception& e) {
      throw std::runtime_error("train_vqvae: backward failed at iteration " +
                               std::to_string(iter) + ": " + e.what());
    }

    // Accumulate per-parameter gradients; shared parameters (decoder, codes)
    // appear once per use and their gradients sum here.
    std::map<std::string, TensorF> grad_sums;
    for (const auto& bind : t.bindings()) {
      if (!t.has_grad(bind.node)) continue;
      const TensorF& g = t.grad(bind.node);
      auto [it, inserted] = grad_sums.try_emplace(bind.name, g);
      if (!inserted)
        for (size_t i = 0; i < g.data.size(); ++i)
          it->second.data[i] += g.data[i];
    }

    std::vector<std::pair<std::string, const TensorF*>> grads;
    const TensorF* codes_grad = nullptr;
    for (const auto& [name, g] : grad_sums) {
      if (name == "codebook.codes")
        codes_grad = &g;
      else
        grads.emplace_back(name, &g);
    }
    model.params.adam_step(grads, adam);
    if (codes_grad)
      adam_update(model.codebook.codes, model.codebook.codes_m1,
                  model.codebook.codes_m2, *codes_grad, adam,
                  model.params.step);

    // Data-dependent codebook (re)initialization.
    if (cfg.reinit_enabled) {
      if (!model.codebook_seeded && model.bank.full()) {
        stats.reinit_events +=
            reinit_dead_codes(model.codebook, model.bank, iter,
                              cfg.reinit_threshold,
                              derive_seed(cfg.seed, 0x5eedull)) > 0;
        model.codebook_seeded = true;
      }
      if ((iter + 1) % cfg.reinit_every == 0 && model.bank.size() > 0) {
        stats.reinit_events +=
            reinit_dead_codes(model.codebook, model.bank, iter,
                              cfg.reinit_threshold,
                              derive_seed(cfg.seed, static_cast<uint64_t>(iter))) > 0;
      }
    }

    if (cfg.log_every > 0 && (iter + 1) % cfg.log_every == 0)
      std::cerr << "[train-vqvae] iter " << (iter + 1) << "/" << cfg.iterations
                << " loss " << loss << " util "
                << utilization(model.codebook, iter) << "\n";
    ++model.iters_done;
  }
  stats.final_utilization = utilization(model.codebook, cfg.iterations - 1);
  return stats;
}

void save_vqvae(const VqVaeModel& model, const std::string& path) {
  std::map<std::string, TensorF> entries = nn::checkpoint_entries(model.params);
  entries.emplace("codebook.codes", model.codebook.codes);
  entries.emplace("codebook.codes.m1", model.codebook.codes_m1);
  entries.emplace("codebook.codes.m2", model.codebook.codes_m2);
  TensorF lu({model.codebook.K});
  TensorF eu({model.codebook.K});
  for (int k = 0; k < model.codebook.K; ++k) {
    lu.data[k] = static_cast<float>(model.codebook.last_used[k]);
    eu.data[k] = static_cast<float>(model.codebook.ever_used[k]);
  }
  entries.emplace("codebook.last_used", std::move(lu));
  entries.emplace("codebook.ever_used", std::move(eu));

  TensorF grid({9});
  const GridConfig& g = model.grid;
  grid.data = {static_cast<float>(g.x_min), static_cast<float>(g.x_max),
               static_cast<float>(g.y_min), static_cast<float>(g.y_max),
               static_cast<float>(g.z_min), static_cast<float>(g.z_max),
               static_cast<float>(g.vx),    static_cast<float>(g.vy),
               static_cast<float>(g.vz)};
  entries.emplace("meta.grid", std::move(grid));
  TensorF arch({7});
  arch.data = {static_cast<float>(model.cfg.n_blocks),
               static_cast<float>(model.cfg.dim),
               static_cast<float>(model.cfg.n_heads),
               static_cast<float>(model.cfg.codebook_size),
               static_cast<float>(model.cfg.bank_capacity),
               static_cast<float>(model.iters_done),
               model.codebook_seeded ? 1.0f : 0.0f};
  entries.emplace("meta.arch", std::move(arch));
  nn::save_ulck(entries, path);
}

VqVaeModel load_vqvae(const std::string& path) {
  auto entries = nn::load_ulck(path);
  auto need = [&](const std::string& name) -> const TensorF& {
    auto it = entries.find(name);
    if (it == entries.end())
      throw std::runtime_error("checkpoint missing entry: " + name);
    return it->second;
  };
  const TensorF& gm = need("meta.grid");
  const TensorF& am = need("meta.arch");
  if (gm.numel() != 9 || am.numel() != 7)
    throw std::runtime_error("malformed model checkpoint meta");
  GridConfig grid = make_grid_config(gm.data[0], gm.data[1], gm.data[2],
                                     gm.data[3], gm.data[4], gm.data[5],
                                     gm.data[6], gm.data[7], gm.data[8]);
  VqVaeConfig cfg;
  cfg.n_blocks = static_cast<int>(am.data[0]);
  cfg.dim = static_cast<int>(am.data[1]);
  cfg.n_heads = static_cast<int>(am.data[2]);
  cfg.codebook_size = static_cast<int>(am.data[3]);
  cfg.bank_capacity = static_cast<int>(am.data[4]);

  VqVaeModel model = make_vqvae(grid, cfg, 0);
  model.iters_done = static_cast<int64_t>(am.data[5]);
  model.codebook_seeded = am.data[6] != 0.0f;
  nn::restore_from_checkpoint(model.params, entries);
  model.codebook.codes = need("codebook.codes");
  model.codebook.codes_m1 = need("codebook.codes.m1");
  model.codebook.codes_m2 = need("codebook.codes.m2");
  const TensorF& lu = need("codebook.last_used");
  const TensorF& eu = need("codebook.ever_used");
  if (lu.numel() != cfg.codebook_size || eu.numel() != cfg.codebook_size)
    throw std::runtime_error("malformed codebook bookkeeping in checkpoint");
  for (int k = 0; k < cfg.codebook_size; ++k) {
    model.codebook.last_used[k] = static_cast<int64_t>(lu.data[k]);
    model.codebook.ever_used[k] = eu.data[k] != 0.0f;
  }
  return model;
}

}  // namespace ltok
