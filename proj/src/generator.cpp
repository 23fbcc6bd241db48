// SPDX-License-Identifier: Apache-2.0
#include "ltok/generator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ltok/rng.hpp"

namespace ltok {

using nn::NodeId;
using nn::Tape;
using nn::TensorF;

bool BlankSet::contains(int code) const {
  return std::binary_search(codes.begin(), codes.end(), code);
}

GeneratorModel make_generator(int K, int h, int w,
                              const nn::BlockStackConfig& stack, uint64_t seed) {
  GeneratorModel m;
  m.K = K;
  m.h = h;
  m.w = w;
  m.stack = stack;
  Rng rng(hash_u64(seed ^ 0x67656eull));
  // K codebook rows plus the dedicated MASK embedding.
  m.params.create("tok", TensorF::randn(rng, {K + 1, stack.dim}, 0.02f));
  m.params.create("pos", TensorF::randn(rng, {h * w, stack.dim}, 0.02f));
  init_block_stack(m.params, "body", stack, rng);
  m.params.create("head.w", TensorF::randn(rng, {stack.dim, K}, 0.02f));
  m.params.create("head.b", TensorF::zeros({K}));
  return m;
}

int64_t mask_schedule(int64_t t, int64_t T, int64_t n_tokens) {
  if (t < 0 || t > T || T < 1)
    throw std::invalid_argument("mask_schedule: need 0 <= t <= T");
  double frac = std::cos(std::numbers::pi / 2.0 * static_cast<double>(t) / T);
  return static_cast<int64_t>(std::ceil(n_tokens * frac));
}

namespace {

NodeId generator_logits_node(Tape& t, GeneratorModel& m, const CodeMap& canvas) {
  if (canvas.h != m.h || canvas.w != m.w)
    throw std::invalid_argument("code map geometry does not match the model");
  std::vector<int> idx(canvas.entries.size());
  for (size_t i = 0; i < canvas.entries.size(); ++i) {
    if (canvas.entries[i] > m.K)
      throw std::invalid_argument("code map entry out of range");
    idx[i] = canvas.entries[i];
  }
  NodeId tok = t.param(&m.params.get("tok"), "tok");
  NodeId x = t.gather_rows(tok, std::move(idx));
  x = t.add(x, t.param(&m.params.get("pos"), "pos"));
  x = block_stack(t, x, m.params, "body", m.stack);
  return t.add_bias(t.matmul(x, t.param(&m.params.get("head.w"), "head.w")),
                    t.param(&m.params.get("head.b"), "head.b"));
}

}  // namespace

TensorF generator_logits(GeneratorModel& model, const CodeMap& canvas) {
  Tape t;
  return t.value(generator_logits_node(t, model, canvas));
}

GenTrainStats train_masked(GeneratorModel& model,
                           const std::vector<CodeMap>& corpus,
                           const GenTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_masked: empty corpus");
  for (const CodeMap& m : corpus) {
    if (m.h != model.h || m.w != model.w)
      throw std::invalid_argument("train_masked: corpus geometry mismatch");
    if (!sentinel_free(m, model.K))
      throw std::invalid_argument("train_masked: corpus map contains MASK");
  }
  GenTrainStats stats;
  Rng rng(hash_u64(cfg.seed ^ 0x6d61736bull));
  nn::AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, 1e-8f};
  int64_t n = model.tokens();
  uint16_t MASK = mask_sentinel(model.K);
  std::vector<int64_t> order(static_cast<size_t>(n));

  for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
    const CodeMap& src = corpus[rng.below(corpus.size())];
    // Mask count from the schedule at a uniform step fraction; a draw that
    // would mask nothing is rejected and redrawn.
    int64_t n_masked = 0;
    do {
      double u = rng.uniform();
      n_masked = static_cast<int64_t>(
          std::ceil(n * std::cos(std::numbers::pi / 2.0 * u)));
    } while (n_masked == 0);
    n_masked = std::min(n_masked, n);

    std::iota(order.begin(), order.end(), 0);
    for (int64_t i = 0; i < n_masked; ++i) {  // partial Fisher-Yates
      int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - i)));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    CodeMap canvas = src;
    std::vector<int> targets(static_cast<size_t>(n));
    std::vector<uint8_t> mask(static_cast<size_t>(n), 0);
    for (int64_t i = 0; i < n; ++i)
      targets[static_cast<size_t>(i)] = src.entries[static_cast<size_t>(i)];
    for (int64_t i = 0; i < n_masked; ++i) {
      int64_t pos = order[static_cast<size_t>(i)];
      canvas.entries[static_cast<size_t>(pos)] = MASK;
      mask[static_cast<size_t>(pos)] = 1;
    }

    Tape t;
    NodeId logits = generator_logits_node(t, model, canvas);
    NodeId loss = t.cross_entropy(logits, targets, mask, cfg.label_smoothing);
    double loss_val = t.scalar_value(loss);
    if (!std::isfinite(loss_val))
      throw std::runtime_error("train_masked: non-finite loss at iteration " +
                               std::to_string(iter));
    stats.loss_history.push_back(loss_val);
    t.backward(loss);

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
    grads.reserve(grad_sums.size());
    for (const auto& [name, g] : grad_sums) grads.emplace_back(name, &g);
    model.params.adam_step(grads, adam);

    if (cfg.log_every > 0 && (iter + 1) % cfg.log_every == 0)
      std::cerr << "[train-gen] iter " << (iter + 1) << "/" << cfg.iterations
                << " ce " << loss_val << "\n";
    ++model.iters_done;
  }
  return stats;
}

BlankSet identify_blank(const std::vector<CodeMap>& corpus, int K,
                        double coverage) {
  if (corpus.empty())
    throw std::invalid_argument("identify_blank: empty corpus");
  if (!(coverage > 0 && coverage < 1))
    throw std::invalid_argument("identify_blank: coverage must be in (0, 1)");
  BlankSet out;
  out.coverage = coverage;
  out.frequency.assign(static_cast<size_t>(K), 0);
  int64_t total = 0;
  for (const CodeMap& m : corpus)
    for (uint16_t e : m.entries) {
      if (e >= K)
        throw std::invalid_argument("identify_blank: corpus map contains MASK");
      ++out.frequency[e];
      ++total;
    }
  std::vector<int> by_freq(static_cast<size_t>(K));
  std::iota(by_freq.begin(), by_freq.end(), 0);
  std::sort(by_freq.begin(), by_freq.end(), [&](int a, int b) {
    if (out.frequency[a] != out.frequency[b])
      return out.frequency[a] > out.frequency[b];
    return a < b;  // frequency ties take the lower index first
  });
  int64_t acc = 0;
  for (int code : by_freq) {
    out.codes.push_back(code);
    acc += out.frequency[code];
    if (static_cast<double>(acc) >= coverage * static_cast<double>(total)) break;
  }
  std::sort(out.codes.begin(), out.codes.end());
  return out;
}

namespace {

struct Candidate {
  int64_t cell;
  int code;
  double confidence;
};

}  // namespace

CodeMap sample(GeneratorModel& model, const GenConfig& cfg,
               const BlankSet& blanks, const CodeMap* condition) {
  if (cfg.total_steps < 1 || cfg.suppress_steps < 0 ||
      cfg.suppress_steps > cfg.total_steps || cfg.temperature < 0)
    throw std::invalid_argument("sample: invalid generation config");
  const int K = model.K;
  const uint16_t MASK = mask_sentinel(K);
  if (static_cast<int>(blanks.codes.size()) >= K)
    throw std::runtime_error("degenerate blank set");

  CodeMap canvas(model.h, model.w, MASK);
  if (condition) {
    if (condition->h != model.h || condition->w != model.w)
      throw std::invalid_argument("sample: condition geometry mismatch");
    canvas = *condition;
  }
  int64_t n_free = 0;
  for (uint16_t e : canvas.entries) n_free += (e == MASK);
  if (n_free == 0) return canvas;  // nothing to fill

  Rng rng(cfg.seed);
  const int T = cfg.total_steps, S = cfg.suppress_steps;
  std::vector<double> probs(static_cast<size_t>(K));

  for (int t = 1; t <= T; ++t) {
    std::vector<int64_t> masked;
    for (int64_t i = 0; i < canvas.size(); ++i)
      if (canvas.entries[static_cast<size_t>(i)] == MASK) masked.push_back(i);
    if (masked.empty()) break;

    TensorF logits = generator_logits(model, canvas);
    // Keep at least one commit per step so the masked count strictly
    // decreases even when the schedule plateaus on tiny maps.
    int64_t target_remaining =
        std::min(mask_schedule(t, T, n_free),
                 static_cast<int64_t>(masked.size()) - 1);
    int64_t n_commit = static_cast<int64_t>(masked.size()) - target_remaining;

    bool suppress = t <= S;
    float tau = cfg.temperature * (1.0f - static_cast<float>(t) / T);
    std::vector<Candidate> cands;
    cands.reserve(masked.size());
    for (int64_t cell : masked) {
      const float* row = &logits.data[static_cast<size_t>(cell) * K];
      // Temperature-1 probabilities (post-suppression) give both the sampling
      // weights' base and the confidence score.
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        if (suppress && blanks.contains(k)) continue;
        mx = std::max(mx, static_cast<double>(row[k]));
      }
      if (!std::isfinite(mx)) throw std::runtime_error("degenerate blank set");
      double sum = 0;
      for (int k = 0; k < K; ++k) {
        if (suppress && blanks.contains(k)) {
          probs[static_cast<size_t>(k)] = 0.0;
          continue;
        }
        probs[static_cast<size_t>(k)] = std::exp(row[k] - mx);
        sum += probs[static_cast<size_t>(k)];
      }
      for (int k = 0; k < K; ++k) probs[static_cast<size_t>(k)] /= sum;

      int code;
      if (tau > 0) {
        // Categorical draw at temperature tau: p_k ~ probs^(1/tau).
        double tmx = -std::numeric_limits<double>::infinity();
        double tsum = 0;
        std::vector<double> tp(static_cast<size_t>(K), 0.0);
        for (int k = 0; k < K; ++k) {
          if (probs[static_cast<size_t>(k)] <= 0) continue;
          tp[static_cast<size_t>(k)] = std::log(probs[static_cast<size_t>(k)]) / tau;
          tmx = std::max(tmx, tp[static_cast<size_t>(k)]);
        }
        for (int k = 0; k < K; ++k) {
          if (probs[static_cast<size_t>(k)] <= 0) continue;
          tp[static_cast<size_t>(k)] = std::exp(tp[static_cast<size_t>(k)] - tmx);
          tsum += tp[static_cast<size_t>(k)];
        }
        double r = rng.uniform() * tsum, acc = 0;
        code = -1;
        for (int k = 0; k < K; ++k) {
          if (probs[static_cast<size_t>(k)] <= 0) continue;
          acc += tp[static_cast<size_t>(k)];
          if (acc >= r) {
            code = k;
            break;
          }
        }
        if (code < 0) {  // numeric tail; take the last admissible code
          for (int k = K - 1; k >= 0; --k)
            if (probs[static_cast<size_t>(k)] > 0) {
              code = k;
              break;
            }
        }
      } else {
        code = 0;
        double best = -1;
        for (int k = 0; k < K; ++k)
          if (probs[static_cast<size_t>(k)] > best) {
            best = probs[static_cast<size_t>(k)];
            code = k;
          }
      }
      double conf = probs[static_cast<size_t>(code)];
      if (tau > 0) conf += tau * rng.gumbel();
      cands.push_back(Candidate{cell, code, conf});
    }

    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.cell < b.cell;
    });
    for (int64_t i = 0; i < n_commit && i < static_cast<int64_t>(cands.size()); ++i)
      canvas.entries[static_cast<size_t>(cands[static_cast<size_t>(i)].cell)] =
          static_cast<uint16_t>(cands[static_cast<size_t>(i)].code);
  }
  return canvas;
}

CodeMap denoise(const CodeMap& map, GeneratorModel& model, int rounds,
                double mask_fraction, const GenConfig& cfg) {
  if (!sentinel_free(map, model.K))
    throw std::invalid_argument("denoise: input must be sentinel-free");
  if (rounds < 0) throw std::invalid_argument("denoise: rounds must be >= 0");
  if (rounds > 0 && !(mask_fraction > 0 && mask_fraction < 1))
    throw std::invalid_argument("denoise: mask_fraction must be in (0, 1)");
  const uint16_t MASK = mask_sentinel(model.K);
  CodeMap current = map;
  for (int r = 0; r < rounds; ++r) {
    uint64_t round_seed = derive_seed(cfg.seed, static_cast<uint64_t>(r));
    Rng rrng(round_seed);
    int rh = std::clamp(static_cast<int>(std::llround(model.h * std::sqrt(mask_fraction))), 1, model.h);
    int rw = std::clamp(static_cast<int>(std::llround(model.w * std::sqrt(mask_fraction))), 1, model.w);
    int r0 = static_cast<int>(rrng.below(static_cast<uint64_t>(model.h - rh + 1)));
    int c0 = static_cast<int>(rrng.below(static_cast<uint64_t>(model.w - rw + 1)));
    CodeMap cond = current;
    for (int i = r0; i < r0 + rh; ++i)
      for (int j = c0; j < c0 + rw; ++j) cond.at(i, j) = MASK;
    GenConfig round_cfg = cfg;
    round_cfg.seed = derive_seed(round_seed, 1);
    current = sample(model, round_cfg, model.blanks, &cond);
  }
  return current;
}

CodeMap paste_region(const CodeMap& dst, const CodeMap& src, const Rect& rect,
                     int dst_r, int dst_c) {
  if (rect.h < 0 || rect.w < 0 || rect.r0 < 0 || rect.c0 < 0 ||
      rect.r0 + rect.h > src.h || rect.c0 + rect.w > src.w)
    throw std::out_of_range("paste_region: source rectangle out of bounds");
  if (dst_r < 0 || dst_c < 0 || dst_r + rect.h > dst.h || dst_c + rect.w > dst.w)
    throw std::out_of_range("paste_region: destination rectangle out of bounds");
  CodeMap out = dst;
  for (int i = 0; i < rect.h; ++i)
    for (int j = 0; j < rect.w; ++j)
      out.at(dst_r + i, dst_c + j) = src.at(rect.r0 + i, rect.c0 + j);
  return out;
}

void save_generator(const GeneratorModel& model, const std::string& path) {
  std::map<std::string, TensorF> entries = nn::checkpoint_entries(model.params);
  TensorF arch({7});
  arch.data = {static_cast<float>(model.K),
               static_cast<float>(model.h),
               static_cast<float>(model.w),
               static_cast<float>(model.stack.n_blocks),
               static_cast<float>(model.stack.dim),
               static_cast<float>(model.stack.n_heads),
               static_cast<float>(model.iters_done)};
  entries.emplace("meta.arch", std::move(arch));
  TensorF blanks({static_cast<int>(model.blanks.codes.size())});
  for (size_t i = 0; i < model.blanks.codes.size(); ++i)
    blanks.data[i] = static_cast<float>(model.blanks.codes[i]);
  entries.emplace("meta.blanks", std::move(blanks));
  TensorF freq({model.K});
  for (int k = 0; k < model.K && k < static_cast<int>(model.blanks.frequency.size()); ++k)
    freq.data[k] = static_cast<float>(model.blanks.frequency[k]);
  entries.emplace("meta.blank_freq", std::move(freq));
  TensorF cov({1});
  cov.data[0] = static_cast<float>(model.blanks.coverage);
  entries.emplace("meta.blank_coverage", std::move(cov));
  nn::save_ulck(entries, path);
}

GeneratorModel load_generator(const std::string& path) {
  auto entries = nn::load_ulck(path);
  auto it = entries.find("meta.arch");
  if (it == entries.end() || it->second.numel() != 7)
    throw std::runtime_error("malformed generator checkpoint meta");
  const TensorF& a = it->second;
  nn::BlockStackConfig stack{static_cast<int>(a.data[3]),
                             static_cast<int>(a.data[4]),
                             static_cast<int>(a.data[5])};
  GeneratorModel model =
      make_generator(static_cast<int>(a.data[0]), static_cast<int>(a.data[1]),
                     static_cast<int>(a.data[2]), stack, 0);
  model.iters_done = static_cast<int64_t>(a.data[6]);
  nn::restore_from_checkpoint(model.params, entries);
  auto bl = entries.find("meta.blanks");
  if (bl != entries.end())
    for (float v : bl->second.data)
      model.blanks.codes.push_back(static_cast<int>(v));
  auto fr = entries.find("meta.blank_freq");
  if (fr != entries.end())
    for (float v : fr->second.data)
      model.blanks.frequency.push_back(static_cast<int64_t>(v));
  auto cv = entries.find("meta.blank_coverage");
  if (cv != entries.end() && cv->second.numel() == 1)
    model.blanks.coverage = cv->second.data[0];
  return model;
}

}  // namespace ltok
