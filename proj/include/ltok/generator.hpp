// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ltok/blocks.hpp"
#include "ltok/codemap.hpp"

namespace ltok {

// Codes that represent free space, by corpus frequency.
struct BlankSet {
  std::vector<int> codes;         // ascending
  std::vector<int64_t> frequency; // per-code corpus counts, length K
  double coverage = 0;            // requested cumulative-frequency coverage

  bool contains(int code) const;
};

struct GenConfig {
  int total_steps = 12;       // T
  int suppress_steps = 6;     // S: BLANK codes suppressed while t <= S
  float temperature = 1.0f;   // tau0; tau(t) = tau0 * (1 - t/T)
  uint64_t seed = 0;
};

// Bidirectional transformer over code maps with a dedicated MASK embedding
// (the K+1-th row of the token table, never a codebook entry).
struct GeneratorModel {
  int K = 0;       // codebook size
  int h = 0, w = 0;
  nn::BlockStackConfig stack{6, 128, 4};
  nn::ParamStore params;
  BlankSet blanks;
  int64_t iters_done = 0;

  int tokens() const { return h * w; }
};

GeneratorModel make_generator(int K, int h, int w,
                              const nn::BlockStackConfig& stack, uint64_t seed);

struct GenTrainConfig {
  int64_t iterations = 2000;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.96f;
  float label_smoothing = 0.1f;
  uint64_t seed = 1;
  int log_every = 0;
};

// Tokens remaining masked after step t of T: ceil(n_tokens * cos(pi/2 * t/T)).
int64_t mask_schedule(int64_t t, int64_t T, int64_t n_tokens);

// Logits at every position: (h*w) x K.
nn::TensorF generator_logits(GeneratorModel& model, const CodeMap& canvas);

struct GenTrainStats {
  std::vector<double> loss_history;
};

// Masked-token training over a corpus of complete code maps.
GenTrainStats train_masked(GeneratorModel& model,
                           const std::vector<CodeMap>& corpus,
                           const GenTrainConfig& cfg);

// Smallest most-frequent prefix whose cumulative corpus frequency reaches
// `coverage`; frequency ties resolve to the lower code index.
BlankSet identify_blank(const std::vector<CodeMap>& corpus, int K,
                        double coverage);

// Iterative confidence-based decoding with free-space suppression. The
// condition, when given, uses MASK for cells to fill; conditioned cells are
// never overwritten. Pure function of (params, cfg.seed, condition).
CodeMap sample(GeneratorModel& model, const GenConfig& cfg,
               const BlankSet& blanks, const CodeMap* condition = nullptr);

// Re-masks a random rectangle covering ~mask_fraction of cells each round and
// regenerates it with the rest as condition.
CodeMap denoise(const CodeMap& map, GeneratorModel& model, int rounds,
                double mask_fraction, const GenConfig& cfg);

// Copies src entries in src_rect (r0, c0, height, width) onto dst starting at
// dst_origin (r, c). Throws on out-of-bounds rectangles.
struct Rect {
  int r0 = 0, c0 = 0, h = 0, w = 0;
};
CodeMap paste_region(const CodeMap& dst, const CodeMap& src, const Rect& src_rect,
                     int dst_r, int dst_c);

void save_generator(const GeneratorModel& model, const std::string& path);
GeneratorModel load_generator(const std::string& path);

}  // namespace ltok
