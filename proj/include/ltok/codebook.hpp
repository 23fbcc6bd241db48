// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ltok/tape.hpp"
#include "ltok/tensor.hpp"

namespace ltok {

// K learnable D-dimensional codes plus usage bookkeeping. A code untouched
// for more than kDeadWindow iterations counts as dead.
struct Codebook {
  static constexpr int kDeadWindow = 256;
  static constexpr int64_t kNeverUsed = -16777216;  // exact in f32

  int K = 0, D = 0;
  nn::TensorF codes;  // K x D
  std::vector<int64_t> last_used;
  std::vector<uint8_t> ever_used;
  // Optimizer moments for the codes (updated alongside model parameters).
  nn::TensorF codes_m1, codes_m2;

  Codebook() = default;
  Codebook(int K_, int D_);

  bool is_dead(int k, int64_t iter) const {
    return iter - last_used[k] > kDeadWindow;
  }
};

// Ring buffer of recent encoder embeddings; rows are copies.
struct MemoryBank {
  int capacity = 0, D = 0;
  std::vector<float> rows;  // capacity x D once full
  int64_t written = 0;      // total rows ever pushed
  int64_t cursor = 0;

  MemoryBank() = default;
  MemoryBank(int capacity_, int D_);

  int64_t size() const { return std::min<int64_t>(written, capacity); }
  bool full() const { return written >= capacity; }
  void push(const float* row);
  const float* row(int64_t i) const { return &rows[static_cast<size_t>(i) * D]; }
};

struct QuantizeResult {
  std::vector<int> indices;  // one code id per input row
  nn::TensorF quantized;     // rows copied from the codebook
  double mse = 0;            // mean squared quantization error
};

// Nearest code per row by squared distance, ties to the lowest index.
// Distances accumulate in double over ascending dimensions, so an exhaustive
// scan with the same convention matches bit-for-bit.
QuantizeResult quantize(const nn::TensorF& z, const Codebook& cb);

// Eq.-style loss pair with the stop-gradient contract: the codebook term
// trains only the codes, the commitment term only the encoder.
struct VqLossNodes {
  nn::NodeId codebook_loss;
  nn::NodeId commitment_loss;
};
VqLossNodes vq_loss_terms(nn::Tape& t, nn::NodeId z, nn::NodeId codes_param,
                          const QuantizeResult& q);

// Forward is the quantized value; backward passes gradients to z unchanged.
nn::NodeId straight_through_compose(nn::Tape& t, nn::NodeId z,
                                    const nn::TensorF& quantized);

// alpha = min(1, iter/warmup_iters); alpha*ST(z, zq) + (1-alpha)*z.
nn::NodeId warmup_blend(nn::Tape& t, nn::NodeId z, const nn::TensorF& quantized,
                        int64_t iter, int64_t warmup_iters);

// Stamps last_used for every index and pushes the raw (pre-quantization)
// embeddings into the bank.
void record_usage(Codebook& cb, MemoryBank& bank, const std::vector<int>& indices,
                  const nn::TensorF& z, int64_t iter);

// Fraction of codes used within the dead-code window.
double utilization(const Codebook& cb, int64_t iter);

// K-means (k-means++ seeding, fixed Lloyd iteration count) over the bank.
nn::TensorF kmeans(const MemoryBank& bank, int k, uint64_t seed,
                   int lloyd_iters = 10);

// When utilization < threshold, replaces every dead code with a k-means
// centroid of the bank; live codes are untouched. Returns the number of codes
// replaced. If the bank holds fewer rows than dead codes, bank rows are
// sampled with replacement instead.
int reinit_dead_codes(Codebook& cb, const MemoryBank& bank, int64_t iter,
                      double threshold, uint64_t seed);

}  // namespace ltok
