// SPDX-License-Identifier: Apache-2.0
#include "ltok/codebook.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ltok/rng.hpp"

namespace ltok {

using nn::NodeId;
using nn::Tape;
using nn::TensorF;

Codebook::Codebook(int K_, int D_) : K(K_), D(D_) {
  if (K < 2) throw std::invalid_argument("codebook needs K >= 2");
  codes = TensorF::zeros({K, D});
  last_used.assign(K, kNeverUsed);
  ever_used.assign(K, 0);
  codes_m1 = TensorF::zeros({K, D});
  codes_m2 = TensorF::zeros({K, D});
}

MemoryBank::MemoryBank(int capacity_, int D_) : capacity(capacity_), D(D_) {
  if (capacity < 1) throw std::invalid_argument("bank capacity must be >= 1");
  rows.assign(static_cast<size_t>(capacity) * D, 0.0f);
}

void MemoryBank::push(const float* row) {
  std::copy_n(row, D, &rows[static_cast<size_t>(cursor) * D]);
  cursor = (cursor + 1) % capacity;
  ++written;
}

namespace {

double row_sqdist(const float* a, const float* b, int D) {
  double s = 0;
  for (int d = 0; d < D; ++d) {
    double diff = static_cast<double>(a[d]) - b[d];
    s += diff * diff;
  }
  return s;
}

}  // namespace

QuantizeResult quantize(const TensorF& z, const Codebook& cb) {
  if (z.rank() != 2 || z.cols() != cb.D)
    throw std::invalid_argument("quantize: z must be N x D");
  if (!z.all_finite()) throw std::invalid_argument("quantize: non-finite input");
  int N = z.rows();
  QuantizeResult out;
  out.indices.resize(N);
  out.quantized = TensorF({N, cb.D});
  double total = 0;
  for (int i = 0; i < N; ++i) {
    const float* zi = &z.data[static_cast<size_t>(i) * cb.D];
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < cb.K; ++k) {
      double d = row_sqdist(zi, &cb.codes.data[static_cast<size_t>(k) * cb.D],
                            cb.D);
      if (d < best) {  // strict comparison keeps the lowest index on ties
        best = d;
        best_k = k;
      }
    }
    out.indices[i] = best_k;
    std::copy_n(&cb.codes.data[static_cast<size_t>(best_k) * cb.D], cb.D,
                &out.quantized.data[static_cast<size_t>(i) * cb.D]);
    total += best;
  }
  out.mse = total / (static_cast<double>(N) * cb.D);
  return out;
}

VqLossNodes vq_loss_terms(Tape& t, NodeId z, NodeId codes_param,
                          const QuantizeResult& q) {
  // ||sg[z] - zq||^2: gradient reaches only the gathered codes.
  NodeId gathered = t.gather_rows(codes_param, q.indices);
  NodeId codebook_loss = t.mse_vs_const(gathered, t.value(z));
  // ||sg[zq] - z||^2: gradient reaches only the encoder output.
  NodeId commitment_loss = t.mse_vs_const(z, q.quantized);
  return {codebook_loss, commitment_loss};
}

NodeId straight_through_compose(Tape& t, NodeId z, const TensorF& quantized) {
  return t.replace_value(z, quantized);
}

NodeId warmup_blend(Tape& t, NodeId z, const TensorF& quantized, int64_t iter,
                    int64_t warmup_iters) {
  if (warmup_iters < 1)
    throw std::invalid_argument("warmup_blend: warmup_iters must be >= 1");
  float alpha = static_cast<float>(
      std::min(1.0, static_cast<double>(iter) / static_cast<double>(warmup_iters)));
  NodeId st = straight_through_compose(t, z, quantized);
  if (alpha >= 1.0f) return st;
  return t.add(t.scale(st, alpha), t.scale(z, 1.0f - alpha));
}

void record_usage(Codebook& cb, MemoryBank& bank, const std::vector<int>& indices,
                  const TensorF& z, int64_t iter) {
  for (int k : indices) {
    cb.last_used[k] = iter;
    cb.ever_used[k] = 1;
  }
  if (z.rank() != 2 || z.cols() != bank.D)
    throw std::invalid_argument("record_usage: embedding width mismatch");
  for (int i = 0; i < z.rows(); ++i)
    bank.push(&z.data[static_cast<size_t>(i) * z.cols()]);
}

double utilization(const Codebook& cb, int64_t iter) {
  int live = 0;
  for (int k = 0; k < cb.K; ++k)
    if (!cb.is_dead(k, iter)) ++live;
  return static_cast<double>(live) / cb.K;
}

TensorF kmeans(const MemoryBank& bank, int k, uint64_t seed, int lloyd_iters) {
  int64_t n = bank.size();
  if (n < 1) throw std::invalid_argument("kmeans: empty bank");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  int D = bank.D;
  Rng rng(seed);
  TensorF centroids({k, D});

  if (n < k) {
    // Not enough distinct rows; sample with replacement.
    for (int c = 0; c < k; ++c) {
      int64_t i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
      std::copy_n(bank.row(i), D, &centroids.data[static_cast<size_t>(c) * D]);
    }
    return centroids;
  }

  // k-means++ seeding.
  std::vector<double> dist2(static_cast<size_t>(n),
                            std::numeric_limits<double>::infinity());
  int64_t first = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
  std::copy_n(bank.row(first), D, centroids.data.data());
  for (int c = 1; c < k; ++c) {
    const float* prev = &centroids.data[static_cast<size_t>(c - 1) * D];
    double total = 0;
    for (int64_t i = 0; i < n; ++i) {
      dist2[static_cast<size_t>(i)] =
          std::min(dist2[static_cast<size_t>(i)], row_sqdist(bank.row(i), prev, D));
      total += dist2[static_cast<size_t>(i)];
    }
    int64_t pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total, acc = 0;
      for (int64_t i = 0; i < n; ++i) {
        acc += dist2[static_cast<size_t>(i)];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
    }
    std::copy_n(bank.row(pick), D, &centroids.data[static_cast<size_t>(c) * D]);
  }

  // Lloyd iterations; empty clusters keep their previous centroid.
  std::vector<int> assign(static_cast<size_t>(n), 0);
  for (int it = 0; it < lloyd_iters; ++it) {
    for (int64_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        double d = row_sqdist(bank.row(i),
                              &centroids.data[static_cast<size_t>(c) * D], D);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assign[static_cast<size_t>(i)] = best_c;
    }
    std::vector<double> sums(static_cast<size_t>(k) * D, 0.0);
    std::vector<int64_t> counts(static_cast<size_t>(k), 0);
    for (int64_t i = 0; i < n; ++i) {
      int c = assign[static_cast<size_t>(i)];
      const float* r = bank.row(i);
      double* s = &sums[static_cast<size_t>(c) * D];
      for (int d = 0; d < D; ++d) s[d] += r[d];
      ++counts[static_cast<size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;
      float* dst = &centroids.data[static_cast<size_t>(c) * D];
      const double* s = &sums[static_cast<size_t>(c) * D];
      for (int d = 0; d < D; ++d)
        dst[d] = static_cast<float>(s[d] / counts[static_cast<size_t>(c)]);
    }
  }
  return centroids;
}

int reinit_dead_codes(Codebook& cb, const MemoryBank& bank, int64_t iter,
                      double threshold, uint64_t seed) {
  if (utilization(cb, iter) >= threshold) return 0;
  if (bank.size() < 1)
    throw std::invalid_argument("reinit_dead_codes: empty memory bank");
  std::vector<int> dead;
  for (int k = 0; k < cb.K; ++k)
    if (cb.is_dead(k, iter)) dead.push_back(k);
  if (dead.empty()) return 0;

  TensorF centroids = kmeans(bank, static_cast<int>(dead.size()), seed);
  for (size_t c = 0; c < dead.size(); ++c) {
    int k = dead[c];
    std::copy_n(&centroids.data[c * cb.D], cb.D,
                &cb.codes.data[static_cast<size_t>(k) * cb.D]);
    // Fresh codes get fresh optimizer state and a fresh usage stamp.
    std::fill_n(&cb.codes_m1.data[static_cast<size_t>(k) * cb.D], cb.D, 0.0f);
    std::fill_n(&cb.codes_m2.data[static_cast<size_t>(k) * cb.D], cb.D, 0.0f);
    cb.last_used[k] = iter;
  }
  return static_cast<int>(dead.size());
}

}  // namespace ltok
