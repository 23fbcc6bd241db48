// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ltok/voxel.hpp"

namespace ltok {

struct HistogramSet {
  std::vector<BevHistogram> histograms;
  HistMode mode = HistMode::kOccupancy;
};

enum class EvalMode { kOccupancy, kDuplicated };

struct MetricReport {
  double mmd = 0;  // unbiased squared-MMD estimate, clamped at 0
  double jsd = 0;  // base-2, in [0, 1]
  EvalMode mode = EvalMode::kOccupancy;
  double bandwidth = 0;  // Gaussian kernel sigma actually used
  int n_real = 0;
  int n_gen = 0;

  std::string machine_line() const;
};

// JSD between the normalized aggregate histograms, base-2 logarithm.
double jsd(const HistogramSet& a, const HistogramSet& b);

// Unbiased U-statistic of squared MMD with a Gaussian kernel over
// L1-normalized flattened histograms. bandwidth empty = median heuristic
// over pairwise distances of the pooled sets (sigma = 1 if the median
// degenerates to 0). used_bandwidth reports the sigma applied.
double mmd(const HistogramSet& a, const HistogramSet& b,
           std::optional<double> bandwidth = std::nullopt,
           double* used_bandwidth = nullptr);

// Occupancy mode histograms both sides by occupied voxels. Duplicated mode
// derives per-bin coefficients from the aggregate real and generated
// occupancy histograms, duplicates generated voxel centers accordingly, and
// histograms the resulting points; the real side stays occupancy-based.
// coeff_override substitutes the derived coefficients (used for the all-ones
// identity check).
MetricReport evaluate_sets(
    const std::vector<OccupancyGrid>& real, const std::vector<OccupancyGrid>& gen,
    EvalMode mode, std::optional<double> bandwidth = std::nullopt,
    const std::array<double, BevHistogram::kBins * BevHistogram::kBins>*
        coeff_override = nullptr);

}  // namespace ltok
