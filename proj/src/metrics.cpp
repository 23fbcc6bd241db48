// SPDX-License-Identifier: Apache-2.0
#include "ltok/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ltok {

namespace {

constexpr int kDim = BevHistogram::kBins * BevHistogram::kBins;

std::array<double, kDim> aggregate(const HistogramSet& s) {
  std::array<double, kDim> sum{};
  for (const BevHistogram& h : s.histograms)
    for (int i = 0; i < kDim; ++i) sum[i] += h.bins[i];
  return sum;
}

void normalize_l1(std::array<double, kDim>& v) {
  double total = 0;
  for (double x : v) total += x;
  if (total > 0)
    for (double& x : v) x /= total;
}

double sqdist(const std::array<double, kDim>& a, const std::array<double, kDim>& b) {
  double s = 0;
  for (int i = 0; i < kDim; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::array<double, kDim>> normalized_vectors(const HistogramSet& s) {
  std::vector<std::array<double, kDim>> out;
  out.reserve(s.histograms.size());
  for (const BevHistogram& h : s.histograms) {
    std::array<double, kDim> v;
    std::copy(h.bins.begin(), h.bins.end(), v.begin());
    normalize_l1(v);
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::string MetricReport::machine_line() const {
  std::ostringstream os;
  os.precision(12);
  os << "mmd=" << mmd << " jsd=" << jsd << " mode="
     << (mode == EvalMode::kOccupancy ? "occupancy" : "duplicated")
     << " bandwidth=" << bandwidth;
  return os.str();
}

double jsd(const HistogramSet& a, const HistogramSet& b) {
  if (a.histograms.empty() || b.histograms.empty())
    throw std::invalid_argument("jsd: empty histogram set");
  std::array<double, kDim> p = aggregate(a);
  std::array<double, kDim> q = aggregate(b);
  double pt = 0, qt = 0;
  for (int i = 0; i < kDim; ++i) {
    pt += p[i];
    qt += q[i];
  }
  if (pt <= 0 || qt <= 0)
    throw std::invalid_argument("jsd: all-zero aggregate histogram");
  for (int i = 0; i < kDim; ++i) {
    p[i] /= pt;
    q[i] /= qt;
  }
  double acc = 0;
  for (int i = 0; i < kDim; ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) acc += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0) acc += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return acc;
}

double mmd(const HistogramSet& a, const HistogramSet& b,
           std::optional<double> bandwidth, double* used_bandwidth) {
  size_t m = a.histograms.size(), n = b.histograms.size();
  if (m < 2 || n < 2)
    throw std::invalid_argument("mmd: the unbiased estimator needs >= 2 samples per set");
  auto va = normalized_vectors(a);
  auto vb = normalized_vectors(b);

  double sigma;
  if (bandwidth.has_value()) {
    if (!(*bandwidth > 0)) throw std::invalid_argument("mmd: bandwidth must be > 0");
    sigma = *bandwidth;
  } else {
    // Median pairwise distance over the pooled samples.
    std::vector<std::array<double, kDim>> all;
    all.reserve(m + n);
    all.insert(all.end(), va.begin(), va.end());
    all.insert(all.end(), vb.begin(), vb.end());
    std::vector<double> dists;
    dists.reserve(all.size() * (all.size() - 1) / 2);
    for (size_t i = 0; i < all.size(); ++i)
      for (size_t j = i + 1; j < all.size(); ++j)
        dists.push_back(std::sqrt(sqdist(all[i], all[j])));
    std::sort(dists.begin(), dists.end());
    size_t nd = dists.size();
    double median = nd % 2 == 1 ? dists[nd / 2]
                                : 0.5 * (dists[nd / 2 - 1] + dists[nd / 2]);
    sigma = median > 0 ? median : 1.0;  // degenerate median falls back to 1
  }
  if (used_bandwidth) *used_bandwidth = sigma;

  double inv = 1.0 / (2.0 * sigma * sigma);
  auto kern = [inv](const std::array<double, kDim>& u,
                    const std::array<double, kDim>& v) {
    return std::exp(-sqdist(u, v) * inv);
  };

  double kaa = 0, kbb = 0, kab = 0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      if (i != j) kaa += kern(va[i], va[j]);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j) kbb += kern(vb[i], vb[j]);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) kab += kern(va[i], vb[j]);

  double est = kaa / (static_cast<double>(m) * (m - 1)) +
               kbb / (static_cast<double>(n) * (n - 1)) -
               2.0 * kab / (static_cast<double>(m) * n);
  return std::max(est, 0.0);
}

MetricReport evaluate_sets(
    const std::vector<OccupancyGrid>& real, const std::vector<OccupancyGrid>& gen,
    EvalMode mode, std::optional<double> bandwidth,
    const std::array<double, BevHistogram::kBins * BevHistogram::kBins>*
        coeff_override) {
  if (real.empty() || gen.empty())
    throw std::invalid_argument("evaluate_sets: empty grid list");

  HistogramSet real_set, gen_set;
  real_set.mode = HistMode::kOccupancy;
  for (const OccupancyGrid& g : real)
    real_set.histograms.push_back(bev_histogram(g));

  if (mode == EvalMode::kOccupancy) {
    gen_set.mode = HistMode::kOccupancy;
    for (const OccupancyGrid& g : gen)
      gen_set.histograms.push_back(bev_histogram(g));
  } else {
    std::array<double, kDim> coeffs{};
    if (coeff_override) {
      coeffs = *coeff_override;
    } else {
      HistogramSet gen_occ;
      for (const OccupancyGrid& g : gen)
        gen_occ.histograms.push_back(bev_histogram(g));
      BevHistogram real_agg, gen_agg;
      auto ra = aggregate(real_set);
      auto ga = aggregate(gen_occ);
      std::copy(ra.begin(), ra.end(), real_agg.bins.begin());
      std::copy(ga.begin(), ga.end(), gen_agg.bins.begin());
      coeffs = duplication_coefficients(real_agg, gen_agg);
    }
    gen_set.mode = HistMode::kPoints;
    for (const OccupancyGrid& g : gen)
      gen_set.histograms.push_back(
          bev_histogram(apply_duplication(g, coeffs), g.config));
  }

  MetricReport report;
  report.mode = mode;
  report.n_real = static_cast<int>(real.size());
  report.n_gen = static_cast<int>(gen.size());
  report.jsd = jsd(real_set, gen_set);
  report.mmd = mmd(real_set, gen_set, bandwidth, &report.bandwidth);
  return report;
}

}  // namespace ltok
