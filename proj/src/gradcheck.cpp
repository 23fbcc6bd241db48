// SPDX-License-Identifier: Apache-2.0
#include "ltok/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "ltok/rng.hpp"

namespace ltok::nn {

GradCheckReport grad_check(
    const std::vector<std::pair<std::string, TensorF*>>& params,
    const std::function<double()>& loss_fn,
    const std::function<std::map<std::string, TensorF>()>& grad_fn,
    double eps, int max_coords_per_tensor, uint64_t seed) {
  GradCheckReport report;
  std::map<std::string, TensorF> grads = grad_fn();
  Rng rng(hash_u64(seed ^ 0x67726164ull));

  for (const auto& [name, tensor] : params) {
    auto it = grads.find(name);
    if (it == grads.end())
      throw std::runtime_error("grad_check: no analytic gradient for " + name);
    const TensorF& g = it->second;
    if (!g.same_shape(*tensor))
      throw std::runtime_error("grad_check: gradient shape mismatch for " + name);

    int64_t n = tensor->numel();
    std::vector<int64_t> coords;
    if (n <= max_coords_per_tensor) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int i = 0; i < max_coords_per_tensor; ++i)
        coords.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
    }

    for (int64_t c : coords) {
      float saved = tensor->data[static_cast<size_t>(c)];
      tensor->data[static_cast<size_t>(c)] = saved + static_cast<float>(eps);
      double f_plus = loss_fn();
      tensor->data[static_cast<size_t>(c)] = saved - static_cast<float>(eps);
      double f_minus = loss_fn();
      tensor->data[static_cast<size_t>(c)] = saved;

      double numeric = (f_plus - f_minus) / (2.0 * eps);
      double analytic = static_cast<double>(g.data[static_cast<size_t>(c)]);
      double abs_err = std::abs(analytic - numeric);
      double rel = abs_err / std::max(std::abs(analytic) + std::abs(numeric), 1e-3);
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
      }
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace ltok::nn
