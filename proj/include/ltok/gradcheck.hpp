// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ltok/tensor.hpp"

namespace ltok::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t coords_checked = 0;
  std::string worst_param;
  bool passed(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of analytic gradients.
//   loss_fn  evaluates the scalar loss at the current parameter values;
//   grad_fn  evaluates the loss and returns analytic gradients keyed by the
//            same names as `params`.
// Up to max_coords_per_tensor coordinates are probed per tensor (all of them
// when the tensor is small), chosen deterministically from `seed`. The
// relative error uses |a - n| / max(|a| + |n|, 1e-3); the floor absorbs
// float32 finite-difference noise where both gradients are near zero.
GradCheckReport grad_check(
    const std::vector<std::pair<std::string, TensorF*>>& params,
    const std::function<double()>& loss_fn,
    const std::function<std::map<std::string, TensorF>()>& grad_fn,
    double eps = 1e-3, int max_coords_per_tensor = 24, uint64_t seed = 0);

}  // namespace ltok::nn
