// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltok/rng.hpp"

namespace ltok::nn {

// Dense row-major float32 tensor. Plain value type; all layers and the tape
// operate on these.
struct TensorF {
  std::vector<int> shape;
  std::vector<float> data;

  TensorF() = default;
  explicit TensorF(std::vector<int> s);

  static int64_t numel_of(const std::vector<int>& s);
  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;  // rank-2 only
  int cols() const;

  float& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  float at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols() + j];
  }

  bool same_shape(const TensorF& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;

  static TensorF zeros(std::vector<int> s) { return TensorF(std::move(s)); }
  static TensorF full(std::vector<int> s, float v);
  static TensorF scalar(float v);
  static TensorF randn(Rng& rng, std::vector<int> s, float stddev);
  static TensorF uniform(Rng& rng, std::vector<int> s, float lo, float hi);
};

}  // namespace ltok::nn
