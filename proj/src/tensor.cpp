// SPDX-License-Identifier: Apache-2.0
#include "ltok/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ltok::nn {

TensorF::TensorF(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
}

int64_t TensorF::numel_of(const std::vector<int>& s) {
  int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= d;
  }
  return n;
}

int TensorF::rows() const {
  if (rank() != 2) throw std::logic_error("rows(): tensor is not rank 2");
  return shape[0];
}

int TensorF::cols() const {
  if (rank() != 2) throw std::logic_error("cols(): tensor is not rank 2");
  return shape[1];
}

bool TensorF::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string TensorF::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

TensorF TensorF::full(std::vector<int> s, float v) {
  TensorF t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

TensorF TensorF::scalar(float v) {
  TensorF t({1});
  t.data[0] = v;
  return t;
}

TensorF TensorF::randn(Rng& rng, std::vector<int> s, float stddev) {
  TensorF t(std::move(s));
  for (float& v : t.data) v = static_cast<float>(rng.normal()) * stddev;
  return t;
}

TensorF TensorF::uniform(Rng& rng, std::vector<int> s, float lo, float hi) {
  TensorF t(std::move(s));
  for (float& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace ltok::nn
