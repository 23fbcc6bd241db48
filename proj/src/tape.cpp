// SPDX-License-Identifier: Apache-2.0
#include "ltok/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ltok::nn {

namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap as_mat(const TensorF& t) { return CMap(t.data.data(), t.rows(), t.cols()); }
Map as_mat(TensorF& t) { return Map(t.data.data(), t.rows(), t.cols()); }

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

double stable_sigmoid(double l) {
  if (l >= 0) return 1.0 / (1.0 + std::exp(-l));
  double e = std::exp(l);
  return e / (1.0 + e);
}

}  // namespace

NodeId Tape::push(TensorF value, bool needs_grad,
                  std::function<void(Tape&)> bw) {
  nodes_.push_back(Node{std::move(value), 0.0, false, needs_grad, std::move(bw)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::ensure_finite(NodeId id, const char* op) const {
  if (!nodes_[id].value.all_finite())
    throw std::runtime_error(std::string("non-finite values produced by ") + op);
}

TensorF& Tape::grad_acc(NodeId id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  TensorF& g = grads_[id];
  if (g.data.empty()) g = TensorF::zeros(nodes_[id].value.shape);
  return g;
}

const TensorF& Tape::grad(NodeId id) const {
  static const TensorF kEmpty;
  if (!has_grad(id)) return kEmpty;
  return grads_[id];
}

double Tape::scalar_value(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.has_dval) return n.dval;
  require(n.value.numel() == 1, "scalar_value: node is not scalar");
  return static_cast<double>(n.value.data[0]);
}

NodeId Tape::constant(TensorF v) {
  NodeId id = push(std::move(v), false, nullptr);
  ensure_finite(id, "constant");
  return id;
}

NodeId Tape::variable(TensorF v) {
  NodeId id = push(std::move(v), true, nullptr);
  ensure_finite(id, "variable");
  return id;
}

NodeId Tape::param(TensorF* storage, const std::string& name) {
  NodeId id = push(*storage, true, nullptr);
  ensure_finite(id, ("param " + name).c_str());
  bindings_.push_back(Binding{id, storage, name});
  return id;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const TensorF& A = nodes_[a].value;
  const TensorF& B = nodes_[b].value;
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(),
          "matmul: shape mismatch " + A.shape_str() + " @ " + B.shape_str());
  TensorF Y({A.rows(), B.cols()});
  as_mat(Y).noalias() = as_mat(A) * as_mat(B);
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId y = push(std::move(Y), ng, nullptr);
  nodes_[y].backward = [a, b, y](Tape& t) {
    const TensorF& dY = t.grads_[y];
    if (t.nodes_[a].needs_grad)
      as_mat(t.grad_acc(a)).noalias() +=
          as_mat(dY) * as_mat(t.nodes_[b].value).transpose();
    if (t.nodes_[b].needs_grad)
      as_mat(t.grad_acc(b)).noalias() +=
          as_mat(t.nodes_[a].value).transpose() * as_mat(dY);
  };
  ensure_finite(y, "matmul");
  return y;
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const TensorF& A = nodes_[a].value;
  const TensorF& B = nodes_[b].value;
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.cols(),
          "matmul_nt: shape mismatch");
  TensorF Y({A.rows(), B.rows()});
  as_mat(Y).noalias() = as_mat(A) * as_mat(B).transpose();
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId y = push(std::move(Y), ng, nullptr);
  nodes_[y].backward = [a, b, y](Tape& t) {
    const TensorF& dY = t.grads_[y];
    if (t.nodes_[a].needs_grad)
      as_mat(t.grad_acc(a)).noalias() += as_mat(dY) * as_mat(t.nodes_[b].value);
    if (t.nodes_[b].needs_grad)
      as_mat(t.grad_acc(b)).noalias() +=
          as_mat(dY).transpose() * as_mat(t.nodes_[a].value);
  };
  ensure_finite(y, "matmul_nt");
  return y;
}

NodeId Tape::add(NodeId a, NodeId b) {
  const TensorF& A = nodes_[a].value;
  const TensorF& B = nodes_[b].value;
  require(A.same_shape(B), "add: shape mismatch");
  TensorF Y = A;
  for (size_t i = 0; i < Y.data.size(); ++i) Y.data[i] += B.data[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId y = push(std::move(Y), ng, nullptr);
  if (nodes_[a].has_dval && nodes_[b].has_dval) {
    nodes_[y].dval = nodes_[a].dval + nodes_[b].dval;
    nodes_[y].has_dval = true;
  }
  nodes_[y].backward = [a, b, y](Tape& t) {
    const TensorF& dY = t.grads_[y];
    if (t.nodes_[a].needs_grad) {
      TensorF& da = t.grad_acc(a);
      for (size_t i = 0; i < dY.data.size(); ++i) da.data[i] += dY.data[i];
    }
    if (t.nodes_[b].needs_grad) {
      TensorF& db = t.grad_acc(b);
      for (size_t i = 0; i < dY.data.size(); ++i) db.data[i] += dY.data[i];
    }
  };
  ensure_finite(y, "add");
  return y;
}

NodeId Tape::add_bias(NodeId x, NodeId b) {
  const TensorF& X = nodes_[x].value;
  const TensorF& B = nodes_[b].value;
  require(X.rank() == 2 && B.rank() == 1 && B.shape[0] == X.cols(),
          "add_bias: shape mismatch");
  TensorF Y = X;
  int N = X.rows(), O = X.cols();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < O; ++j) Y.data[static_cast<size_t>(i) * O + j] += B.data[j];
  bool ng = nodes_[x].needs_grad || nodes_[b].needs_grad;
  NodeId y = push(std::move(Y), ng, nullptr);
  nodes_[y].backward = [x, b, y, N, O](Tape& t) {
    const TensorF& dY = t.grads_[y];
    if (t.nodes_[x].needs_grad) {
      TensorF& dx = t.grad_acc(x);
      for (size_t i = 0; i < dY.data.size(); ++i) dx.data[i] += dY.data[i];
    }
    if (t.nodes_[b].needs_grad) {
      TensorF& db = t.grad_acc(b);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < O; ++j)
          db.data[j] += dY.data[static_cast<size_t>(i) * O + j];
    }
  };
  ensure_finite(y, "add_bias");
  return y;
}

NodeId Tape::scale(NodeId x, float s) {
  TensorF Y = nodes_[x].value;
  for (float& v : Y.data) v *= s;
  NodeId y = push(std::move(Y), nodes_[x].needs_grad, nullptr);
  if (nodes_[x].has_dval) {
    nodes_[y].dval = nodes_[x].dval * s;
    nodes_[y].has_dval = true;
  }
  nodes_[y].backward = [x, y, s](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    TensorF& dx = t.grad_acc(x);
    for (size_t i = 0; i < dY.data.size(); ++i) dx.data[i] += s * dY.data[i];
  };
  ensure_finite(y, "scale");
  return y;
}

NodeId Tape::slice_cols(NodeId x, int c0, int c1) {
  const TensorF& X = nodes_[x].value;
  require(X.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= X.cols(),
          "slice_cols: bad range");
  int N = X.rows(), O = X.cols(), M = c1 - c0;
  TensorF Y({N, M});
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j)
      Y.data[static_cast<size_t>(i) * M + j] =
          X.data[static_cast<size_t>(i) * O + c0 + j];
  NodeId y = push(std::move(Y), nodes_[x].needs_grad, nullptr);
  nodes_[y].backward = [x, y, c0, N, O, M](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    TensorF& dx = t.grad_acc(x);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < M; ++j)
        dx.data[static_cast<size_t>(i) * O + c0 + j] +=
            dY.data[static_cast<size_t>(i) * M + j];
  };
  return y;
}

NodeId Tape::concat_cols(const std::vector<NodeId>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  int N = nodes_[xs[0]].value.rows();
  int total = 0;
  bool ng = false;
  for (NodeId x : xs) {
    const TensorF& X = nodes_[x].value;
    require(X.rank() == 2 && X.rows() == N, "concat_cols: row mismatch");
    total += X.cols();
    ng = ng || nodes_[x].needs_grad;
  }
  TensorF Y({N, total});
  int off = 0;
  for (NodeId x : xs) {
    const TensorF& X = nodes_[x].value;
    int M = X.cols();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < M; ++j)
        Y.data[static_cast<size_t>(i) * total + off + j] =
            X.data[static_cast<size_t>(i) * M + j];
    off += M;
  }
  NodeId y = push(std::move(Y), ng, nullptr);
  std::vector<NodeId> parts = xs;
  nodes_[y].backward = [parts, y, N, total](Tape& t) {
    const TensorF& dY = t.grads_[y];
    int off = 0;
    for (NodeId x : parts) {
      int M = t.nodes_[x].value.cols();
      if (t.nodes_[x].needs_grad) {
        TensorF& dx = t.grad_acc(x);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < M; ++j)
            dx.data[static_cast<size_t>(i) * M + j] +=
                dY.data[static_cast<size_t>(i) * total + off + j];
      }
      off += M;
    }
  };
  return y;
}

NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta, float eps) {
  const TensorF& X = nodes_[x].value;
  const TensorF& G = nodes_[gamma].value;
  const TensorF& B = nodes_[beta].value;
  require(X.rank() == 2 && G.rank() == 1 && B.rank() == 1 &&
              G.shape[0] == X.cols() && B.shape[0] == X.cols(),
          "layer_norm: shape mismatch");
  int N = X.rows(), D = X.cols();
  TensorF Y({N, D});
  TensorF xhat({N, D});
  std::vector<float> inv_std(N);
  for (int i = 0; i < N; ++i) {
    const float* row = &X.data[static_cast<size_t>(i) * D];
    double mu = 0;
    for (int j = 0; j < D; ++j) mu += row[j];
    mu /= D;
    double var = 0;
    for (int j = 0; j < D; ++j) {
      double d = row[j] - mu;
      var += d * d;
    }
    var /= D;
    float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std[i] = inv;
    for (int j = 0; j < D; ++j) {
      float xh = (row[j] - static_cast<float>(mu)) * inv;
      xhat.data[static_cast<size_t>(i) * D + j] = xh;
      Y.data[static_cast<size_t>(i) * D + j] = G.data[j] * xh + B.data[j];
    }
  }
  bool ng = nodes_[x].needs_grad || nodes_[gamma].needs_grad ||
            nodes_[beta].needs_grad;
  NodeId y = push(std::move(Y), ng, nullptr);
  nodes_[y].backward = [x, gamma, beta, y, N, D, xh = std::move(xhat),
                        inv = std::move(inv_std)](Tape& t) {
    const TensorF& dY = t.grads_[y];
    const TensorF& G = t.nodes_[gamma].value;
    if (t.nodes_[gamma].needs_grad) {
      TensorF& dg = t.grad_acc(gamma);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < D; ++j)
          dg.data[j] += dY.data[static_cast<size_t>(i) * D + j] *
                        xh.data[static_cast<size_t>(i) * D + j];
    }
    if (t.nodes_[beta].needs_grad) {
      TensorF& db = t.grad_acc(beta);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < D; ++j)
          db.data[j] += dY.data[static_cast<size_t>(i) * D + j];
    }
    if (t.nodes_[x].needs_grad) {
      TensorF& dx = t.grad_acc(x);
      for (int i = 0; i < N; ++i) {
        const float* dy = &dY.data[static_cast<size_t>(i) * D];
        const float* xhr = &xh.data[static_cast<size_t>(i) * D];
        double m1 = 0, m2 = 0;  // mean(dxhat), mean(dxhat * xhat)
        for (int j = 0; j < D; ++j) {
          double dxh = static_cast<double>(dy[j]) * G.data[j];
          m1 += dxh;
          m2 += dxh * xhr[j];
        }
        m1 /= D;
        m2 /= D;
        float* dxr = &dx.data[static_cast<size_t>(i) * D];
        for (int j = 0; j < D; ++j) {
          double dxh = static_cast<double>(dy[j]) * G.data[j];
          dxr[j] += static_cast<float>(inv[i] * (dxh - m1 - xhr[j] * m2));
        }
      }
    }
  };
  ensure_finite(y, "layer_norm");
  return y;
}

NodeId Tape::gelu(NodeId x) {
  const TensorF& X = nodes_[x].value;
  TensorF Y = X;
  for (float& v : Y.data) {
    float u = kGeluC * (v + kGeluA * v * v * v);
    v = 0.5f * v * (1.0f + std::tanh(u));
  }
  NodeId y = push(std::move(Y), nodes_[x].needs_grad, nullptr);
  nodes_[y].backward = [x, y](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    const TensorF& X = t.nodes_[x].value;
    TensorF& dx = t.grad_acc(x);
    for (size_t i = 0; i < X.data.size(); ++i) {
      float v = X.data[i];
      float u = kGeluC * (v + kGeluA * v * v * v);
      float th = std::tanh(u);
      float deriv = 0.5f * (1.0f + th) +
                    0.5f * v * (1.0f - th * th) *
                        kGeluC * (1.0f + 3.0f * kGeluA * v * v);
      dx.data[i] += dY.data[i] * deriv;
    }
  };
  ensure_finite(y, "gelu");
  return y;
}

NodeId Tape::softmax_rows(NodeId x, const std::vector<uint8_t>* key_mask) {
  const TensorF& X = nodes_[x].value;
  require(X.rank() == 2, "softmax_rows: rank-2 input required");
  int N = X.rows(), D = X.cols();
  std::vector<uint8_t> mask;
  if (key_mask) {
    require(static_cast<int>(key_mask->size()) == D,
            "softmax_rows: mask length mismatch");
    mask = *key_mask;
    bool any = false;
    for (uint8_t m : mask) any = any || m;
    require(any, "softmax_rows: mask excludes every key");
  }
  TensorF Y({N, D});
  for (int i = 0; i < N; ++i) {
    const float* row = &X.data[static_cast<size_t>(i) * D];
    float* out = &Y.data[static_cast<size_t>(i) * D];
    float mx = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < D; ++j)
      if ((mask.empty() || mask[j]) && row[j] > mx) mx = row[j];
    double sum = 0;
    for (int j = 0; j < D; ++j) {
      if (!mask.empty() && !mask[j]) {
        out[j] = 0.0f;
        continue;
      }
      double e = std::exp(static_cast<double>(row[j]) - mx);
      out[j] = static_cast<float>(e);
      sum += e;
    }
    float norm = static_cast<float>(1.0 / sum);
    for (int j = 0; j < D; ++j) out[j] *= norm;
  }
  NodeId y = push(std::move(Y), nodes_[x].needs_grad, nullptr);
  nodes_[y].backward = [x, y, N, D](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    const TensorF& Y = t.nodes_[y].value;
    TensorF& dx = t.grad_acc(x);
    for (int i = 0; i < N; ++i) {
      const float* dy = &dY.data[static_cast<size_t>(i) * D];
      const float* yr = &Y.data[static_cast<size_t>(i) * D];
      double dot = 0;
      for (int j = 0; j < D; ++j) dot += static_cast<double>(dy[j]) * yr[j];
      float* dxr = &dx.data[static_cast<size_t>(i) * D];
      for (int j = 0; j < D; ++j)
        dxr[j] += yr[j] * (dy[j] - static_cast<float>(dot));
    }
  };
  ensure_finite(y, "softmax_rows");
  return y;
}

NodeId Tape::gather_rows(NodeId table, std::vector<int> idx) {
  const TensorF& Tb = nodes_[table].value;
  require(Tb.rank() == 2, "gather_rows: table must be rank 2");
  int K = Tb.rows(), D = Tb.cols();
  for (int i : idx) require(0 <= i && i < K, "gather_rows: index out of range");
  TensorF Y({static_cast<int>(idx.size()), D});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(&Tb.data[static_cast<size_t>(idx[i]) * D], D,
                &Y.data[i * D]);
  NodeId y = push(std::move(Y), nodes_[table].needs_grad, nullptr);
  nodes_[y].backward = [table, y, D, ix = std::move(idx)](Tape& t) {
    if (!t.nodes_[table].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    TensorF& dT = t.grad_acc(table);
    for (size_t i = 0; i < ix.size(); ++i) {
      float* dst = &dT.data[static_cast<size_t>(ix[i]) * D];
      const float* src = &dY.data[i * D];
      for (int j = 0; j < D; ++j) dst[j] += src[j];
    }
  };
  return y;
}

NodeId Tape::replace_value(NodeId x, TensorF v) {
  require(nodes_[x].value.same_shape(v), "replace_value: shape mismatch");
  NodeId y = push(std::move(v), nodes_[x].needs_grad, nullptr);
  nodes_[y].backward = [x, y](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    TensorF& dx = t.grad_acc(x);
    for (size_t i = 0; i < dY.data.size(); ++i) dx.data[i] += dY.data[i];
  };
  ensure_finite(y, "replace_value");
  return y;
}

NodeId Tape::unpatchify(NodeId x, int H, int W, int C, int p) {
  const TensorF& X = nodes_[x].value;
  int h = H / p, w = W / p, F = p * p * C;
  require(H % p == 0 && W % p == 0, "unpatchify: H, W must divide by patch");
  require(X.rank() == 2 && X.rows() == h * w && X.cols() == F,
          "unpatchify: token shape mismatch");
  TensorF Y({H, W, C});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      int tok = (i / p) * w + (j / p);
      int base = ((i % p) * p + (j % p)) * C;
      const float* src = &X.data[static_cast<size_t>(tok) * F + base];
      float* dst = &Y.data[(static_cast<size_t>(i) * W + j) * C];
      std::copy_n(src, C, dst);
    }
  NodeId y = push(std::move(Y), nodes_[x].needs_grad, nullptr);
  nodes_[y].backward = [x, y, H, W, C, p, h, w, F](Tape& t) {
    (void)h;
    if (!t.nodes_[x].needs_grad) return;
    const TensorF& dY = t.grads_[y];
    TensorF& dx = t.grad_acc(x);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        int tok = (i / p) * w + (j / p);
        int base = ((i % p) * p + (j % p)) * C;
        float* dst = &dx.data[static_cast<size_t>(tok) * F + base];
        const float* src = &dY.data[(static_cast<size_t>(i) * W + j) * C];
        for (int k = 0; k < C; ++k) dst[k] += src[k];
      }
  };
  return y;
}

NodeId Tape::bce_with_logits(NodeId logits, TensorF targets) {
  const TensorF& L = nodes_[logits].value;
  require(L.same_shape(targets), "bce_with_logits: shape mismatch");
  require(L.numel() > 0, "bce_with_logits: empty input");
  double sum = 0;
  for (size_t i = 0; i < L.data.size(); ++i) {
    double l = L.data[i], t = targets.data[i];
    // max(l,0) - l*t + log(1 + exp(-|l|))
    sum += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  double mean = sum / static_cast<double>(L.numel());
  NodeId y = push(TensorF::scalar(static_cast<float>(mean)),
                  nodes_[logits].needs_grad, nullptr);
  nodes_[y].dval = mean;
  nodes_[y].has_dval = true;
  nodes_[y].backward = [logits, y, tgt = std::move(targets)](Tape& t) {
    if (!t.nodes_[logits].needs_grad) return;
    float g = t.grads_[y].data[0];
    const TensorF& L = t.nodes_[logits].value;
    TensorF& dl = t.grad_acc(logits);
    float inv_n = 1.0f / static_cast<float>(L.numel());
    for (size_t i = 0; i < L.data.size(); ++i)
      dl.data[i] += g * inv_n *
                    static_cast<float>(stable_sigmoid(L.data[i]) - tgt.data[i]);
  };
  return y;
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<int> targets,
                           std::vector<uint8_t> mask, float label_smoothing) {
  const TensorF& L = nodes_[logits].value;
  require(L.rank() == 2, "cross_entropy: logits must be rank 2");
  int N = L.rows(), K = L.cols();
  require(static_cast<int>(targets.size()) == N &&
              static_cast<int>(mask.size()) == N,
          "cross_entropy: targets/mask length mismatch");
  int n_masked = 0;
  for (int i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    require(0 <= targets[i] && targets[i] < K, "cross_entropy: target >= K");
    ++n_masked;
  }
  require(n_masked > 0, "cross_entropy: empty mask");
  double eps = label_smoothing;
  double sum = 0;
  for (int i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    const float* row = &L.data[static_cast<size_t>(i) * K];
    double mx = row[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double se = 0, mean_l = 0;
    for (int k = 0; k < K; ++k) {
      se += std::exp(row[k] - mx);
      mean_l += row[k];
    }
    double lse = mx + std::log(se);
    // sum_k q_k * (lse - l_k) with q = (1-eps)*onehot + eps/K
    sum += lse - (1.0 - eps) * row[targets[i]] - eps * mean_l / K;
  }
  double mean = sum / n_masked;
  NodeId y = push(TensorF::scalar(static_cast<float>(mean)),
                  nodes_[logits].needs_grad, nullptr);
  nodes_[y].dval = mean;
  nodes_[y].has_dval = true;
  nodes_[y].backward = [logits, y, tg = std::move(targets),
                        mk = std::move(mask), n_masked, N, K, eps](Tape& t) {
    if (!t.nodes_[logits].needs_grad) return;
    float g = t.grads_[y].data[0];
    const TensorF& L = t.nodes_[logits].value;
    TensorF& dl = t.grad_acc(logits);
    float scale = g / static_cast<float>(n_masked);
    for (int i = 0; i < N; ++i) {
      if (!mk[i]) continue;
      const float* row = &L.data[static_cast<size_t>(i) * K];
      float* drow = &dl.data[static_cast<size_t>(i) * K];
      double mx = row[0];
      for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
      double se = 0;
      for (int k = 0; k < K; ++k) se += std::exp(row[k] - mx);
      for (int k = 0; k < K; ++k) {
        double p = std::exp(row[k] - mx) / se;
        double q = (k == tg[i] ? 1.0 - eps : 0.0) + eps / K;
        drow[k] += scale * static_cast<float>(p - q);
      }
    }
  };
  return y;
}

NodeId Tape::mse_vs_const(NodeId a, TensorF b) {
  const TensorF& A = nodes_[a].value;
  require(A.same_shape(b), "mse_vs_const: shape mismatch");
  require(A.numel() > 0, "mse_vs_const: empty input");
  double sum = 0;
  for (size_t i = 0; i < A.data.size(); ++i) {
    double d = static_cast<double>(A.data[i]) - b.data[i];
    sum += d * d;
  }
  double mean = sum / static_cast<double>(A.numel());
  NodeId y = push(TensorF::scalar(static_cast<float>(mean)),
                  nodes_[a].needs_grad, nullptr);
  nodes_[y].dval = mean;
  nodes_[y].has_dval = true;
  nodes_[y].backward = [a, y, c = std::move(b)](Tape& t) {
    if (!t.nodes_[a].needs_grad) return;
    float g = t.grads_[y].data[0];
    const TensorF& A = t.nodes_[a].value;
    TensorF& da = t.grad_acc(a);
    float inv_n = 2.0f / static_cast<float>(A.numel());
    for (size_t i = 0; i < A.data.size(); ++i)
      da.data[i] += g * inv_n * (A.data[i] - c.data[i]);
  };
  return y;
}

void Tape::backward(NodeId root) {
  require(root >= 0 && root < static_cast<int>(nodes_.size()),
          "backward: bad root");
  require(nodes_[root].value.numel() == 1, "backward: root must be scalar");
  grads_.assign(nodes_.size(), TensorF{});
  grad_acc(root).data[0] = 1.0f;
  for (NodeId id = root; id >= 0; --id) {
    if (!nodes_[id].needs_grad || !nodes_[id].backward || !has_grad(id))
      continue;
    nodes_[id].backward(*this);
  }
}

}  // namespace ltok::nn
