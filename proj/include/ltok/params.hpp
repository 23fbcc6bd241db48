// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltok/tensor.hpp"

namespace ltok::nn {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.96f;
  float eps = 1e-8f;
};

// One adaptive-moment update with bias correction; t is the 1-based step.
void adam_update(TensorF& theta, TensorF& m1, TensorF& m2, const TensorF& grad,
                 const AdamConfig& cfg, int64_t t);

// Named parameters with per-parameter optimizer moments. Shapes are fixed at
// creation; iteration order is by name, which keeps everything deterministic.
class ParamStore {
 public:
  struct Entry {
    TensorF value, m1, m2;
  };

  TensorF& create(const std::string& name, TensorF init);
  TensorF& get(const std::string& name);
  const TensorF& get(const std::string& name) const;
  Entry& entry(const std::string& name);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  int64_t step = 0;  // adam step counter

  // Applies one optimizer step to every named gradient. Parameters without a
  // gradient this step are untouched.
  void adam_step(const std::vector<std::pair<std::string, const TensorF*>>& grads,
                 const AdamConfig& cfg);

 private:
  std::map<std::string, Entry> entries_;
};

// "ULCK" checkpoint: a named-tensor map. magic, version u16=1, entry count
// u32, then per entry: name length u16 + UTF-8 name, rank u8, dims u32 x rank,
// little-endian f32 data. Entries are written sorted by name.
void save_ulck(const std::map<std::string, TensorF>& entries,
               const std::string& path);
std::map<std::string, TensorF> load_ulck(const std::string& path);

// ParamStore <-> checkpoint map, with moments under <name>.m1/<name>.m2 and
// the step counter under "step".
std::map<std::string, TensorF> checkpoint_entries(const ParamStore& store);
void restore_from_checkpoint(ParamStore& store,
                             const std::map<std::string, TensorF>& entries);

}  // namespace ltok::nn
