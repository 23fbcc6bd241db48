// SPDX-License-Identifier: Apache-2.0
#include "ltok/params.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ltok/io_util.hpp"

namespace ltok::nn {

void adam_update(TensorF& theta, TensorF& m1, TensorF& m2, const TensorF& grad,
                 const AdamConfig& cfg, int64_t t) {
  if (!theta.same_shape(grad))
    throw std::invalid_argument("adam_update: gradient shape mismatch");
  if (m1.data.empty()) m1 = TensorF::zeros(theta.shape);
  if (m2.data.empty()) m2 = TensorF::zeros(theta.shape);
  float c1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(t));
  float c2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(t));
  for (size_t i = 0; i < theta.data.size(); ++i) {
    float g = grad.data[i];
    m1.data[i] = cfg.beta1 * m1.data[i] + (1.0f - cfg.beta1) * g;
    m2.data[i] = cfg.beta2 * m2.data[i] + (1.0f - cfg.beta2) * g * g;
    float mhat = m1.data[i] / c1;
    float vhat = m2.data[i] / c2;
    theta.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

TensorF& ParamStore::create(const std::string& name, TensorF init) {
  if (entries_.count(name))
    throw std::invalid_argument("parameter already exists: " + name);
  Entry e;
  e.value = std::move(init);
  e.m1 = TensorF::zeros(e.value.shape);
  e.m2 = TensorF::zeros(e.value.shape);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

TensorF& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::out_of_range("no such parameter: " + name);
  return it->second.value;
}

const TensorF& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::out_of_range("no such parameter: " + name);
  return it->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

void ParamStore::adam_step(
    const std::vector<std::pair<std::string, const TensorF*>>& grads,
    const AdamConfig& cfg) {
  ++step;
  for (const auto& [name, g] : grads) {
    Entry& e = entry(name);
    adam_update(e.value, e.m1, e.m2, *g, cfg, step);
  }
}

static constexpr char kUlckMagic[4] = {'U', 'L', 'C', 'K'};

void save_ulck(const std::map<std::string, TensorF>& entries,
               const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  io::write_magic(os, kUlckMagic);
  io::write_le<uint16_t>(os, 1);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {  // std::map iterates sorted
    if (name.size() > 0xffff)
      throw std::invalid_argument("checkpoint entry name too long");
    io::write_le<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (int d : t.shape) io::write_le<uint32_t>(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::map<std::string, TensorF> load_ulck(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  io::expect_magic(is, kUlckMagic, "ULCK");
  io::expect_version(is, 1, "ULCK");
  uint32_t count = io::read_le<uint32_t>(is);
  std::map<std::string, TensorF> entries;
  for (uint32_t e = 0; e < count; ++e) {
    uint16_t len = io::read_le<uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    uint8_t rank = io::read_le<uint8_t>(is);
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i)
      shape[i] = static_cast<int>(io::read_le<uint32_t>(is));
    TensorF t(shape);
    // rank 0 holds exactly one scalar
    if (t.data.empty()) t.data.resize(1);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!is) throw std::runtime_error("unexpected end of file: " + path);
    entries.emplace(std::move(name), std::move(t));
  }
  return entries;
}

std::map<std::string, TensorF> checkpoint_entries(const ParamStore& store) {
  std::map<std::string, TensorF> out;
  for (const auto& [name, e] : store.entries()) {
    out.emplace(name, e.value);
    out.emplace(name + ".m1", e.m1);
    out.emplace(name + ".m2", e.m2);
  }
  TensorF step(std::vector<int>{});  // rank 0: one scalar
  step.data.assign(1, static_cast<float>(store.step));
  out.emplace("step", std::move(step));
  return out;
}

void restore_from_checkpoint(ParamStore& store,
                             const std::map<std::string, TensorF>& entries) {
  for (auto& [name, e] : store.entries()) {
    auto it = entries.find(name);
    if (it == entries.end())
      throw std::runtime_error("checkpoint missing parameter: " + name);
    if (!it->second.same_shape(e.value))
      throw std::runtime_error("checkpoint shape mismatch for: " + name);
    e.value = it->second;
    auto m1 = entries.find(name + ".m1");
    auto m2 = entries.find(name + ".m2");
    if (m1 != entries.end()) e.m1 = m1->second;
    if (m2 != entries.end()) e.m2 = m2->second;
  }
  auto st = entries.find("step");
  if (st != entries.end() && !st->second.data.empty())
    store.step = static_cast<int64_t>(st->second.data[0]);
}

}  // namespace ltok::nn
