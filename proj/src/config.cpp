// SPDX-License-Identifier: Apache-2.0
#include "ltok/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ltok {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_value(const std::string& v);

template <>
double parse_value<double>(const std::string& v) {
  size_t pos = 0;
  double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}
template <>
float parse_value<float>(const std::string& v) {
  return static_cast<float>(parse_value<double>(v));
}
template <>
int parse_value<int>(const std::string& v) {
  size_t pos = 0;
  int i = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}
template <>
int64_t parse_value<int64_t>(const std::string& v) {
  size_t pos = 0;
  long long i = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}
template <>
uint64_t parse_value<uint64_t>(const std::string& v) {
  size_t pos = 0;
  unsigned long long i = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}
template <>
bool parse_value<bool>(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("expected a boolean");
}

template <typename T>
std::string show(const T& v) {
  std::ostringstream os;
  os.precision(12);
  if constexpr (std::is_same_v<T, bool>)
    os << (v ? "true" : "false");
  else
    os << v;
  return os.str();
}

template <typename T>
Key key_for(T RunConfig::* member) {
  return Key{[member](RunConfig& c, const std::string& v) {
               c.*member = parse_value<T>(v);
             },
             [member](const RunConfig& c) { return show(c.*member); }};
}

template <typename Sub, typename T>
Key key_for(Sub RunConfig::* sub, T Sub::* member) {
  return Key{[sub, member](RunConfig& c, const std::string& v) {
               (c.*sub).*member = parse_value<T>(v);
             },
             [sub, member](const RunConfig& c) { return show((c.*sub).*member); }};
}

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = {
      {"data.seed", key_for(&RunConfig::data_seed)},
      {"data.train_scenes", key_for(&RunConfig::data_train_scenes)},
      {"data.val_scenes", key_for(&RunConfig::data_val_scenes)},
      {"scene.boxes_min", key_for(&RunConfig::scene, &SceneConfig::boxes_min)},
      {"scene.boxes_max", key_for(&RunConfig::scene, &SceneConfig::boxes_max)},
      {"scene.center_x_min", key_for(&RunConfig::scene, &SceneConfig::center_x_min)},
      {"scene.center_x_max", key_for(&RunConfig::scene, &SceneConfig::center_x_max)},
      {"scene.center_y_min", key_for(&RunConfig::scene, &SceneConfig::center_y_min)},
      {"scene.center_y_max", key_for(&RunConfig::scene, &SceneConfig::center_y_max)},
      {"scene.half_x_min", key_for(&RunConfig::scene, &SceneConfig::half_x_min)},
      {"scene.half_x_max", key_for(&RunConfig::scene, &SceneConfig::half_x_max)},
      {"scene.half_y_min", key_for(&RunConfig::scene, &SceneConfig::half_y_min)},
      {"scene.half_y_max", key_for(&RunConfig::scene, &SceneConfig::half_y_max)},
      {"scene.half_z_min", key_for(&RunConfig::scene, &SceneConfig::half_z_min)},
      {"scene.half_z_max", key_for(&RunConfig::scene, &SceneConfig::half_z_max)},
      {"scene.slope_min", key_for(&RunConfig::scene, &SceneConfig::slope_min)},
      {"scene.slope_max", key_for(&RunConfig::scene, &SceneConfig::slope_max)},
      {"scene.z0_min", key_for(&RunConfig::scene, &SceneConfig::z0_min)},
      {"scene.z0_max", key_for(&RunConfig::scene, &SceneConfig::z0_max)},
      {"scene.retry_budget", key_for(&RunConfig::scene, &SceneConfig::retry_budget)},
      {"beams.count", key_for(&RunConfig::beams, &BeamConfig::n_beams)},
      {"beams.elevation_min", key_for(&RunConfig::beams, &BeamConfig::elevation_min_deg)},
      {"beams.elevation_max", key_for(&RunConfig::beams, &BeamConfig::elevation_max_deg)},
      {"beams.azimuth_steps", key_for(&RunConfig::beams, &BeamConfig::azimuth_steps)},
      {"beams.max_range", key_for(&RunConfig::beams, &BeamConfig::max_range)},
      {"beams.densify_factor", key_for(&RunConfig::densify_factor)},
      {"grid.x_min", key_for(&RunConfig::grid_x_min)},
      {"grid.x_max", key_for(&RunConfig::grid_x_max)},
      {"grid.y_min", key_for(&RunConfig::grid_y_min)},
      {"grid.y_max", key_for(&RunConfig::grid_y_max)},
      {"grid.z_min", key_for(&RunConfig::grid_z_min)},
      {"grid.z_max", key_for(&RunConfig::grid_z_max)},
      {"grid.vx", key_for(&RunConfig::grid_vx)},
      {"grid.vy", key_for(&RunConfig::grid_vy)},
      {"grid.vz", key_for(&RunConfig::grid_vz)},
      {"vqvae.blocks", key_for(&RunConfig::vqvae, &VqVaeConfig::n_blocks)},
      {"vqvae.dim", key_for(&RunConfig::vqvae, &VqVaeConfig::dim)},
      {"vqvae.heads", key_for(&RunConfig::vqvae, &VqVaeConfig::n_heads)},
      {"vqvae.codebook_size", key_for(&RunConfig::vqvae, &VqVaeConfig::codebook_size)},
      {"vqvae.bank_capacity", key_for(&RunConfig::vqvae, &VqVaeConfig::bank_capacity)},
      {"vqvae.iterations", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::iterations)},
      {"vqvae.batch_size", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::batch_size)},
      {"vqvae.lr", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::lr)},
      {"vqvae.beta1", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::beta1)},
      {"vqvae.beta2", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::beta2)},
      {"vqvae.warmup_iters", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::warmup_iters)},
      {"vqvae.commitment_beta", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::commitment_beta)},
      {"vqvae.reinit", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::reinit_enabled)},
      {"vqvae.reinit_threshold", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::reinit_threshold)},
      {"vqvae.reinit_every", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::reinit_every)},
      {"vqvae.seed", key_for(&RunConfig::vqvae_train, &VqVaeTrainConfig::seed)},
      {"gen.blocks", key_for(&RunConfig::gen_blocks)},
      {"gen.dim", key_for(&RunConfig::gen_dim)},
      {"gen.heads", key_for(&RunConfig::gen_heads)},
      {"gen.iterations", key_for(&RunConfig::gen_train, &GenTrainConfig::iterations)},
      {"gen.lr", key_for(&RunConfig::gen_train, &GenTrainConfig::lr)},
      {"gen.beta1", key_for(&RunConfig::gen_train, &GenTrainConfig::beta1)},
      {"gen.beta2", key_for(&RunConfig::gen_train, &GenTrainConfig::beta2)},
      {"gen.label_smoothing", key_for(&RunConfig::gen_train, &GenTrainConfig::label_smoothing)},
      {"gen.seed", key_for(&RunConfig::gen_train, &GenTrainConfig::seed)},
      {"gen.blank_coverage", key_for(&RunConfig::blank_coverage)},
      {"gen.total_steps", key_for(&RunConfig::gen, &GenConfig::total_steps)},
      {"gen.suppress_steps", key_for(&RunConfig::gen, &GenConfig::suppress_steps)},
      {"gen.temperature", key_for(&RunConfig::gen, &GenConfig::temperature)},
      {"gen.denoise_rounds", key_for(&RunConfig::denoise_rounds)},
      {"gen.denoise_fraction", key_for(&RunConfig::denoise_fraction)},
      {"eval.bandwidth", key_for(&RunConfig::eval_bandwidth)},
      {"log.every", key_for(&RunConfig::log_every)},
  };
  return keys;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& raw, int lineno) {
  std::string line = raw;
  size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("config line " + std::to_string(lineno) +
                             ": expected key = value");
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  auto it = registry().find(key);
  if (it == registry().end())
    throw std::runtime_error("config line " + std::to_string(lineno) +
                             ": unknown key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const std::exception& e) {
    throw std::runtime_error("config line " + std::to_string(lineno) +
                             ": bad value for '" + key + "': " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) apply_config_line(cfg, line, ++lineno);
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, accessor] : registry())
    os << key << " = " << accessor.get(cfg) << "\n";
  return os.str();
}

}  // namespace ltok
