// SPDX-License-Identifier: Apache-2.0
//
// lidartok: procedural LiDAR data, discrete-codebook training, completion,
// masked-transformer generation, manipulation, and BEV metrics in one tool.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ltok/config.hpp"
#include "ltok/generator.hpp"
#include "ltok/metrics.hpp"
#include "ltok/pointcloud.hpp"
#include "ltok/rng.hpp"
#include "ltok/scenes.hpp"
#include "ltok/voxel.hpp"
#include "ltok/vqvae.hpp"

namespace fs = std::filesystem;
using namespace ltok;

namespace {

struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = load_run_config(c.config_path);
  return cfg;
}

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& ext) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext)
      out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty())
    throw std::runtime_error("no " + ext + " files in " + dir);
  return out;
}

std::string zero_pad(int v, int width = 4) {
  std::string s = std::to_string(v);
  return std::string(static_cast<size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

int cmd_gen_data(const Common& common, const std::string& out_dir) {
  RunConfig cfg = load_config(common);
  if (common.seed) cfg.data_seed = *common.seed;
  fs::create_directories(out_dir);

  std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
  manifest << "# <name> <scene seed>\n";
  auto emit = [&](const std::string& name, uint64_t scene_seed) {
    Scene scene = random_scene(scene_seed, cfg.scene);
    PairedSample pair = make_pair(scene, cfg.beams, cfg.densify_factor);
    save_ulpc(pair.sparse, (fs::path(out_dir) / (name + "_sparse.ulpc")).string());
    save_ulpc(pair.dense, (fs::path(out_dir) / (name + "_dense.ulpc")).string());
    manifest << name << " " << scene_seed << "\n";
  };
  for (int i = 0; i < cfg.data_train_scenes; ++i)
    emit("train_" + zero_pad(i), derive_seed(cfg.data_seed, static_cast<uint64_t>(i)));
  for (int i = 0; i < cfg.data_val_scenes; ++i)
    emit("val_" + zero_pad(i),
         derive_seed(cfg.data_seed, 0x100000ull + static_cast<uint64_t>(i)));

  std::ofstream cfg_out(fs::path(out_dir) / "config.txt");
  cfg_out << dump_run_config(cfg);
  std::cout << "wrote " << cfg.data_train_scenes << " train / "
            << cfg.data_val_scenes << " val paired samples to " << out_dir << "\n";
  return 0;
}

std::vector<PairedSample> load_pairs(const std::string& dir,
                                     const std::string& stem_prefix) {
  std::vector<PairedSample> pairs;
  for (int i = 0;; ++i) {
    fs::path sp = fs::path(dir) / (stem_prefix + zero_pad(i) + "_sparse.ulpc");
    fs::path dp = fs::path(dir) / (stem_prefix + zero_pad(i) + "_dense.ulpc");
    if (!fs::exists(sp) || !fs::exists(dp)) break;
    pairs.push_back(PairedSample{load_ulpc(sp.string()), load_ulpc(dp.string())});
  }
  if (pairs.empty())
    throw std::runtime_error("no " + stem_prefix + "*_{sparse,dense}.ulpc pairs in " + dir);
  return pairs;
}

int cmd_train_vqvae(const Common& common, const std::string& data_dir,
                    const std::string& out_path) {
  RunConfig cfg = load_config(common);
  if (common.seed) cfg.vqvae_train.seed = *common.seed;
  cfg.vqvae_train.log_every = cfg.log_every;
  std::vector<PairedSample> pairs = load_pairs(data_dir, "train_");

  VqVaeModel model = make_vqvae(cfg.grid_config(), cfg.vqvae, cfg.vqvae_train.seed);
  TrainStats stats = train_vqvae(model, pairs, cfg.vqvae_train);
  save_vqvae(model, out_path);
  std::cout << "trained vq-vae for " << cfg.vqvae_train.iterations
            << " iterations; final loss " << stats.loss_history.back()
            << ", codebook utilization " << stats.final_utilization << "\n";
  return 0;
}

int cmd_encode_corpus(const Common& common, const std::string& model_path,
                      const std::string& data_dir, const std::string& out_dir,
                      const std::string& encoder) {
  VqVaeModel model = load_vqvae(model_path);
  EncoderKind which = encoder == "sparse" ? EncoderKind::kSparse : EncoderKind::kDense;
  std::string suffix = which == EncoderKind::kSparse ? "_sparse.ulpc" : "_dense.ulpc";
  fs::create_directories(out_dir);
  int n = 0;
  for (const std::string& f : list_files(data_dir, ".ulpc")) {
    if (!f.ends_with(suffix)) continue;
    OccupancyGrid grid = voxelize(load_ulpc(f), model.grid);
    CodeMap map = encode_to_codemap(grid, which, model);
    fs::path stem = fs::path(f).stem();  // e.g. train_0000_dense
    save_ulcm(map, (fs::path(out_dir) / (stem.string() + ".ulcm")).string());
    ++n;
  }
  if (n == 0) throw std::runtime_error("no *" + suffix + " files in " + data_dir);
  std::cout << "encoded " << n << " code maps to " << out_dir << "\n";
  return 0;
}

int cmd_train_gen(const Common& common, const std::string& corpus_dir,
                  const std::string& vqvae_path, const std::string& out_path) {
  RunConfig cfg = load_config(common);
  if (common.seed) cfg.gen_train.seed = *common.seed;
  cfg.gen_train.log_every = cfg.log_every;

  std::vector<CodeMap> corpus;
  for (const std::string& f : list_files(corpus_dir, ".ulcm"))
    corpus.push_back(load_ulcm(f));

  VqVaeModel vqvae = load_vqvae(vqvae_path);
  int h = vqvae.grid.H / nn::kPatch, w = vqvae.grid.W / nn::kPatch;
  GeneratorModel gen = make_generator(
      vqvae.cfg.codebook_size, h, w,
      {cfg.gen_blocks, cfg.gen_dim, cfg.gen_heads}, cfg.gen_train.seed);
  gen.blanks = identify_blank(corpus, gen.K, cfg.blank_coverage);
  GenTrainStats stats = train_masked(gen, corpus, cfg.gen_train);
  save_generator(gen, out_path);
  std::cout << "trained generator for " << cfg.gen_train.iterations
            << " iterations; final ce " << stats.loss_history.back() << "; "
            << gen.blanks.codes.size() << " blank codes at coverage "
            << cfg.blank_coverage << "\n";
  return 0;
}

int cmd_reconstruct(const Common&, const std::string& model_path,
                    const std::string& in_path, const std::string& out_path,
                    const std::string& encoder) {
  VqVaeModel model = load_vqvae(model_path);
  OccupancyGrid grid = voxelize(load_ulpc(in_path), model.grid);
  EncoderKind which = encoder == "sparse" ? EncoderKind::kSparse : EncoderKind::kDense;
  ReconstructResult rec = reconstruct(grid, which, model);
  OccupancyGrid out = binarize(rec.logits, model.grid, BinarizeMode::kThreshold);
  save_ulog(out, out_path);
  std::cout << "reconstruction bce " << rec.bce << ", iou "
            << grid_iou(out, grid) << "\n";
  return 0;
}

int cmd_complete(const Common&, const std::string& model_path,
                 const std::string& in_path, const std::string& out_path,
                 const std::string& out_cloud) {
  VqVaeModel model = load_vqvae(model_path);
  OccupancyGrid sparse = voxelize(load_ulpc(in_path), model.grid);
  OccupancyGrid dense = complete(sparse, model);
  save_ulog(dense, out_path);
  if (!out_cloud.empty()) save_ulpc(devoxelize(dense), out_cloud);
  std::cout << "completed: " << sparse.occupied_count() << " -> "
            << dense.occupied_count() << " occupied voxels\n";
  return 0;
}

CodeMap load_condition(const std::string& cond_path, const std::string& mask_path,
                       int K) {
  CodeMap cond = load_ulcm(cond_path);
  if (!mask_path.empty()) {
    std::ifstream mf(mask_path);
    if (!mf) throw std::runtime_error("cannot open mask file: " + mask_path);
    std::string line;
    for (int r = 0; r < cond.h; ++r) {
      if (!std::getline(mf, line) || static_cast<int>(line.size()) < cond.w)
        throw std::runtime_error("mask file too short; need " +
                                 std::to_string(cond.h) + "x" +
                                 std::to_string(cond.w) + " of 0/1");
      for (int c = 0; c < cond.w; ++c) {
        if (line[static_cast<size_t>(c)] == '0')
          cond.at(r, c) = mask_sentinel(K);
        else if (line[static_cast<size_t>(c)] != '1')
          throw std::runtime_error("mask file entries must be 0 or 1");
      }
    }
  }
  return cond;
}

int cmd_generate(const Common& common, const std::string& gen_path,
                 const std::string& vqvae_path, const std::string& out_prefix,
                 int count, const std::string& cond_path,
                 const std::string& mask_path) {
  RunConfig cfg = load_config(common);
  uint64_t seed = common.seed.value_or(cfg.gen.seed);
  GeneratorModel gen = load_generator(gen_path);
  VqVaeModel vqvae = load_vqvae(vqvae_path);

  std::optional<CodeMap> condition;
  if (!cond_path.empty())
    condition = load_condition(cond_path, mask_path, gen.K);

  for (int i = 0; i < count; ++i) {
    GenConfig gc = cfg.gen;
    gc.seed = derive_seed(seed, static_cast<uint64_t>(i));
    CodeMap map = sample(gen, gc, gen.blanks,
                         condition ? &*condition : nullptr);
    std::string stem = count == 1 ? out_prefix : out_prefix + "_" + zero_pad(i);
    save_ulcm(map, stem + ".ulcm");
    nn::TensorF logits = decode(map, vqvae);
    OccupancyGrid grid = binarize(logits, vqvae.grid, BinarizeMode::kThreshold);
    save_ulog(grid, stem + ".ulog");
  }
  std::cout << "generated " << count << " sample(s) at " << out_prefix << "\n";
  return 0;
}

int cmd_denoise(const Common& common, const std::string& gen_path,
                const std::string& in_path, const std::string& out_path) {
  RunConfig cfg = load_config(common);
  GenConfig gc = cfg.gen;
  gc.seed = common.seed.value_or(cfg.gen.seed);
  GeneratorModel gen = load_generator(gen_path);
  CodeMap map = load_ulcm(in_path);
  CodeMap out = denoise(map, gen, cfg.denoise_rounds, cfg.denoise_fraction, gc);
  save_ulcm(out, out_path);
  std::cout << "denoised " << cfg.denoise_rounds << " round(s)\n";
  return 0;
}

std::vector<int> parse_ints(const std::string& s, size_t n, const char* what) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (out.size() != n)
    throw std::runtime_error(std::string(what) + ": expected " +
                             std::to_string(n) + " comma-separated integers");
  return out;
}

int cmd_manipulate(const Common&, const std::string& in_path,
                   const std::string& src_path, const std::string& rect_s,
                   const std::string& origin_s, const std::string& out_path) {
  CodeMap dst = load_ulcm(in_path);
  CodeMap src = src_path.empty() ? dst : load_ulcm(src_path);
  std::vector<int> r = parse_ints(rect_s, 4, "--src-rect");
  std::vector<int> o = parse_ints(origin_s, 2, "--dst-origin");
  CodeMap out = paste_region(dst, src, Rect{r[0], r[1], r[2], r[3]}, o[0], o[1]);
  save_ulcm(out, out_path);
  std::cout << "pasted " << r[2] << "x" << r[3] << " region to (" << o[0] << ","
            << o[1] << ")\n";
  return 0;
}

int cmd_eval(const Common& common, const std::string& real_dir,
             const std::string& gen_dir, const std::string& mode_s) {
  RunConfig cfg = load_config(common);
  GridConfig grid = cfg.grid_config();
  std::vector<OccupancyGrid> real, gen;
  for (const std::string& f : list_files(real_dir, ".ulog"))
    real.push_back(load_ulog(f, grid));
  for (const std::string& f : list_files(gen_dir, ".ulog"))
    gen.push_back(load_ulog(f, grid));
  EvalMode mode = mode_s == "duplicated" ? EvalMode::kDuplicated : EvalMode::kOccupancy;
  std::optional<double> bw;
  if (cfg.eval_bandwidth > 0) bw = cfg.eval_bandwidth;
  MetricReport report = evaluate_sets(real, gen, mode, bw);
  std::cout << "samples: " << report.n_real << " real vs " << report.n_gen
            << " generated (" << mode_s << " mode)\n"
            << "MMD_BEV: " << report.mmd << "\nJSD_BEV: " << report.jsd
            << "\nkernel bandwidth: " << report.bandwidth << "\n"
            << report.machine_line() << "\n";
  return 0;
}

int cmd_render(const Common& common, const std::string& in_path,
               const std::string& out_path) {
  RunConfig cfg = load_config(common);
  OccupancyGrid grid = load_ulog(in_path, cfg.grid_config());
  const GridConfig& g = grid.config;
  // P5 PGM: pixel (i, j) = 255 * occupied-in-column / C.
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
  os << "P5\n" << g.W << " " << g.H << "\n255\n";
  for (int i = 0; i < g.H; ++i)
    for (int j = 0; j < g.W; ++j) {
      int cnt = 0;
      for (int k = 0; k < g.C; ++k) cnt += grid.get(i, j, k);
      os.put(static_cast<char>(
          static_cast<int>(std::lround(255.0 * cnt / g.C))));
    }
  if (!os) throw std::runtime_error("write failed: " + out_path);
  std::cout << "rendered " << g.H << "x" << g.W << " PGM to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR discrete-codebook toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  uint64_t seed_opt = 0;
  auto* seed_flag =
      app.add_option("--seed", seed_opt, "override the subcommand's seed");

  std::string out_dir, data_dir, model_path, out_path, in_path, gen_path;
  std::string encoder = "dense", corpus_dir, cond_path, mask_path;
  std::string src_path, rect_s, origin_s, real_dir, gen_dir, mode_s = "occupancy";
  std::string out_cloud;
  int count = 1;

  auto* gen_data = app.add_subcommand("gen-data", "emit paired ULPC samples + manifest");
  gen_data->add_option("--out", out_dir, "output directory")->required();

  auto* train_vqvae_cmd = app.add_subcommand("train-vqvae", "train the two-encoder vq-vae");
  train_vqvae_cmd->add_option("--data", data_dir, "gen-data output directory")->required();
  train_vqvae_cmd->add_option("--out", out_path, "model checkpoint (ULCK)")->required();

  auto* encode_cmd = app.add_subcommand("encode-corpus", "grids -> ULCM code maps");
  encode_cmd->add_option("--model", model_path, "vq-vae checkpoint")->required();
  encode_cmd->add_option("--data", data_dir, "gen-data output directory")->required();
  encode_cmd->add_option("--out", out_dir, "code map directory")->required();
  encode_cmd->add_option("--encoder", encoder, "dense|sparse (default dense)");

  auto* train_gen_cmd = app.add_subcommand("train-gen", "train the masked-token prior");
  train_gen_cmd->add_option("--corpus", corpus_dir, "ULCM directory")->required();
  train_gen_cmd->add_option("--vqvae", model_path, "vq-vae checkpoint")->required();
  train_gen_cmd->add_option("--out", out_path, "generator checkpoint (ULCK)")->required();

  auto* rec_cmd = app.add_subcommand("reconstruct", "cloud -> codes -> grid");
  rec_cmd->add_option("--model", model_path)->required();
  rec_cmd->add_option("--in", in_path, "input ULPC")->required();
  rec_cmd->add_option("--out", out_path, "output ULOG")->required();
  rec_cmd->add_option("--encoder", encoder, "dense|sparse (default dense)");

  auto* complete_cmd = app.add_subcommand("complete", "sparse cloud -> dense grid");
  complete_cmd->add_option("--model", model_path)->required();
  complete_cmd->add_option("--in", in_path, "sparse ULPC")->required();
  complete_cmd->add_option("--out", out_path, "densified ULOG")->required();
  complete_cmd->add_option("--out-cloud", out_cloud, "optional densified ULPC");

  auto* generate_cmd = app.add_subcommand("generate", "sample new scenes");
  generate_cmd->add_option("--gen", gen_path, "generator checkpoint")->required();
  generate_cmd->add_option("--vqvae", model_path, "vq-vae checkpoint")->required();
  generate_cmd->add_option("--out", out_path, "output prefix")->required();
  generate_cmd->add_option("--count", count, "number of samples");
  generate_cmd->add_option("--condition", cond_path, "partial ULCM code map");
  generate_cmd->add_option("--cond-mask", mask_path,
                           "text mask (h rows of w 0/1 chars; 0 = regenerate)");

  auto* denoise_cmd = app.add_subcommand("denoise", "re-mask and regenerate regions");
  denoise_cmd->add_option("--gen", gen_path, "generator checkpoint")->required();
  denoise_cmd->add_option("--in", in_path, "input ULCM")->required();
  denoise_cmd->add_option("--out", out_path, "output ULCM")->required();

  auto* manip_cmd = app.add_subcommand("manipulate", "copy-paste code regions");
  manip_cmd->add_option("--in", in_path, "destination ULCM")->required();
  manip_cmd->add_option("--src", src_path, "source ULCM (default: --in)");
  manip_cmd->add_option("--src-rect", rect_s, "r0,c0,h,w")->required();
  manip_cmd->add_option("--dst-origin", origin_s, "r,c")->required();
  manip_cmd->add_option("--out", out_path, "output ULCM")->required();

  auto* eval_cmd = app.add_subcommand("eval", "MMD/JSD between ULOG directories");
  eval_cmd->add_option("--real", real_dir)->required();
  eval_cmd->add_option("--gen", gen_dir)->required();
  eval_cmd->add_option("--mode", mode_s, "occupancy|duplicated");

  auto* render_cmd = app.add_subcommand("render", "grid -> 8-bit PGM");
  render_cmd->add_option("--in", in_path, "input ULOG")->required();
  render_cmd->add_option("--out", out_path, "output PGM")->required();

  auto* dump_cmd = app.add_subcommand("dump-config", "print the effective config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors exit 1
  }

  if (seed_flag->count() > 0) common.seed = seed_opt;

  try {
    if (*gen_data) return cmd_gen_data(common, out_dir);
    if (*train_vqvae_cmd) return cmd_train_vqvae(common, data_dir, out_path);
    if (*encode_cmd)
      return cmd_encode_corpus(common, model_path, data_dir, out_dir, encoder);
    if (*train_gen_cmd)
      return cmd_train_gen(common, corpus_dir, model_path, out_path);
    if (*rec_cmd)
      return cmd_reconstruct(common, model_path, in_path, out_path, encoder);
    if (*complete_cmd)
      return cmd_complete(common, model_path, in_path, out_path, out_cloud);
    if (*generate_cmd)
      return cmd_generate(common, gen_path, model_path, out_path, count,
                          cond_path, mask_path);
    if (*denoise_cmd) return cmd_denoise(common, gen_path, in_path, out_path);
    if (*manip_cmd)
      return cmd_manipulate(common, in_path, src_path, rect_s, origin_s, out_path);
    if (*eval_cmd) return cmd_eval(common, real_dir, gen_dir, mode_s);
    if (*render_cmd) return cmd_render(common, in_path, out_path);
    if (*dump_cmd) {
      std::cout << dump_run_config(load_config(common));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
