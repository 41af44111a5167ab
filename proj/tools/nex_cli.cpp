// Command-line entry point: train, render, eval, export, bench, gen-scene.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "nex/checkpoint.hpp"
#include "nex/config.hpp"
#include "nex/export.hpp"
#include "nex/metrics.hpp"
#include "nex/render.hpp"
#include "nex/synth.hpp"
#include "nex/train.hpp"

namespace fs = std::filesystem;
using namespace nex;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path manifest_path(const fs::path& scene) {
  return fs::is_directory(scene) ? scene / "manifest.json" : scene;
}

struct TrainArgs {
  std::string scene, config, out = "model.ckpt", log, modes, basis;
  std::optional<int> planes, sharing, coeffs, epochs, triplets, margin, workers, eval_every;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = load_train_config(a.config);
  ModelOptions& m = cfg.model;
  if (a.planes) m.planes = *a.planes;
  if (a.sharing) m.sharing = *a.sharing;
  if (!a.basis.empty() || a.coeffs) {
    const BasisFamily f = a.basis.empty() ? m.basis.family : parse_basis_family(a.basis);
    m.basis = BasisConfig::make(f, a.coeffs ? *a.coeffs : m.basis.count);
  }
  if (!a.modes.empty()) m.modes = ModelModes::parse(a.modes);
  if (a.margin) m.margin = *a.margin;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.triplets) cfg.triplets = *a.triplets;
  if (a.workers) cfg.workers = *a.workers;
  if (a.eval_every) cfg.eval_every = *a.eval_every;
  if (a.seed) cfg.seed = *a.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const SceneDataset ds = load_scene(manifest_path(a.scene));
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(ds, cfg, [](const TrainLogRow& row) {
    if (std::isfinite(row.heldout_psnr))
      std::fprintf(stderr, "epoch %d  iter %ld  loss %.6f  held-out PSNR %.2f dB\n", row.epoch + 1, row.iteration,
                   row.loss, row.heldout_psnr);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MpiModel model = r.model;
  save_checkpoint(a.out, model, &r.adam);
  write_log_csv(a.log.empty() ? a.out + ".log.csv" : a.log, r.log);
  std::fprintf(stderr, "trained %d epochs in %.1f s, wrote %s\n", cfg.epochs, secs, a.out.c_str());
  return 0;
}

Camera resolve_pose(const std::string& pose, const std::string& scene) {
  std::size_t used = 0;
  int index = -1;
  try {
    index = std::stoi(pose, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == pose.size() && used > 0) {
    if (scene.empty()) throw UsageError("--pose " + pose + " is an index and needs --scene");
    const SceneDataset ds = load_scene(manifest_path(scene));
    if (index < 0 || index >= static_cast<int>(ds.size()))
      throw UsageError("--pose index " + pose + " out of range (scene has " + std::to_string(ds.size()) + " views)");
    return ds.cameras[index];
  }
  return load_camera(pose);
}

int run_render(const std::string& ckpt, const std::string& pose, const std::string& scene, const std::string& out,
               int workers, bool baked_dir) {
  const Camera cam = resolve_pose(pose, scene);
  if (baked_dir) {
    const BakedMpi b = load_baked(ckpt);
    const BakedRender r = render_baked(b, cam, workers);
    write_png(out, r.image, 8);
    double covered = 0.0;
    for (double c : r.coverage.data) covered += c;
    std::fprintf(stderr, "coverage %.1f%%\n", 100.0 * covered / static_cast<double>(r.coverage.data.size()));
    return 0;
  }
  const Checkpoint c = load_checkpoint(ckpt);
  write_png(out, render_image(c.model, cam, workers), 8);
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& scene, const std::string& split, const std::string& out,
             int workers) {
  if (split != "test" && split != "train") throw UsageError("--split must be test or train");
  const SceneDataset ds = load_scene(manifest_path(scene));
  const Checkpoint c = load_checkpoint(ckpt);
  const auto scores = evaluate_views(c.model, ds, split == "test", workers);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw std::runtime_error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "image,psnr,ssim\n";
  char buf[256];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.5f\n", s.name.c_str(), s.psnr, s.ssim);
    os << buf;
  }
  std::fprintf(stderr, "%zu views: mean PSNR %.3f dB, mean SSIM %.4f\n", scores.size(), mean_psnr(scores),
               mean_ssim(scores));
  return 0;
}

int run_export(const std::string& ckpt, const std::string& out, int bits, double span, int grid, int workers) {
  if (bits != 8 && bits != 16) throw UsageError("--bits must be 8 or 16");
  if (!(span > 0.0 && span < 1.0)) throw UsageError("--span must be in (0, 1)");
  if (grid < 2) throw UsageError("--grid must be at least 2");
  const Checkpoint c = load_checkpoint(ckpt);
  const BakedMpi b = bake(c.model, {span, grid, bits, workers});
  save_baked(out, b);
  std::fprintf(stderr, "baked %d planes, %d groups, N=%d into %s\n", b.planes(), b.groups(), b.coeffs, out.c_str());
  return 0;
}

// Multiply-adds per rendered pixel: F at every plane plus one shared query
// per group, G once per pixel, then basis mixing and compositing.
double ops_per_pixel(const MpiModel& m) {
  auto mlp_ops = [](const Mlp& net) {
    double ops = 0.0;
    for (const auto& l : net.layers()) ops += static_cast<double>(l.weight.size());
    return ops;
  };
  const int d = m.plane_count(), n = m.coeff_count();
  double ops = 0.0;
  if (m.uses_color_net()) {
    const double f = mlp_ops(m.color_net);
    if (m.alpha_channel() >= 0) ops += d * f;
    if (m.needs_shared_query()) ops += m.group_count() * f;
  }
  if (m.uses_basis_net()) ops += mlp_ops(m.basis_net);
  ops += d * (3.0 * n + 4.0);  // basis mixing + compositing
  return ops;
}

int run_bench(const std::string& ckpt, int workers, int repeats) {
  const Checkpoint c = load_checkpoint(ckpt);
  const Camera& cam = c.model.reference;
  const double rays = static_cast<double>(cam.width) * cam.height * repeats;
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) (void)render_image(c.model, cam, workers);
  const double parallel = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) (void)render_image_serial(c.model, cam);
  const double serial = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("{\"workers\": %d, \"rays_per_sec\": %.1f, \"serial_rays_per_sec\": %.1f, \"ops_per_pixel\": %.0f}\n",
              resolve_workers(workers), rays / parallel, rays / serial, ops_per_pixel(c.model));
  return 0;
}

int run_gen_scene(const std::string& kind, const std::string& out, std::uint64_t seed, int width, int height,
                  int views) {
  SynthOptions o;
  try {
    o.kind = parse_scene_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  o.seed = seed;
  o.width = width;
  o.height = height;
  o.views = views;
  save_scene(out, generate_scene(o));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-dependent multiplane image engine"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int workers = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--workers", workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "fit an MPI to a scene");
  train_cmd->add_option("--scene", ta.scene, "scene directory or manifest")->required();
  train_cmd->add_option("--config", ta.config, "JSON training config; flags override it");
  train_cmd->add_option("--planes", ta.planes, "plane count D");
  train_cmd->add_option("--sharing", ta.sharing, "coefficient sharing M");
  train_cmd->add_option("--coeffs", ta.coeffs, "basis size N");
  train_cmd->add_option("--basis", ta.basis, "learned|sh|hsh|jh|fs|ts");
  train_cmd->add_option("--modes", ta.modes, "alpha-K0-coeffs modes, e.g. Im-Ex-Im");
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--triplets", ta.triplets, "pixel triplets per iteration");
  train_cmd->add_option("--margin", ta.margin, "pixels added around the reference frustum");
  train_cmd->add_option("--eval-every", ta.eval_every, "held-out evaluation period in epochs");
  train_cmd->add_option("--out", ta.out, "checkpoint path");
  train_cmd->add_option("--log", ta.log, "training log CSV (default <out>.log.csv)");
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--seed", train_seed, "random seed");
  train_cmd->add_option("--workers", workers)->check(CLI::NonNegativeNumber);

  std::string ckpt, pose, scene, out, split = "test";
  bool baked = false;
  auto* render_cmd = app.add_subcommand("render", "render a view from a checkpoint or baked MPI");
  render_cmd->add_option("--ckpt", ckpt, "checkpoint file, or baked directory with --baked")->required();
  render_cmd->add_option("--pose", pose, "view index into --scene, or camera JSON file")->required();
  render_cmd->add_option("--scene", scene);
  render_cmd->add_option("--out", out)->required();
  render_cmd->add_flag("--baked", baked, "render through the baked atlases");
  common(render_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "score held-out views (CSV)");
  eval_cmd->add_option("--ckpt", ckpt)->required();
  eval_cmd->add_option("--scene", scene)->required();
  eval_cmd->add_option("--split", split, "test|train");
  eval_cmd->add_option("--out", out, "CSV path (default stdout)");
  common(eval_cmd);

  int bits = 8, grid = 64;
  double span = 0.7;
  auto* export_cmd = app.add_subcommand("export", "bake the model into image atlases");
  export_cmd->add_option("--ckpt", ckpt)->required();
  export_cmd->add_option("--out", out)->required();
  export_cmd->add_option("--bits", bits, "8 or 16");
  export_cmd->add_option("--span", span, "basis lookup span");
  export_cmd->add_option("--grid", grid, "basis lookup nodes per axis");
  common(export_cmd);

  int repeats = 3;
  auto* bench_cmd = app.add_subcommand("bench", "render throughput");
  bench_cmd->add_option("--ckpt", ckpt)->required();
  bench_cmd->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
  common(bench_cmd);

  std::string kind = "lambertian";
  int width = 32, height = 24, views = 12;
  seed = 7;
  auto* gen_cmd = app.add_subcommand("gen-scene", "write a synthetic forward-facing scene");
  gen_cmd->add_option("--kind", kind, "lambertian|specular");
  gen_cmd->add_option("--out", out)->required();
  gen_cmd->add_option("--width", width)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", height)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--views", views)->check(CLI::PositiveNumber);
  common(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      if (train_cmd->count("--seed")) ta.seed = train_seed;
      if (train_cmd->count("--workers")) ta.workers = workers;
      return run_train(ta);
    }
    if (*render_cmd) return run_render(ckpt, pose, scene, out, workers, baked);
    if (*eval_cmd) return run_eval(ckpt, scene, split, out, workers);
    if (*export_cmd) return run_export(ckpt, out, bits, span, grid, workers);
    if (*bench_cmd) return run_bench(ckpt, workers, repeats);
    if (*gen_cmd) return run_gen_scene(kind, out, seed, width, height, views);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
