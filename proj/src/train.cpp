#include "nex/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nex/metrics.hpp"

namespace nex {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (triplets < 1) throw std::invalid_argument("triplet count must be >= 1");
  if (omega < 0.0 || gamma < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  if (decay_epochs < 1) throw std::invalid_argument("decay interval must be >= 1");
  if (model.planes < 1 || model.sharing < 1 || model.planes % model.sharing != 0)
    throw std::invalid_argument("plane count must be a positive multiple of the sharing factor");
  model.basis.validate();
}

std::vector<Eigen::Vector2d> TripletBatch::centers() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) out.emplace_back(p.x() + 0.5, p.y() + 0.5);
  return out;
}

TripletBatch sample_triplets(std::mt19937_64& rng, int width, int height, int count, bool* with_replacement) {
  if (width < 2 || height < 2) throw std::invalid_argument("triplet sampling needs images of at least 2x2");
  if (count < 1) throw std::invalid_argument("triplet count must be >= 1");
  const long total = static_cast<long>(width - 1) * (height - 1);
  std::vector<long> anchors(count);
  const bool replace = count > total;
  if (with_replacement) *with_replacement = replace;
  if (replace) {
    std::uniform_int_distribution<long> pick(0, total - 1);
    for (auto& a : anchors) a = pick(rng);
  } else {
    // Partial Fisher-Yates over the anchor grid.
    std::vector<long> pool(total);
    std::iota(pool.begin(), pool.end(), 0L);
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<long> pick(i, total - 1);
      std::swap(pool[i], pool[pick(rng)]);
      anchors[i] = pool[i];
    }
  }
  TripletBatch b;
  b.pixels.reserve(3 * static_cast<std::size_t>(count));
  for (long a : anchors) {
    const int x = static_cast<int>(a % (width - 1)), y = static_cast<int>(a / (width - 1));
    b.pixels.emplace_back(x, y);
    b.pixels.emplace_back(x + 1, y);
    b.pixels.emplace_back(x, y + 1);
  }
  return b;
}

namespace {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossValue reconstruction_loss(std::span<const Rgb> pred, std::span<const Rgb> gt, const TripletBatch& batch,
                              double omega, GradientMask mask) {
  const std::size_t n = batch.pixels.size();
  if (pred.size() != n || gt.size() != n || n % 3 != 0)
    throw std::invalid_argument("predictions, targets and batch are misaligned");
  LossValue out;
  out.grad.assign(n, Rgb::Zero());
  if (n == 0) return out;
  const double mse_scale = 1.0 / (3.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb d = pred[i] - gt[i];
    out.loss += d.squaredNorm() * mse_scale;
    out.grad[i] += 2.0 * mse_scale * d;
  }
  if (omega == 0.0) return out;
  const std::size_t triplets = n / 3;
  const double l1_scale = omega / (6.0 * static_cast<double>(triplets));
  for (std::size_t t = 0; t < triplets; ++t) {
    const std::size_t a = 3 * t;
    for (std::size_t nb : {a + 1, a + 2}) {
      for (int c = 0; c < 3; ++c) {
        const double target = gt[nb][c] - gt[a][c];
        if (mask.enabled && std::abs(target) < mask.threshold) continue;
        const double e = (pred[nb][c] - pred[a][c]) - target;
        out.loss += l1_scale * std::abs(e);
        const double s = l1_scale * sign(e);
        out.grad[nb][c] += s;
        out.grad[a][c] -= s;
      }
    }
  }
  return out;
}

double tv_loss(std::span<const Image> grids, double gamma, std::vector<Image>* grads) {
  if (grids.empty()) throw std::invalid_argument("TV needs at least one grid");
  double loss = 0.0;
  for (std::size_t gi = 0; gi < grids.size(); ++gi) {
    const Image& g = grids[gi];
    Image* dg = grads ? &(*grads)[gi] : nullptr;
    const int w = g.width, h = g.height, ch = g.channels;
    const double sx = w > 1 ? gamma / (static_cast<double>(w - 1) * h * ch) : 0.0;
    const double sy = h > 1 ? gamma / (static_cast<double>(h - 1) * w * ch) : 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          const double v = g.at(x, y, c);
          if (x + 1 < w) {
            const double d = g.at(x + 1, y, c) - v;
            loss += sx * std::abs(d);
            if (dg) {
              dg->at(x + 1, y, c) += sx * sign(d);
              dg->at(x, y, c) -= sx * sign(d);
            }
          }
          if (y + 1 < h) {
            const double d = g.at(x, y + 1, c) - v;
            loss += sy * std::abs(d);
            if (dg) {
              dg->at(x, y + 1, c) += sy * sign(d);
              dg->at(x, y, c) -= sy * sign(d);
            }
          }
        }
  }
  return loss;
}

ObjectiveValue evaluate_objective(const MpiModel& model, const Camera& cam, const Image& target,
                                  const TripletBatch& batch, const TrainConfig& cfg,
                                  std::span<const double> plane_indices, ModelGradient* grad) {
  const auto centers = batch.centers();
  std::vector<Rgb> gt(batch.pixels.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto px = target.pixel(batch.pixels[i].x(), batch.pixels[i].y());
    gt[i] = Rgb(px[0], px[1], px[2]);
  }
  RayEvaluator eval(model, cam, centers, plane_indices, cfg.workers);
  ObjectiveValue out;
  out.pred = eval.colors();
  const LossValue rec =
      reconstruction_loss(out.pred, gt, batch, cfg.omega, {cfg.gradient_mask, cfg.gradient_mask_threshold});
  out.reconstruction = rec.loss;
  if (!model.k0.empty() && cfg.gamma > 0.0) out.tv = tv_loss(model.k0, cfg.gamma, grad ? &grad->k0 : nullptr);
  out.total = out.reconstruction + out.tv;
  if (grad) eval.backward(rec.grad, *grad, cfg.workers);
  return out;
}

std::vector<double> jitter_planes(std::mt19937_64& rng, int planes) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> out(planes);
  for (int d = 0; d < planes; ++d) out[d] = std::clamp(d + u(rng), 0.0, static_cast<double>(planes - 1));
  return out;
}

std::vector<ViewScore> evaluate_views(const MpiModel& model, const SceneDataset& dataset, bool test_split,
                                      int workers) {
  std::vector<ViewScore> out;
  const auto idx = test_split ? dataset.test_indices() : dataset.train_indices();
  for (int i : idx) {
    const Image img = render_image(model, dataset.cameras[i], workers);
    ViewScore s;
    s.index = i;
    s.name = i < static_cast<int>(dataset.names.size()) ? dataset.names[i] : std::to_string(i);
    s.psnr = psnr(img, dataset.images[i]);
    s.ssim = std::min(img.width, img.height) >= 11 ? ssim(img, dataset.images[i])
                                                   : std::numeric_limits<double>::quiet_NaN();
    out.push_back(s);
  }
  return out;
}

double mean_psnr(std::span<const ViewScore> scores) {
  if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& v : scores) s += v.psnr;
  return s / scores.size();
}

double mean_ssim(std::span<const ViewScore> scores) {
  if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& v : scores) s += v.ssim;
  return s / scores.size();
}

TrainResult train(const SceneDataset& dataset, const TrainConfig& cfg, const TrainProgress& progress) {
  cfg.validate();
  const auto train_idx = dataset.train_indices();
  if (train_idx.empty()) throw std::invalid_argument("dataset has no training images");
  const Camera& ref = dataset.reference();

  TrainResult result;
  ModelOptions mopts = cfg.model;
  mopts.seed = cfg.seed;
  result.model = make_model(ref, dataset.near, dataset.far, mopts);
  MpiModel& model = result.model;
  {
    const auto params = model.parameters();
    result.adam.reset(params);
  }
  if (cfg.epochs == 0) return result;

  // Separate stream from weight initialization.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::vector<std::string> group_names{"base", "nets"};
  const bool has_test = !dataset.test_indices().empty();
  bool warned = false;
  long iteration = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_base = lr_schedule(cfg.lr_base, epoch, cfg.decay_epochs);
    const double lr_nets = lr_schedule(cfg.lr_nets, epoch, cfg.decay_epochs);
    const double group_lr[2] = {lr_base, lr_nets};
    for (std::size_t k = 0; k < train_idx.size(); ++k, ++iteration) {
      const int i = train_idx[k];
      const Camera& cam = dataset.cameras[i];
      bool replaced = false;
      const TripletBatch batch = sample_triplets(rng, cam.width, cam.height, cfg.triplets, &replaced);
      if (replaced && !warned) {
        std::cerr << "warning: " << cfg.triplets << " triplets exceed the " << (cam.width - 1) * (cam.height - 1)
                  << " available anchors; sampling with replacement\n";
        warned = true;
      }
      std::vector<double> jitter;
      if (cfg.stochastic_depth) jitter = jitter_planes(rng, model.plane_count());

      ModelGradient grad = ModelGradient::zeros_like(model);
      const ObjectiveValue obj = evaluate_objective(model, cam, dataset.images[i], batch, cfg, jitter, &grad);
      if (!std::isfinite(obj.total)) {
        std::ostringstream os;
        os << "loss became non-finite at iteration " << iteration << " (lr base " << lr_base << ", nets " << lr_nets
           << ")";
        throw std::runtime_error(os.str());
      }
      const auto params = model.parameters();
      const auto flat = grad.flat();
      const std::vector<std::span<const double>> grads(flat.begin(), flat.end());
      adam_step(result.adam, params, grads, group_lr, group_names);

      TrainLogRow row;
      row.iteration = iteration;
      row.epoch = epoch;
      row.loss = obj.total;
      row.lr = lr_nets;
      row.heldout_psnr = std::numeric_limits<double>::quiet_NaN();
      const bool last_in_epoch = k + 1 == train_idx.size();
      const bool eval_now = last_in_epoch && has_test &&
                            ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.epochs);
      if (eval_now) row.heldout_psnr = mean_psnr(evaluate_views(model, dataset, true, cfg.workers));
      result.log.push_back(row);
      if (progress) progress(row);
    }
  }
  return result;
}

void write_log_csv(const std::string& path, std::span<const TrainLogRow> log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iteration,loss,lr,heldout_psnr\n";
  out.precision(10);
  for (const auto& r : log) {
    out << r.iteration << ',' << r.loss << ',' << r.lr << ',';
    if (std::isfinite(r.heldout_psnr)) out << r.heldout_psnr;
    out << '\n';
  }
}

std::vector<AblationRow> ablation_matrix(const SceneDataset& dataset, const TrainConfig& base) {
  std::vector<AblationRow> rows;
  const ModelModes default_modes{Mode::implicit_net, Mode::explicit_grid, Mode::implicit_net};
  for (int code = 0; code < 8; ++code) {
    // Bit 2 = alpha, bit 1 = K0, bit 0 = coefficients; 0 = Ex, so Ex-Ex-Ex comes first.
    ModelModes m;
    m.alpha = (code & 4) ? Mode::implicit_net : Mode::explicit_grid;
    m.k0 = (code & 2) ? Mode::implicit_net : Mode::explicit_grid;
    m.coeffs = (code & 1) ? Mode::implicit_net : Mode::explicit_grid;
    TrainConfig cfg = base;
    cfg.model.modes = m;
    const TrainResult r = train(dataset, cfg);
    const auto scores = evaluate_views(r.model, dataset, true, base.workers);
    rows.push_back({m, mean_psnr(scores), mean_ssim(scores), m == default_modes});
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "alpha,k0,coeffs,psnr,ssim,default\n";
  auto tag = [](Mode m) { return m == Mode::explicit_grid ? "Ex" : "Im"; };
  for (const auto& r : rows)
    os << tag(r.modes.alpha) << ',' << tag(r.modes.k0) << ',' << tag(r.modes.coeffs) << ',' << r.psnr << ','
       << r.ssim << ',' << (r.is_default ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace nex
