#include "spectttra/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

namespace spectttra {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs) throw std::invalid_argument("train: need 0 <= warmup_epochs <= epochs");
  if (!(base_lr > 0.0)) throw std::invalid_argument("train: base_lr must be positive");
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw std::invalid_argument("train: min_lr_ratio must be in [0, 1]");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 0.5)) {
    throw std::invalid_argument("train: label_smoothing must be in [0, 0.5)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("train: betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw std::invalid_argument("train: grad_clip_norm must be positive");
  augment.validate();
}

double bce_smoothed(double logit, double y, double eps) {
  const double target = y * (1.0 - eps) + 0.5 * eps;
  // softplus(z) = max(z, 0) + log1p(exp(-|z|))
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - target * logit;
}

double bce_smoothed_grad(double logit, double y, double eps) {
  const double target = y * (1.0 - eps) + 0.5 * eps;
  return sigmoid(logit) - target;
}

double lr_at(std::int64_t step, std::int64_t steps_per_epoch, const TrainConfig& cfg) {
  if (steps_per_epoch <= 0) throw std::invalid_argument("lr_at: steps_per_epoch must be positive");
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  const std::int64_t warmup = static_cast<std::int64_t>(cfg.warmup_epochs) * steps_per_epoch;
  const std::int64_t total = static_cast<std::int64_t>(cfg.epochs) * steps_per_epoch;
  if (step < warmup) return cfg.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  const std::int64_t span = total - 1 - warmup;
  if (span <= 0) return cfg.base_lr;
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(span));
  const double min_lr = cfg.base_lr * cfg.min_lr_ratio;
  return min_lr + (cfg.base_lr - min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename Real>
LossAndGrad<Real> backward(const Matrix<Real>& spec, double y, const ModelParams<Real>& params,
                           const Architecture& arch, double label_smoothing, Rng* dropout_rng) {
  ForwardCache<Real> cache;
  const Real z = forward(spec, params, arch, &cache, dropout_rng);
  LossAndGrad<Real> out;
  out.logit = static_cast<double>(z);
  out.loss = bce_smoothed(out.logit, y, label_smoothing);
  out.grads = zeros_like(params);
  backward_from_logit(cache, static_cast<Real>(bce_smoothed_grad(out.logit, y, label_smoothing)), params, arch,
                      out.grads);
  return out;
}

template <typename Real>
LossAndGrad<Real> batch_backward(const std::vector<Matrix<Real>>& specs, const std::vector<double>& labels,
                                 const ModelParams<Real>& params, const Architecture& arch, double label_smoothing,
                                 Rng* dropout_rng) {
  if (specs.empty() || specs.size() != labels.size()) throw std::invalid_argument("batch_backward: bad batch");
  const Real weight = Real(1) / static_cast<Real>(specs.size());
  LossAndGrad<Real> out;
  out.grads = zeros_like(params);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ForwardCache<Real> cache;
    const double z = static_cast<double>(forward(specs[i], params, arch, &cache, dropout_rng));
    out.loss += bce_smoothed(z, labels[i], label_smoothing);
    backward_from_logit(cache, static_cast<Real>(bce_smoothed_grad(z, labels[i], label_smoothing)), params, arch,
                        out.grads, weight);
  }
  out.loss /= static_cast<double>(specs.size());
  return out;
}

template <typename Real>
void check_finite(const ModelParams<Real>& grads, const std::string& what) {
  for (const auto& t : grads.tensors()) {
    for (const Real v : t.data) {
      if (!std::isfinite(v)) throw NonFiniteError(what + " of " + t.name);
    }
  }
}

template <typename Real>
double global_norm(const ModelParams<Real>& grads) {
  double sq = 0.0;
  for (const auto& t : grads.tensors()) {
    for (const Real v : t.data) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(sq);
}

template <typename Real>
double clip_grad_norm(ModelParams<Real>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const Real scale = static_cast<Real>(max_norm / (norm + 1e-6));
    for (auto& t : grads.tensors()) {
      for (Real& v : t.data) v *= scale;
    }
  }
  return norm;
}

template <typename Real>
OptimizerState<Real> OptimizerState<Real>::zeros(const ModelParams<Real>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename Real>
void adamw_step(ModelParams<Real>& params, const ModelParams<Real>& grads, OptimizerState<Real>& state, double lr,
                const TrainConfig& cfg) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw std::invalid_argument("adamw_step: tensor lists differ");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].data.size() != g[k].data.size()) throw std::invalid_argument("adamw_step: shape mismatch for " + p[k].name);
    const double decay = p[k].role == TensorRole::weight ? 1.0 - lr * cfg.weight_decay : 1.0;
    for (std::size_t i = 0; i < p[k].data.size(); ++i) {
      const double gi = static_cast<double>(g[k].data[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[k].data[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[k].data[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[k].data[i] = static_cast<Real>(mi);
      v[k].data[i] = static_cast<Real>(vi);
      const double theta = static_cast<double>(p[k].data[i]) * decay;
      p[k].data[i] = static_cast<Real>(theta - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps));
    }
  }
}

std::vector<double> score_dataset(const ModelParams<float>& params, const Architecture& arch, const Dataset& data) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Matrix<float> x = data.input(i, arch.frames, FrameMode::eval).cast<float>();
    scores.push_back(sigmoid(static_cast<double>(forward(x, params, arch))));
  }
  return scores;
}

std::vector<ScoredExample> scored_examples(const Dataset& data, const std::vector<double>& scores) {
  if (scores.size() != data.size()) throw std::invalid_argument("scored_examples: size mismatch");
  std::vector<ScoredExample> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({scores[i], data.items[i].label >= 0.5 ? Label::fake : Label::real, data.items[i].partitions});
  }
  return out;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

ModelBundle<float> make_bundle(const SpectrogramConfig& spectrogram, const Architecture& arch,
                               const ModelParams<float>& params, const TrainConfig& cfg, const EpochRecord& rec,
                               const std::map<std::string, std::string>& info) {
  ModelBundle<float> b{spectrogram, arch, params, info};
  b.info["epoch"] = std::to_string(rec.epoch);
  b.info["seed"] = std::to_string(cfg.seed);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", rec.valid_f1);
  b.info["valid_f1"] = buf;
  return b;
}

}  // namespace

TrainResult train_loop(const Dataset& train, const Dataset& valid, const SpectrogramConfig& spectrogram,
                       const Architecture& arch, const TrainConfig& cfg, const TrainOutputs& outputs) {
  cfg.validate();
  arch.validate();
  if (train.empty()) throw std::invalid_argument("train_loop: empty training set");
  if (valid.empty()) throw std::invalid_argument("train_loop: empty validation set");

  Rng init_rng(stream_seed(cfg.seed, 1));
  Rng data_rng(stream_seed(cfg.seed, 2));
  Rng aug_rng(stream_seed(cfg.seed, 3));
  Rng dropout_rng(stream_seed(cfg.seed, 4));
  Rng* dropout = arch.encoder.dropout > 0.0 ? &dropout_rng : nullptr;

  ModelParams<float> params = init_params<float>(arch, init_rng);
  auto opt = OptimizerState<float>::zeros(params);

  const auto n = static_cast<std::int64_t>(train.size());
  const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, n);
  const std::int64_t steps_per_epoch = (n + batch - 1) / batch;

  std::ofstream metrics;
  if (!outputs.out_dir.empty()) {
    std::filesystem::create_directories(outputs.out_dir);
    metrics.open(outputs.out_dir / "metrics.csv");
    if (!metrics) throw std::runtime_error("cannot write " + (outputs.out_dir / "metrics.csv").string());
    metrics << "epoch,lr,train_loss,valid_f1,valid_eer\n";
  }

  TrainResult result;
  std::int64_t step = 0;
  std::vector<std::size_t> order(train.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), data_rng);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      const auto lo = static_cast<std::size_t>(s * batch);
      const auto hi = std::min(order.size(), lo + static_cast<std::size_t>(batch));
      std::vector<Matrix<double>> raw;
      std::vector<double> raw_labels;
      for (std::size_t k = lo; k < hi; ++k) {
        raw.push_back(train.input(order[k], arch.frames, FrameMode::train, &data_rng));
        raw_labels.push_back(train.items[order[k]].label);
      }
      std::vector<std::size_t> partner(raw.size());
      std::iota(partner.begin(), partner.end(), std::size_t{0});
      if (cfg.augment_enabled) std::shuffle(partner.begin(), partner.end(), aug_rng);

      std::vector<Matrix<float>> xs;
      std::vector<double> ys;
      for (std::size_t k = 0; k < raw.size(); ++k) {
        if (cfg.augment_enabled) {
          MixResult mixed = mixup(raw[k], raw[partner[k]], raw_labels[k], raw_labels[partner[k]], cfg.augment, aug_rng);
          xs.push_back(spec_augment(mixed.spec, cfg.augment, aug_rng).cast<float>());
          ys.push_back(mixed.label);
        } else {
          xs.push_back(raw[k].cast<float>());
          ys.push_back(raw_labels[k]);
        }
      }

      lr = lr_at(step, steps_per_epoch, cfg);
      try {
        auto lg = batch_backward(xs, ys, params, arch, cfg.label_smoothing, dropout);
        if (!std::isfinite(lg.loss)) throw NonFiniteError("training loss");
        check_finite(lg.grads);
        if (cfg.grad_clip_norm) clip_grad_norm(lg.grads, *cfg.grad_clip_norm);
        adamw_step(params, lg.grads, opt, lr, cfg);
        check_finite(params, "parameter");
        loss_sum += lg.loss * static_cast<double>(xs.size());
      } catch (const NonFiniteError& e) {
        std::string msg = "training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                          ": " + e.what();
        if (!outputs.out_dir.empty() && epoch > 1) msg += "; last good checkpoint kept in last.ckpt";
        throw std::runtime_error(msg);
      }
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n);
    const auto examples = scored_examples(valid, score_dataset(params, arch, valid));
    rec.valid_f1 = f1_sens_spec(confusion(examples)).f1;
    const bool both = std::any_of(examples.begin(), examples.end(), [](auto& e) { return e.label == Label::fake; }) &&
                      std::any_of(examples.begin(), examples.end(), [](auto& e) { return e.label == Label::real; });
    rec.valid_eer = both ? eer(examples) : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(rec);

    result.last = make_bundle(spectrogram, arch, params, cfg, rec, outputs.info);
    const bool improved = rec.valid_f1 > result.best_valid_f1;
    if (improved) {
      result.best_valid_f1 = rec.valid_f1;
      result.best_epoch = epoch;
      result.best = result.last;
    }
    if (!outputs.out_dir.empty()) {
      char line[160];
      std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", rec.epoch, rec.lr, rec.train_loss,
                    rec.valid_f1, rec.valid_eer);
      metrics << line << std::flush;
      save_checkpoint(outputs.out_dir / "last.ckpt", result.last);
      if (improved) save_checkpoint(outputs.out_dir / "best.ckpt", result.best);
    }
    if (outputs.on_epoch) outputs.on_epoch(rec);
  }
  return result;
}

#define SPECTTTRA_INSTANTIATE(Real)                                                                                 \
  template LossAndGrad<Real> backward(const Matrix<Real>&, double, const ModelParams<Real>&, const Architecture&,    \
                                      double, Rng*);                                                                 \
  template LossAndGrad<Real> batch_backward(const std::vector<Matrix<Real>>&, const std::vector<double>&,            \
                                            const ModelParams<Real>&, const Architecture&, double, Rng*);            \
  template void check_finite(const ModelParams<Real>&, const std::string&);                                         \
  template double global_norm(const ModelParams<Real>&);                                                             \
  template double clip_grad_norm(ModelParams<Real>&, double);                                                        \
  template struct OptimizerState<Real>;                                                                              \
  template void adamw_step(ModelParams<Real>&, const ModelParams<Real>&, OptimizerState<Real>&, double,              \
                           const TrainConfig&);

SPECTTTRA_INSTANTIATE(float)
SPECTTTRA_INSTANTIATE(double)
#undef SPECTTTRA_INSTANTIATE

}  // namespace spectttra
