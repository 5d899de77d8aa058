#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectttra/augment.hpp"
#include "spectttra/checkpoint.hpp"
#include "spectttra/dataio.hpp"
#include "spectttra/model.hpp"

namespace spectttra {

struct TrainConfig {
  int epochs = 50;
  int warmup_epochs = 5;
  double base_lr = 3e-4;  // not given in the literature; conventional for this encoder size
  double min_lr_ratio = 1e-2;
  double weight_decay = 0.05;
  int batch_size = 16;
  double label_smoothing = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> grad_clip_norm;
  std::uint64_t seed = 0;
  bool augment_enabled = true;
  AugmentConfig augment;

  void validate() const;
};

/// Binary cross-entropy against the smoothed target y(1-eps) + eps/2, in the
/// stable form softplus(z) - y'z.
double bce_smoothed(double logit, double y, double eps);
/// d bce_smoothed / d logit = sigmoid(z) - y'.
double bce_smoothed_grad(double logit, double y, double eps);

/// Linear warmup from 0, then cosine down to base_lr * min_lr_ratio at the last step.
double lr_at(std::int64_t step, std::int64_t steps_per_epoch, const TrainConfig& cfg);

template <typename Real>
struct LossAndGrad {
  double loss = 0.0;
  double logit = 0.0;
  ModelParams<Real> grads;
};

/// Loss and exact gradients of bce_smoothed(forward(spec), y) for one example.
template <typename Real>
LossAndGrad<Real> backward(const Matrix<Real>& spec, double y, const ModelParams<Real>& params,
                           const Architecture& arch, double label_smoothing, Rng* dropout_rng = nullptr);

/// Mean loss over a batch; gradients are the mean of per-example gradients.
template <typename Real>
LossAndGrad<Real> batch_backward(const std::vector<Matrix<Real>>& specs, const std::vector<double>& labels,
                                 const ModelParams<Real>& params, const Architecture& arch, double label_smoothing,
                                 Rng* dropout_rng = nullptr);

/// Throws NonFiniteError naming the first tensor holding a NaN or infinity.
template <typename Real>
void check_finite(const ModelParams<Real>& grads, const std::string& what = "gradient");

template <typename Real>
double global_norm(const ModelParams<Real>& grads);

/// Rescales so the global L2 norm is at most max_norm. Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(ModelParams<Real>& grads, double max_norm);

template <typename Real>
struct OptimizerState {
  ModelParams<Real> m;
  ModelParams<Real> v;
  std::int64_t step = 0;

  static OptimizerState zeros(const ModelParams<Real>& params);
};

/// Decoupled weight decay on weight matrices only (biases, norms and
/// positional embeddings are exempt), then the bias-corrected Adam update.
template <typename Real>
void adamw_step(ModelParams<Real>& params, const ModelParams<Real>& grads, OptimizerState<Real>& state, double lr,
                const TrainConfig& cfg);

/// Probability of fake for each item, using the deterministic eval crop.
std::vector<double> score_dataset(const ModelParams<float>& params, const Architecture& arch, const Dataset& data);

std::vector<ScoredExample> scored_examples(const Dataset& data, const std::vector<double>& scores);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;  // at the last step of the epoch
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  double valid_eer = 0.0;  // NaN when validation holds one class only
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_valid_f1 = -1.0;
  ModelBundle<float> best;
  ModelBundle<float> last;
};

/// Optional outputs of train_loop. Empty out_dir writes nothing.
struct TrainOutputs {
  std::filesystem::path out_dir;  // metrics.csv, best.ckpt, last.ckpt
  std::function<void(const EpochRecord&)> on_epoch;
  std::map<std::string, std::string> info;  // copied into every saved bundle
};

/// Single-threaded and fully determined by cfg.seed. A non-finite loss or
/// gradient aborts with std::runtime_error; last.ckpt then still holds the
/// last completed epoch.
TrainResult train_loop(const Dataset& train, const Dataset& valid, const SpectrogramConfig& spectrogram,
                       const Architecture& arch, const TrainConfig& cfg, const TrainOutputs& outputs = {});

}  // namespace spectttra
