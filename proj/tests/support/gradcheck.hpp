#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "spectttra/training.hpp"

namespace spectttra::check {

inline Architecture tiny_arch(Variant v, bool temporal = true, bool spectral = true) {
  Architecture a;
  a.n_mels = 16;
  a.frames = 24;
  a.encoder.embed_dim = 16;
  a.encoder.n_heads = 2;
  a.encoder.n_layers = 2;
  a.tokenizer.clip = ClipConfig::from_variant(v);
  a.tokenizer.clip.temporal_enabled = temporal;
  a.tokenizer.clip.spectral_enabled = spectral;
  return a;
}

struct CheckResult {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central differences over every scalar of every tensor.
inline CheckResult finite_difference_check(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams<double> params = init_params<double>(arch, rng);
  // Random norm affines and biases so those gradients are not trivially structured.
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& t : params.tensors()) {
    if (t.role == TensorRole::norm || t.role == TensorRole::bias) {
      for (double& v : t.data) v += 0.1 * normal(rng);
    }
  }
  Matrix<double> spec = Matrix<double>::NullaryExpr(arch.n_mels, arch.frames, [&] { return normal(rng); });
  const double y = 1.0;
  const double eps = 0.02;

  const auto analytic = backward(spec, y, params, arch, eps);
  const auto grads = analytic.grads.tensors();
  auto views = params.tensors();
  const double h = 1e-5;

  CheckResult out;
  for (std::size_t k = 0; k < views.size(); ++k) {
    for (std::size_t i = 0; i < views[k].data.size(); ++i) {
      double& w = views[k].data[i];
      const double saved = w;
      w = saved + h;
      const double up = bce_smoothed(forward(spec, params, arch), y, eps);
      w = saved - h;
      const double down = bce_smoothed(forward(spec, params, arch), y, eps);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[k].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = views[k].name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace spectttra::check
