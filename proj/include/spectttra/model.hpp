#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spectttra/frontend.hpp"
#include "spectttra/tensor.hpp"
#include "spectttra/tokenizer.hpp"

namespace spectttra {

struct EncoderConfig {
  int embed_dim = 384;
  int n_heads = 6;
  int n_layers = 12;
  double mlp_ratio = 2.67;
  double dropout = 0.0;

  /// round(D * mlp_ratio); 1025 for the default config.
  int mlp_hidden() const;
  int head_dim() const { return embed_dim / n_heads; }
  /// n_layers may be zero here (tokenizer + pooling + head only); the CLI enforces >= 1.
  void validate() const;
};

/// Everything that fixes tensor shapes.
struct Architecture {
  int n_mels = 128;
  int frames = 128;
  TokenizerConfig tokenizer;
  EncoderConfig encoder;

  std::int64_t n_tokens() const;
  void validate() const;
};

template <typename Real>
struct BlockParams {
  RowVector<Real> norm1_scale, norm1_bias;
  Matrix<Real> qkv_weight;  // 3D x D, rows ordered [q; k; v], heads contiguous inside each
  RowVector<Real> qkv_bias;
  Matrix<Real> proj_weight;  // D x D
  RowVector<Real> proj_bias;
  RowVector<Real> norm2_scale, norm2_bias;
  Matrix<Real> fc1_weight;  // H x D
  RowVector<Real> fc1_bias;
  Matrix<Real> fc2_weight;  // D x H
  RowVector<Real> fc2_bias;
};

enum class TensorRole { weight, bias, norm, position };

/// Flat view of one named parameter tensor.
template <typename Real>
struct TensorView {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<Real> data;
  TensorRole role;
};

template <typename Real>
struct ModelParams {
  TokenizerFamily family = TokenizerFamily::spectttra;
  TokenizerParams<Real> tokenizer;  // spectttra family
  PatchEmbedding<Real> patch;       // vit family
  std::vector<BlockParams<Real>> blocks;
  RowVector<Real> final_norm_scale, final_norm_bias;
  RowVector<Real> head_weight;  // 1 x D
  RowVector<Real> head_bias;    // 1

  /// Every trainable tensor in a fixed order with stable dotted names.
  std::vector<TensorView<Real>> tensors();
  std::vector<TensorView<const Real>> tensors() const;
};

template <typename Real>
ModelParams<Real> init_params(const Architecture& arch, Rng& rng);

template <typename Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& params);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params);

template <typename Real>
std::int64_t count_params(const ModelParams<Real>& params);

/// Closed-form parameter count for an architecture; agrees with the exact count of init_params.
std::int64_t count_params(const Architecture& arch);

template <typename Real>
struct BlockCache {
  Matrix<Real> input;
  Matrix<Real> norm1_hat;
  ColVector<Real> norm1_inv_std;
  Matrix<Real> norm1_out;
  Matrix<Real> qkv;
  std::vector<Matrix<Real>> attention;  // per head, n x n, rows sum to 1
  Matrix<Real> attn_out;                // concatenated heads before the output projection
  Matrix<Real> proj_mask;               // dropout keep-mask (scaled); empty when inactive
  Matrix<Real> residual;
  Matrix<Real> norm2_hat;
  ColVector<Real> norm2_inv_std;
  Matrix<Real> norm2_out;
  Matrix<Real> fc1_out;
  Matrix<Real> hidden;
  Matrix<Real> fc2_mask;
};

template <typename Real>
struct ForwardCache {
  TokenizerCache<Real> tokenizer;
  std::int64_t n_temporal = 0;
  std::int64_t n_spectral = 0;
  std::vector<BlockCache<Real>> blocks;
  Matrix<Real> final_hat;
  ColVector<Real> final_inv_std;
  Matrix<Real> final_out;
  RowVector<Real> pooled;
  Real logit{};
};

/// Tokenizes with the configured family.
template <typename Real>
TokenSequence<Real> embed_tokens(const Matrix<Real>& spec, const ModelParams<Real>& params, const Architecture& arch,
                                 TokenizerCache<Real>* cache = nullptr);

/// Encoder blocks, final norm, mean pooling over all tokens, linear head.
/// `dropout_rng` enables dropout on the residual branches when encoder.dropout > 0.
template <typename Real>
Real encode(const Matrix<Real>& tokens, const ModelParams<Real>& params, const Architecture& arch,
            ForwardCache<Real>* cache = nullptr, Rng* dropout_rng = nullptr);

/// Single logit; sigmoid(logit) is the probability of the fake class.
template <typename Real>
Real forward(const Matrix<Real>& spec, const ModelParams<Real>& params, const Architecture& arch,
             ForwardCache<Real>* cache = nullptr, Rng* dropout_rng = nullptr);

template <typename Real>
Real forward(const MelSpectrogram& spec, const ModelParams<Real>& params, const Architecture& arch);

/// Backpropagates dL/dlogit through a cached forward pass, adding
/// `weight * dL/dtheta` into `grads`.
template <typename Real>
void backward_from_logit(const ForwardCache<Real>& cache, Real dlogit, const ModelParams<Real>& params,
                         const Architecture& arch, ModelParams<Real>& grads, Real weight = Real(1));

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace spectttra
