#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "spectttra/tensor.hpp"

namespace spectttra {

enum class Variant { alpha, beta, gamma, custom };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Temporal (t frames) and spectral (f mel bins) clip sizes.
struct ClipConfig {
  int t = 7;
  int f = 5;
  Variant variant = Variant::gamma;
  bool temporal_enabled = true;
  bool spectral_enabled = true;

  /// alpha: f=1 t=3, beta: f=3 t=5, gamma: f=5 t=7.
  static ClipConfig from_variant(Variant v);
  void validate() const;
};

struct PatchConfig {
  int p = 16;
  void validate() const;
};

enum class TokenizerFamily { spectttra, vit };

std::string_view to_string(TokenizerFamily family);
TokenizerFamily parse_family(std::string_view name);

struct TokenizerConfig {
  TokenizerFamily family = TokenizerFamily::spectttra;
  ClipConfig clip;
  PatchConfig patch;
};

struct TokenCounts {
  std::int64_t temporal = 0;
  std::int64_t spectral = 0;
  std::int64_t total() const { return temporal + spectral; }
};

/// floor(F/p) * floor(T/p).
std::int64_t vit_token_count(std::int64_t bins, std::int64_t frames, int patch);

/// (floor(T/t), floor(F/f)), zeroed for a disabled branch.
TokenCounts spectttra_token_count(std::int64_t bins, std::int64_t frames, const ClipConfig& clip);

/// Token count for either family; the one place the profiler gets n from.
std::int64_t token_count(std::int64_t bins, std::int64_t frames, const TokenizerConfig& config);

/// One slicing branch: a bias-free strided 1-D convolution (stored as
/// D x (channels * clip)), GELU, learned positional embeddings, LayerNorm.
template <typename Real>
struct ClipEmbedding {
  Matrix<Real> weight;  // D x (channels * clip), channel-major like Conv1d (D, C, k)
  Matrix<Real> pos;     // n_clips x D
  RowVector<Real> norm_scale;
  RowVector<Real> norm_bias;
  int channels = 0;
  int clip = 0;

  int n_clips() const { return static_cast<int>(pos.rows()); }
  int dim() const { return static_cast<int>(weight.rows()); }
};

template <typename Real>
struct TokenizerParams {
  std::optional<ClipEmbedding<Real>> temporal;
  std::optional<ClipEmbedding<Real>> spectral;
};

/// ViT square-patch embedding: linear map of flattened p x p patches plus bias
/// and positional embeddings. Patches are ordered row-major over the
/// (frequency, time) grid with time varying fastest; cells within a patch are
/// flattened the same way.
template <typename Real>
struct PatchEmbedding {
  Matrix<Real> weight;  // D x p*p
  RowVector<Real> bias;
  Matrix<Real> pos;     // n_patches x D
  int patch = 0;
};

/// ViT patch tokens are all counted in n_temporal.
template <typename Real>
struct TokenSequence {
  Matrix<Real> tokens;  // n_tokens x D; temporal rows first, then spectral
  std::int64_t n_temporal = 0;
  std::int64_t n_spectral = 0;
  std::int64_t size() const { return tokens.rows(); }
};

/// Intermediates retained for the backward pass and for invariant checks.
template <typename Real>
struct ClipBranchCache {
  Matrix<Real> clips;       // n_clips x (channels * clip)
  Matrix<Real> conv_out;    // pre-GELU
  Matrix<Real> normalized;  // LayerNorm output before scale/shift
  ColVector<Real> inv_std;
};

template <typename Real>
struct TokenizerCache {
  std::optional<ClipBranchCache<Real>> temporal;
  std::optional<ClipBranchCache<Real>> spectral;
  Matrix<Real> patches;  // ViT only
};

inline constexpr double kLayerNormEps = 1e-6;

/// Spectro-temporal tokenization of an F x T spectrogram.
template <typename Real>
TokenSequence<Real> tokenize(const Matrix<Real>& spec, const TokenizerParams<Real>& params,
                             const ClipConfig& clip, TokenizerCache<Real>* cache = nullptr);

template <typename Real>
TokenSequence<Real> vit_patchify(const Matrix<Real>& spec, const PatchEmbedding<Real>& params,
                                 Matrix<Real>* patches_out = nullptr);

/// Extracts the flattened non-overlapping p x p patches, one per row.
template <typename Real>
Matrix<Real> extract_patches(const Matrix<Real>& spec, int patch);

/// Rows are the flattened temporal clips: row i holds spec(c, i*t + k) at c*t + k.
template <typename Real>
Matrix<Real> temporal_clips(const Matrix<Real>& spec, int t);

/// Rows are the flattened spectral clips of the transposed spectrogram:
/// row j holds spec(j*f + k, tau) at tau*f + k.
template <typename Real>
Matrix<Real> spectral_clips(const Matrix<Real>& spec, int f);

}  // namespace spectttra
