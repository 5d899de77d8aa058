#include "spectttra/tokenizer.hpp"

#include <stdexcept>
#include <string>

#include "nn_ops.hpp"

namespace spectttra {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::alpha: return "alpha";
    case Variant::beta: return "beta";
    case Variant::gamma: return "gamma";
    case Variant::custom: return "custom";
  }
  return "custom";
}

Variant parse_variant(std::string_view name) {
  if (name == "alpha") return Variant::alpha;
  if (name == "beta") return Variant::beta;
  if (name == "gamma") return Variant::gamma;
  if (name == "custom") return Variant::custom;
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

std::string_view to_string(TokenizerFamily family) {
  return family == TokenizerFamily::vit ? "vit" : "spectttra";
}

TokenizerFamily parse_family(std::string_view name) {
  if (name == "spectttra") return TokenizerFamily::spectttra;
  if (name == "vit") return TokenizerFamily::vit;
  throw std::invalid_argument("unknown tokenizer family: " + std::string(name));
}

ClipConfig ClipConfig::from_variant(Variant v) {
  ClipConfig c;
  c.variant = v;
  switch (v) {
    case Variant::alpha: c.f = 1; c.t = 3; break;
    case Variant::beta: c.f = 3; c.t = 5; break;
    case Variant::gamma: c.f = 5; c.t = 7; break;
    case Variant::custom: break;
  }
  return c;
}

void ClipConfig::validate() const {
  if (!temporal_enabled && !spectral_enabled) {
    throw std::invalid_argument("clip config: at least one of temporal/spectral must be enabled");
  }
  if (temporal_enabled && t < 1) throw std::invalid_argument("clip config: t must be >= 1");
  if (spectral_enabled && f < 1) throw std::invalid_argument("clip config: f must be >= 1");
}

void PatchConfig::validate() const {
  if (p < 1) throw std::invalid_argument("patch size must be >= 1");
}

std::int64_t vit_token_count(std::int64_t bins, std::int64_t frames, int patch) {
  if (patch <= 0) throw std::invalid_argument("vit_token_count: patch size must be positive");
  return (bins / patch) * (frames / patch);
}

TokenCounts spectttra_token_count(std::int64_t bins, std::int64_t frames, const ClipConfig& clip) {
  clip.validate();
  TokenCounts c;
  // Conv with kernel == stride: floor((L - k) / s) + 1 == floor(L / k) for L >= k.
  if (clip.temporal_enabled) c.temporal = frames / clip.t;
  if (clip.spectral_enabled) c.spectral = bins / clip.f;
  return c;
}

std::int64_t token_count(std::int64_t bins, std::int64_t frames, const TokenizerConfig& config) {
  if (config.family == TokenizerFamily::vit) return vit_token_count(bins, frames, config.patch.p);
  return spectttra_token_count(bins, frames, config.clip).total();
}

template <typename Real>
Matrix<Real> temporal_clips(const Matrix<Real>& spec, int t) {
  const auto bins = spec.rows();
  const auto n = spec.cols() / t;
  Matrix<Real> clips(n, bins * t);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < bins; ++c) {
      clips.row(i).segment(c * t, t) = spec.row(c).segment(i * t, t);
    }
  }
  return clips;
}

template <typename Real>
Matrix<Real> spectral_clips(const Matrix<Real>& spec, int f) {
  const auto frames = spec.cols();
  const auto n = spec.rows() / f;
  Matrix<Real> clips(n, frames * f);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < f; ++k) {
      const auto src = spec.row(j * f + k);
      for (Eigen::Index tau = 0; tau < frames; ++tau) clips(j, tau * f + k) = src(tau);
    }
  }
  return clips;
}

template <typename Real>
Matrix<Real> extract_patches(const Matrix<Real>& spec, int patch) {
  if (patch <= 0) throw std::invalid_argument("extract_patches: patch size must be positive");
  const auto rows = spec.rows() / patch;
  const auto cols = spec.cols() / patch;
  Matrix<Real> out(rows * cols, static_cast<Eigen::Index>(patch) * patch);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto k = r * cols + c;
      for (Eigen::Index i = 0; i < patch; ++i) {
        out.row(k).segment(i * patch, patch) = spec.row(r * patch + i).segment(c * patch, patch);
      }
    }
  }
  return out;
}

namespace {

template <typename Real>
Matrix<Real> embed_branch(const Matrix<Real>& clips, const ClipEmbedding<Real>& p, ClipBranchCache<Real>* cache) {
  Matrix<Real> conv = clips * p.weight.transpose();
  Matrix<Real> x = detail::gelu(conv) + p.pos;
  Matrix<Real> hat;
  ColVector<Real> inv_std;
  Matrix<Real> out = detail::layer_norm(x, p.norm_scale, p.norm_bias, static_cast<Real>(kLayerNormEps), &hat, &inv_std);
  if (cache != nullptr) {
    cache->clips = clips;
    cache->conv_out = std::move(conv);
    cache->normalized = std::move(hat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename Real>
void check_branch(const ClipEmbedding<Real>& p, Eigen::Index channels, Eigen::Index n_clips, const char* name) {
  if (p.channels != channels || p.weight.cols() != static_cast<Eigen::Index>(p.channels) * p.clip ||
      p.pos.rows() != n_clips || p.pos.cols() != p.weight.rows()) {
    throw std::invalid_argument(std::string("tokenize: ") + name +
                                " tokenizer parameters do not match spectrogram shape");
  }
}

}  // namespace

template <typename Real>
TokenSequence<Real> tokenize(const Matrix<Real>& spec, const TokenizerParams<Real>& params, const ClipConfig& clip,
                             TokenizerCache<Real>* cache) {
  clip.validate();
  const auto counts = spectttra_token_count(spec.rows(), spec.cols(), clip);
  if (clip.temporal_enabled != params.temporal.has_value() || clip.spectral_enabled != params.spectral.has_value()) {
    throw std::invalid_argument("tokenize: enabled branches do not match parameters");
  }

  Matrix<Real> temporal, spectral;
  if (params.temporal) {
    check_branch(*params.temporal, spec.rows(), counts.temporal, "temporal");
    if (params.temporal->clip != clip.t) throw std::invalid_argument("tokenize: temporal clip size mismatch");
    ClipBranchCache<Real>* c = nullptr;
    if (cache != nullptr) c = &cache->temporal.emplace();
    temporal = embed_branch(temporal_clips(spec, clip.t), *params.temporal, c);
  }
  if (params.spectral) {
    check_branch(*params.spectral, spec.cols(), counts.spectral, "spectral");
    if (params.spectral->clip != clip.f) throw std::invalid_argument("tokenize: spectral clip size mismatch");
    ClipBranchCache<Real>* c = nullptr;
    if (cache != nullptr) c = &cache->spectral.emplace();
    spectral = embed_branch(spectral_clips(spec, clip.f), *params.spectral, c);
  }

  const Eigen::Index dim = params.temporal ? params.temporal->dim() : params.spectral->dim();
  TokenSequence<Real> out;
  out.n_temporal = counts.temporal;
  out.n_spectral = counts.spectral;
  out.tokens.resize(counts.total(), dim);
  if (counts.temporal > 0) out.tokens.topRows(counts.temporal) = temporal;
  if (counts.spectral > 0) out.tokens.bottomRows(counts.spectral) = spectral;
  return out;
}

template <typename Real>
TokenSequence<Real> vit_patchify(const Matrix<Real>& spec, const PatchEmbedding<Real>& params, Matrix<Real>* patches_out) {
  if (params.patch <= 0) throw std::invalid_argument("vit_patchify: patch size must be positive");
  Matrix<Real> patches = extract_patches(spec, params.patch);
  if (params.weight.cols() != patches.cols() || params.pos.rows() != patches.rows()) {
    throw std::invalid_argument("vit_patchify: parameters do not match spectrogram shape");
  }
  TokenSequence<Real> out;
  out.tokens = (patches * params.weight.transpose()).rowwise() + params.bias;
  out.tokens += params.pos;
  out.n_temporal = patches.rows();
  if (patches_out != nullptr) *patches_out = std::move(patches);
  return out;
}

#define SPECTTTRA_INSTANTIATE(Real)                                                                          \
  template Matrix<Real> temporal_clips(const Matrix<Real>&, int);                                            \
  template Matrix<Real> spectral_clips(const Matrix<Real>&, int);                                            \
  template Matrix<Real> extract_patches(const Matrix<Real>&, int);                                           \
  template TokenSequence<Real> tokenize(const Matrix<Real>&, const TokenizerParams<Real>&, const ClipConfig&, \
                                        TokenizerCache<Real>*);                                              \
  template TokenSequence<Real> vit_patchify(const Matrix<Real>&, const PatchEmbedding<Real>&, Matrix<Real>*);

SPECTTTRA_INSTANTIATE(float)
SPECTTTRA_INSTANTIATE(double)
#undef SPECTTTRA_INSTANTIATE

}  // namespace spectttra
