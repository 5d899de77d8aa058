#include "spectttra/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nn_ops.hpp"

namespace spectttra {

int EncoderConfig::mlp_hidden() const {
  return static_cast<int>(std::lround(embed_dim * mlp_ratio));
}

void EncoderConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  if (n_heads < 1) throw std::invalid_argument("n_heads must be >= 1");
  if (embed_dim % n_heads != 0) throw std::invalid_argument("embed_dim must be divisible by n_heads");
  if (n_layers < 0) throw std::invalid_argument("n_layers must be >= 0");
  if (!(mlp_ratio > 0.0) || mlp_hidden() < 1) throw std::invalid_argument("mlp_ratio must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

std::int64_t Architecture::n_tokens() const {
  return token_count(n_mels, frames, tokenizer);
}

void Architecture::validate() const {
  if (n_mels < 1 || frames < 1) throw std::invalid_argument("architecture: spectrogram shape must be positive");
  encoder.validate();
  if (tokenizer.family == TokenizerFamily::vit) {
    tokenizer.patch.validate();
  } else {
    const auto c = spectttra_token_count(n_mels, frames, tokenizer.clip);
    if (tokenizer.clip.temporal_enabled && c.temporal < 1) {
      throw std::invalid_argument("architecture: temporal clip larger than frame count");
    }
    if (tokenizer.clip.spectral_enabled && c.spectral < 1) {
      throw std::invalid_argument("architecture: spectral clip larger than mel bin count");
    }
  }
  if (n_tokens() < 1) throw std::invalid_argument("architecture: tokenizer produces no tokens");
}

namespace {

template <typename Self, typename Fn>
void visit_tensors(Self& p, Fn&& fn) {
  using R = TensorRole;
  auto branch = [&](auto& b, const std::string& prefix) {
    fn(prefix + ".weight", std::vector<std::int64_t>{b.weight.rows(), b.channels, b.clip}, b.weight, R::weight);
    fn(prefix + ".pos", std::vector<std::int64_t>{b.pos.rows(), b.pos.cols()}, b.pos, R::position);
    fn(prefix + ".norm.scale", std::vector<std::int64_t>{b.norm_scale.size()}, b.norm_scale, R::norm);
    fn(prefix + ".norm.bias", std::vector<std::int64_t>{b.norm_bias.size()}, b.norm_bias, R::norm);
  };
  if (p.family == TokenizerFamily::spectttra) {
    if (p.tokenizer.temporal) branch(*p.tokenizer.temporal, "tokenizer.temporal");
    if (p.tokenizer.spectral) branch(*p.tokenizer.spectral, "tokenizer.spectral");
  } else {
    auto& e = p.patch;
    fn("patch.weight", std::vector<std::int64_t>{e.weight.rows(), e.patch, e.patch}, e.weight, R::weight);
    fn("patch.bias", std::vector<std::int64_t>{e.bias.size()}, e.bias, R::bias);
    fn("patch.pos", std::vector<std::int64_t>{e.pos.rows(), e.pos.cols()}, e.pos, R::position);
  }
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "blocks." + std::to_string(i) + ".";
    auto mat = [](const auto& m) { return std::vector<std::int64_t>{m.rows(), m.cols()}; };
    auto vec = [](const auto& v) { return std::vector<std::int64_t>{v.size()}; };
    fn(pre + "norm1.scale", vec(b.norm1_scale), b.norm1_scale, R::norm);
    fn(pre + "norm1.bias", vec(b.norm1_bias), b.norm1_bias, R::norm);
    fn(pre + "attn.qkv.weight", mat(b.qkv_weight), b.qkv_weight, R::weight);
    fn(pre + "attn.qkv.bias", vec(b.qkv_bias), b.qkv_bias, R::bias);
    fn(pre + "attn.proj.weight", mat(b.proj_weight), b.proj_weight, R::weight);
    fn(pre + "attn.proj.bias", vec(b.proj_bias), b.proj_bias, R::bias);
    fn(pre + "norm2.scale", vec(b.norm2_scale), b.norm2_scale, R::norm);
    fn(pre + "norm2.bias", vec(b.norm2_bias), b.norm2_bias, R::norm);
    fn(pre + "mlp.fc1.weight", mat(b.fc1_weight), b.fc1_weight, R::weight);
    fn(pre + "mlp.fc1.bias", vec(b.fc1_bias), b.fc1_bias, R::bias);
    fn(pre + "mlp.fc2.weight", mat(b.fc2_weight), b.fc2_weight, R::weight);
    fn(pre + "mlp.fc2.bias", vec(b.fc2_bias), b.fc2_bias, R::bias);
  }
  fn("norm.scale", std::vector<std::int64_t>{p.final_norm_scale.size()}, p.final_norm_scale, R::norm);
  fn("norm.bias", std::vector<std::int64_t>{p.final_norm_bias.size()}, p.final_norm_bias, R::norm);
  fn("head.weight", std::vector<std::int64_t>{1, p.head_weight.size()}, p.head_weight, R::weight);
  fn("head.bias", std::vector<std::int64_t>{1}, p.head_bias, R::bias);
}

template <typename Real>
void fill_trunc_normal(Matrix<Real>& m, double std, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v;
    do {
      v = dist(rng);
    } while (std::abs(v) > 2.0 * std);
    m.data()[i] = static_cast<Real>(v);
  }
}

template <typename Real>
void fill_normal(Matrix<Real>& m, double std, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Real>(dist(rng));
}

constexpr double kInitStd = 0.02;

template <typename Real>
ClipEmbedding<Real> init_branch(int dim, int channels, int clip, std::int64_t n_clips, Rng& rng) {
  ClipEmbedding<Real> b;
  b.channels = channels;
  b.clip = clip;
  b.weight.resize(dim, static_cast<Eigen::Index>(channels) * clip);
  fill_trunc_normal(b.weight, kInitStd, rng);
  b.pos.resize(n_clips, dim);
  fill_normal(b.pos, kInitStd, rng);
  b.norm_scale = RowVector<Real>::Ones(dim);
  b.norm_bias = RowVector<Real>::Zero(dim);
  return b;
}

template <typename Real>
Matrix<Real> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const Real scale = static_cast<Real>(1.0 / (1.0 - p));
  Matrix<Real> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : Real(0);
  return m;
}

template <typename Real>
void check_finite(const Matrix<Real>& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError(where);
}

}  // namespace

template <typename Real>
std::vector<TensorView<Real>> ModelParams<Real>::tensors() {
  std::vector<TensorView<Real>> out;
  visit_tensors(*this, [&](std::string name, std::vector<std::int64_t> shape, auto& t, TensorRole role) {
    out.push_back({std::move(name), std::move(shape), std::span<Real>(t.data(), static_cast<std::size_t>(t.size())), role});
  });
  return out;
}

template <typename Real>
std::vector<TensorView<const Real>> ModelParams<Real>::tensors() const {
  std::vector<TensorView<const Real>> out;
  visit_tensors(*this, [&](std::string name, std::vector<std::int64_t> shape, const auto& t, TensorRole role) {
    out.push_back(
        {std::move(name), std::move(shape), std::span<const Real>(t.data(), static_cast<std::size_t>(t.size())), role});
  });
  return out;
}

template <typename Real>
ModelParams<Real> init_params(const Architecture& arch, Rng& rng) {
  arch.validate();
  const int dim = arch.encoder.embed_dim;
  const int hidden = arch.encoder.mlp_hidden();
  ModelParams<Real> p;
  p.family = arch.tokenizer.family;
  if (p.family == TokenizerFamily::spectttra) {
    const auto& clip = arch.tokenizer.clip;
    const auto counts = spectttra_token_count(arch.n_mels, arch.frames, clip);
    if (clip.temporal_enabled) {
      p.tokenizer.temporal = init_branch<Real>(dim, arch.n_mels, clip.t, counts.temporal, rng);
    }
    if (clip.spectral_enabled) {
      p.tokenizer.spectral = init_branch<Real>(dim, arch.frames, clip.f, counts.spectral, rng);
    }
  } else {
    const int patch = arch.tokenizer.patch.p;
    p.patch.patch = patch;
    p.patch.weight.resize(dim, static_cast<Eigen::Index>(patch) * patch);
    fill_trunc_normal(p.patch.weight, kInitStd, rng);
    p.patch.bias = RowVector<Real>::Zero(dim);
    p.patch.pos.resize(arch.n_tokens(), dim);
    fill_normal(p.patch.pos, kInitStd, rng);
  }

  p.blocks.resize(static_cast<std::size_t>(arch.encoder.n_layers));
  for (auto& b : p.blocks) {
    b.norm1_scale = RowVector<Real>::Ones(dim);
    b.norm1_bias = RowVector<Real>::Zero(dim);
    b.qkv_weight.resize(3 * dim, dim);
    fill_trunc_normal(b.qkv_weight, kInitStd, rng);
    b.qkv_bias = RowVector<Real>::Zero(3 * dim);
    b.proj_weight.resize(dim, dim);
    fill_trunc_normal(b.proj_weight, kInitStd, rng);
    b.proj_bias = RowVector<Real>::Zero(dim);
    b.norm2_scale = RowVector<Real>::Ones(dim);
    b.norm2_bias = RowVector<Real>::Zero(dim);
    b.fc1_weight.resize(hidden, dim);
    fill_trunc_normal(b.fc1_weight, kInitStd, rng);
    b.fc1_bias = RowVector<Real>::Zero(hidden);
    b.fc2_weight.resize(dim, hidden);
    fill_trunc_normal(b.fc2_weight, kInitStd, rng);
    b.fc2_bias = RowVector<Real>::Zero(dim);
  }
  p.final_norm_scale = RowVector<Real>::Ones(dim);
  p.final_norm_bias = RowVector<Real>::Zero(dim);
  Matrix<Real> head(1, dim);
  fill_trunc_normal(head, kInitStd, rng);
  p.head_weight = head;
  p.head_bias = RowVector<Real>::Zero(1);
  return p;
}

template <typename Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& params) {
  ModelParams<Real> z = params;
  for (auto& t : z.tensors()) std::fill(t.data.begin(), t.data.end(), Real(0));
  return z;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out;
  out.family = params.family;
  auto branch = [](const ClipEmbedding<From>& b) {
    ClipEmbedding<To> c;
    c.weight = b.weight.template cast<To>();
    c.pos = b.pos.template cast<To>();
    c.norm_scale = b.norm_scale.template cast<To>();
    c.norm_bias = b.norm_bias.template cast<To>();
    c.channels = b.channels;
    c.clip = b.clip;
    return c;
  };
  if (params.tokenizer.temporal) out.tokenizer.temporal = branch(*params.tokenizer.temporal);
  if (params.tokenizer.spectral) out.tokenizer.spectral = branch(*params.tokenizer.spectral);
  out.patch.weight = params.patch.weight.template cast<To>();
  out.patch.bias = params.patch.bias.template cast<To>();
  out.patch.pos = params.patch.pos.template cast<To>();
  out.patch.patch = params.patch.patch;
  for (const auto& b : params.blocks) {
    BlockParams<To> c;
    c.norm1_scale = b.norm1_scale.template cast<To>();
    c.norm1_bias = b.norm1_bias.template cast<To>();
    c.qkv_weight = b.qkv_weight.template cast<To>();
    c.qkv_bias = b.qkv_bias.template cast<To>();
    c.proj_weight = b.proj_weight.template cast<To>();
    c.proj_bias = b.proj_bias.template cast<To>();
    c.norm2_scale = b.norm2_scale.template cast<To>();
    c.norm2_bias = b.norm2_bias.template cast<To>();
    c.fc1_weight = b.fc1_weight.template cast<To>();
    c.fc1_bias = b.fc1_bias.template cast<To>();
    c.fc2_weight = b.fc2_weight.template cast<To>();
    c.fc2_bias = b.fc2_bias.template cast<To>();
    out.blocks.push_back(std::move(c));
  }
  out.final_norm_scale = params.final_norm_scale.template cast<To>();
  out.final_norm_bias = params.final_norm_bias.template cast<To>();
  out.head_weight = params.head_weight.template cast<To>();
  out.head_bias = params.head_bias.template cast<To>();
  return out;
}

template <typename Real>
std::int64_t count_params(const ModelParams<Real>& params) {
  std::int64_t n = 0;
  for (const auto& t : params.tensors()) n += static_cast<std::int64_t>(t.data.size());
  return n;
}

std::int64_t count_params(const Architecture& arch) {
  arch.validate();
  const std::int64_t d = arch.encoder.embed_dim;
  const std::int64_t h = arch.encoder.mlp_hidden();
  std::int64_t n = 0;
  if (arch.tokenizer.family == TokenizerFamily::spectttra) {
    const auto& clip = arch.tokenizer.clip;
    const auto counts = spectttra_token_count(arch.n_mels, arch.frames, clip);
    if (clip.temporal_enabled) n += d * arch.n_mels * clip.t + counts.temporal * d + 2 * d;
    if (clip.spectral_enabled) n += d * arch.frames * clip.f + counts.spectral * d + 2 * d;
  } else {
    const std::int64_t p = arch.tokenizer.patch.p;
    n += d * p * p + d + arch.n_tokens() * d;
  }
  n += arch.encoder.n_layers * (4 * d * d + 2 * d * h + 9 * d + h);
  n += 2 * d;      // final norm
  n += d + 1;      // head
  return n;
}

template <typename Real>
TokenSequence<Real> embed_tokens(const Matrix<Real>& spec, const ModelParams<Real>& params, const Architecture& arch,
                                 TokenizerCache<Real>* cache) {
  if (spec.rows() != arch.n_mels || spec.cols() != arch.frames) {
    throw std::invalid_argument("spectrogram shape " + std::to_string(spec.rows()) + "x" + std::to_string(spec.cols()) +
                                " does not match model " + std::to_string(arch.n_mels) + "x" +
                                std::to_string(arch.frames));
  }
  if (params.family != arch.tokenizer.family) throw std::invalid_argument("parameters belong to another tokenizer family");
  if (arch.tokenizer.family == TokenizerFamily::vit) {
    return vit_patchify(spec, params.patch, cache != nullptr ? &cache->patches : nullptr);
  }
  return tokenize(spec, params.tokenizer, arch.tokenizer.clip, cache);
}

template <typename Real>
Real encode(const Matrix<Real>& tokens, const ModelParams<Real>& params, const Architecture& arch,
            ForwardCache<Real>* cache, Rng* dropout_rng) {
  const auto& enc = arch.encoder;
  const Eigen::Index n = tokens.rows();
  const int dim = enc.embed_dim;
  const int head_dim = enc.head_dim();
  const Real eps = static_cast<Real>(kLayerNormEps);
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim));
  const bool use_dropout = dropout_rng != nullptr && enc.dropout > 0.0;
  if (tokens.cols() != dim) throw std::invalid_argument("token width does not match embed_dim");
  if (n == 0) throw std::invalid_argument("encode: empty token sequence");
  if (params.blocks.size() != static_cast<std::size_t>(enc.n_layers)) {
    throw std::invalid_argument("encode: parameter block count does not match n_layers");
  }
  check_finite(tokens, "tokenizer output");

  if (cache != nullptr) cache->blocks.assign(params.blocks.size(), BlockCache<Real>{});

  Matrix<Real> h = tokens;
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const auto& bp = params.blocks[l];
    BlockCache<Real>* bc = cache != nullptr ? &cache->blocks[l] : nullptr;

    Matrix<Real> u = detail::layer_norm(h, bp.norm1_scale, bp.norm1_bias, eps, bc ? &bc->norm1_hat : nullptr,
                                        bc ? &bc->norm1_inv_std : nullptr);
    Matrix<Real> qkv = (u * bp.qkv_weight.transpose()).rowwise() + bp.qkv_bias;
    Matrix<Real> attn_out(n, dim);
    for (int hd = 0; hd < enc.n_heads; ++hd) {
      const auto q = qkv.middleCols(hd * head_dim, head_dim);
      const auto k = qkv.middleCols(dim + hd * head_dim, head_dim);
      const auto v = qkv.middleCols(2 * dim + hd * head_dim, head_dim);
      Matrix<Real> s(n, n);
      s.noalias() = q * k.transpose();
      s *= scale;
      detail::softmax_rows(s);
      attn_out.middleCols(hd * head_dim, head_dim).noalias() = s * v;
      if (bc) bc->attention.push_back(std::move(s));
    }
    Matrix<Real> y = (attn_out * bp.proj_weight.transpose()).rowwise() + bp.proj_bias;
    if (use_dropout) {
      Matrix<Real> mask = dropout_mask<Real>(n, dim, enc.dropout, *dropout_rng);
      y = y.cwiseProduct(mask);
      if (bc) bc->proj_mask = std::move(mask);
    }
    Matrix<Real> h1 = h + y;

    Matrix<Real> u2 = detail::layer_norm(h1, bp.norm2_scale, bp.norm2_bias, eps, bc ? &bc->norm2_hat : nullptr,
                                         bc ? &bc->norm2_inv_std : nullptr);
    Matrix<Real> m = (u2 * bp.fc1_weight.transpose()).rowwise() + bp.fc1_bias;
    Matrix<Real> g = detail::gelu(m);
    Matrix<Real> y2 = (g * bp.fc2_weight.transpose()).rowwise() + bp.fc2_bias;
    if (use_dropout) {
      Matrix<Real> mask = dropout_mask<Real>(n, dim, enc.dropout, *dropout_rng);
      y2 = y2.cwiseProduct(mask);
      if (bc) bc->fc2_mask = std::move(mask);
    }
    Matrix<Real> h2 = h1 + y2;
    check_finite(h2, "encoder layer " + std::to_string(l));

    if (bc) {
      bc->input = std::move(h);
      bc->norm1_out = std::move(u);
      bc->qkv = std::move(qkv);
      bc->attn_out = std::move(attn_out);
      bc->residual = std::move(h1);
      bc->norm2_out = std::move(u2);
      bc->fc1_out = std::move(m);
      bc->hidden = std::move(g);
    }
    h = std::move(h2);
  }

  Matrix<Real> hat;
  ColVector<Real> inv_std;
  Matrix<Real> out = detail::layer_norm(h, params.final_norm_scale, params.final_norm_bias, eps, &hat, &inv_std);
  RowVector<Real> pooled = out.colwise().mean();
  const Real logit = pooled.dot(params.head_weight) + params.head_bias(0);
  if (!std::isfinite(logit)) throw NonFiniteError("classifier head");
  if (cache != nullptr) {
    cache->final_hat = std::move(hat);
    cache->final_inv_std = std::move(inv_std);
    cache->final_out = std::move(out);
    cache->pooled = std::move(pooled);
    cache->logit = logit;
  }
  return logit;
}

template <typename Real>
Real forward(const Matrix<Real>& spec, const ModelParams<Real>& params, const Architecture& arch,
             ForwardCache<Real>* cache, Rng* dropout_rng) {
  TokenSequence<Real> tokens = embed_tokens(spec, params, arch, cache != nullptr ? &cache->tokenizer : nullptr);
  if (cache != nullptr) {
    cache->n_temporal = tokens.n_temporal;
    cache->n_spectral = tokens.n_spectral;
  }
  return encode(tokens.tokens, params, arch, cache, dropout_rng);
}

template <typename Real>
Real forward(const MelSpectrogram& spec, const ModelParams<Real>& params, const Architecture& arch) {
  const Matrix<Real> values = spec.values.template cast<Real>();
  return forward(values, params, arch);
}

namespace {

template <typename Real>
void branch_backward(const Matrix<Real>& dtokens, const ClipBranchCache<Real>& c, const ClipEmbedding<Real>& p,
                     ClipEmbedding<Real>& g) {
  Matrix<Real> dx = detail::layer_norm_backward(dtokens, c.normalized, c.inv_std, p.norm_scale, g.norm_scale, g.norm_bias);
  g.pos += dx;
  const Matrix<Real> dconv = detail::gelu_backward(dx, c.conv_out);
  g.weight.noalias() += dconv.transpose() * c.clips;
}

}  // namespace

template <typename Real>
void backward_from_logit(const ForwardCache<Real>& cache, Real dlogit, const ModelParams<Real>& params,
                         const Architecture& arch, ModelParams<Real>& grads, Real weight) {
  const auto& enc = arch.encoder;
  const int dim = enc.embed_dim;
  const int head_dim = enc.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim));
  const Real g = dlogit * weight;
  const Eigen::Index n = cache.final_out.rows();

  grads.head_weight += g * cache.pooled;
  grads.head_bias(0) += g;
  const RowVector<Real> dpooled = (g / static_cast<Real>(n)) * params.head_weight;
  Matrix<Real> dout = dpooled.replicate(n, 1);
  Matrix<Real> dh = detail::layer_norm_backward(dout, cache.final_hat, cache.final_inv_std, params.final_norm_scale,
                                                grads.final_norm_scale, grads.final_norm_bias);

  for (std::size_t li = params.blocks.size(); li-- > 0;) {
    const auto& bp = params.blocks[li];
    const auto& bc = cache.blocks[li];
    auto& bg = grads.blocks[li];

    Matrix<Real> dy2 = dh;
    if (bc.fc2_mask.size() != 0) dy2 = dy2.cwiseProduct(bc.fc2_mask);
    bg.fc2_weight.noalias() += dy2.transpose() * bc.hidden;
    bg.fc2_bias += dy2.colwise().sum();
    const Matrix<Real> dm = detail::gelu_backward(Matrix<Real>(dy2 * bp.fc2_weight), bc.fc1_out);
    bg.fc1_weight.noalias() += dm.transpose() * bc.norm2_out;
    bg.fc1_bias += dm.colwise().sum();
    const Matrix<Real> du2 = dm * bp.fc1_weight;
    Matrix<Real> dh1 = dh + detail::layer_norm_backward(du2, bc.norm2_hat, bc.norm2_inv_std, bp.norm2_scale,
                                                        bg.norm2_scale, bg.norm2_bias);

    Matrix<Real> dy = dh1;
    if (bc.proj_mask.size() != 0) dy = dy.cwiseProduct(bc.proj_mask);
    bg.proj_weight.noalias() += dy.transpose() * bc.attn_out;
    bg.proj_bias += dy.colwise().sum();
    const Matrix<Real> dattn = dy * bp.proj_weight;

    Matrix<Real> dqkv(n, 3 * dim);
    for (int hd = 0; hd < enc.n_heads; ++hd) {
      const auto q = bc.qkv.middleCols(hd * head_dim, head_dim);
      const auto k = bc.qkv.middleCols(dim + hd * head_dim, head_dim);
      const auto v = bc.qkv.middleCols(2 * dim + hd * head_dim, head_dim);
      const Matrix<Real>& a = bc.attention[static_cast<std::size_t>(hd)];
      const auto dout_h = dattn.middleCols(hd * head_dim, head_dim);
      const Matrix<Real> da = dout_h * v.transpose();
      dqkv.middleCols(2 * dim + hd * head_dim, head_dim).noalias() = a.transpose() * dout_h;
      const ColVector<Real> row_dot = da.cwiseProduct(a).rowwise().sum();
      Matrix<Real> ds = a.cwiseProduct((da.colwise() - row_dot));
      ds *= scale;
      dqkv.middleCols(hd * head_dim, head_dim).noalias() = ds * k;
      dqkv.middleCols(dim + hd * head_dim, head_dim).noalias() = ds.transpose() * q;
    }
    bg.qkv_weight.noalias() += dqkv.transpose() * bc.norm1_out;
    bg.qkv_bias += dqkv.colwise().sum();
    const Matrix<Real> du = dqkv * bp.qkv_weight;
    dh = dh1 + detail::layer_norm_backward(du, bc.norm1_hat, bc.norm1_inv_std, bp.norm1_scale, bg.norm1_scale,
                                           bg.norm1_bias);
  }

  if (params.family == TokenizerFamily::vit) {
    grads.patch.pos += dh;
    grads.patch.bias += dh.colwise().sum();
    grads.patch.weight.noalias() += dh.transpose() * cache.tokenizer.patches;
    return;
  }
  if (params.tokenizer.temporal) {
    branch_backward<Real>(dh.topRows(cache.n_temporal), *cache.tokenizer.temporal, *params.tokenizer.temporal,
                          *grads.tokenizer.temporal);
  }
  if (params.tokenizer.spectral) {
    branch_backward<Real>(dh.bottomRows(cache.n_spectral), *cache.tokenizer.spectral, *params.tokenizer.spectral,
                          *grads.tokenizer.spectral);
  }
}

#define SPECTTTRA_INSTANTIATE(Real)                                                                                  \
  template struct ModelParams<Real>;                                                                                 \
  template ModelParams<Real> init_params<Real>(const Architecture&, Rng&);                                           \
  template ModelParams<Real> zeros_like(const ModelParams<Real>&);                                                   \
  template std::int64_t count_params(const ModelParams<Real>&);                                                      \
  template TokenSequence<Real> embed_tokens(const Matrix<Real>&, const ModelParams<Real>&, const Architecture&,      \
                                            TokenizerCache<Real>*);                                                  \
  template Real encode(const Matrix<Real>&, const ModelParams<Real>&, const Architecture&, ForwardCache<Real>*,      \
                       Rng*);                                                                                        \
  template Real forward(const Matrix<Real>&, const ModelParams<Real>&, const Architecture&, ForwardCache<Real>*,     \
                        Rng*);                                                                                       \
  template Real forward(const MelSpectrogram&, const ModelParams<Real>&, const Architecture&);                       \
  template void backward_from_logit(const ForwardCache<Real>&, Real, const ModelParams<Real>&, const Architecture&,  \
                                    ModelParams<Real>&, Real);

SPECTTTRA_INSTANTIATE(float)
SPECTTTRA_INSTANTIATE(double)
#undef SPECTTTRA_INSTANTIATE

template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace spectttra
