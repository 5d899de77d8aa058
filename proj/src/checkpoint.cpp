#include "spectttra/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spectttra {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'T', 'T', 'R', 'C', 'K', 'P', 'T'};

json to_json(const SpectrogramConfig& c) {
  json j{{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},       {"win_length", c.win_length},
         {"hop_length", c.hop_length},   {"n_mels", c.n_mels},     {"target_frames", c.target_frames},
         {"fmin", c.fmin}};
  j["fmax"] = c.fmax ? json(*c.fmax) : json(nullptr);
  return j;
}

SpectrogramConfig spectrogram_from_json(const json& j) {
  SpectrogramConfig c;
  c.sample_rate = j.at("sample_rate");
  c.n_fft = j.at("n_fft");
  c.win_length = j.at("win_length");
  c.hop_length = j.at("hop_length");
  c.n_mels = j.at("n_mels");
  c.target_frames = j.at("target_frames");
  c.fmin = j.at("fmin");
  if (!j.at("fmax").is_null()) c.fmax = j.at("fmax").get<double>();
  return c;
}

json to_json(const Architecture& a) {
  const auto& clip = a.tokenizer.clip;
  const auto& e = a.encoder;
  return json{{"n_mels", a.n_mels},
              {"frames", a.frames},
              {"tokenizer",
               {{"family", std::string(to_string(a.tokenizer.family))},
                {"t", clip.t},
                {"f", clip.f},
                {"variant", std::string(to_string(clip.variant))},
                {"temporal_enabled", clip.temporal_enabled},
                {"spectral_enabled", clip.spectral_enabled},
                {"patch", a.tokenizer.patch.p}}},
              {"encoder",
               {{"embed_dim", e.embed_dim},
                {"n_heads", e.n_heads},
                {"n_layers", e.n_layers},
                {"mlp_ratio", e.mlp_ratio},
                {"dropout", e.dropout}}}};
}

Architecture architecture_from_json(const json& j) {
  Architecture a;
  a.n_mels = j.at("n_mels");
  a.frames = j.at("frames");
  const auto& t = j.at("tokenizer");
  a.tokenizer.family = parse_family(t.at("family").get<std::string>());
  a.tokenizer.clip.t = t.at("t");
  a.tokenizer.clip.f = t.at("f");
  a.tokenizer.clip.variant = parse_variant(t.at("variant").get<std::string>());
  a.tokenizer.clip.temporal_enabled = t.at("temporal_enabled");
  a.tokenizer.clip.spectral_enabled = t.at("spectral_enabled");
  a.tokenizer.patch.p = t.at("patch");
  const auto& e = j.at("encoder");
  a.encoder.embed_dim = e.at("embed_dim");
  a.encoder.n_heads = e.at("n_heads");
  a.encoder.n_layers = e.at("n_layers");
  a.encoder.mlp_ratio = e.at("mlp_ratio");
  a.encoder.dropout = e.at("dropout");
  return a;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return v;
  }
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("truncated checkpoint: " + path_);
  }
  std::string string(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelBundle<Real>& bundle) {
  json meta{{"spectrogram", to_json(bundle.spectrogram)}, {"architecture", to_json(bundle.arch)}, {"info", bundle.info}};
  const std::string meta_str = meta.dump();
  const auto tensors = bundle.params.tensors();
  constexpr DType dtype = sizeof(Real) == 4 ? DType::f32 : DType::f64;

  // Write to a sibling file first so an interrupted save never clobbers a good checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
      for (auto d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
      out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size_bytes()));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename Real>
ModelBundle<Real> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  Reader r(in, path.string());

  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a checkpoint file: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const json meta = json::parse(r.string(r.get<std::uint32_t>()));

  ModelBundle<Real> bundle;
  bundle.spectrogram = spectrogram_from_json(meta.at("spectrogram"));
  bundle.arch = architecture_from_json(meta.at("architecture"));
  if (meta.contains("info")) bundle.info = meta.at("info").get<std::map<std::string, std::string>>();

  Rng rng(0);
  bundle.params = init_params<Real>(bundle.arch, rng);
  auto tensors = bundle.params.tensors();

  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(count) + " tensors, architecture expects " +
                             std::to_string(tensors.size()));
  }
  for (auto& t : tensors) {
    const std::string name = r.string(r.get<std::uint32_t>());
    if (name != t.name) throw std::runtime_error("checkpoint tensor '" + name + "' where '" + t.name + "' expected");
    const auto dtype = static_cast<DType>(r.get<std::uint8_t>());
    const auto ndim = r.get<std::uint8_t>();
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::int64_t>(r.get<std::uint64_t>());
    if (shape != t.shape) throw std::runtime_error("checkpoint tensor '" + name + "' has unexpected shape");
    if (dtype == DType::f32) {
      std::vector<float> buf(t.data.size());
      r.read(buf.data(), buf.size() * sizeof(float));
      std::copy(buf.begin(), buf.end(), t.data.begin());
    } else if (dtype == DType::f64) {
      std::vector<double> buf(t.data.size());
      r.read(buf.data(), buf.size() * sizeof(double));
      std::transform(buf.begin(), buf.end(), t.data.begin(), [](double v) { return static_cast<Real>(v); });
    } else {
      throw std::runtime_error("checkpoint tensor '" + name + "' has unknown dtype");
    }
  }
  return bundle;
}

template void save_checkpoint(const std::filesystem::path&, const ModelBundle<float>&);
template void save_checkpoint(const std::filesystem::path&, const ModelBundle<double>&);
template ModelBundle<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelBundle<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace spectttra
