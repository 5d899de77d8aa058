#include <filesystem>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spectttra/audio.hpp"
#include "spectttra/checkpoint.hpp"
#include "spectttra/dataio.hpp"
#include "spectttra/evaluation.hpp"
#include "spectttra/frontend.hpp"
#include "spectttra/model.hpp"
#include "spectttra/profiler.hpp"
#include "spectttra/tokenizer.hpp"

namespace py = pybind11;
using namespace spectttra;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioBuffer to_audio(const Samples& samples, int sample_rate) {
  if (samples.ndim() != 1) throw std::invalid_argument("samples must be one-dimensional");
  AudioBuffer audio;
  audio.samples.assign(samples.data(), samples.data() + samples.size());
  audio.sample_rate = sample_rate;
  audio.validate();
  return audio;
}

Architecture make_arch(const std::string& family, const std::string& variant, int patch, int n_mels, int frames,
                       int embed_dim, int n_heads, int n_layers) {
  Architecture arch;
  arch.n_mels = n_mels;
  arch.frames = frames;
  arch.tokenizer.family = parse_family(family);
  arch.tokenizer.clip = ClipConfig::from_variant(parse_variant(variant));
  arch.tokenizer.patch.p = patch;
  arch.encoder.embed_dim = embed_dim;
  arch.encoder.n_heads = n_heads;
  arch.encoder.n_layers = n_layers;
  arch.validate();
  return arch;
}

std::vector<int> to_labels(const std::vector<int>& labels) {
  for (int l : labels)
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 (real) or 1 (fake)");
  return labels;
}

std::vector<ScoredExample> to_examples(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<ScoredExample> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i].score = scores[i];
    out[i].label = labels[i] ? Label::fake : Label::real;
  }
  return out;
}

// A loaded or freshly initialized float model plus its front end.
class Model {
 public:
  explicit Model(ModelBundle<float> bundle) : bundle_(std::move(bundle)) {
    auto it = bundle_.info.find("input_policy");
    crop_standardize_ = it != bundle_.info.end() && it->second == "fit_then_standardize";
    bundle_.spectrogram.target_frames = bundle_.arch.frames;
  }

  static Model load(const std::filesystem::path& path) { return Model(load_checkpoint<float>(path)); }

  static Model init(const std::string& family, const std::string& variant, int patch, int n_mels, int frames,
                    int embed_dim, int n_heads, int n_layers, std::uint64_t seed) {
    ModelBundle<float> b;
    b.arch = make_arch(family, variant, patch, n_mels, frames, embed_dim, n_heads, n_layers);
    b.spectrogram.n_mels = n_mels;
    b.spectrogram.target_frames = frames;
    Rng rng(seed);
    b.params = init_params<float>(b.arch, rng);
    b.info["seed"] = std::to_string(seed);
    return Model(std::move(b));
  }

  void save(const std::filesystem::path& path) const { save_checkpoint(path, bundle_); }

  Matrix<double> features(const Samples& samples, int sample_rate) const {
    AudioBuffer audio = to_audio(samples, sample_rate);
    const auto& spec = bundle_.spectrogram;
    if (audio.sample_rate != spec.sample_rate) audio = resample(audio, spec.sample_rate);
    Matrix<double> values = log_mel(audio, spec);
    if (!crop_standardize_) standardize(values);
    values = fit_frames(values, spec.target_frames, FrameMode::eval);
    if (crop_standardize_) standardize(values);
    return values;
  }

  double logit(const Matrix<double>& mel) const {
    if (mel.rows() != bundle_.arch.n_mels || mel.cols() != bundle_.arch.frames)
      throw std::invalid_argument("expected a " + std::to_string(bundle_.arch.n_mels) + " x " +
                                  std::to_string(bundle_.arch.frames) + " spectrogram");
    const Matrix<float> x = mel.cast<float>();
    return forward(x, bundle_.params, bundle_.arch);
  }

  double predict(const Samples& samples, int sample_rate) const {
    return sigmoid(logit(features(samples, sample_rate)));
  }

  py::tuple tokens(const Matrix<double>& mel) const {
    const Matrix<float> x = mel.cast<float>();
    const TokenSequence<float> seq = embed_tokens(x, bundle_.params, bundle_.arch);
    return py::make_tuple(Matrix<double>(seq.tokens.cast<double>()), seq.n_temporal, seq.n_spectral);
  }

  const Architecture& arch() const { return bundle_.arch; }
  const ModelBundle<float>& bundle() const { return bundle_; }

 private:
  ModelBundle<float> bundle_;
  bool crop_standardize_ = false;
};

py::dict summary_dict(const MetricSummary& s) {
  py::dict d;
  d["tp"] = s.counts.tp;
  d["fp"] = s.counts.fp;
  d["tn"] = s.counts.tn;
  d["fn"] = s.counts.fn;
  d["f1"] = s.metrics.f1;
  d["sensitivity"] = s.metrics.sensitivity;
  d["specificity"] = s.metrics.specificity;
  d["eer"] = s.eer ? py::cast(*s.eer) : py::none();
  d["n_real"] = s.support_real;
  d["n_fake"] = s.support_fake;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectro-temporal tokenizer transformer for long-audio fake-song detection";

  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_FloatingPointError);

  m.def(
      "token_count",
      [](std::int64_t bins, std::int64_t frames, const std::string& variant, bool temporal, bool spectral) {
        ClipConfig clip = ClipConfig::from_variant(parse_variant(variant));
        clip.temporal_enabled = temporal;
        clip.spectral_enabled = spectral;
        const TokenCounts c = spectttra_token_count(bins, frames, clip);
        return py::make_tuple(c.temporal, c.spectral);
      },
      py::arg("bins"), py::arg("frames"), py::arg("variant") = "gamma", py::arg("temporal") = true,
      py::arg("spectral") = true, "(temporal, spectral) token counts for a bins x frames spectrogram.");
  m.def("vit_token_count", &vit_token_count, py::arg("bins"), py::arg("frames"), py::arg("patch") = 16);

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        AudioBuffer a = read_wav(path);
        return py::make_tuple(py::array_t<double>(a.samples.size(), a.samples.data()), a.sample_rate);
      },
      py::arg("path"), "Returns (mono samples, sample_rate).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const Samples& samples, int sample_rate) {
        write_wav(path, to_audio(samples, sample_rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"), "Writes 16-bit PCM.");

  m.def(
      "log_mel",
      [](const Samples& samples, int sample_rate, int n_mels, int n_fft, int hop_length, bool standardized) {
        SpectrogramConfig cfg;
        cfg.sample_rate = sample_rate;
        cfg.n_mels = n_mels;
        cfg.n_fft = n_fft;
        cfg.win_length = n_fft;
        cfg.hop_length = hop_length;
        Matrix<double> v = log_mel(to_audio(samples, sample_rate), cfg);
        if (standardized) standardize(v);
        return v;
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("n_mels") = 128, py::arg("n_fft") = 2048,
      py::arg("hop_length") = 512, py::arg("standardized") = false, "n_mels x frames log-mel spectrogram.");

  m.def(
      "eer",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        const auto l = to_labels(labels);
        return eer(scores, l);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "metrics",
      [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
        const auto ex = to_examples(scores, to_labels(labels));
        return summary_dict(summarize(ex, threshold));
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5,
      "Confusion counts, F1, sensitivity, specificity and EER; label 1 is fake.");

  m.def(
      "profile",
      [](const std::string& family, const std::string& variant, int patch, int n_mels, int frames, int embed_dim,
         int n_heads, int n_layers) {
        const Architecture arch = make_arch(family, variant, patch, n_mels, frames, embed_dim, n_heads, n_layers);
        SpectrogramConfig spec;
        spec.n_mels = n_mels;
        spec.target_frames = frames;
        const ProfileReport r = profile(arch, spec);
        const FlopCounts f = analytic_flops(arch);
        py::dict d;
        d["model"] = r.model;
        d["frames"] = r.frames;
        d["input_seconds"] = r.input_seconds;
        d["n_tokens"] = r.n_tokens;
        d["params"] = r.params;
        d["flops_total"] = r.flops_total;
        d["flops_attention"] = r.flops_attention;
        d["flops_tokenizer"] = f.tokenizer;
        d["activations"] = r.activations;
        d["peak_bytes_estimate"] = r.peak_bytes_estimate;
        return d;
      },
      py::arg("family") = "spectttra", py::arg("variant") = "gamma", py::arg("patch") = 16, py::arg("n_mels") = 128,
      py::arg("frames") = 128, py::arg("embed_dim") = 384, py::arg("n_heads") = 6, py::arg("n_layers") = 12,
      "Analytic FLOPs, parameters and activation count for one forward pass.");

  m.def(
      "generate_toy",
      [](const std::filesystem::path& out_dir, int n_per_class, double duration, std::uint64_t seed, double period) {
        ToySpec spec;
        spec.n_per_class = n_per_class;
        spec.duration = duration;
        spec.seed = seed;
        spec.period = period;
        return generate_toy(spec, out_dir).manifest_path;
      },
      py::arg("out_dir"), py::arg("n_per_class") = 32, py::arg("duration") = 24.0, py::arg("seed") = 0,
      py::arg("period") = 3.0, "Writes the toy corpus and returns the manifest path.");

  py::class_<Model>(m, "Model")
      .def_static("load", &Model::load, py::arg("path"))
      .def_static("init", &Model::init, py::arg("family") = "spectttra", py::arg("variant") = "gamma",
                  py::arg("patch") = 16, py::arg("n_mels") = 128, py::arg("frames") = 128,
                  py::arg("embed_dim") = 384, py::arg("n_heads") = 6, py::arg("n_layers") = 12,
                  py::arg("seed") = 0, "Randomly initialized model.")
      .def("save", &Model::save, py::arg("path"))
      .def("features", &Model::features, py::arg("samples"), py::arg("sample_rate"),
           "Front end as applied at evaluation time.")
      .def("logit", &Model::logit, py::arg("mel"))
      .def("predict", &Model::predict, py::arg("samples"), py::arg("sample_rate"), "Probability that the song is fake.")
      .def("tokens", &Model::tokens, py::arg("mel"), "(tokens, n_temporal, n_spectral) after positional embedding.")
      .def_property_readonly("n_mels", [](const Model& x) { return x.arch().n_mels; })
      .def_property_readonly("frames", [](const Model& x) { return x.arch().frames; })
      .def_property_readonly("n_tokens", [](const Model& x) { return x.arch().n_tokens(); })
      .def_property_readonly("n_params", [](const Model& x) { return count_params(x.bundle().params); })
      .def_property_readonly("info", [](const Model& x) { return x.bundle().info; });
}
