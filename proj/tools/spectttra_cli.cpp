// Command-line front end: gen-toy, train, eval, profile, tokenize.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <algorithm>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spectttra/checkpoint.hpp"
#include "spectttra/dataio.hpp"
#include "spectttra/evaluation.hpp"
#include "spectttra/frontend.hpp"
#include "spectttra/model.hpp"
#include "spectttra/profiler.hpp"
#include "spectttra/tokenizer.hpp"
#include "spectttra/training.hpp"

namespace fs = std::filesystem;
using namespace spectttra;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Key/value echo of the resolved settings, readable back through --config.
class ConfigEcho {
 public:
  template <typename T>
  void set(const std::string& key, const T& value) {
    std::ostringstream s;
    s.precision(17);
    if constexpr (std::is_same_v<T, bool>) {
      s << (value ? "true" : "false");
    } else {
      s << value;
    }
    values_.emplace_back(key, s.str());
  }
  void write(const fs::path& dir, const std::string& command) const {
    fs::create_directories(dir);
    std::ofstream out(dir / "config.ini");
    out << "# effective configuration of `spectttra " << command << "`\n";
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.ini").string());
  }

 private:
  std::vector<std::pair<std::string, std::string>> values_;
};

// --- front end ---------------------------------------------------------------

struct FrontendOptions {
  std::optional<int> sample_rate, n_fft, win_length, hop_length, n_mels;
  std::optional<double> fmin, fmax;

  void add(CLI::App* app) {
    auto* g = "Front end";
    app->add_option("--sample-rate", sample_rate, "Target sample rate (Hz)")->group(g);
    app->add_option("--n-fft", n_fft, "FFT size")->group(g);
    app->add_option("--win-length", win_length, "Window length")->group(g);
    app->add_option("--hop-length", hop_length, "Hop length")->group(g);
    app->add_option("--n-mels", n_mels, "Mel bins")->group(g);
    app->add_option("--fmin", fmin, "Lowest mel frequency (Hz)")->group(g);
    app->add_option("--fmax", fmax, "Highest mel frequency (Hz), default Nyquist")->group(g);
  }

  SpectrogramConfig resolve() const {
    SpectrogramConfig c;
    if (sample_rate) c.sample_rate = *sample_rate;
    if (n_fft) c.n_fft = *n_fft;
    c.win_length = win_length.value_or(c.n_fft);
    if (hop_length) c.hop_length = *hop_length;
    if (n_mels) c.n_mels = *n_mels;
    if (fmin) c.fmin = *fmin;
    c.fmax = fmax;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  static void echo(ConfigEcho& out, const SpectrogramConfig& c) {
    out.set("sample-rate", c.sample_rate);
    out.set("n-fft", c.n_fft);
    out.set("win-length", c.win_length);
    out.set("hop-length", c.hop_length);
    out.set("n-mels", c.n_mels);
    out.set("fmin", c.fmin);
    if (c.fmax) out.set("fmax", *c.fmax);
  }
};

// --- model -------------------------------------------------------------------

struct Preset {
  EncoderConfig encoder;
  TrainConfig train;
};

Preset preset_named(const std::string& name) {
  Preset p;
  if (name == "paper") return p;
  if (name == "tiny") {
    p.encoder.embed_dim = 16;
    p.encoder.n_heads = 2;
    p.encoder.n_layers = 2;
    p.train.epochs = 20;
    p.train.warmup_epochs = 2;
    p.train.base_lr = 1e-2;
    p.train.batch_size = 4;
    return p;
  }
  throw UsageError("unknown preset '" + name + "' (expected tiny or paper)");
}

struct ModelOptions {
  std::string preset = "paper";
  std::optional<std::string> variant;
  std::optional<std::string> baseline;
  bool temporal_only = false;
  bool spectral_only = false;
  std::optional<int> clip_t, clip_f, patch;
  std::optional<int> embed_dim, heads, layers;
  std::optional<double> mlp_ratio, dropout;
  std::optional<int> frames;
  std::optional<double> seconds;

  void add(CLI::App* app) {
    auto* g = "Model";
    app->add_option("--preset", preset, "Size preset: tiny or paper")
        ->check(CLI::IsMember({"tiny", "paper"}))
        ->capture_default_str()
        ->group(g);
    app->add_option("--variant", variant, "Clip variant: alpha (f=1,t=3), beta (f=3,t=5), gamma (f=5,t=7)")
        ->check(CLI::IsMember({"alpha", "beta", "gamma", "custom"}))
        ->group(g);
    app->add_option("--baseline", baseline, "Use a baseline tokenizer instead (vit)")
        ->check(CLI::IsMember({"vit"}))
        ->group(g);
    auto* t_only = app->add_flag("--temporal-only", temporal_only, "Keep only temporal tokens")->group(g);
    auto* s_only = app->add_flag("--spectral-only", spectral_only, "Keep only spectral tokens")->group(g);
    t_only->excludes(s_only);
    app->add_option("--clip-t", clip_t, "Temporal clip width in frames")->group(g);
    app->add_option("--clip-f", clip_f, "Spectral clip height in mel bins")->group(g);
    app->add_option("--patch", patch, "ViT patch size")->group(g);
    app->add_option("--embed-dim", embed_dim, "Token dimension D")->group(g);
    app->add_option("--heads", heads, "Attention heads")->group(g);
    app->add_option("--layers", layers, "Encoder layers")->group(g);
    app->add_option("--mlp-ratio", mlp_ratio, "MLP hidden width as a multiple of D")->group(g);
    app->add_option("--dropout", dropout, "Dropout on attention and MLP outputs")->group(g);
    auto* f = app->add_option("--frames", frames, "Input frames T")->group(g);
    auto* s = app->add_option("--seconds", seconds, "Input length in seconds (sets T)")->group(g);
    f->excludes(s);
  }

  Architecture resolve(const SpectrogramConfig& spec, int default_frames) const {
    const Preset p = preset_named(preset);
    Architecture a;
    a.n_mels = spec.n_mels;
    a.encoder = p.encoder;
    if (embed_dim) a.encoder.embed_dim = *embed_dim;
    if (heads) a.encoder.n_heads = *heads;
    if (layers) a.encoder.n_layers = *layers;
    if (mlp_ratio) a.encoder.mlp_ratio = *mlp_ratio;
    if (dropout) a.encoder.dropout = *dropout;
    a.frames = default_frames;
    if (frames) a.frames = *frames;
    if (seconds) {
      if (!(*seconds > 0.0)) throw UsageError("--seconds must be positive");
      a.frames = spec.frames_for_seconds(*seconds);
    }

    if (baseline) {
      if (variant || temporal_only || spectral_only || clip_t || clip_f) {
        throw UsageError("--baseline vit cannot be combined with clip options");
      }
      a.tokenizer.family = TokenizerFamily::vit;
    }
    if (patch) a.tokenizer.patch.p = *patch;
    ClipConfig clip = ClipConfig::from_variant(variant ? parse_variant(*variant) : Variant::gamma);
    if (variant && *variant == "custom" && !(clip_t && clip_f)) {
      throw UsageError("--variant custom needs --clip-t and --clip-f");
    }
    if (clip_t) clip.t = *clip_t;
    if (clip_f) clip.f = *clip_f;
    if (clip_t || clip_f) {
      const ClipConfig named = ClipConfig::from_variant(clip.variant == Variant::custom ? Variant::gamma : clip.variant);
      if (clip.variant == Variant::custom || clip.t != named.t || clip.f != named.f) clip.variant = Variant::custom;
    }
    clip.temporal_enabled = !spectral_only;
    clip.spectral_enabled = !temporal_only;
    a.tokenizer.clip = clip;
    try {
      a.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return a;
  }

  static void echo(ConfigEcho& out, const std::string& preset, const Architecture& a) {
    out.set("preset", preset);
    if (a.tokenizer.family == TokenizerFamily::vit) {
      out.set("baseline", std::string("vit"));
      out.set("patch", a.tokenizer.patch.p);
    } else {
      const auto& c = a.tokenizer.clip;
      out.set("variant", std::string(to_string(c.variant)));
      out.set("clip-t", c.t);
      out.set("clip-f", c.f);
      out.set("temporal-only", !c.spectral_enabled);
      out.set("spectral-only", !c.temporal_enabled);
    }
    out.set("embed-dim", a.encoder.embed_dim);
    out.set("heads", a.encoder.n_heads);
    out.set("layers", a.encoder.n_layers);
    out.set("mlp-ratio", a.encoder.mlp_ratio);
    out.set("dropout", a.encoder.dropout);
    out.set("frames", a.frames);
  }
};

// --- gen-toy -----------------------------------------------------------------

struct GenToyOptions {
  std::string out;
  int n = 32;
  double duration = 24.0;
  std::uint64_t seed = 0;
  double period = 3.0;
  int sample_rate = 16000;
};

int cmd_gen_toy(const GenToyOptions& o) {
  ToySpec spec;
  spec.n_per_class = o.n;
  spec.duration = o.duration;
  spec.seed = o.seed;
  spec.period = o.period;
  spec.sample_rate = o.sample_rate;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const ToyCorpus corpus = generate_toy(spec, o.out);
  ConfigEcho echo;
  echo.set("out", o.out);
  echo.set("n", o.n);
  echo.set("duration", o.duration);
  echo.set("seed", o.seed);
  echo.set("period", o.period);
  echo.set("sample-rate", o.sample_rate);
  echo.write(o.out, "gen-toy");
  std::cout << "wrote " << corpus.entries.size() << " songs and " << corpus.manifest_path.string() << "\n";
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  std::string manifest;
  std::string out;
  FrontendOptions frontend;
  ModelOptions model;
  std::optional<int> epochs, warmup_epochs, batch_size;
  std::optional<double> lr, min_lr_ratio, weight_decay, label_smoothing, beta1, beta2, grad_clip;
  std::optional<double> mixup_alpha, mixup_prob, mask_prob;
  std::optional<int> time_masks, time_mask_size, freq_masks, freq_mask_size;
  bool no_augment = false;
  std::optional<double> crop_seconds;
  bool standardize_crop = false;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int cmd_train(const TrainOptions& o) {
  const SpectrogramConfig spec = o.frontend.resolve();
  std::optional<int> crop_frames;
  if (o.crop_seconds) {
    if (!(*o.crop_seconds > 0.0)) throw UsageError("--crop-seconds must be positive");
    if (o.model.frames || o.model.seconds) throw UsageError("--crop-seconds replaces --frames/--seconds");
    crop_frames = spec.frames_for_seconds(*o.crop_seconds);
  }
  const Architecture arch = o.model.resolve(spec, crop_frames.value_or(spec.target_frames));
  const InputPolicy policy = o.crop_seconds || o.standardize_crop ? InputPolicy::fit_then_standardize
                                                                  : InputPolicy::standardize_then_fit;

  TrainConfig cfg = preset_named(o.model.preset).train;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.warmup_epochs) cfg.warmup_epochs = *o.warmup_epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.lr) cfg.base_lr = *o.lr;
  if (o.min_lr_ratio) cfg.min_lr_ratio = *o.min_lr_ratio;
  if (o.weight_decay) cfg.weight_decay = *o.weight_decay;
  if (o.label_smoothing) cfg.label_smoothing = *o.label_smoothing;
  if (o.beta1) cfg.beta1 = *o.beta1;
  if (o.beta2) cfg.beta2 = *o.beta2;
  if (o.grad_clip) cfg.grad_clip_norm = *o.grad_clip;
  if (o.mixup_alpha) cfg.augment.mixup_alpha = *o.mixup_alpha;
  if (o.mixup_prob) cfg.augment.mixup_prob = *o.mixup_prob;
  if (o.mask_prob) cfg.augment.mask_prob = *o.mask_prob;
  if (o.time_masks) cfg.augment.n_time_masks = *o.time_masks;
  if (o.time_mask_size) cfg.augment.time_mask_size = *o.time_mask_size;
  if (o.freq_masks) cfg.augment.n_freq_masks = *o.freq_masks;
  if (o.freq_mask_size) cfg.augment.freq_mask_size = *o.freq_mask_size;
  cfg.augment_enabled = !o.no_augment;
  cfg.seed = o.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  ConfigEcho echo;
  echo.set("manifest", o.manifest);
  echo.set("out", o.out);
  FrontendOptions::echo(echo, spec);
  ModelOptions::echo(echo, o.model.preset, arch);
  echo.set("standardize-crop", policy == InputPolicy::fit_then_standardize);
  echo.set("epochs", cfg.epochs);
  echo.set("warmup-epochs", cfg.warmup_epochs);
  echo.set("batch-size", cfg.batch_size);
  echo.set("lr", cfg.base_lr);
  echo.set("min-lr-ratio", cfg.min_lr_ratio);
  echo.set("weight-decay", cfg.weight_decay);
  echo.set("label-smoothing", cfg.label_smoothing);
  echo.set("beta1", cfg.beta1);
  echo.set("beta2", cfg.beta2);
  if (cfg.grad_clip_norm) echo.set("grad-clip", *cfg.grad_clip_norm);
  echo.set("no-augment", !cfg.augment_enabled);
  echo.set("mixup-alpha", cfg.augment.mixup_alpha);
  echo.set("mixup-prob", cfg.augment.mixup_prob);
  echo.set("time-masks", cfg.augment.n_time_masks);
  echo.set("time-mask-size", cfg.augment.time_mask_size);
  echo.set("freq-masks", cfg.augment.n_freq_masks);
  echo.set("freq-mask-size", cfg.augment.freq_mask_size);
  echo.set("mask-prob", cfg.augment.mask_prob);
  echo.set("seed", cfg.seed);

  const auto entries = load_manifest(o.manifest);
  if (const auto leaks = check_leakage(entries); !leaks.empty()) {
    std::string msg = "manifest leaks groups across train and valid/test:";
    for (const auto& l : leaks) msg += " " + l.group_id;
    throw std::runtime_error(msg);
  }
  const auto train_entries = select_split(entries, Split::train);
  const auto valid_entries = select_split(entries, Split::valid);
  if (train_entries.empty() || valid_entries.empty()) {
    throw std::runtime_error("manifest needs both train and valid songs");
  }
  echo.write(o.out, "train");

  const Dataset train = load_dataset(train_entries, spec, policy);
  const Dataset valid = load_dataset(valid_entries, spec, policy);
  if (!o.quiet) {
    std::printf("train %zu songs, valid %zu songs, %d frames, %lld tokens, %lld parameters\n", train.size(),
                valid.size(), arch.frames, static_cast<long long>(arch.n_tokens()),
                static_cast<long long>(count_params(arch)));
  }

  TrainOutputs outputs;
  outputs.out_dir = o.out;
  outputs.info["input_policy"] = policy == InputPolicy::fit_then_standardize ? "fit_then_standardize"
                                                                              : "standardize_then_fit";
  outputs.info["preset"] = o.model.preset;
  if (!o.quiet) {
    outputs.on_epoch = [](const EpochRecord& r) {
      std::printf("epoch %3d  lr %.3e  loss %.5f  valid_f1 %.4f  valid_eer %.4f\n", r.epoch, r.lr, r.train_loss,
                  r.valid_f1, r.valid_eer);
      std::fflush(stdout);
    };
  }
  const TrainResult result = train_loop(train, valid, spec, arch, cfg, outputs);
  std::printf("best epoch %d  valid_f1 %.4f\n", result.best_epoch, result.best_valid_f1);
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out;
  double threshold = 0.5;
  std::vector<std::string> axes{"algorithm", "fake_type", "singer_seen"};
};

int cmd_eval(const EvalOptions& o) {
  if (!(o.threshold >= 0.0 && o.threshold <= 1.0)) throw UsageError("--threshold must be in [0, 1]");
  for (const auto& a : o.axes) {
    const auto& known = known_partition_axes();
    if (std::find(known.begin(), known.end(), a) == known.end()) throw UsageError("unknown axis '" + a + "'");
  }
  const auto bundle = load_checkpoint<float>(o.checkpoint);
  const auto entries = load_manifest(o.manifest);
  const auto selected = o.split == "all" ? entries : select_split(entries, parse_split(o.split));
  if (selected.empty()) throw std::runtime_error("no songs in split '" + o.split + "'");

  InputPolicy policy = InputPolicy::standardize_then_fit;
  if (auto it = bundle.info.find("input_policy"); it != bundle.info.end() && it->second == "fit_then_standardize") {
    policy = InputPolicy::fit_then_standardize;
  }
  const Dataset data = load_dataset(selected, bundle.spectrogram, policy);
  const auto scores = score_dataset(bundle.params, bundle.arch, data);
  const auto examples = scored_examples(data, scores);
  const MetricReport report = partitioned_report(examples, o.axes, o.threshold);

  std::cout << report_text(report);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "report.csv") << report_csv(report);
    std::ofstream(fs::path(o.out) / "report.txt") << report_text(report);
    std::ofstream s(fs::path(o.out) / "scores.csv");
    s << "path,label,score\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
      s << data.items[i].id << ',' << (data.items[i].label >= 0.5 ? "fake" : "real") << ',' << buf << '\n';
    }
    ConfigEcho echo;
    echo.set("checkpoint", o.checkpoint);
    echo.set("manifest", o.manifest);
    echo.set("split", o.split);
    echo.set("out", o.out);
    echo.set("threshold", o.threshold);
    std::string axes;
    for (const auto& a : o.axes) axes += (axes.empty() ? "" : ",") + a;
    echo.set("axes", "[" + axes + "]");
    echo.write(o.out, "eval");
  }
  return 0;
}

// --- profile -----------------------------------------------------------------

struct ProfileOptions {
  FrontendOptions frontend;
  ModelOptions model;
  std::vector<int> sweep;
  bool time = false;
  int warmup = 5;
  int runs = 100;
  std::uint64_t seed = 0;
  bool csv = false;
  std::string out;
};

int cmd_profile(const ProfileOptions& o) {
  if (o.warmup < 0 || o.runs < 1) throw UsageError("--warmup must be >= 0 and --runs >= 1");
  const SpectrogramConfig spec = o.frontend.resolve();
  std::vector<Architecture> archs;
  if (o.sweep.empty()) {
    archs.push_back(o.model.resolve(spec, spec.target_frames));
  } else {
    if (o.model.frames || o.model.seconds) throw UsageError("--sweep replaces --frames/--seconds");
    for (int frames : o.sweep) {
      ModelOptions m = o.model;
      m.frames = frames;
      archs.push_back(m.resolve(spec, frames));
    }
  }

  std::vector<ProfileReport> reports;
  for (const auto& arch : archs) {
    ProfileReport r = profile(arch, spec);
    if (o.time) {
      Rng rng(o.seed);
      const auto params = init_params<float>(arch, rng);
      TimingProtocol protocol{o.warmup, o.runs, 1};
      const SpeedResult s = measure_speed(params, arch, r.input_seconds, protocol);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      r.timed = true;
      r.audio_per_second = s.audio_per_second;
      r.protocol = protocol;
      r.protocol.timed_runs = s.timed_runs;
    }
    reports.push_back(r);
  }

  std::ostringstream csv;
  csv << profile_csv_header() << '\n';
  for (const auto& r : reports) csv << profile_csv_row(r) << '\n';
  std::ostringstream text;
  for (std::size_t i = 0; i < reports.size(); ++i) text << (i ? "\n" : "") << profile_text(reports[i]);
  std::cout << (o.csv || !o.sweep.empty() ? csv.str() : text.str());

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "profile.csv") << csv.str();
    std::ofstream(fs::path(o.out) / "profile.txt") << text.str();
    ConfigEcho echo;
    FrontendOptions::echo(echo, spec);
    ModelOptions::echo(echo, o.model.preset, archs.front());
    echo.set("time", o.time);
    echo.set("warmup", o.warmup);
    echo.set("runs", o.runs);
    echo.set("seed", o.seed);
    echo.write(o.out, "profile");
  }
  return 0;
}

// --- tokenize ----------------------------------------------------------------

struct TokenizeOptions {
  std::string wav;
  std::optional<std::string> checkpoint;
  FrontendOptions frontend;
  ModelOptions model;
  std::uint64_t seed = 0;
  std::string dump;
  std::string out;
};

int cmd_tokenize(const TokenizeOptions& o) {
  SpectrogramConfig spec;
  Architecture arch;
  ModelParams<float> params;
  if (o.checkpoint) {
    auto bundle = load_checkpoint<float>(*o.checkpoint);
    spec = bundle.spectrogram;
    arch = bundle.arch;
    params = std::move(bundle.params);
  } else {
    spec = o.frontend.resolve();
    arch = o.model.resolve(spec, spec.target_frames);
    Rng rng(o.seed);
    params = init_params<float>(arch, rng);
  }
  spec.target_frames = arch.frames;
  const AudioBuffer audio = read_wav(o.wav);
  const MelSpectrogram mel = compute_mel(audio, spec);
  const Matrix<float> x = mel.values.cast<float>();
  const TokenSequence<float> seq = embed_tokens(x, params, arch);

  std::printf("spectrogram %d x %d\n", mel.bins(), mel.frames());
  std::printf("tokens %lld x %lld (temporal %lld, spectral %lld)\n", static_cast<long long>(seq.tokens.rows()),
              static_cast<long long>(seq.tokens.cols()), static_cast<long long>(seq.n_temporal),
              static_cast<long long>(seq.n_spectral));
  if (!o.dump.empty()) {
    std::ofstream d(o.dump);
    if (!d) throw std::runtime_error("cannot write " + o.dump);
    d.precision(9);
    for (Eigen::Index i = 0; i < seq.tokens.rows(); ++i) {
      for (Eigen::Index j = 0; j < seq.tokens.cols(); ++j) d << (j ? "," : "") << seq.tokens(i, j);
      d << '\n';
    }
  }
  if (!o.out.empty()) {
    ConfigEcho echo;
    echo.set("wav", o.wav);
    if (o.checkpoint) echo.set("checkpoint", *o.checkpoint);
    FrontendOptions::echo(echo, spec);
    ModelOptions::echo(echo, o.model.preset, arch);
    echo.set("seed", o.seed);
    echo.write(o.out, "tokenize");
  }
  return 0;
}

// --- config files ------------------------------------------------------------

// CLI11 only reads config files attached to the top-level app, so each
// subcommand's --config is expanded here into --key=value arguments. Keys given
// on the command line win; keys the subcommand does not know are skipped with
// a warning so one file can serve several commands.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({}))
    if (s->get_name() == args.front()) sub = s;
  if (sub == nullptr) return args;

  std::optional<std::string> file;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!file) return args;

  auto given = [&](const std::string& key) {
    for (const auto& a : rest)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  static const std::vector<std::pair<std::string, std::string>> exclusive{
      {"frames", "seconds"}, {"temporal-only", "spectral-only"}, {"sweep", "frames"}, {"sweep", "seconds"}};

  std::vector<std::string> out{args.front()};
  for (const auto& item : CLI::ConfigINI().from_file(*file)) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) continue;
    const std::string& key = item.name;
    if (sub->get_option_no_throw("--" + key) == nullptr) {
      std::cerr << "warning: " << *file << ": '" << key << "' is not an option of " << sub->get_name() << "\n";
      continue;
    }
    if (given(key)) continue;
    bool overridden = false;
    for (const auto& [a, b] : exclusive) overridden |= (key == a && given(b)) || (key == b && given(a));
    if (overridden) continue;

    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    if (value == "false") continue;
    out.push_back(value == "true" ? "--" + key : "--" + key + "=" + value);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpecTTTra long-audio fake-song classifier"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "spectttra 0.1.0");

  GenToyOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-toy", "Synthesize the periodic-motif toy corpus");
  gen_cmd->add_option("--config", "Key = value settings; command-line options take precedence");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n", gen.n, "Songs per class")->capture_default_str();
  gen_cmd->add_option("--duration", gen.duration, "Seconds per song")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--period", gen.period, "Motif period R in seconds")->capture_default_str();
  gen_cmd->add_option("--sample-rate", gen.sample_rate, "Sample rate (Hz)")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from a manifest");
  train_cmd->add_option("--config", "Key = value settings; command-line options take precedence");
  train_cmd->add_option("--manifest", train.manifest, "Manifest CSV")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train.frontend.add(train_cmd);
  train.model.add(train_cmd);
  {
    auto* g = "Training";
    train_cmd->add_option("--epochs", train.epochs)->group(g);
    train_cmd->add_option("--warmup-epochs", train.warmup_epochs)->group(g);
    train_cmd->add_option("--batch-size", train.batch_size)->group(g);
    train_cmd->add_option("--lr", train.lr, "Peak learning rate")->group(g);
    train_cmd->add_option("--min-lr-ratio", train.min_lr_ratio, "Final lr as a fraction of the peak")->group(g);
    train_cmd->add_option("--weight-decay", train.weight_decay)->group(g);
    train_cmd->add_option("--label-smoothing", train.label_smoothing)->group(g);
    train_cmd->add_option("--beta1", train.beta1)->group(g);
    train_cmd->add_option("--beta2", train.beta2)->group(g);
    train_cmd->add_option("--grad-clip", train.grad_clip, "Global gradient norm limit")->group(g);
    train_cmd->add_option("--seed", train.seed)->capture_default_str()->group(g);
    train_cmd->add_option("--crop-seconds", train.crop_seconds,
                          "Train and evaluate on crops of this length, standardized per crop")
        ->group(g);
    train_cmd->add_flag("--standardize-crop", train.standardize_crop, "Standardize each crop rather than each song")
        ->group(g);
    train_cmd->add_flag("--quiet", train.quiet)->group(g);
  }
  {
    auto* g = "Augmentation";
    train_cmd->add_flag("--no-augment", train.no_augment, "Disable MixUp and SpecAugment")->group(g);
    train_cmd->add_option("--mixup-alpha", train.mixup_alpha)->group(g);
    train_cmd->add_option("--mixup-prob", train.mixup_prob)->group(g);
    train_cmd->add_option("--time-masks", train.time_masks)->group(g);
    train_cmd->add_option("--time-mask-size", train.time_mask_size)->group(g);
    train_cmd->add_option("--freq-masks", train.freq_masks)->group(g);
    train_cmd->add_option("--freq-mask-size", train.freq_mask_size)->group(g);
    train_cmd->add_option("--mask-prob", train.mask_prob)->group(g);
  }

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a manifest split with a checkpoint");
  eval_cmd->add_option("--config", "Key = value settings; command-line options take precedence");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--split", eval.split, "train, valid, test or all")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Directory for report.csv, report.txt and scores.csv");
  eval_cmd->add_option("--threshold", eval.threshold, "Decision threshold on P(fake)")->capture_default_str();
  eval_cmd->add_option("--axes", eval.axes, "Partition axes")->delimiter(',')->capture_default_str();

  ProfileOptions prof;
  auto* prof_cmd = app.add_subcommand("profile", "Token counts, FLOPs, activations and speed");
  prof_cmd->add_option("--config", "Key = value settings; command-line options take precedence");
  prof.frontend.add(prof_cmd);
  prof.model.add(prof_cmd);
  prof_cmd->add_option("--sweep", prof.sweep, "Comma-separated frame counts")->delimiter(',');
  prof_cmd->add_flag("--time", prof.time, "Measure single-threaded forward speed");
  prof_cmd->add_option("--warmup", prof.warmup, "Warm-up runs")->capture_default_str();
  prof_cmd->add_option("--runs", prof.runs, "Timed runs")->capture_default_str();
  prof_cmd->add_option("--seed", prof.seed, "Seed for the random weights used in timing")->capture_default_str();
  prof_cmd->add_flag("--csv", prof.csv, "Print CSV instead of text");
  prof_cmd->add_option("--out", prof.out, "Directory for profile.csv and profile.txt");

  TokenizeOptions tok;
  auto* tok_cmd = app.add_subcommand("tokenize", "Print the token matrix shape for a WAV file");
  tok_cmd->add_option("--config", "Key = value settings; command-line options take precedence");
  tok_cmd->add_option("--wav", tok.wav, "Input WAV")->required()->check(CLI::ExistingFile);
  tok_cmd->add_option("--checkpoint", tok.checkpoint, "Use trained weights and settings from a checkpoint");
  tok.frontend.add(tok_cmd);
  tok.model.add(tok_cmd);
  tok_cmd->add_option("--seed", tok.seed, "Seed for random weights")->capture_default_str();
  tok_cmd->add_option("--dump", tok.dump, "Write the token matrix as CSV");
  tok_cmd->add_option("--out", tok.out, "Directory for the config echo");

  try {
    std::vector<std::string> args = expand_config(app, std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_toy(gen);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*prof_cmd) return cmd_profile(prof);
    if (*tok_cmd) return cmd_tokenize(tok);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
