#include "spectttra/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace spectttra {

std::string_view to_string(Label v) { return v == Label::fake ? "fake" : "real"; }

std::string_view to_string(FakeType v) {
  switch (v) {
    case FakeType::half: return "half";
    case FakeType::mostly: return "mostly";
    case FakeType::full: return "full";
    case FakeType::none: return "none";
  }
  return "none";
}

std::string_view to_string(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

std::string_view to_string(SingerSeen v) {
  switch (v) {
    case SingerSeen::seen: return "seen";
    case SingerSeen::unseen: return "unseen";
    case SingerSeen::not_applicable: return "n/a";
  }
  return "n/a";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

std::map<std::string, std::string> ManifestEntry::partitions() const {
  return {{"algorithm", algorithm},
          {"fake_type", std::string(to_string(fake_type))},
          {"singer_seen", std::string(to_string(singer_seen))},
          {"split", std::string(to_string(split))}};
}

namespace {

std::vector<std::string> split_csv(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ManifestError(line_no, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <typename E>
E parse_enum(const std::string& value, std::initializer_list<std::pair<std::string_view, E>> options, int line,
             const char* field) {
  for (const auto& [name, e] : options) {
    if (value == name) return e;
  }
  throw ManifestError(line, std::string("invalid ") + field + " '" + value + "'");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::map<std::string, int> seen_paths;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line != kManifestHeader) {
        throw ManifestError(line_no, "expected header '" + std::string(kManifestHeader) + "'");
      }
      have_header = true;
      continue;
    }
    const auto f = split_csv(line, line_no);
    if (f.size() != 8) throw ManifestError(line_no, "expected 8 fields, found " + std::to_string(f.size()));

    ManifestEntry e;
    e.line = line_no;
    if (f[0].empty()) throw ManifestError(line_no, "empty path");
    e.path = f[0];
    e.resolved_path = e.path.is_absolute() || base_dir.empty() ? e.path : base_dir / e.path;
    e.label = parse_enum<Label>(f[1], {{"real", Label::real}, {"fake", Label::fake}}, line_no, "label");
    e.algorithm = f[2];
    if (e.algorithm.empty()) throw ManifestError(line_no, "empty algorithm");
    e.fake_type = parse_enum<FakeType>(
        f[3], {{"half", FakeType::half}, {"mostly", FakeType::mostly}, {"full", FakeType::full}, {"none", FakeType::none}},
        line_no, "fake_type");
    e.split = parse_enum<Split>(f[4], {{"train", Split::train}, {"valid", Split::valid}, {"test", Split::test}}, line_no,
                                "split");
    e.group_id = f[5];
    if (e.group_id.empty()) throw ManifestError(line_no, "empty group_id");
    e.singer_seen = parse_enum<SingerSeen>(
        f[6], {{"seen", SingerSeen::seen}, {"unseen", SingerSeen::unseen}, {"n/a", SingerSeen::not_applicable}}, line_no,
        "singer_seen");
    try {
      std::size_t used = 0;
      e.duration = std::stod(f[7], &used);
      if (used != f[7].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ManifestError(line_no, "invalid duration '" + f[7] + "'");
    }
    if (!(e.duration > 0.0) || !std::isfinite(e.duration)) throw ManifestError(line_no, "duration must be positive");
    if (e.label == Label::real && e.fake_type != FakeType::none) {
      throw ManifestError(line_no, "real song with fake_type '" + f[3] + "'");
    }
    const std::string key = e.path.lexically_normal().string();
    if (const auto it = seen_paths.find(key); it != seen_paths.end()) {
      throw ManifestError(line_no, "duplicate path '" + f[0] + "' (first on line " + std::to_string(it->second) + ")");
    }
    seen_paths.emplace(key, line_no);
    entries.push_back(std::move(e));
  }
  if (!have_header) throw ManifestError(line_no, "missing header");
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << kManifestHeader << '\n';
  out.precision(10);
  for (const auto& e : entries) {
    out << csv_field(e.path.generic_string()) << ',' << to_string(e.label) << ',' << csv_field(e.algorithm) << ','
        << to_string(e.fake_type) << ',' << to_string(e.split) << ',' << csv_field(e.group_id) << ','
        << to_string(e.singer_seen) << ',' << e.duration << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path.string());
}

std::vector<LeakageViolation> check_leakage(std::span<const ManifestEntry> entries) {
  std::map<std::string, LeakageViolation> by_group;
  for (const auto& e : entries) {
    auto& v = by_group[e.group_id];
    v.group_id = e.group_id;
    (e.split == Split::train ? v.train_lines : v.heldout_lines).push_back(e.line);
  }
  std::vector<LeakageViolation> out;
  for (auto& [id, v] : by_group) {
    if (!v.train_lines.empty() && !v.heldout_lines.empty()) out.push_back(std::move(v));
  }
  return out;
}

std::vector<ManifestEntry> select_split(std::span<const ManifestEntry> entries, Split split) {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return e.split == split; });
  return out;
}

// --- toy corpus -------------------------------------------------------------

void ToySpec::validate() const {
  if (n_per_class < 2) throw std::invalid_argument("toy: n_per_class must be >= 2");
  if (!(duration > 0.0)) throw std::invalid_argument("toy: duration must be positive");
  if (!(period > 1.0)) throw std::invalid_argument("toy: period must exceed 1 s");
  if (sample_rate < 8000) throw std::invalid_argument("toy: sample_rate must be >= 8000");
  if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0) {
    throw std::invalid_argument("toy: split fractions must leave a training share");
  }
}

namespace {

constexpr int kPitchPool = 21;
constexpr int kMotifNotes = 3;  // a motif fills the whole period
constexpr double kNoteAmplitude = 0.2;

// Pitch i sits at the centre of mel filter 5(i + 4) + 2 of the default front
// end (128 HTK bands up to 8 kHz), so each pitch owns one 5-band spectral clip.
double pool_pitch(int i) {
  const double mel_max = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const int band = 5 * (4 + i) + 2;
  const double mel = mel_max * (band + 1) / 129.0;
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// kMotifNotes distinct pitches, none of them in `exclude`.
std::vector<int> draw_motif(Rng& rng, const std::vector<int>& exclude = {}) {
  std::vector<int> pool;
  for (int i = 0; i < kPitchPool; ++i) {
    if (std::find(exclude.begin(), exclude.end(), i) == exclude.end()) pool.push_back(i);
  }
  std::vector<int> motif;
  for (int k = 0; k < kMotifNotes; ++k) {
    const auto j = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
    motif.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return motif;
}

void add_note(std::vector<double>& out, int sample_rate, std::size_t start, std::size_t len, int pitch) {
  const auto ramp = static_cast<std::size_t>(0.01 * sample_rate);
  const double hz = pool_pitch(pitch);
  for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
    double env = 1.0;
    if (i < ramp) env = static_cast<double>(i) / static_cast<double>(ramp);
    if (len - i < ramp) env = static_cast<double>(len - i) / static_cast<double>(ramp);
    out[start + i] += kNoteAmplitude * env * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate);
  }
}

}  // namespace

ToySong synthesize_toy_song(const ToySpec& spec, Label label, std::uint64_t song_seed) {
  spec.validate();
  Rng rng(song_seed);
  const int sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * sr));
  std::vector<double> x(n, 0.0);
  std::normal_distribution<double> white(0.0, 1.0);

  // Pink noise (Kellet's economy filter), RMS around 0.01.
  double b0 = 0, b1 = 0, b2 = 0;
  for (auto& s : x) {
    const double w = white(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    s = 0.01 * (b0 + b1 + b2 + w * 0.1848) / 3.0;
  }

  // Three low tones with aperiodic amplitude envelopes (random control points every 0.25 s).
  std::uniform_real_distribution<double> tone_hz(80.0, 250.0);
  for (int k = 0; k < 3; ++k) {
    const double hz = tone_hz(rng);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const auto step = static_cast<std::size_t>(0.25 * sr);
    std::vector<double> ctrl(n / step + 2);
    double level = 0.0;
    for (auto& c : ctrl) {
      level = 0.8 * level + 0.6 * white(rng);
      c = 0.03 * (0.5 + 0.5 * std::tanh(level));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i / step;
      const double frac = static_cast<double>(i % step) / static_cast<double>(step);
      const double env = ctrl[j] * (1.0 - frac) + ctrl[j + 1] * frac;
      x[i] += env * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr + phase);
    }
  }

  // Melody: back-to-back motifs of kMotifNotes distinct pitches, one motif per
  // period. Fake songs loop a single motif, so the audio repeats exactly at
  // the period. Real songs draw a fresh motif each period, avoiding the
  // previous motif's pitches, so every window shorter than the period holds
  // distinct pitches in both classes.
  ToySong song;
  const auto note_len = static_cast<std::size_t>(std::llround(spec.period * sr / kMotifNotes));
  const int phase_note = std::uniform_int_distribution<int>(0, kMotifNotes - 1)(rng);
  std::vector<int> motif = draw_motif(rng);
  std::size_t start = 0;
  for (int k = phase_note; start < n; ++k) {
    const int slot = k % kMotifNotes;
    if (slot == 0 && k > phase_note) {
      if (label == Label::real) motif = draw_motif(rng, motif);
    }
    if (slot == 0) song.motif_onsets.push_back(static_cast<double>(start) / sr);
    add_note(x, sr, start, note_len, motif[static_cast<std::size_t>(slot)]);
    start += note_len;
  }

  song.audio.sample_rate = sr;
  song.audio.samples = std::move(x);
  return song;
}

ToyCorpus generate_toy(const ToySpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  Rng rng(mix_seed(spec.seed, 0xC0FFEE));

  struct Group {
    std::string id;
    Label label;
    std::vector<int> songs;
  };
  std::vector<Group> fake_groups, real_groups;
  int song = 0;
  for (int i = 0; i < spec.n_per_class; i += 2) {
    Group g{"pair_" + std::to_string(fake_groups.size()), Label::fake, {}};
    for (int k = i; k < std::min(i + 2, spec.n_per_class); ++k) g.songs.push_back(song++);
    fake_groups.push_back(std::move(g));
  }
  for (int i = 0; i < spec.n_per_class; ++i) {
    real_groups.push_back({"real_" + std::to_string(i), Label::real, {song++}});
  }

  std::vector<ManifestEntry> entries(static_cast<std::size_t>(song));
  const char* algorithms[] = {"synth_a", "synth_b"};
  const FakeType fake_types[] = {FakeType::full, FakeType::mostly, FakeType::half};

  auto assign = [&](std::vector<Group>& groups) {
    std::shuffle(groups.begin(), groups.end(), rng);
    const auto n = groups.size();
    const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    for (std::size_t gi = 0; gi < n; ++gi) {
      const Split split = gi < n_valid ? Split::valid : gi < n_valid + n_test ? Split::test : Split::train;
      const auto& g = groups[gi];
      for (int s : g.songs) {
        auto& e = entries[static_cast<std::size_t>(s)];
        e.label = g.label;
        e.split = split;
        e.group_id = g.id;
        if (g.label == Label::fake) {
          e.algorithm = algorithms[gi % 2];
          e.fake_type = fake_types[gi % 3];
          e.singer_seen = SingerSeen::not_applicable;
        } else {
          e.algorithm = "recorded";
          e.fake_type = FakeType::none;
          e.singer_seen = split == Split::train || gi % 2 == 0 ? SingerSeen::seen : SingerSeen::unseen;
        }
      }
    }
  };
  assign(fake_groups);
  assign(real_groups);

  for (int s = 0; s < song; ++s) {
    auto& e = entries[static_cast<std::size_t>(s)];
    char name[32];
    std::snprintf(name, sizeof name, "song_%03d.wav", s);
    e.path = name;
    e.resolved_path = out_dir / name;
    e.line = s + 2;
    const ToySong t = synthesize_toy_song(spec, e.label, mix_seed(spec.seed, static_cast<std::uint64_t>(s)));
    e.duration = t.audio.duration();
    write_wav(e.resolved_path, t.audio, WavEncoding::pcm16);
  }

  ToyCorpus corpus;
  corpus.manifest_path = out_dir / "manifest.csv";
  write_manifest(corpus.manifest_path, entries);
  corpus.entries = load_manifest(corpus.manifest_path);
  if (!check_leakage(corpus.entries).empty()) throw std::logic_error("toy generator produced a leaking split");
  return corpus;
}

// --- dataset ------------------------------------------------------------------

Matrix<double> Dataset::input(std::size_t i, int frames, FrameMode mode, Rng* rng) const {
  const auto& item = items.at(i);
  if (policy == InputPolicy::standardize_then_fit) return fit_frames(item.features, frames, mode, rng);
  Matrix<double> crop = fit_frames(item.features, frames, mode, rng);
  standardize(crop);
  return crop;
}

Dataset load_dataset(std::span<const ManifestEntry> entries, const SpectrogramConfig& config, InputPolicy policy) {
  Dataset ds;
  ds.policy = policy;
  ds.items.reserve(entries.size());
  for (const auto& e : entries) {
    AudioBuffer audio = read_wav(e.resolved_path);
    if (audio.sample_rate != config.sample_rate) audio = resample(audio, config.sample_rate);
    DatasetItem item;
    item.features = log_mel(audio, config);
    if (policy == InputPolicy::standardize_then_fit) standardize(item.features);
    item.label = e.label == Label::fake ? 1.0 : 0.0;
    item.id = e.path.generic_string();
    item.partitions = e.partitions();
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace spectttra
