#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spectttra/audio.hpp"
#include "spectttra/evaluation.hpp"
#include "spectttra/frontend.hpp"

namespace spectttra {

enum class FakeType { half, mostly, full, none };
enum class Split { train, valid, test };
enum class SingerSeen { seen, unseen, not_applicable };

std::string_view to_string(Label v);
std::string_view to_string(FakeType v);
std::string_view to_string(Split v);
std::string_view to_string(SingerSeen v);
Split parse_split(std::string_view s);

inline constexpr std::string_view kManifestHeader =
    "path,label,algorithm,fake_type,split,group_id,singer_seen,duration";

struct ManifestEntry {
  std::filesystem::path path;           // as written in the manifest
  std::filesystem::path resolved_path;  // relative paths resolved against the manifest directory
  Label label = Label::real;
  std::string algorithm;
  FakeType fake_type = FakeType::none;
  Split split = Split::train;
  std::string group_id;
  SingerSeen singer_seen = SingerSeen::not_applicable;
  double duration = 0.0;
  int line = 0;

  /// Partition labels keyed by the evaluation axes.
  std::map<std::string, std::string> partitions() const;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(int line, const std::string& what)
      : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

struct LeakageViolation {
  std::string group_id;
  std::vector<int> train_lines;
  std::vector<int> heldout_lines;  // valid or test
};

/// Groups may not straddle train and valid/test; valid and test count as one side.
std::vector<LeakageViolation> check_leakage(std::span<const ManifestEntry> entries);

std::vector<ManifestEntry> select_split(std::span<const ManifestEntry> entries, Split split);

/// Synthetic two-class corpus. Both classes carry pink noise, slowly
/// modulated low tones and a melody of back-to-back three-note motifs, one
/// motif per `period` seconds. Fake songs loop a single motif, so the audio
/// repeats exactly at the period; real songs draw a fresh motif every period.
/// Any window shorter than the period holds distinct pitches in both classes.
struct ToySpec {
  int n_per_class = 32;
  double duration = 24.0;
  std::uint64_t seed = 0;
  double period = 3.0;
  int sample_rate = 16000;
  double valid_fraction = 0.25;
  double test_fraction = 0.25;

  void validate() const;
};

struct ToySong {
  AudioBuffer audio;
  std::vector<double> motif_onsets;  // seconds
};

ToySong synthesize_toy_song(const ToySpec& spec, Label label, std::uint64_t song_seed);

struct ToyCorpus {
  std::filesystem::path manifest_path;
  std::vector<ManifestEntry> entries;
};

/// Writes song_NNN.wav files (PCM16) and manifest.csv into `out_dir`.
ToyCorpus generate_toy(const ToySpec& spec, const std::filesystem::path& out_dir);

/// How a training input is cut from a song's full log-mel.
enum class InputPolicy {
  standardize_then_fit,  // standard front end: statistics from the whole song
  fit_then_standardize,  // short-crop mode: statistics from the crop only
};

struct DatasetItem {
  Matrix<double> features;  // full-length log-mel, standardized under standardize_then_fit
  double label = 0.0;
  std::string id;
  std::map<std::string, std::string> partitions;
};

struct Dataset {
  std::vector<DatasetItem> items;
  InputPolicy policy = InputPolicy::standardize_then_fit;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  /// Model input of exactly `frames` columns for item i.
  Matrix<double> input(std::size_t i, int frames, FrameMode mode, Rng* rng = nullptr) const;
};

/// Decodes, resamples to the front-end rate, and computes log-mels once per song.
Dataset load_dataset(std::span<const ManifestEntry> entries, const SpectrogramConfig& config, InputPolicy policy);

}  // namespace spectttra
