#include "spectttra/profiler.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

namespace spectttra {

FlopCounts encoder_flops(const EncoderConfig& encoder, std::int64_t n) {
  const std::int64_t d = encoder.embed_dim;
  const std::int64_t h = encoder.mlp_hidden();
  const std::int64_t layers = encoder.n_layers;
  FlopCounts c;
  c.attention = layers * 4 * n * n * d;
  c.encoder = layers * (8 * n * d * d + 4 * n * d * h) + c.attention;
  return c;
}

FlopCounts analytic_flops(const Architecture& arch) {
  arch.validate();
  const auto& tok = arch.tokenizer;
  const std::int64_t d = arch.encoder.embed_dim;
  const std::int64_t bins = arch.n_mels;
  const std::int64_t frames = arch.frames;
  FlopCounts c = encoder_flops(arch.encoder, arch.n_tokens());
  if (tok.family == TokenizerFamily::vit) {
    const std::int64_t p = tok.patch.p;
    c.tokenizer = 2 * vit_token_count(arch.n_mels, arch.frames, tok.patch.p) * d * p * p;
  } else {
    const TokenCounts n = spectttra_token_count(arch.n_mels, arch.frames, tok.clip);
    c.tokenizer = 2 * n.temporal * d * bins * tok.clip.t + 2 * n.spectral * d * frames * tok.clip.f;
  }
  c.head = 2 * d;
  return c;
}

std::int64_t count_activations(const Architecture& arch) {
  arch.validate();
  const std::int64_t n = arch.n_tokens();
  const std::int64_t d = arch.encoder.embed_dim;
  const std::int64_t h = arch.encoder.mlp_hidden();
  return n * d + arch.encoder.n_layers * (6 * n * d + n * h) + d + 1;
}

double timer_resolution() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int i = 0; i < 20; ++i) {
    const auto t0 = clock::now();
    auto t1 = clock::now();
    while (t1 == t0) t1 = clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

std::string machine_descriptor() {
  std::string cpu = "unknown-cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  utsname u{};
  std::string os = "unknown-os";
  if (uname(&u) == 0) os = std::string(u.sysname) + " " + u.release + " " + u.machine;
  std::ostringstream out;
  out << cpu << "; " << os << "; hw_threads=" << std::thread::hardware_concurrency() << "; threads_used=1";
  return out.str();
}

SpeedResult measure_speed(const ModelParams<float>& params, const Architecture& arch, double input_seconds,
                          const TimingProtocol& protocol) {
  if (protocol.warmup_runs < 0 || protocol.timed_runs < 1 || protocol.batch_size < 1) {
    throw std::invalid_argument("measure_speed: invalid protocol");
  }
  if (!(input_seconds > 0.0)) throw std::invalid_argument("measure_speed: input_seconds must be positive");
  arch.validate();
  Rng rng(12345);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<Matrix<float>> batch;
  for (int b = 0; b < protocol.batch_size; ++b) {
    batch.push_back(Matrix<float>::NullaryExpr(arch.n_mels, arch.frames, [&] { return normal(rng); }));
  }
  volatile float sink = 0.0f;
  auto run_once = [&] {
    for (const auto& x : batch) sink = sink + forward(x, params, arch);
  };

  SpeedResult r;
  r.input_seconds = input_seconds;
  r.timer_resolution = timer_resolution();
  for (int i = 0; i < protocol.warmup_runs; ++i) run_once();

  using clock = std::chrono::steady_clock;
  int runs = protocol.timed_runs;
  for (;;) {
    const auto t0 = clock::now();
    for (int i = 0; i < runs; ++i) run_once();
    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    r.timed_runs = runs;
    r.mean_seconds = elapsed / (static_cast<double>(runs) * protocol.batch_size);
    if (r.mean_seconds >= 100.0 * r.timer_resolution || runs >= (1 << 20)) break;
    r.warnings.push_back("mean time " + std::to_string(r.mean_seconds) + " s is under 100x the timer resolution; " +
                         "repeating with " + std::to_string(runs * 10) + " runs");
    runs *= 10;
  }
  r.audio_per_second = input_seconds / r.mean_seconds;
  return r;
}

ProfileReport profile(const Architecture& arch, const SpectrogramConfig& spectrogram) {
  arch.validate();
  ProfileReport r;
  if (arch.tokenizer.family == TokenizerFamily::vit) {
    r.model = "vit-p" + std::to_string(arch.tokenizer.patch.p);
  } else {
    const auto& c = arch.tokenizer.clip;
    r.model = "spectttra-" + std::string(to_string(c.variant));
    if (c.variant == Variant::custom) r.model += "-f" + std::to_string(c.f) + "t" + std::to_string(c.t);
    if (!c.spectral_enabled) r.model += "-temporal-only";
    if (!c.temporal_enabled) r.model += "-spectral-only";
  }
  r.frames = arch.frames;
  r.input_seconds =
      static_cast<double>(spectrogram.n_fft + (arch.frames - 1) * spectrogram.hop_length) / spectrogram.sample_rate;
  r.n_tokens = arch.n_tokens();
  const FlopCounts f = analytic_flops(arch);
  r.flops_total = f.total();
  r.flops_attention = f.attention;
  r.params = count_params(arch);
  r.activations = count_activations(arch);
  r.peak_bytes_estimate = r.activations * static_cast<std::int64_t>(sizeof(float)) * r.memory_batch_size;
  r.machine = machine_descriptor();
  return r;
}

std::string profile_csv_header() {
  return "model,frames,input_seconds,n_tokens,flops_total,flops_attention,params,activations,peak_bytes_estimate,"
         "memory_batch_size,timed,audio_per_second,warmup_runs,timed_runs,batch_size,machine";
}

std::string profile_csv_row(const ProfileReport& r) {
  std::string machine = r.machine;
  for (char& c : machine) {
    if (c == '"') c = '\'';
  }
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%d,%.6g,%lld,%lld,%lld,%lld,%lld,%lld,%d,%d,%.6g,%d,%d,%d,", r.model.c_str(),
                r.frames, r.input_seconds, static_cast<long long>(r.n_tokens), static_cast<long long>(r.flops_total),
                static_cast<long long>(r.flops_attention), static_cast<long long>(r.params),
                static_cast<long long>(r.activations), static_cast<long long>(r.peak_bytes_estimate),
                r.memory_batch_size, r.timed ? 1 : 0, r.audio_per_second, r.protocol.warmup_runs,
                r.protocol.timed_runs, r.protocol.batch_size);
  return buf + ("\"" + machine + "\"");
}

std::string profile_text(const ProfileReport& r) {
  std::ostringstream out;
  out.precision(4);
  out << "model            " << r.model << "\n"
      << "input            " << r.frames << " frames (" << r.input_seconds << " s)\n"
      << "tokens           " << r.n_tokens << "\n"
      << "GFLOPs           " << static_cast<double>(r.flops_total) * 1e-9 << " (attention "
      << static_cast<double>(r.flops_attention) * 1e-9 << ")\n"
      << "params (M)       " << static_cast<double>(r.params) * 1e-6 << "\n"
      << "activations (M)  " << static_cast<double>(r.activations) * 1e-6 << "\n"
      << "peak mem (GB)    " << static_cast<double>(r.peak_bytes_estimate) * 1e-9 << " at batch "
      << r.memory_batch_size << "\n";
  if (r.timed) {
    out << "speed (A/S)      " << r.audio_per_second << " [" << r.protocol.warmup_runs << " warmup, "
        << r.protocol.timed_runs << " timed, batch " << r.protocol.batch_size << "]\n";
  }
  out << "machine          " << r.machine << "\n";
  return out.str();
}

}  // namespace spectttra
