#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "spectttra/frontend.hpp"
#include "spectttra/model.hpp"

namespace spectttra {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

/// A model together with the configuration needed to feed it.
template <typename Real>
struct ModelBundle {
  SpectrogramConfig spectrogram;
  Architecture arch;
  ModelParams<Real> params;
  std::map<std::string, std::string> info;  // free-form provenance (epoch, seed, ...)
};

/// Layout (all integers little-endian):
///   "STTRCKPT" | u32 version | u32 meta_len | meta (JSON, UTF-8) | u32 n_tensors |
///   n_tensors x { u32 name_len | name | u8 dtype | u8 ndim | u64 dims[ndim] | raw data }
template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelBundle<Real>& bundle);

/// Loads any stored dtype and converts to Real. Throws on a bad magic, an
/// unknown version, or a tensor whose name or shape does not match the
/// architecture in the metadata.
template <typename Real>
ModelBundle<Real> load_checkpoint(const std::filesystem::path& path);

}  // namespace spectttra
