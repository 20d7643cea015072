#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cndiff {

/// In-memory image of a "CNT1" container: an n-dimensional array of 32- or
/// 64-bit floats. Layout on disk is
///   magic "CNT1" | dtype u8 (1=f32, 2=f64) | ndim u8 | 2 reserved bytes |
///   ndim x u64 extents | row-major little-endian payload.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>> data;

  int dtype() const { return data.index() == 0 ? 1 : 2; }
  std::uint64_t element_count() const;

  /// Payload widened to doubles regardless of stored dtype.
  std::vector<double> as_f64() const;
};

void write_tensor(const std::filesystem::path& path,
                  std::span<const std::uint64_t> dims,
                  std::span<const float> payload);
void write_tensor(const std::filesystem::path& path,
                  std::span<const std::uint64_t> dims,
                  std::span<const double> payload);

Tensor read_tensor(const std::filesystem::path& path);

/// Sidecar provenance record. `artifact` is the data file the manifest
/// describes; the manifest itself lands at `<artifact>.manifest.json`.
void write_manifest(const std::filesystem::path& artifact,
                    const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& artifact);

std::filesystem::path manifest_path(const std::filesystem::path& artifact);

}  // namespace cndiff
