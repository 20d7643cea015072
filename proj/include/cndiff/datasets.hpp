#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

namespace cndiff {

enum class DatasetKind { Signals1d, Blobs16, Stripes16 };

DatasetKind parse_dataset_kind(const std::string& name);
std::string dataset_kind_name(DatasetKind kind);

/// Procedural sample source with values in [-1, 1]. Samples are addressed by
/// index, so any index range is an i.i.d. draw and disjoint ranges give
/// disjoint train/held-out splits.
struct ToyDataset {
  DatasetKind kind = DatasetKind::Signals1d;
  std::uint64_t seed = 0;

  Eigen::Index dim() const;
  Eigen::VectorXd sample(std::uint64_t index) const;
};

}  // namespace cndiff
