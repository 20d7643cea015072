#pragma once

#include <filesystem>

#include <Eigen/Core>

namespace cndiff {

/// 8-bit binary PGM preview: values are clamped to mean +/- 3 standard
/// deviations and mapped linearly onto 0..255.
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& grid);

}  // namespace cndiff
