#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "cndiff/covariance.hpp"

namespace cndiff {

enum class NoiseKind { White, Blue, Red, Blend };
enum class TileMode { Independent, Repeat };

/// Pair of noise factors used by the time-varying blend: the white factor is
/// the identity (never materialized), the correlated factor comes from a
/// covariance model (blue or red).
struct NoiseModel {
  Eigen::MatrixXd factor;  // L_b: lower triangular, positive diagonal
  int base_resolution = 0;  // side length when the factor models a square grid
  NoiseKind kind = NoiseKind::Blue;

  Eigen::Index dim() const { return factor.rows(); }

  static NoiseModel from_covariance(const CovarianceModel& model,
                                    NoiseKind kind = NoiseKind::Blue);
  /// Identity factor: correlated sampling degenerates to white noise.
  static NoiseModel identity(Eigen::Index dim);

  void validate() const;
};

struct NoiseSample {
  Eigen::MatrixXd values;  // rows x cols grid
  NoiseKind kind = NoiseKind::White;
  double gamma = 1.0;  // blend coefficient that produced the sample
  std::uint64_t seed = 0;
};

/// i.i.d. standard-normal grid; deterministic in the seed.
NoiseSample sample_white(int rows, int cols, std::uint64_t seed);

/// L_t = gamma * I + (1 - gamma) * L_b, materialized as a dense matrix.
Eigen::MatrixXd blend_factor(const NoiseModel& model, double gamma);

/// gamma * eps + (1 - gamma) * (L_b eps) without forming L_t; the white
/// part is a plain scale because its factor is the identity.
Eigen::VectorXd blend_apply(const NoiseModel& model, double gamma,
                            const Eigen::VectorXd& eps);

/// blend_apply over a grid-shaped epsilon of the model's base resolution.
NoiseSample sample_correlated(const NoiseModel& model, double gamma,
                              const NoiseSample& epsilon);

/// Fills a (rows x cols) grid with base-resolution tiles: independent mode
/// draws a fresh correlated sample per tile, repeat mode replicates one.
/// Target extents must be multiples of the base resolution.
NoiseSample tile_noise(const NoiseModel& model, double gamma, int rows,
                       int cols, TileMode mode, std::uint64_t seed);

}  // namespace cndiff
