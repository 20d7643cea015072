#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cndiff/mask.hpp"

namespace cndiff {

/// Pixel-pixel correlation model estimated from a mask ensemble, together
/// with its Cholesky factor (factor * factor^T == sigma).
struct CovarianceModel {
  int resolution = 0;
  Eigen::MatrixXd sigma;   // R^2 x R^2, symmetric, unit diagonal
  Eigen::MatrixXd factor;  // lower triangular, positive diagonal
  std::size_t source_count = 0;
  double regularization = 0.0;
};

/// Mean of m m^T over the ensemble (masks flattened row-major, zero mean
/// assumed), symmetrized and diagonal-normalized to a correlation matrix.
/// With `use_toroidal_shifts` every mask contributes all R^2 toroidal
/// translations of itself, which this implementation folds into a single
/// autocorrelation pass per mask.
Eigen::MatrixXd accumulate_covariance(const std::vector<Mask>& masks,
                                      bool use_toroidal_shifts);

struct RegularizeResult {
  Eigen::MatrixXd sigma;
  double jitter = 0.0;  // 0 when the input was already factorizable
};

/// Adds jitter*I (escalating tenfold from `initial_jitter` up to 1e-2) until
/// the matrix admits a Cholesky factorization, re-normalizing the diagonal
/// to 1 after each attempt. Throws NotPsdError if the cap is reached.
RegularizeResult regularize_psd(const Eigen::MatrixXd& sigma,
                                double initial_jitter = 1e-8);

/// Lower-triangular L with L L^T = sigma. Throws NotPsdError when sigma is
/// not positive definite.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& sigma);

struct FactorReport {
  double reconstruction_rel_error = 0.0;  // ||L L^T - sigma||_F / ||sigma||_F
  double min_factor_diag = 0.0;
  double diag_unit_error = 0.0;  // max |sigma_ii - 1|
};

FactorReport validate_factor(const CovarianceModel& model);

/// Full pipeline: accumulate, regularize, factor.
CovarianceModel build_covariance_model(const std::vector<Mask>& masks,
                                       bool use_toroidal_shifts = true);

/// Writes factor.cnt (and optionally sigma.cnt) plus a manifest into `dir`.
void save_covariance_model(const std::filesystem::path& dir,
                           const CovarianceModel& model, bool include_sigma,
                           const nlohmann::json& extra_manifest);
CovarianceModel load_covariance_model(const std::filesystem::path& dir);

}  // namespace cndiff
