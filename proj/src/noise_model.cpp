#include "cndiff/noise_model.hpp"

#include <cmath>
#include <stdexcept>

#include "cndiff/rng.hpp"

namespace cndiff {

namespace {

Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& grid) {
  Eigen::VectorXd v(grid.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.cols(); ++j) v(k++) = grid(i, j);
  return v;
}

Eigen::MatrixXd unflatten_rowmajor(const Eigen::VectorXd& v, int rows, int cols) {
  Eigen::MatrixXd grid(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) grid(i, j) = v(k++);
  return grid;
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must be in [0, 1]");
  }
}

}  // namespace

NoiseModel NoiseModel::from_covariance(const CovarianceModel& cov,
                                       NoiseKind kind) {
  NoiseModel model;
  model.factor = cov.factor;
  model.base_resolution = cov.resolution;
  model.kind = kind;
  model.validate();
  return model;
}

NoiseModel NoiseModel::identity(Eigen::Index dim) {
  NoiseModel model;
  model.factor = Eigen::MatrixXd::Identity(dim, dim);
  const auto root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  model.base_resolution =
      static_cast<Eigen::Index>(root) * root == dim ? root : 0;
  model.kind = NoiseKind::White;
  return model;
}

void NoiseModel::validate() const {
  if (factor.rows() != factor.cols() || factor.rows() < 1) {
    throw std::invalid_argument("noise factor must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    if (!(factor(i, i) > 0.0)) {
      throw std::invalid_argument("noise factor needs a positive diagonal");
    }
    for (Eigen::Index j = i + 1; j < factor.cols(); ++j) {
      if (factor(i, j) != 0.0) {
        throw std::invalid_argument("noise factor must be lower triangular");
      }
    }
  }
}

NoiseSample sample_white(int rows, int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("noise shape must be positive");
  }
  NoiseSample s;
  s.kind = NoiseKind::White;
  s.gamma = 1.0;
  s.seed = seed;
  s.values.resize(rows, cols);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) s.values(i, j) = rng.normal();
  return s;
}

Eigen::MatrixXd blend_factor(const NoiseModel& model, double gamma) {
  check_gamma(gamma);
  const Eigen::Index n = model.dim();
  return gamma * Eigen::MatrixXd::Identity(n, n) + (1.0 - gamma) * model.factor;
}

Eigen::VectorXd blend_apply(const NoiseModel& model, double gamma,
                            const Eigen::VectorXd& eps) {
  check_gamma(gamma);
  if (eps.size() != model.dim()) {
    throw std::invalid_argument("epsilon length does not match noise factor");
  }
  if (gamma == 1.0) {
    return eps;  // pure white: L_w = I, no multiplication needed
  }
  Eigen::VectorXd correlated =
      model.factor.triangularView<Eigen::Lower>() * eps;
  if (gamma == 0.0) {
    return correlated;
  }
  return gamma * eps + (1.0 - gamma) * correlated;
}

NoiseSample sample_correlated(const NoiseModel& model, double gamma,
                              const NoiseSample& epsilon) {
  check_gamma(gamma);
  if (epsilon.values.size() != model.dim()) {
    throw std::invalid_argument("epsilon shape does not match noise factor");
  }
  NoiseSample out;
  out.gamma = gamma;
  out.seed = epsilon.seed;
  out.kind = gamma == 1.0 ? NoiseKind::White
             : gamma == 0.0 ? model.kind
                            : NoiseKind::Blend;
  const Eigen::VectorXd blended =
      blend_apply(model, gamma, flatten_rowmajor(epsilon.values));
  out.values = unflatten_rowmajor(blended, static_cast<int>(epsilon.values.rows()),
                                  static_cast<int>(epsilon.values.cols()));
  return out;
}

NoiseSample tile_noise(const NoiseModel& model, double gamma, int rows,
                       int cols, TileMode mode, std::uint64_t seed) {
  check_gamma(gamma);
  const int r = model.base_resolution;
  if (r < 1) {
    throw std::invalid_argument("noise model has no square base resolution");
  }
  if (rows < r || cols < r || rows % r != 0 || cols % r != 0) {
    throw std::invalid_argument(
        "target extents must be positive multiples of the base resolution");
  }
  NoiseSample out;
  out.gamma = gamma;
  out.seed = seed;
  out.kind = gamma == 1.0 ? NoiseKind::White
             : gamma == 0.0 ? model.kind
                            : NoiseKind::Blend;
  out.values.resize(rows, cols);

  const int tiles_y = rows / r;
  const int tiles_x = cols / r;
  std::uint64_t stream = 0;
  NoiseSample repeat_tile;
  if (mode == TileMode::Repeat) {
    repeat_tile = sample_correlated(
        model, gamma, sample_white(r, r, substream_seed(seed, stream++)));
  }
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const NoiseSample tile =
          mode == TileMode::Repeat
              ? repeat_tile
              : sample_correlated(
                    model, gamma,
                    sample_white(r, r, substream_seed(seed, stream++)));
      out.values.block(static_cast<Eigen::Index>(ty) * r,
                       static_cast<Eigen::Index>(tx) * r, r, r) = tile.values;
    }
  }
  return out;
}

}  // namespace cndiff
