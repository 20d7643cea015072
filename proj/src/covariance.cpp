#include "cndiff/covariance.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "cndiff/errors.hpp"
#include "cndiff/tensorio.hpp"

namespace cndiff {

namespace {

// Sum over all toroidal translations of the outer product m m^T collapses to
// the circular autocorrelation: entry (p, q) of the sum equals A(q - p) with
// A(d) = sum_r m[r] m[r + d] (indices mod the grid). One O(n^2) pass per mask
// instead of n outer products.
void add_shift_autocorrelation(const Mask& mask, Eigen::VectorXd& acc) {
  const int r = mask.resolution;
  const auto at = [&](int y, int x) {
    return mask.values[static_cast<std::size_t>(((y % r) + r) % r) * r +
                       static_cast<std::size_t>(((x % r) + r) % r)];
  };
  for (int dy = 0; dy < r; ++dy) {
    for (int dx = 0; dx < r; ++dx) {
      double s = 0.0;
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          s += at(y, x) * at(y + dy, x + dx);
        }
      }
      acc(static_cast<Eigen::Index>(dy) * r + dx) += s;
    }
  }
}

Eigen::MatrixXd correlation_from_raw(Eigen::MatrixXd raw) {
  raw = ((raw + raw.transpose()) * 0.5).eval();
  Eigen::VectorXd d = raw.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0)) {
      throw std::invalid_argument(
          "covariance diagonal must be positive for normalization");
    }
    d(i) = 1.0 / std::sqrt(d(i));
  }
  return d.asDiagonal() * raw * d.asDiagonal();
}

bool llt_ok(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

Eigen::MatrixXd accumulate_covariance(const std::vector<Mask>& masks,
                                      bool use_toroidal_shifts) {
  if (masks.size() < 2) {
    throw std::invalid_argument("need at least 2 masks to estimate covariance");
  }
  const int r = masks.front().resolution;
  for (const Mask& m : masks) {
    if (m.resolution != r) {
      throw std::invalid_argument("mixed mask resolutions in ensemble");
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(r) * r;

  if (use_toroidal_shifts) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (const Mask& m : masks) add_shift_autocorrelation(m, acc);
    acc /= static_cast<double>(masks.size()) * static_cast<double>(n);
    Eigen::MatrixXd raw(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
      const int py = static_cast<int>(p) / r, px = static_cast<int>(p) % r;
      for (Eigen::Index q = 0; q < n; ++q) {
        const int qy = static_cast<int>(q) / r, qx = static_cast<int>(q) % r;
        const int dy = ((qy - py) % r + r) % r;
        const int dx = ((qx - px) % r + r) % r;
        raw(p, q) = acc(static_cast<Eigen::Index>(dy) * r + dx);
      }
    }
    return correlation_from_raw(std::move(raw));
  }

  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, n);
  for (const Mask& m : masks) {
    const Eigen::Map<const Eigen::VectorXd> v(m.values.data(), n);
    raw.selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0);
  }
  raw = raw.selfadjointView<Eigen::Lower>();
  raw /= static_cast<double>(masks.size());
  return correlation_from_raw(std::move(raw));
}

RegularizeResult regularize_psd(const Eigen::MatrixXd& sigma,
                                double initial_jitter) {
  if (sigma.rows() != sigma.cols()) {
    throw std::invalid_argument("regularize_psd: matrix must be square");
  }
  if (llt_ok(sigma)) {
    return {sigma, 0.0};
  }
  const Eigen::Index n = sigma.rows();
  // Tolerant cap so the 1e-2 step itself is attempted despite rounding in
  // the repeated multiplication.
  for (double jitter = initial_jitter; jitter <= 1e-2 * (1.0 + 1e-9);
       jitter *= 10.0) {
    Eigen::MatrixXd candidate =
        sigma + jitter * Eigen::MatrixXd::Identity(n, n);
    candidate = correlation_from_raw(std::move(candidate));
    if (llt_ok(candidate)) {
      return {std::move(candidate), jitter};
    }
  }
  throw NotPsdError("regularize_psd: jitter cap 1e-2 reached");
}

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) {
    throw std::invalid_argument("cholesky: matrix must be square");
  }
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("cholesky: matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NotPsdError("cholesky: matrix is not positive definite");
  }
  return llt.matrixL();
}

FactorReport validate_factor(const CovarianceModel& model) {
  FactorReport report;
  const Eigen::MatrixXd recon = model.factor * model.factor.transpose();
  const double denom = model.sigma.norm();
  report.reconstruction_rel_error =
      denom > 0.0 ? (recon - model.sigma).norm() / denom : 0.0;
  report.min_factor_diag = model.factor.diagonal().minCoeff();
  report.diag_unit_error =
      (model.sigma.diagonal().array() - 1.0).abs().maxCoeff();
  return report;
}

CovarianceModel build_covariance_model(const std::vector<Mask>& masks,
                                       bool use_toroidal_shifts) {
  CovarianceModel model;
  model.resolution = masks.empty() ? 0 : masks.front().resolution;
  model.source_count = masks.size();
  const Eigen::MatrixXd estimate =
      accumulate_covariance(masks, use_toroidal_shifts);
  RegularizeResult reg = regularize_psd(estimate);
  model.sigma = std::move(reg.sigma);
  model.regularization = reg.jitter;
  model.factor = cholesky(model.sigma);
  return model;
}

void save_covariance_model(const std::filesystem::path& dir,
                           const CovarianceModel& model, bool include_sigma,
                           const nlohmann::json& extra_manifest) {
  std::filesystem::create_directories(dir);
  const Eigen::Index n = model.factor.rows();
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(n)};
  // Row-major on disk.
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor factor_rm = model.factor;
  write_tensor(dir / "factor.cnt", dims,
               std::span<const double>(factor_rm.data(),
                                       static_cast<std::size_t>(n) * n));
  if (include_sigma) {
    const RowMajor sigma_rm = model.sigma;
    write_tensor(dir / "sigma.cnt", dims,
                 std::span<const double>(sigma_rm.data(),
                                         static_cast<std::size_t>(n) * n));
  }
  nlohmann::json manifest = extra_manifest;
  manifest["resolution"] = model.resolution;
  manifest["source_count"] = model.source_count;
  manifest["regularization"] = model.regularization;
  manifest["sigma_included"] = include_sigma;
  write_manifest(dir / "factor.cnt", manifest);
}

CovarianceModel load_covariance_model(const std::filesystem::path& dir) {
  CovarianceModel model;
  const Tensor t = read_tensor(dir / "factor.cnt");
  if (t.dims.size() != 2 || t.dims[0] != t.dims[1]) {
    throw TensorIoError(TensorIoError::Code::BadDims,
                        "factor tensor must be square");
  }
  const auto n = static_cast<Eigen::Index>(t.dims[0]);
  const std::vector<double> data = t.as_f64();
  model.factor = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), n, n);
  if (std::filesystem::exists(dir / "sigma.cnt")) {
    const Tensor ts = read_tensor(dir / "sigma.cnt");
    const std::vector<double> sdata = ts.as_f64();
    model.sigma = Eigen::Map<const Eigen::Matrix<
        double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(sdata.data(),
                                                                  n, n);
  } else {
    model.sigma = model.factor * model.factor.transpose();
  }
  const nlohmann::json manifest = read_manifest(dir / "factor.cnt");
  model.resolution = manifest.value("resolution", 0);
  model.source_count = manifest.value("source_count", std::size_t{0});
  model.regularization = manifest.value("regularization", 0.0);
  if (model.resolution == 0) {
    model.resolution = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  }
  return model;
}

}  // namespace cndiff
