#include <cmath>

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <nlohmann/json.hpp>

#include "cndiff/covariance.hpp"
#include "cndiff/errors.hpp"
#include "cndiff/mask.hpp"
#include "cndiff/rng.hpp"

#include "test_support.hpp"

using namespace cndiff;

TEST_CASE("white ensemble estimate is close to the identity") {
  const auto masks = white_ensemble(4, 10000, 0x11);
  const Eigen::MatrixXd sigma = accumulate_covariance(masks, false);
  CHECK((sigma.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  double max_off = 0.0;
  for (int p = 0; p < 16; ++p)
    for (int q = 0; q < 16; ++q)
      if (p != q) max_off = std::max(max_off, std::abs(sigma(p, q)));
  CHECK(max_off < 0.05);
}

TEST_CASE("repeated mask gives the normalized rank-1 outer product") {
  const Mask m = white_mask(4, 0x12);
  const std::vector<Mask> masks = {m, m};
  const Eigen::MatrixXd sigma = accumulate_covariance(masks, false);

  const Eigen::Map<const Eigen::VectorXd> v(m.values.data(), 16);
  Eigen::MatrixXd expect = v * v.transpose();
  Eigen::VectorXd d = expect.diagonal().array().rsqrt();
  expect = d.asDiagonal() * expect * d.asDiagonal();
  CHECK((sigma - expect).cwiseAbs().maxCoeff() < 1e-12);

  // Rank one: second-largest eigenvalue magnitude is ~0.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  CHECK(es.eigenvalues()(14) < 1e-10);
  CHECK(es.eigenvalues()(15) == doctest::Approx(16.0));  // trace = n
}

TEST_CASE("toroidal-shift accumulation equals direct translated outer products") {
  const auto masks = white_ensemble(4, 3, 0x13);
  const Eigen::MatrixXd fast = accumulate_covariance(masks, true);

  // Direct route: every translation contributes an explicit outer product.
  const int r = 4;
  const Eigen::Index n = 16;
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, n);
  for (const Mask& m : masks) {
    for (int sy = 0; sy < r; ++sy) {
      for (int sx = 0; sx < r; ++sx) {
        Eigen::VectorXd v(n);
        for (int y = 0; y < r; ++y)
          for (int x = 0; x < r; ++x)
            v(y * r + x) =
                m.values[static_cast<std::size_t>((y + sy) % r) * r + (x + sx) % r];
        raw += v * v.transpose();
      }
    }
  }
  raw /= static_cast<double>(masks.size()) * 16.0;
  raw = ((raw + raw.transpose()) / 2.0).eval();
  Eigen::VectorXd d = raw.diagonal().array().rsqrt();
  const Eigen::MatrixXd direct = d.asDiagonal() * raw * d.asDiagonal();

  CHECK((fast - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("accumulate rejects bad ensembles") {
  CHECK_THROWS_AS(accumulate_covariance({}, false), std::invalid_argument);
  CHECK_THROWS_AS(accumulate_covariance({white_mask(4, 1)}, false),
                  std::invalid_argument);
  CHECK_THROWS_AS(accumulate_covariance({white_mask(4, 1), white_mask(8, 2)}, false),
                  std::invalid_argument);
}

TEST_CASE("regularize_psd leaves PSD inputs untouched") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
  const RegularizeResult r = regularize_psd(eye);
  CHECK(r.jitter == 0.0);
  CHECK((r.sigma - eye).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd sigma = testing::blue_model_r8().sigma;
  CHECK(regularize_psd(sigma).jitter == 0.0);
}

TEST_CASE("regularize_psd repairs an indefinite matrix") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, -1.0001, -1.0001, 1.0;
  const RegularizeResult r = regularize_psd(bad);
  CHECK(r.jitter > 0.0);
  CHECK(r.jitter <= 1e-2);
  CHECK((r.sigma.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.sigma);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
  CHECK_NOTHROW(cholesky(r.sigma));
}

TEST_CASE("regularize_psd gives up at the jitter cap") {
  Eigen::MatrixXd hopeless(2, 2);
  hopeless << 1.0, -2.0, -2.0, 1.0;  // eigenvalue -1, beyond any allowed jitter
  CHECK_THROWS_AS(regularize_psd(hopeless), NotPsdError);
}

TEST_CASE("cholesky hand-checked 2x2") {
  CHECK((cholesky(Eigen::MatrixXd::Identity(3, 3)) -
         Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Eigen::MatrixXd sigma(2, 2);
  sigma << 4.0, 2.0, 2.0, 3.0;
  const Eigen::MatrixXd L = cholesky(sigma);
  CHECK(L(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(L(0, 1) == doctest::Approx(0.0));
  CHECK(L(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(L(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("cholesky signals non-PSD and asymmetric inputs distinctly") {
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky(indefinite), NotPsdError);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.1, 1.0;
  CHECK_THROWS_AS(cholesky(asym), std::invalid_argument);
}

TEST_CASE("validate_factor flags a perturbed factor") {
  CovarianceModel ident;
  ident.resolution = 2;
  ident.sigma = Eigen::MatrixXd::Identity(4, 4);
  ident.factor = Eigen::MatrixXd::Identity(4, 4);
  const FactorReport clean = validate_factor(ident);
  CHECK(clean.reconstruction_rel_error == 0.0);
  CHECK(clean.min_factor_diag == 1.0);
  CHECK(clean.diag_unit_error == 0.0);

  CovarianceModel bent = ident;
  bent.factor(3, 1) += 1e-3;
  CHECK(validate_factor(bent).reconstruction_rel_error > 1e-4);
}

TEST_CASE("blue ensemble model passes its own validation") {
  const CovarianceModel& model = testing::blue_model_r8();
  const FactorReport report = validate_factor(model);
  CHECK(report.reconstruction_rel_error <= 1e-10);
  CHECK(report.min_factor_diag > 0.0);
  CHECK(report.diag_unit_error <= 1e-12);
}

TEST_CASE("annealed blue ensemble has negative nearest-neighbor correlation") {
  const int r = 16;
  const auto masks =
      anneal_ensemble(r, MaskMode::Blue, default_anneal_config(r, 0x16), 64, 2);
  const Eigen::MatrixXd sigma = accumulate_covariance(masks, true);
  // With toroidal shifts the estimate is circulant, so one pixel's neighbors
  // represent them all.
  const int p = 0;
  CHECK(sigma(p, 1) < 0.0);           // right neighbor
  CHECK(sigma(p, r) < 0.0);           // below neighbor
  CHECK(sigma(p, r - 1) < 0.0);       // left neighbor (wraps)
  CHECK(sigma(p, r * (r - 1)) < 0.0); // above neighbor (wraps)
}

TEST_CASE("covariance model round-trips through disk") {
  const CovarianceModel& model = testing::blue_model_r8();
  const auto dir = std::filesystem::temp_directory_path() / "cndiff_tests" / "cov";
  save_covariance_model(dir, model, true, nlohmann::json::object());
  const CovarianceModel back = load_covariance_model(dir);
  CHECK(back.resolution == model.resolution);
  CHECK(back.source_count == model.source_count);
  CHECK(back.regularization == model.regularization);
  CHECK((back.factor - model.factor).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.sigma - model.sigma).cwiseAbs().maxCoeff() == 0.0);
}
