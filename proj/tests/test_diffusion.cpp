#include <cmath>

#include "doctest.h"

#include "cndiff/diffusion.hpp"
#include "cndiff/rng.hpp"

#include "test_support.hpp"

using namespace cndiff;
using cndiff::testing::bitwise_equal;

namespace {

Eigen::VectorXd random_vec(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

NoiseModel scalar_model(double factor) {
  NoiseModel m;
  m.factor = Eigen::MatrixXd::Constant(1, 1, factor);
  m.base_resolution = 1;
  return m;
}

}  // namespace

TEST_CASE("forward endpoints are exact") {
  const NoiseModel& model = testing::dense_noise_r4();
  const Eigen::VectorXd x0 = random_vec(model.dim(), 41);
  const Eigen::VectorXd eps = random_vec(model.dim(), 42);
  CHECK(bitwise_equal(forward_sample(x0, eps, 0.0, 0.3, model), x0));
  CHECK(bitwise_equal(forward_sample(x0, eps, 1.0, 1.0, model), eps));
  CHECK_THROWS_AS(forward_sample(x0, eps, 1.2, 0.5, model), std::invalid_argument);
}

TEST_CASE("scalar toy forward value") {
  const NoiseModel m = scalar_model(0.5);
  Eigen::VectorXd x0(1), eps(1);
  x0 << 2.0;
  eps << 1.0;
  // L_t = 0.5*1 + 0.5*0.5 = 0.75; x_t = 0.4*0.75*1 + 0.6*2 = 1.5.
  const Eigen::VectorXd xt = forward_sample(x0, eps, 0.4, 0.5, m);
  CHECK(xt(0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("oracle targets") {
  const Schedule s = build_schedule(5, {});

  SUBCASE("identity factor zeroes the second head") {
    const NoiseModel ident = NoiseModel::identity(6);
    const Eigen::VectorXd x0 = random_vec(6, 43);
    const Eigen::VectorXd eps = random_vec(6, 44);
    for (int t = 1; t <= 5; ++t) {
      const DenoiserOutput out = oracle_denoiser(x0, eps, t, s, ident);
      CHECK(out.d2.cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("alpha_0 = 0 zeroes the second head at t = 1") {
    const NoiseModel& model = testing::dense_noise_r4();
    const Eigen::VectorXd x0 = random_vec(model.dim(), 45);
    const Eigen::VectorXd eps = random_vec(model.dim(), 46);
    const DenoiserOutput out = oracle_denoiser(x0, eps, 1, s, model);
    CHECK(out.d2.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("scalar toy targets") {
    const NoiseModel m = scalar_model(0.5);
    Eigen::VectorXd x0(1), eps(1);
    x0 << 2.0;
    eps << 1.0;
    // gamma_2 of the default schedule; d1 = x0 - L_t eps.
    const DenoiserOutput out = oracle_denoiser(x0, eps, 2, s, m);
    const double g = s.gamma[2];
    const double lt = g * 1.0 + (1.0 - g) * 0.5;
    CHECK(out.d1(0) == doctest::Approx(2.0 - lt).epsilon(1e-14));
    CHECK(out.d2(0) ==
          doctest::Approx(s.alpha[1] * (0.5 - 1.0) * 1.0).epsilon(1e-14));
  }
}

TEST_CASE("backward step with oracle outputs inverts one forward step") {
  const NoiseModel& model = testing::dense_noise_r4();
  const Schedule s = build_schedule(50, {});
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x0 = random_vec(model.dim(), 100 + trial);
    const Eigen::VectorXd eps = random_vec(model.dim(), 200 + trial);
    const int t = 1 + static_cast<int>(rng.below(50));
    const Eigen::VectorXd xt =
        forward_sample(x0, eps, s.alpha[static_cast<std::size_t>(t)],
                       s.gamma[static_cast<std::size_t>(t)], model);
    const Eigen::VectorXd xprev =
        forward_sample(x0, eps, s.alpha[static_cast<std::size_t>(t) - 1],
                       s.gamma[static_cast<std::size_t>(t) - 1], model);
    const Eigen::VectorXd stepped =
        backward_step(xt, oracle_denoiser(x0, eps, t, s, model), t, s);
    CHECK((stepped - xprev).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("degenerate factors reduce the step to plain deblending") {
  const NoiseModel ident = NoiseModel::identity(8);
  // Pure white: constant gamma keeps the blend on the shortcut path, so the
  // comparison below can be exact rather than within rounding.
  const Schedule s = with_constant_gamma(build_schedule(20, {}), 1.0);
  const Eigen::VectorXd x0 = random_vec(8, 48);
  const Eigen::VectorXd eps = random_vec(8, 49);
  const int t = 7;
  const Eigen::VectorXd xt =
      forward_sample(x0, eps, s.alpha[7], s.gamma[7], ident);
  const Eigen::VectorXd stepped =
      backward_step(xt, oracle_denoiser(x0, eps, t, s, ident), t, s);
  const Eigen::VectorXd reference = xt + (s.alpha[7] - s.alpha[6]) * (x0 - eps);
  CHECK(bitwise_equal(stepped, reference));
}

TEST_CASE("zero denoiser output leaves the state unchanged") {
  const Schedule s = build_schedule(20, {});
  const Eigen::VectorXd x = random_vec(5, 50);
  DenoiserOutput zero;
  zero.d1 = Eigen::VectorXd::Zero(5);
  zero.d2 = Eigen::VectorXd::Zero(5);
  CHECK(bitwise_equal(backward_step(x, zero, 13, s), x));
}

TEST_CASE("factor blend telescopes across adjacent steps") {
  const NoiseModel& model = testing::blue_noise_r8();
  const Schedule s = build_schedule(25, {});
  const Eigen::Index n = model.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (int t = 1; t <= 25; ++t) {
    const Eigen::MatrixXd lt = blend_factor(model, s.gamma[static_cast<std::size_t>(t)]);
    const Eigen::MatrixXd lprev =
        blend_factor(model, s.gamma[static_cast<std::size_t>(t) - 1]);
    const double dg = s.gamma[static_cast<std::size_t>(t)] -
                      s.gamma[static_cast<std::size_t>(t) - 1];
    const Eigen::MatrixXd reconstructed = lt + dg * (model.factor - eye);
    CHECK((lprev - reconstructed).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("one-step reconstruction identity") {
  const NoiseModel& model = testing::dense_noise_r4();
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x0 = random_vec(model.dim(), 300 + trial);
    const Eigen::VectorXd eps = random_vec(model.dim(), 400 + trial);
    const double alpha = rng.uniform();
    const double gamma = rng.uniform();
    const Eigen::VectorXd xt = forward_sample(x0, eps, alpha, gamma, model);
    const Eigen::VectorXd lte = blend_apply(model, gamma, eps);
    const Eigen::VectorXd rebuilt = xt + alpha * (x0 - lte);
    CHECK((rebuilt - x0).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("oracle-driven generation reconstructs x0") {
  const NoiseModel& model = testing::blue_noise_r8();
  const Schedule s = build_schedule(250, {});
  const Eigen::VectorXd x0 = random_vec(model.dim(), 52);
  const Eigen::VectorXd eps = random_vec(model.dim(), 53);
  const Denoiser oracle = make_oracle(x0, eps, s, model);
  const Eigen::VectorXd x_top = forward_sample(x0, eps, 1.0, s.gamma[250], model);
  const Eigen::VectorXd rebuilt = generate_from(x_top, oracle, s);
  CHECK((rebuilt - x0).cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("early stop at the top is the one-step reconstruction") {
    const Eigen::VectorXd one_step = generate_from(x_top, oracle, s, 250);
    CHECK((one_step - x0).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("intermediate early stop still lands on x0") {
    const Eigen::VectorXd stopped = generate_from(x_top, oracle, s, 100);
    CHECK((stopped - x0).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("seeded generation is deterministic") {
  const NoiseModel& model = testing::dense_noise_r4();
  const Schedule s = build_schedule(30, {});
  const Denoiser oracle =
      make_oracle(random_vec(model.dim(), 54), random_vec(model.dim(), 55), s, model);
  const Eigen::VectorXd a = generate(oracle, s, model.dim(), 56);
  const Eigen::VectorXd b = generate(oracle, s, model.dim(), 56);
  CHECK(bitwise_equal(a, b));
}

TEST_CASE("ddim step inverts the ddim forward relation") {
  const NoiseModel& model = testing::blue_noise_r8();
  const Schedule s = build_schedule(100, {}, ScheduleVariant::Ddim);
  const Eigen::VectorXd x0 = random_vec(model.dim(), 57);
  const Eigen::VectorXd eps = random_vec(model.dim(), 58);
  const Eigen::VectorXd correlated =
      model.factor.triangularView<Eigen::Lower>() * eps;
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const auto i = static_cast<std::size_t>(t);
    const Eigen::VectorXd xt = ddim_forward_sample(x0, eps, t, s, model);
    const Eigen::VectorXd xprev = ddim_forward_sample(x0, eps, t - 1, s, model);
    const Eigen::VectorXd lt_eps =
        s.gamma[i] * eps + (1.0 - s.gamma[i]) * correlated;
    const Eigen::VectorXd stepped =
        ddim_backward_step(xt, lt_eps, correlated - eps, t, s);
    CHECK((stepped - xprev).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("ddim with constant gamma and identity factor is the classic step") {
  const NoiseModel ident = NoiseModel::identity(6);
  const Schedule s =
      with_constant_gamma(build_schedule(40, {}, ScheduleVariant::Ddim), 1.0);
  const Eigen::VectorXd x0 = random_vec(6, 60);
  const Eigen::VectorXd eps = random_vec(6, 61);
  const int t = 17;
  const auto i = static_cast<std::size_t>(t);
  const Eigen::VectorXd xt = ddim_forward_sample(x0, eps, t, s, ident);
  const Eigen::VectorXd stepped =
      ddim_backward_step(xt, eps, Eigen::VectorXd::Zero(6), t, s);
  // Classic deterministic update: predict x0, renoise to t-1.
  const Eigen::VectorXd x0_hat =
      (xt - std::sqrt(1.0 - s.alpha_bar[i]) * eps) / std::sqrt(s.alpha_bar[i]);
  const Eigen::VectorXd expect = std::sqrt(s.alpha_bar[i - 1]) * x0_hat +
                                 std::sqrt(1.0 - s.alpha_bar[i - 1]) * eps;
  CHECK((stepped - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ddim t=1 has no leftover-noise coefficient") {
  const Schedule s = build_schedule(30, {}, ScheduleVariant::Ddim);
  const Eigen::VectorXd x = random_vec(4, 62);
  const Eigen::VectorXd lt_eps = random_vec(4, 63);
  // The diff term is scaled by sqrt(1 - abar_0) = 0: any value gives the
  // same output.
  const Eigen::VectorXd a = ddim_backward_step(x, lt_eps, random_vec(4, 64), 1, s);
  const Eigen::VectorXd b = ddim_backward_step(x, lt_eps, random_vec(4, 65), 1, s);
  CHECK(bitwise_equal(a, b));
}

TEST_CASE("ddim oracle chain reconstructs x0") {
  const NoiseModel& model = testing::blue_noise_r8();
  const Schedule s = build_schedule(250, {}, ScheduleVariant::Ddim);
  const Eigen::VectorXd x0 = random_vec(model.dim(), 66);
  const Eigen::VectorXd eps = random_vec(model.dim(), 67);
  const Eigen::VectorXd x_top = ddim_forward_sample(x0, eps, 250, s, model);
  const Eigen::VectorXd rebuilt =
      generate_ddim_from(x_top, make_ddim_oracle(eps, s, model), s);
  CHECK((rebuilt - x0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ddim entry points insist on the ddim variant") {
  const Schedule blend = build_schedule(10, {});
  const Eigen::VectorXd v = random_vec(3, 68);
  CHECK_THROWS_AS(ddim_backward_step(v, v, v, 5, blend), std::invalid_argument);
}
