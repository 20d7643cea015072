#include "cndiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "cndiff/rng.hpp"

namespace cndiff {

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  }
}

void check_step(int t, const Schedule& schedule) {
  if (t < 1 || t > schedule.total) {
    throw std::invalid_argument("step must be in [1, T]");
  }
}

}  // namespace

Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& eps, double alpha,
                               double gamma, const NoiseModel& model) {
  check_unit(alpha, "alpha");
  check_unit(gamma, "gamma");
  if (x0.size() != eps.size()) {
    throw std::invalid_argument("x0 and eps must have equal length");
  }
  const Eigen::VectorXd noise = blend_apply(model, gamma, eps);
  return alpha * noise + (1.0 - alpha) * x0;
}

DenoiserOutput oracle_denoiser(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& eps, int t,
                               const Schedule& schedule,
                               const NoiseModel& model) {
  check_step(t, schedule);
  const auto i = static_cast<std::size_t>(t);
  DenoiserOutput out;
  out.d1 = x0 - blend_apply(model, schedule.gamma[i], eps);
  const Eigen::VectorXd correlated =
      model.factor.triangularView<Eigen::Lower>() * eps;
  out.d2 = schedule.alpha[i - 1] * (correlated - eps);
  return out;
}

Denoiser make_oracle(Eigen::VectorXd x0, Eigen::VectorXd eps,
                     const Schedule& schedule, const NoiseModel& model) {
  Eigen::VectorXd correlated =
      model.factor.triangularView<Eigen::Lower>() * eps;
  return [x0 = std::move(x0), eps = std::move(eps),
          correlated = std::move(correlated),
          schedule](const Eigen::VectorXd&, int t) {
    check_step(t, schedule);
    const auto i = static_cast<std::size_t>(t);
    const double g = schedule.gamma[i];
    DenoiserOutput out;
    if (g == 1.0) {
      out.d1 = x0 - eps;
    } else {
      out.d1 = x0 - (g * eps + (1.0 - g) * correlated);
    }
    out.d2 = schedule.alpha[i - 1] * (correlated - eps);
    return out;
  };
}

Eigen::VectorXd backward_step(const Eigen::VectorXd& x_t,
                              const DenoiserOutput& out, int t,
                              const Schedule& schedule) {
  check_step(t, schedule);
  const auto i = static_cast<std::size_t>(t);
  const double da = schedule.alpha[i] - schedule.alpha[i - 1];
  const double dg = schedule.gamma[i] - schedule.gamma[i - 1];
  return x_t + da * out.d1 + dg * out.d2;
}

Eigen::VectorXd generate_from(Eigen::VectorXd x_init, const Denoiser& denoiser,
                              const Schedule& schedule, int early_stop) {
  if (early_stop < 0 || early_stop > schedule.total) {
    throw std::invalid_argument("early_stop must be in [0, T]");
  }
  Eigen::VectorXd x = std::move(x_init);
  for (int t = schedule.total; t > early_stop; --t) {
    x = backward_step(x, denoiser(x, t), t, schedule);
  }
  if (early_stop > 0) {
    const DenoiserOutput out = denoiser(x, early_stop);
    x += schedule.alpha[static_cast<std::size_t>(early_stop)] * out.d1;
  }
  return x;
}

Eigen::VectorXd generate(const Denoiser& denoiser, const Schedule& schedule,
                         Eigen::Index dim, std::uint64_t seed,
                         int early_stop) {
  Rng rng(seed);
  Eigen::VectorXd x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x(i) = rng.normal();
  return generate_from(std::move(x), denoiser, schedule, early_stop);
}

Eigen::VectorXd ddim_forward_sample(const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& eps, int t,
                                    const Schedule& schedule,
                                    const NoiseModel& model) {
  if (schedule.variant != ScheduleVariant::Ddim) {
    throw std::invalid_argument("schedule must be the ddim variant");
  }
  if (t < 0 || t > schedule.total) {
    throw std::invalid_argument("step must be in [0, T]");
  }
  const auto i = static_cast<std::size_t>(t);
  const double abar = schedule.alpha_bar[i];
  const Eigen::VectorXd noise = blend_apply(model, schedule.gamma[i], eps);
  return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * noise;
}

Eigen::VectorXd ddim_backward_step(const Eigen::VectorXd& x_t,
                                   const Eigen::VectorXd& lt_eps,
                                   const Eigen::VectorXd& diff_eps, int t,
                                   const Schedule& schedule) {
  if (schedule.variant != ScheduleVariant::Ddim) {
    throw std::invalid_argument("schedule must be the ddim variant");
  }
  check_step(t, schedule);
  const auto i = static_cast<std::size_t>(t);
  const double abar_t = schedule.alpha_bar[i];
  const double abar_prev = schedule.alpha_bar[i - 1];
  const double ratio = std::sqrt(abar_prev) / std::sqrt(abar_t);
  // Coefficient fixed by inverting the forward relation
  // x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) L_t eps for x0.
  const double c = std::sqrt(1.0 - abar_prev) - ratio * std::sqrt(1.0 - abar_t);
  const double dg = schedule.gamma[i] - schedule.gamma[i - 1];
  return ratio * x_t + c * lt_eps + dg * std::sqrt(1.0 - abar_prev) * diff_eps;
}

DdimDenoiser make_ddim_oracle(Eigen::VectorXd eps, const Schedule& schedule,
                              const NoiseModel& model) {
  Eigen::VectorXd correlated =
      model.factor.triangularView<Eigen::Lower>() * eps;
  return [eps = std::move(eps), correlated = std::move(correlated),
          schedule](const Eigen::VectorXd&, int t) {
    check_step(t, schedule);
    const auto i = static_cast<std::size_t>(t);
    const double g = schedule.gamma[i];
    DdimTerms terms;
    if (g == 1.0) {
      terms.lt_eps = eps;
    } else {
      terms.lt_eps = g * eps + (1.0 - g) * correlated;
    }
    terms.diff_eps = correlated - eps;
    return terms;
  };
}

Eigen::VectorXd generate_ddim_from(Eigen::VectorXd x_init,
                                   const DdimDenoiser& denoiser,
                                   const Schedule& schedule) {
  Eigen::VectorXd x = std::move(x_init);
  for (int t = schedule.total; t >= 1; --t) {
    const DdimTerms terms = denoiser(x, t);
    x = ddim_backward_step(x, terms.lt_eps, terms.diff_eps, t, schedule);
  }
  return x;
}

}  // namespace cndiff
