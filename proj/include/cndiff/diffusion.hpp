#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "cndiff/noise_model.hpp"
#include "cndiff/schedule.hpp"

namespace cndiff {

/// Two prediction heads: d1 approximates x0 - L_t eps, d2 approximates
/// alpha_{t-1} (L_b eps - L_w eps).
struct DenoiserOutput {
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
};

using Denoiser = std::function<DenoiserOutput(const Eigen::VectorXd& x, int t)>;

/// Forward corruption x_t = alpha (L_t eps) + (1 - alpha) x0.
Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& eps, double alpha,
                               double gamma, const NoiseModel& model);

/// Exact analytic targets for a known (x0, eps) pair.
DenoiserOutput oracle_denoiser(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& eps, int t,
                               const Schedule& schedule,
                               const NoiseModel& model);

/// Denoiser bound to a fixed (x0, eps); the correlated product L_b eps is
/// computed once and reused across steps.
Denoiser make_oracle(Eigen::VectorXd x0, Eigen::VectorXd eps,
                     const Schedule& schedule, const NoiseModel& model);

/// x_{t-1} = x_t + (alpha_t - alpha_{t-1}) d1 + (gamma_t - gamma_{t-1}) d2.
Eigen::VectorXd backward_step(const Eigen::VectorXd& x_t,
                              const DenoiserOutput& out, int t,
                              const Schedule& schedule);

/// Runs the backward chain from `x_init` (the state at t = T) down to
/// t = early_stop. With early_stop > 0 the remaining steps are replaced by
/// the one-shot reconstruction x + alpha_{Te} * d1(x, Te).
Eigen::VectorXd generate_from(Eigen::VectorXd x_init, const Denoiser& denoiser,
                              const Schedule& schedule, int early_stop = 0);

/// Backward chain started from white noise, as in production sampling.
Eigen::VectorXd generate(const Denoiser& denoiser, const Schedule& schedule,
                         Eigen::Index dim, std::uint64_t seed,
                         int early_stop = 0);

/// DDIM-style forward: sqrt(abar_t) x0 + sqrt(1 - abar_t) L_t eps.
Eigen::VectorXd ddim_forward_sample(const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& eps, int t,
                                    const Schedule& schedule,
                                    const NoiseModel& model);

/// One deterministic DDIM step. `lt_eps` is the network's estimate of
/// L_t eps and `diff_eps` of (L_b - L_w) eps; the step scales the latter by
/// (gamma_t - gamma_{t-1}) sqrt(1 - abar_{t-1}). The L_t eps coefficient is
/// chosen so that the step exactly inverts ddim_forward_sample.
Eigen::VectorXd ddim_backward_step(const Eigen::VectorXd& x_t,
                                   const Eigen::VectorXd& lt_eps,
                                   const Eigen::VectorXd& diff_eps, int t,
                                   const Schedule& schedule);

struct DdimTerms {
  Eigen::VectorXd lt_eps;
  Eigen::VectorXd diff_eps;
};
using DdimDenoiser = std::function<DdimTerms(const Eigen::VectorXd& x, int t)>;

DdimDenoiser make_ddim_oracle(Eigen::VectorXd eps, const Schedule& schedule,
                              const NoiseModel& model);

Eigen::VectorXd generate_ddim_from(Eigen::VectorXd x_init,
                                   const DdimDenoiser& denoiser,
                                   const Schedule& schedule);

}  // namespace cndiff
