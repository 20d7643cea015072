#pragma once

#include <string>
#include <vector>

namespace cndiff {

/// Sigmoid ramp parameters for the gamma scheduler. With start fixed near 0
/// the blend begins half white / half correlated and ends nearly pure white;
/// tau controls how sharp the transition is.
struct GammaParams {
  double start = 0.0;
  double end = 3.0;
  double tau = 0.2;

  void validate() const;  // start in [-3,0], end in (0,3], tau in [0.01,1000]
};

enum class ScheduleVariant { Blend, Ddim };

enum class GammaOverride { None, Linear, Cosine };

GammaOverride parse_gamma_override(const std::string& name);

/// alpha-scheduler: plain linear ramp t/T.
double get_alpha(int t, int total);

/// gamma-scheduler: sigmoid((start + (end-start) * t/T) / tau).
double get_gamma(int t, int total, const GammaParams& params);

/// Per-step coefficient arrays, indexed 0..T. The blend variant carries the
/// interpolation coefficients alpha_t = t/T; the ddim variant additionally
/// carries the cumulative product alpha_bar (strictly decreasing from 1),
/// built from a linear beta ramp with alpha_t = 1 - beta_t.
struct Schedule {
  int total = 0;
  ScheduleVariant variant = ScheduleVariant::Blend;
  std::vector<double> alpha;
  std::vector<double> gamma;
  std::vector<double> alpha_bar;  // ddim only

  /// (gamma_t - gamma_{t-1}) / (alpha_t - alpha_{t-1}) for t in [1, T].
  double loss_weight(int t) const;
};

Schedule build_schedule(int total, const GammaParams& params,
                        ScheduleVariant variant = ScheduleVariant::Blend,
                        GammaOverride gamma_override = GammaOverride::None);

/// Copy of `s` with every gamma entry replaced by `value`; used for the
/// single-noise ablations where the blend must stay fixed.
Schedule with_constant_gamma(Schedule s, double value);

}  // namespace cndiff
