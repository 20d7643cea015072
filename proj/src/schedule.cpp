#include "cndiff/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "cndiff/errors.hpp"

namespace cndiff {

namespace {

// Endpoints of the linear beta ramp behind the ddim variant's alpha_bar.
constexpr double kBetaMin = 1e-4;
constexpr double kBetaMax = 2e-2;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_step(int t, int total) {
  if (total < 1) throw std::invalid_argument("total steps must be >= 1");
  if (t < 0 || t > total) throw std::invalid_argument("step out of range");
}

}  // namespace

void GammaParams::validate() const {
  if (!(start >= -3.0 && start <= 0.0)) {
    throw ConfigError("gamma.start must be in [-3, 0]");
  }
  if (!(end > 0.0 && end <= 3.0)) {
    throw ConfigError("gamma.end must be in (0, 3]");
  }
  if (!(tau >= 0.01 && tau <= 1000.0)) {
    throw ConfigError("gamma.tau must be in [0.01, 1000]");
  }
}

GammaOverride parse_gamma_override(const std::string& name) {
  if (name.empty() || name == "none") return GammaOverride::None;
  if (name == "linear") return GammaOverride::Linear;
  if (name == "cosine") return GammaOverride::Cosine;
  throw ConfigError("unknown gamma.override '" + name + "'");
}

double get_alpha(int t, int total) {
  check_step(t, total);
  return static_cast<double>(t) / static_cast<double>(total);
}

double get_gamma(int t, int total, const GammaParams& params) {
  check_step(t, total);
  params.validate();
  const double ramp = params.start + (params.end - params.start) *
                                         static_cast<double>(t) /
                                         static_cast<double>(total);
  return sigmoid(ramp / params.tau);
}

double Schedule::loss_weight(int t) const {
  if (variant != ScheduleVariant::Blend) {
    throw std::logic_error("loss_weight is defined for the blend variant");
  }
  if (t < 1 || t > total) throw std::invalid_argument("step out of range");
  const double da = alpha[static_cast<std::size_t>(t)] -
                    alpha[static_cast<std::size_t>(t) - 1];
  if (da == 0.0) throw std::invalid_argument("zero alpha step");
  const double dg = gamma[static_cast<std::size_t>(t)] -
                    gamma[static_cast<std::size_t>(t) - 1];
  return dg / da;
}

Schedule build_schedule(int total, const GammaParams& params,
                        ScheduleVariant variant, GammaOverride gamma_override) {
  if (total < 1) throw std::invalid_argument("total steps must be >= 1");
  if (gamma_override == GammaOverride::None) params.validate();

  Schedule s;
  s.total = total;
  s.variant = variant;
  s.alpha.resize(static_cast<std::size_t>(total) + 1);
  s.gamma.resize(static_cast<std::size_t>(total) + 1);

  for (int t = 0; t <= total; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double frac = static_cast<double>(t) / static_cast<double>(total);
    switch (gamma_override) {
      case GammaOverride::None:
        s.gamma[i] = get_gamma(t, total, params);
        break;
      case GammaOverride::Linear:
        s.gamma[i] = frac;
        break;
      case GammaOverride::Cosine: {
        const double c = std::cos(frac * M_PI / 2.0);
        s.gamma[i] = 1.0 - c * c;
        break;
      }
    }
  }

  if (variant == ScheduleVariant::Blend) {
    for (int t = 0; t <= total; ++t) {
      s.alpha[static_cast<std::size_t>(t)] = get_alpha(t, total);
    }
  } else {
    s.alpha_bar.resize(static_cast<std::size_t>(total) + 1);
    s.alpha[0] = 1.0;
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= total; ++t) {
      const double frac = total > 1 ? static_cast<double>(t - 1) /
                                          static_cast<double>(total - 1)
                                    : 0.0;
      const double beta = kBetaMin + (kBetaMax - kBetaMin) * frac;
      const auto i = static_cast<std::size_t>(t);
      s.alpha[i] = 1.0 - beta;
      s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
    }
  }

  // The closed forms above cannot violate these, but a broken schedule would
  // silently corrupt every downstream module, so verify anyway.
  for (int t = 0; t <= total; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (!(s.gamma[i] >= 0.0 && s.gamma[i] <= 1.0)) {
      throw std::logic_error("gamma out of [0, 1]");
    }
    if (t > 0 && s.gamma[i] < s.gamma[i - 1]) {
      throw std::logic_error("gamma must be non-decreasing");
    }
  }
  if (variant == ScheduleVariant::Blend) {
    if (s.alpha.front() != 0.0 || s.alpha.back() != 1.0) {
      throw std::logic_error("blend alpha must run from 0 to 1");
    }
    for (int t = 1; t <= total; ++t) {
      if (s.alpha[static_cast<std::size_t>(t)] <
          s.alpha[static_cast<std::size_t>(t) - 1]) {
        throw std::logic_error("alpha must be non-decreasing");
      }
    }
  } else {
    for (int t = 1; t <= total; ++t) {
      if (!(s.alpha_bar[static_cast<std::size_t>(t)] <
            s.alpha_bar[static_cast<std::size_t>(t) - 1])) {
        throw std::logic_error("alpha_bar must be strictly decreasing");
      }
    }
  }
  return s;
}

Schedule with_constant_gamma(Schedule s, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("constant gamma must be in [0, 1]");
  }
  for (double& g : s.gamma) g = value;
  return s;
}

}  // namespace cndiff
