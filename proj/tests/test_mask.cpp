#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cndiff/analysis.hpp"
#include "cndiff/mask.hpp"
#include "cndiff/rng.hpp"

#include "test_support.hpp"

using namespace cndiff;

namespace {

Eigen::MatrixXd as_grid(const Mask& m) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
      m.values.data(), m.resolution, m.resolution);
}

double mask_lfr(const Mask& m) {
  const auto profile = radial_average(power_spectrum(as_grid(m)));
  return low_freq_ratio(profile, 1.0 / 8.0, m.resolution);
}

}  // namespace

TEST_CASE("two equal values one pixel apart") {
  AnnealConfig cfg;
  cfg.sigma_s = 1.0;
  cfg.sigma_v = 1.0;
  const double values[2] = {0.3, 0.3};
  // Both orientations of the single pair: distance 1, value term exp(0).
  CHECK(mask_energy(std::span<const double>(values, 2), 1, 2, cfg) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("moving an equal-value pair together raises the energy") {
  AnnealConfig cfg;
  // 4x4, all values distinct except the pair at (0,0) and (2,2).
  std::vector<double> values = {
      0.50, -1.10, 0.90, -0.30,
      1.70, 0.20, -2.00, 1.10,
      -0.70, 2.30, 0.50, -1.50,
      0.05, -0.90, 1.30, 0.70,
  };
  values[10] = values[0];  // the far-apart equal pair
  const double before = mask_energy(values, 4, 4, cfg);
  // Swap (2,2) with (0,1): the equal values become horizontal neighbors.
  std::vector<double> after_values = values;
  std::swap(after_values[10], after_values[1]);
  const double after = mask_energy(after_values, 4, 4, cfg);
  CHECK(after > before);
  // And the incremental delta agrees with the direct difference.
  CHECK(swap_delta_energy(values, 4, 4, 10, 1, cfg) ==
        doctest::Approx(after - before).epsilon(1e-9));
}

TEST_CASE("swap delta equals full recompute on random 8x8 masks") {
  AnnealConfig cfg;
  Rng rng(21);
  Mask m = white_mask(8, 22);
  const double base = mask_energy(m, cfg);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t i = rng.below(64);
    std::size_t j = rng.below(63);
    if (j >= i) ++j;
    const double delta = swap_delta_energy(m, i, j, cfg);
    CHECK(swap_delta_energy(m, j, i, cfg) == doctest::Approx(delta).epsilon(1e-12));
    Mask swapped = m;
    std::swap(swapped.values[i], swapped.values[j]);
    const double direct = mask_energy(swapped, cfg) - base;
    CHECK(delta == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("delta is zero when the swapped values are equal") {
  AnnealConfig cfg;
  Mask m = white_mask(8, 23);
  m.values[5] = m.values[40];
  CHECK(swap_delta_energy(m, 5, 40, cfg) == doctest::Approx(0.0));
}

TEST_CASE("delta rejects bad indices") {
  AnnealConfig cfg;
  const Mask m = white_mask(4, 1);
  CHECK_THROWS_AS(swap_delta_energy(m, 3, 3, cfg), std::invalid_argument);
  CHECK_THROWS_AS(swap_delta_energy(m, 0, 16, cfg), std::out_of_range);
}

TEST_CASE("energy telescopes along a swap path") {
  AnnealConfig cfg;
  Mask m = white_mask(8, 24);
  const double initial = mask_energy(m, cfg);
  double acc = initial;
  Rng rng(25);
  for (int k = 0; k < 60; ++k) {
    const std::size_t i = rng.below(64);
    std::size_t j = rng.below(63);
    if (j >= i) ++j;
    acc += swap_delta_energy(m, i, j, cfg);
    std::swap(m.values[i], m.values[j]);
  }
  CHECK(mask_energy(m, cfg) == doctest::Approx(acc).epsilon(1e-9));
}

TEST_CASE("zero sweeps returns the initial draw") {
  AnnealConfig cfg = default_anneal_config(8, 31);
  cfg.sweeps = 0;
  const Mask annealed = anneal_mask(8, MaskMode::Blue, cfg);
  const Mask draw = white_mask(8, 31);
  CHECK(annealed.values == draw.values);
}

TEST_CASE("annealing is deterministic") {
  const AnnealConfig cfg = default_anneal_config(8, 32);
  const Mask a = anneal_mask(8, MaskMode::Blue, cfg);
  const Mask b = anneal_mask(8, MaskMode::Blue, cfg);
  CHECK(a.values == b.values);
}

TEST_CASE("annealing preserves the value multiset exactly") {
  const AnnealConfig cfg = default_anneal_config(8, 33);
  const Mask annealed = anneal_mask(8, MaskMode::Blue, cfg);
  std::vector<double> initial = white_mask(8, 33).values;
  std::vector<double> final_values = annealed.values;
  std::sort(initial.begin(), initial.end());
  std::sort(final_values.begin(), final_values.end());
  CHECK(initial == final_values);
}

TEST_CASE("initial draws have sane moments") {
  for (const std::uint64_t seed : {101ull, 102ull, 103ull}) {
    const Mask m = white_mask(16, seed);
    const double n = static_cast<double>(m.values.size());
    double mean = 0.0;
    for (double v : m.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : m.values) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::abs(mean) < 5.0 / 16.0);
    CHECK(var > 0.8);
    CHECK(var < 1.2);
  }
}

TEST_CASE("metropolis acceptance rule holds on the recorded trace") {
  AnnealConfig cfg = default_anneal_config(8, 34, 2000);
  AnnealTrace trace;
  anneal_mask(8, MaskMode::Blue, cfg, &trace);
  REQUIRE(trace.steps.size() == 2000);

  double expected_temp = cfg.temp0;
  int greedy = 0, tested = 0;
  for (const AnnealStep& step : trace.steps) {
    CHECK(step.temperature == doctest::Approx(expected_temp).epsilon(1e-9));
    expected_temp *= cfg.temp_decay;
    if (step.delta < 0.0) {  // s = +1 for blue
      CHECK(step.accepted);
      CHECK(std::isnan(step.u));
      ++greedy;
    } else {
      REQUIRE(!std::isnan(step.u));
      CHECK(step.accepted == (step.u < std::exp(-step.delta / step.temperature)));
      ++tested;
    }
  }
  CHECK(greedy > 0);
  CHECK(tested > 0);

  SUBCASE("best-so-far energy is monotone non-increasing for blue") {
    double best = trace.initial_energy;
    for (const AnnealStep& step : trace.steps) {
      CHECK(step.best_energy <= best + 1e-12);
      best = step.best_energy;
    }
  }
}

TEST_CASE("red mode maximizes: best energy is monotone non-decreasing") {
  AnnealConfig cfg = default_anneal_config(8, 35, 2000);
  AnnealTrace trace;
  anneal_mask(8, MaskMode::Red, cfg, &trace);
  double best = trace.initial_energy;
  for (const AnnealStep& step : trace.steps) {
    CHECK(step.best_energy >= best - 1e-12);
    best = step.best_energy;
    if (step.delta > 0.0) {
      CHECK(step.accepted);  // improving moves always accepted in red mode
    }
  }
}

TEST_CASE("incremental energy matches full recompute on accepted moves") {
  AnnealConfig cfg = default_anneal_config(8, 36, 4000);
  std::size_t checked = 0;
  std::size_t accepts = 0;
  anneal_mask(8, MaskMode::Blue, cfg, nullptr,
              [&](std::size_t, double current, std::span<const double> values) {
                ++accepts;
                if (accepts % 50 != 0) return;
                const double full = mask_energy(values, 8, 8, cfg);
                CHECK(current == doctest::Approx(full).epsilon(1e-9));
                ++checked;
              });
  CHECK(checked >= 3);
}

TEST_CASE("blue annealing suppresses low frequencies vs the initial draw") {
  const int r = 16;
  const AnnealConfig cfg = default_anneal_config(r, 37);
  const Mask annealed = anneal_mask(r, MaskMode::Blue, cfg);
  const Mask draw = white_mask(r, 37);
  CHECK(mask_lfr(annealed) < mask_lfr(draw));
}

TEST_CASE("ensembles do not depend on the thread count") {
  const AnnealConfig cfg = default_anneal_config(8, 38, 500);
  const auto seq = anneal_ensemble(8, MaskMode::Blue, cfg, 4, 1);
  const auto par = anneal_ensemble(8, MaskMode::Blue, cfg, 4, 2);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].values == par[i].values);
  }
}

TEST_CASE("anneal rejects invalid configs") {
  AnnealConfig cfg = default_anneal_config(8, 39);
  cfg.sigma_s = 0.0;
  CHECK_THROWS_AS(anneal_mask(8, MaskMode::Blue, cfg), std::invalid_argument);
  cfg = default_anneal_config(8, 39);
  cfg.temp_decay = 1.5;
  CHECK_THROWS_AS(anneal_mask(8, MaskMode::Blue, cfg), std::invalid_argument);
  CHECK_THROWS_AS(anneal_mask(2, MaskMode::Blue, default_anneal_config(2, 1)),
                  std::invalid_argument);
}
