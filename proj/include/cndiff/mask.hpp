#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cndiff {

enum class MaskMode { Blue, Red };

/// Parameters of the swap-annealing run. The pair energy couples a Gaussian
/// spatial kernel (toroidal distance, width sigma_s) with a value kernel
/// exp(-|dv|^(1/2) / sigma_v^2); minimizing it pushes similar values apart
/// (blue), maximizing it clusters them (red).
struct AnnealConfig {
  double sigma_s = 2.1;
  double sigma_v = 1.0;
  std::uint64_t sweeps = 0;  // number of proposed swaps
  double temp0 = 1.0;
  double temp_decay = 1.0;  // geometric factor applied per proposal
  std::uint64_t seed = 0;

  void validate() const;
};

/// Config with house defaults for a square mask: sweeps = 50*R^2 unless
/// given, temperature decaying from temp0 to 1e-3 over the run.
AnnealConfig default_anneal_config(int resolution, std::uint64_t seed,
                                   std::uint64_t sweeps = 0);

/// A square grid of scalars. Annealing only permutes the values of the
/// initial i.i.d. standard-normal draw, so the value multiset is invariant.
struct Mask {
  int resolution = 0;
  std::vector<double> values;  // row-major resolution x resolution
  std::uint64_t seed = 0;
  MaskMode mode = MaskMode::Blue;
};

/// Full pair energy sum_{i != j} exp(-d_tor(i,j)^2/sigma_s^2
///                                   - |v_i - v_j|^(1/2)/sigma_v^2).
/// O(n^2); both orientations of each pair are counted.
double mask_energy(std::span<const double> values, int rows, int cols,
                   const AnnealConfig& cfg);
double mask_energy(const Mask& mask, const AnnealConfig& cfg);

/// Energy change from swapping the values at flat indices i and j, computed
/// in O(n) from the pair terms touching i or j only.
double swap_delta_energy(std::span<const double> values, int rows, int cols,
                         std::size_t i, std::size_t j, const AnnealConfig& cfg);
double swap_delta_energy(const Mask& mask, std::size_t i, std::size_t j,
                         const AnnealConfig& cfg);

/// Per-proposal record, kept only when a trace is requested.
struct AnnealStep {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double delta = 0.0;
  double temperature = 0.0;
  double u = 0.0;  // uniform used by the acceptance test; NaN on the greedy path
  bool accepted = false;
  double energy_after = 0.0;  // incrementally maintained energy
  double best_energy = 0.0;
};

struct AnnealTrace {
  double initial_energy = 0.0;
  std::vector<AnnealStep> steps;
};

/// Called after every accepted move with the maintained energy and the
/// current value grid; lets tests recompute the energy from scratch.
using AnnealObserver = std::function<void(
    std::size_t proposal, double current_energy, std::span<const double> values)>;

/// Anneals one mask. Deterministic in (resolution, mode, cfg): the same
/// inputs give a bit-identical mask. Returns the best state visited.
Mask anneal_mask(int resolution, MaskMode mode, const AnnealConfig& cfg,
                 AnnealTrace* trace = nullptr,
                 const AnnealObserver& on_accept = {});

/// i.i.d. standard-normal mask (the annealer's starting point).
Mask white_mask(int resolution, std::uint64_t seed);

/// Anneals `count` masks with independent seeds derived from cfg.seed.
/// Results are identical for any thread count.
std::vector<Mask> anneal_ensemble(int resolution, MaskMode mode,
                                  const AnnealConfig& cfg, std::size_t count,
                                  int threads = 1);

std::vector<Mask> white_ensemble(int resolution, std::size_t count,
                                 std::uint64_t seed);

}  // namespace cndiff
