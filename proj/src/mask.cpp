#include "cndiff/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "cndiff/rng.hpp"

namespace cndiff {

namespace {

void check_grid(std::span<const double> values, int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("mask grid dimensions must be positive");
  }
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("mask value count does not match grid size");
  }
  if (values.size() < 2) {
    throw std::invalid_argument("mask must have at least 2 pixels");
  }
}

double toroidal_dist2(int dy, int dx, int rows, int cols) {
  const int wy = std::min(std::abs(dy), rows - std::abs(dy));
  const int wx = std::min(std::abs(dx), cols - std::abs(dx));
  return static_cast<double>(wy) * wy + static_cast<double>(wx) * wx;
}

// Kernel tables for the annealing loop. Values are only ever permuted, so
// the value kernel can be tabulated once against the initial draw.
struct KernelTables {
  int rows = 0;
  int cols = 0;
  std::vector<double> spatial;  // indexed by (dy mod rows)*cols + (dx mod cols)
  std::vector<double> value;    // n x n over value indices

  double ks(std::size_t p, std::size_t q) const {
    const int py = static_cast<int>(p) / cols, px = static_cast<int>(p) % cols;
    const int qy = static_cast<int>(q) / cols, qx = static_cast<int>(q) % cols;
    const int dy = (py - qy + rows) % rows;
    const int dx = (px - qx + cols) % cols;
    return spatial[static_cast<std::size_t>(dy) * cols + dx];
  }
  double kv(std::size_t a, std::size_t b) const {
    return value[a * static_cast<std::size_t>(rows) * cols + b];
  }
};

KernelTables build_tables(std::span<const double> initial_values, int rows,
                          int cols, const AnnealConfig& cfg) {
  KernelTables t;
  t.rows = rows;
  t.cols = cols;
  const double inv_ss2 = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  const double inv_sv2 = 1.0 / (cfg.sigma_v * cfg.sigma_v);
  t.spatial.resize(static_cast<std::size_t>(rows) * cols);
  for (int dy = 0; dy < rows; ++dy) {
    for (int dx = 0; dx < cols; ++dx) {
      t.spatial[static_cast<std::size_t>(dy) * cols + dx] =
          std::exp(-toroidal_dist2(dy, dx, rows, cols) * inv_ss2);
    }
  }
  const std::size_t n = initial_values.size();
  t.value.resize(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    t.value[a * n + a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double k = std::exp(
          -std::sqrt(std::abs(initial_values[a] - initial_values[b])) * inv_sv2);
      t.value[a * n + b] = k;
      t.value[b * n + a] = k;
    }
  }
  return t;
}

// Table-based full energy over the current permutation.
double table_energy(const KernelTables& t, std::span<const std::uint32_t> perm) {
  const std::size_t n = perm.size();
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      acc += t.ks(p, q) * t.kv(perm[p], perm[q]);
    }
  }
  return 2.0 * acc;
}

double table_delta(const KernelTables& t, std::span<const std::uint32_t> perm,
                   std::size_t i, std::size_t j) {
  const std::size_t n = perm.size();
  const std::uint32_t vi = perm[i];
  const std::uint32_t vj = perm[j];
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i || k == j) continue;
    const std::uint32_t vk = perm[k];
    acc += (t.ks(i, k) - t.ks(j, k)) * (t.kv(vj, vk) - t.kv(vi, vk));
  }
  return 2.0 * acc;
}

}  // namespace

void AnnealConfig::validate() const {
  if (!(sigma_s > 0.0)) throw std::invalid_argument("sigma_s must be > 0");
  if (!(sigma_v > 0.0)) throw std::invalid_argument("sigma_v must be > 0");
  if (!(temp_decay > 0.0 && temp_decay <= 1.0)) {
    throw std::invalid_argument("temp_decay must be in (0, 1]");
  }
  if (!(temp0 > 0.0)) throw std::invalid_argument("temp0 must be > 0");
}

AnnealConfig default_anneal_config(int resolution, std::uint64_t seed,
                                   std::uint64_t sweeps) {
  AnnealConfig cfg;
  cfg.seed = seed;
  cfg.sweeps = sweeps != 0
                   ? sweeps
                   : 50ull * static_cast<std::uint64_t>(resolution) * resolution;
  const double t_final = 1e-3;
  cfg.temp_decay = cfg.sweeps > 1
                       ? std::pow(t_final / cfg.temp0,
                                  1.0 / static_cast<double>(cfg.sweeps - 1))
                       : 1.0;
  return cfg;
}

double mask_energy(std::span<const double> values, int rows, int cols,
                   const AnnealConfig& cfg) {
  cfg.validate();
  check_grid(values, rows, cols);
  const double inv_ss2 = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  const double inv_sv2 = 1.0 / (cfg.sigma_v * cfg.sigma_v);
  const std::size_t n = values.size();
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const int py = static_cast<int>(p) / cols, px = static_cast<int>(p) % cols;
    for (std::size_t q = p + 1; q < n; ++q) {
      const int qy = static_cast<int>(q) / cols, qx = static_cast<int>(q) % cols;
      const double d2 = toroidal_dist2(py - qy, px - qx, rows, cols);
      acc += std::exp(-d2 * inv_ss2 -
                      std::sqrt(std::abs(values[p] - values[q])) * inv_sv2);
    }
  }
  return 2.0 * acc;  // both orientations of each pair
}

double mask_energy(const Mask& mask, const AnnealConfig& cfg) {
  return mask_energy(mask.values, mask.resolution, mask.resolution, cfg);
}

double swap_delta_energy(std::span<const double> values, int rows, int cols,
                         std::size_t i, std::size_t j, const AnnealConfig& cfg) {
  cfg.validate();
  check_grid(values, rows, cols);
  if (i >= values.size() || j >= values.size()) {
    throw std::out_of_range("swap index out of range");
  }
  if (i == j) {
    throw std::invalid_argument("swap indices must differ");
  }
  const double inv_ss2 = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  const double inv_sv2 = 1.0 / (cfg.sigma_v * cfg.sigma_v);
  const auto ks = [&](std::size_t p, std::size_t q) {
    const int py = static_cast<int>(p) / cols, px = static_cast<int>(p) % cols;
    const int qy = static_cast<int>(q) / cols, qx = static_cast<int>(q) % cols;
    return std::exp(-toroidal_dist2(py - qy, px - qx, rows, cols) * inv_ss2);
  };
  const auto kv = [&](double a, double b) {
    return std::exp(-std::sqrt(std::abs(a - b)) * inv_sv2);
  };
  const double vi = values[i];
  const double vj = values[j];
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k == i || k == j) continue;
    const double vk = values[k];
    acc += (ks(i, k) - ks(j, k)) * (kv(vj, vk) - kv(vi, vk));
  }
  return 2.0 * acc;
}

double swap_delta_energy(const Mask& mask, std::size_t i, std::size_t j,
                         const AnnealConfig& cfg) {
  return swap_delta_energy(mask.values, mask.resolution, mask.resolution, i, j,
                           cfg);
}

Mask white_mask(int resolution, std::uint64_t seed) {
  if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
  Mask m;
  m.resolution = resolution;
  m.seed = seed;
  m.values.resize(static_cast<std::size_t>(resolution) * resolution);
  Rng rng(seed);
  for (double& v : m.values) v = rng.normal();
  return m;
}

Mask anneal_mask(int resolution, MaskMode mode, const AnnealConfig& cfg,
                 AnnealTrace* trace, const AnnealObserver& on_accept) {
  cfg.validate();
  if (resolution < 4) {
    throw std::invalid_argument("anneal_mask: resolution must be >= 4");
  }
  Mask mask = white_mask(resolution, cfg.seed);
  mask.mode = mode;
  const std::size_t n = mask.values.size();

  const KernelTables tables = build_tables(mask.values, resolution, resolution, cfg);
  std::vector<std::uint32_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) perm[k] = static_cast<std::uint32_t>(k);

  // s = +1 minimizes (blue), s = -1 maximizes (red).
  const double s = mode == MaskMode::Blue ? 1.0 : -1.0;

  double energy = table_energy(tables, perm);
  double best_energy = energy;
  std::vector<double> best_values = mask.values;

  if (trace) {
    trace->initial_energy = energy;
    trace->steps.clear();
    trace->steps.reserve(cfg.sweeps);
  }

  Rng rng(substream_seed(cfg.seed, 1));  // initial draw used the raw seed
  double temperature = cfg.temp0;
  for (std::uint64_t k = 0; k < cfg.sweeps; ++k) {
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;

    const double delta = table_delta(tables, perm, i, j);
    bool accepted;
    double u = std::numeric_limits<double>::quiet_NaN();
    if (delta * s < 0.0) {
      accepted = true;
    } else {
      u = rng.uniform();
      accepted = u < std::exp(-delta * s / temperature);
    }
    if (accepted) {
      std::swap(mask.values[i], mask.values[j]);
      std::swap(perm[i], perm[j]);
      energy += delta;
      if ((energy - best_energy) * s < 0.0) {
        best_energy = energy;
        best_values = mask.values;
      }
      if (on_accept) on_accept(k, energy, mask.values);
    }
    if (trace) {
      trace->steps.push_back({static_cast<std::uint32_t>(i),
                              static_cast<std::uint32_t>(j), delta, temperature,
                              u, accepted, energy, best_energy});
    }
    temperature *= cfg.temp_decay;
  }

  mask.values = std::move(best_values);
  return mask;
}

std::vector<Mask> anneal_ensemble(int resolution, MaskMode mode,
                                  const AnnealConfig& cfg, std::size_t count,
                                  int threads) {
  std::vector<Mask> masks(count);
  const int workers = std::max(1, threads);
  const auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t idx = first; idx < count; idx += stride) {
      AnnealConfig local = cfg;
      local.seed = substream_seed(cfg.seed, idx);
      masks[idx] = anneal_mask(resolution, mode, local);
    }
  };
  if (workers == 1 || count < 2) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(work, static_cast<std::size_t>(w),
                        static_cast<std::size_t>(workers));
    }
    for (auto& t : pool) t.join();
  }
  return masks;
}

std::vector<Mask> white_ensemble(int resolution, std::size_t count,
                                 std::uint64_t seed) {
  std::vector<Mask> masks;
  masks.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    masks.push_back(white_mask(resolution, substream_seed(seed, idx)));
  }
  return masks;
}

}  // namespace cndiff
