#include "cndiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "cndiff/rng.hpp"

namespace cndiff {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT. `data` size must be a power of two.
void fft_pow2(std::vector<cd>& data) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cd w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cd u = data[i + k];
        const cd v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// O(n^2) DFT fallback for non power-of-two lengths.
void dft_naive(std::vector<cd>& data) {
  const std::size_t n = data.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc(0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * j) /
                         static_cast<double>(n);
      acc += data[j] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  data = std::move(out);
}

void dft_1d(std::vector<cd>& data) {
  if (is_pow2(data.size())) {
    fft_pow2(data);
  } else {
    dft_naive(data);
  }
}

}  // namespace

Eigen::MatrixXd power_spectrum(const Eigen::MatrixXd& grid) {
  const auto rows = grid.rows();
  const auto cols = grid.cols();
  if (rows < 2 || cols < 2) {
    throw std::invalid_argument("power_spectrum: grid must be at least 2x2");
  }

  Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic> freq(rows, cols);
  std::vector<cd> line;
  line.reserve(static_cast<std::size_t>(std::max(rows, cols)));

  for (Eigen::Index i = 0; i < rows; ++i) {
    line.assign(static_cast<std::size_t>(cols), cd{});
    for (Eigen::Index j = 0; j < cols; ++j) line[static_cast<std::size_t>(j)] = cd(grid(i, j), 0.0);
    dft_1d(line);
    for (Eigen::Index j = 0; j < cols; ++j) freq(i, j) = line[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    line.assign(static_cast<std::size_t>(rows), cd{});
    for (Eigen::Index i = 0; i < rows; ++i) line[static_cast<std::size_t>(i)] = freq(i, j);
    dft_1d(line);
    for (Eigen::Index i = 0; i < rows; ++i) freq(i, j) = line[static_cast<std::size_t>(i)];
  }

  Eigen::MatrixXd power(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) power(i, j) = std::norm(freq(i, j));
  power(0, 0) = 0.0;

  // Shift so DC lands at (rows/2, cols/2).
  Eigen::MatrixXd shifted(rows, cols);
  const Eigen::Index cy = rows / 2;
  const Eigen::Index cx = cols / 2;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      shifted((i + cy) % rows, (j + cx) % cols) = power(i, j);
  return shifted;
}

std::vector<double> radial_average(const Eigen::MatrixXd& spectrum) {
  const auto rows = spectrum.rows();
  const auto cols = spectrum.cols();
  const Eigen::Index cy = rows / 2;
  const Eigen::Index cx = cols / 2;
  const int rmax = static_cast<int>(
      std::lround(std::hypot(static_cast<double>(std::max(cy, rows - 1 - cy)),
                             static_cast<double>(std::max(cx, cols - 1 - cx)))));
  std::vector<double> sum(static_cast<std::size_t>(rmax) + 1, 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(rmax) + 1, 0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double r = std::hypot(static_cast<double>(i - cy),
                                  static_cast<double>(j - cx));
      const auto bin = static_cast<std::size_t>(std::lround(r));
      sum[bin] += spectrum(i, j);
      count[bin] += 1;
    }
  }
  std::vector<double> profile(sum.size(), 0.0);
  for (std::size_t r = 0; r < sum.size(); ++r) {
    if (count[r] > 0) profile[r] = sum[r] / static_cast<double>(count[r]);
  }
  return profile;
}

double low_freq_ratio(std::span<const double> profile, double cutoff,
                      int grid_extent) {
  if (!(cutoff > 0.0 && cutoff < 0.5)) {
    throw std::invalid_argument("low_freq_ratio: cutoff must be in (0, 0.5)");
  }
  const double boundary = cutoff * static_cast<double>(grid_extent);
  double low_sum = 0.0, high_sum = 0.0;
  std::size_t low_n = 0, high_n = 0;
  for (std::size_t r = 1; r < profile.size(); ++r) {
    if (static_cast<double>(r) < boundary) {
      low_sum += profile[r];
      ++low_n;
    } else {
      high_sum += profile[r];
      ++high_n;
    }
  }
  if (low_n == 0 || high_n == 0) {
    throw std::invalid_argument("low_freq_ratio: empty frequency band");
  }
  return (low_sum / static_cast<double>(low_n)) /
         (high_sum / static_cast<double>(high_n));
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("wasserstein1_1d: empty sample set");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(n);
  }
  // Integrate |Qa - Qb| over the merged quantile grid; both inverse CDFs are
  // piecewise constant with breakpoints at i/n and j/m.
  double acc = 0.0;
  double q = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    const double qa = static_cast<double>(i + 1) / static_cast<double>(n);
    const double qb = static_cast<double>(j + 1) / static_cast<double>(m);
    const double next = std::min(qa, qb);
    acc += (next - q) * std::abs(a[i] - b[j]);
    q = next;
    if (qa <= next) ++i;
    if (qb <= next) ++j;
  }
  return acc;
}

double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          int projections, std::uint64_t seed) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
  }
  if (a.rows() < 1 || b.rows() < 1) {
    throw std::invalid_argument("sliced_wasserstein: empty sample set");
  }
  if (projections < 1) {
    throw std::invalid_argument("sliced_wasserstein: need at least 1 projection");
  }
  Rng rng(seed);
  const Eigen::Index dim = a.cols();
  Eigen::VectorXd dir(dim);
  double acc = 0.0;
  for (int p = 0; p < projections; ++p) {
    double norm2 = 0.0;
    do {
      for (Eigen::Index d = 0; d < dim; ++d) dir(d) = rng.normal();
      norm2 = dir.squaredNorm();
    } while (norm2 == 0.0);
    dir /= std::sqrt(norm2);
    Eigen::VectorXd pa = a * dir;
    Eigen::VectorXd pb = b * dir;
    acc += wasserstein1_1d({pa.data(), pa.data() + pa.size()},
                           {pb.data(), pb.data() + pb.size()});
  }
  return acc / static_cast<double>(projections);
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("energy_distance: dimension mismatch");
  }
  const auto mean_cross = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < y.rows(); ++j)
        acc += (x.row(i) - y.row(j)).norm();
    return acc / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
  };
  const double between = mean_cross(a, b);
  const double within_a = mean_cross(a, a);
  const double within_b = mean_cross(b, b);
  return std::sqrt(std::max(0.0, 2.0 * between - within_a - within_b));
}

HarmonicPeakStats harmonic_peak_stats(const Eigen::MatrixXd& spectrum,
                                      int tiles_y, int tiles_x) {
  const auto rows = spectrum.rows();
  const auto cols = spectrum.cols();
  if (tiles_y < 1 || tiles_x < 1) {
    throw std::invalid_argument("harmonic_peak_stats: tile counts must be >= 1");
  }
  const Eigen::Index cy = rows / 2;
  const Eigen::Index cx = cols / 2;

  const auto neighborhood_median = [&](Eigen::Index i, Eigen::Index j) {
    double v[8];
    int k = 0;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const Eigen::Index ni = (i + di + rows) % rows;
        const Eigen::Index nj = (j + dj + cols) % cols;
        v[k++] = spectrum(ni, nj);
      }
    }
    std::sort(v, v + 8);
    return 0.5 * (v[3] + v[4]);
  };

  double min_harmonic = std::numeric_limits<double>::infinity();
  double max_any = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (i == cy && j == cx) continue;  // DC
      const double med = neighborhood_median(i, j);
      double ratio;
      if (med > 0.0) {
        ratio = spectrum(i, j) / med;
      } else {
        ratio = spectrum(i, j) > 0.0
                    ? std::numeric_limits<double>::infinity()
                    : 1.0;
      }
      max_any = std::max(max_any, ratio);
      const bool harmonic = ((i - cy) % tiles_y == 0) && ((j - cx) % tiles_x == 0);
      if (harmonic) min_harmonic = std::min(min_harmonic, ratio);
    }
  }
  return {min_harmonic, max_any};
}

}  // namespace cndiff
