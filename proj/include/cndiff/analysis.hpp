#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cndiff {

/// Squared-magnitude DFT of a 2-D grid with the DC bin zeroed and quadrants
/// shifted so DC sits at (rows/2, cols/2).
Eigen::MatrixXd power_spectrum(const Eigen::MatrixXd& grid);

/// Mean energy per annulus of width one pixel around the centered DC bin.
/// Entry r covers pixels whose rounded distance to the center equals r.
std::vector<double> radial_average(const Eigen::MatrixXd& spectrum);

/// Mean profile value over radii in [1, cutoff*extent) divided by the mean
/// over radii in [cutoff*extent, rmax]. Blue noise gives values well below 1,
/// white noise values near 1, red noise values well above 1.
double low_freq_ratio(std::span<const double> profile, double cutoff,
                      int grid_extent);

/// Exact 1-D Wasserstein-1 distance between two empirical distributions
/// (sample counts may differ).
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Mean over `projections` random unit directions of the 1-D Wasserstein-1
/// distance between the projected sample sets. Rows are samples.
double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          int projections, std::uint64_t seed);

/// Energy distance between two sample sets (V-statistic form, so identical
/// sets give exactly zero). Rows are samples.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Peak-to-neighborhood statistics used to detect tile-repetition artifacts.
/// A "harmonic" bin lies on the tile-grid frequency lattice (offsets from DC
/// that are multiples of the tile counts). Each bin is scored against the
/// median of its 8 toroidal neighbors.
struct HarmonicPeakStats {
  double min_harmonic_ratio;  // over harmonic bins (excluding DC)
  double max_any_ratio;       // over all bins (excluding DC)
};
HarmonicPeakStats harmonic_peak_stats(const Eigen::MatrixXd& centered_spectrum,
                                      int tiles_y, int tiles_x);

}  // namespace cndiff
