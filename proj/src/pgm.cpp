#include "cndiff/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "cndiff/errors.hpp"

namespace cndiff {

void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  const double mean = grid.mean();
  const double var = (grid.array() - mean).square().mean();
  const double sd = std::sqrt(var);
  const double lo = mean - 3.0 * sd;
  const double hi = mean + 3.0 * sd;
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot open for writing: " + path.string());
  }
  out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(grid.cols()));
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const double clamped = std::clamp(grid(i, j), lo, hi);
      row[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::lround((clamped - lo) * scale));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace cndiff
