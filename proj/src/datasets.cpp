#include "cndiff/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cndiff/errors.hpp"
#include "cndiff/rng.hpp"

namespace cndiff {

namespace {

constexpr int kSignalLength = 64;
constexpr int kImageSide = 16;

// Band-limited random signal: a handful of low-frequency cosines, rescaled
// to peak amplitude 0.9.
Eigen::VectorXd make_signal(Rng& rng) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(kSignalLength);
  for (int k = 1; k <= 4; ++k) {
    const double amp = rng.normal();
    const double phase = 2.0 * M_PI * rng.uniform();
    for (int u = 0; u < kSignalLength; ++u) {
      s(u) += amp * std::cos(2.0 * M_PI * k * u / kSignalLength + phase);
    }
  }
  const double peak = s.cwiseAbs().maxCoeff();
  if (peak > 0.0) s *= 0.9 / peak;
  return s;
}

Eigen::VectorXd make_blobs(Rng& rng) {
  Eigen::VectorXd img = Eigen::VectorXd::Constant(kImageSide * kImageSide, -0.8);
  const int blobs = 1 + static_cast<int>(rng.below(3));
  for (int b = 0; b < blobs; ++b) {
    const double cy = rng.uniform() * kImageSide;
    const double cx = rng.uniform() * kImageSide;
    const double sigma = 1.5 + 1.5 * rng.uniform();
    const double amp = 0.8 + 0.8 * rng.uniform();
    for (int y = 0; y < kImageSide; ++y) {
      for (int x = 0; x < kImageSide; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        img(y * kImageSide + x) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    img(i) = std::clamp(img(i), -1.0, 1.0);
  }
  return img;
}

Eigen::VectorXd make_stripes(Rng& rng) {
  Eigen::VectorXd img(kImageSide * kImageSide);
  const double freq = 1.0 + static_cast<double>(rng.below(3));
  const double theta = M_PI * rng.uniform();
  const double phase = 2.0 * M_PI * rng.uniform();
  const double ky = std::cos(theta);
  const double kx = std::sin(theta);
  for (int y = 0; y < kImageSide; ++y) {
    for (int x = 0; x < kImageSide; ++x) {
      img(y * kImageSide + x) =
          0.9 * std::sin(2.0 * M_PI * freq * (ky * y + kx * x) / kImageSide +
                         phase);
    }
  }
  return img;
}

}  // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "signals1d") return DatasetKind::Signals1d;
  if (name == "blobs16") return DatasetKind::Blobs16;
  if (name == "stripes16") return DatasetKind::Stripes16;
  throw ConfigError("unknown dataset '" + name + "'");
}

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Signals1d: return "signals1d";
    case DatasetKind::Blobs16: return "blobs16";
    case DatasetKind::Stripes16: return "stripes16";
  }
  throw std::logic_error("bad dataset kind");
}

Eigen::Index ToyDataset::dim() const {
  return kind == DatasetKind::Signals1d ? kSignalLength
                                        : kImageSide * kImageSide;
}

Eigen::VectorXd ToyDataset::sample(std::uint64_t index) const {
  Rng rng(substream_seed(seed, index));
  switch (kind) {
    case DatasetKind::Signals1d: return make_signal(rng);
    case DatasetKind::Blobs16: return make_blobs(rng);
    case DatasetKind::Stripes16: return make_stripes(rng);
  }
  throw std::logic_error("bad dataset kind");
}

}  // namespace cndiff
