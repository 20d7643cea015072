#include "cndiff/tensorio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "cndiff/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "CNT1 serialization assumes a little-endian host");

namespace cndiff {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'T', '1'};

std::uint64_t checked_element_count(std::span<const std::uint64_t> dims) {
  if (dims.empty()) {
    throw TensorIoError(TensorIoError::Code::BadDims, "empty dims list");
  }
  if (dims.size() > 255) {
    throw TensorIoError(TensorIoError::Code::BadDims, "more than 255 dims");
  }
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d == 0) {
      throw TensorIoError(TensorIoError::Code::BadDims, "zero extent");
    }
    if (d > std::numeric_limits<std::uint64_t>::max() / n) {
      throw TensorIoError(TensorIoError::Code::BadDims, "dimension overflow");
    }
    n *= d;
  }
  return n;
}

template <typename Scalar>
void write_impl(const std::filesystem::path& path,
                std::span<const std::uint64_t> dims,
                std::span<const Scalar> payload, std::uint8_t dtype) {
  const std::uint64_t n = checked_element_count(dims);
  if (n != payload.size()) {
    throw TensorIoError(TensorIoError::Code::BadDims,
                        "payload size does not match dims");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot open for writing: " + path.string());
  }
  char header[8] = {};
  std::memcpy(header, kMagic, 4);
  header[4] = static_cast<char>(dtype);
  header[5] = static_cast<char>(dims.size());
  out.write(header, sizeof(header));
  out.write(reinterpret_cast<const char*>(dims.data()),
            static_cast<std::streamsize>(dims.size() * sizeof(std::uint64_t)));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(Scalar)));
  if (!out) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "write failed: " + path.string());
  }
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

std::vector<double> Tensor::as_f64() const {
  if (const auto* f = std::get_if<std::vector<float>>(&data)) {
    return std::vector<double>(f->begin(), f->end());
  }
  return std::get<std::vector<double>>(data);
}

void write_tensor(const std::filesystem::path& path,
                  std::span<const std::uint64_t> dims,
                  std::span<const float> payload) {
  write_impl(path, dims, payload, 1);
}

void write_tensor(const std::filesystem::path& path,
                  std::span<const std::uint64_t> dims,
                  std::span<const double> payload) {
  write_impl(path, dims, payload, 2);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot open for reading: " + path.string());
  }
  char header[8];
  if (!in.read(header, sizeof(header))) {
    throw TensorIoError(TensorIoError::Code::Truncated, "file shorter than header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw TensorIoError(TensorIoError::Code::BadMagic, "bad magic tag");
  }
  const std::uint8_t dtype = static_cast<std::uint8_t>(header[4]);
  const std::uint8_t ndim = static_cast<std::uint8_t>(header[5]);
  if (dtype != 1 && dtype != 2) {
    throw TensorIoError(TensorIoError::Code::UnsupportedDtype,
                        "unsupported dtype code " + std::to_string(dtype));
  }
  if (ndim == 0) {
    throw TensorIoError(TensorIoError::Code::BadDims, "zero-dimensional tensor");
  }
  Tensor t;
  t.dims.resize(ndim);
  if (!in.read(reinterpret_cast<char*>(t.dims.data()),
               static_cast<std::streamsize>(ndim * sizeof(std::uint64_t)))) {
    throw TensorIoError(TensorIoError::Code::Truncated, "truncated dim list");
  }
  const std::uint64_t n = checked_element_count(t.dims);
  const std::uint64_t elem_size = dtype == 1 ? 4 : 8;
  const std::uint64_t want = n * elem_size;

  std::vector<char> raw(want);
  in.read(raw.data(), static_cast<std::streamsize>(want));
  if (static_cast<std::uint64_t>(in.gcount()) != want) {
    throw TensorIoError(TensorIoError::Code::Truncated, "truncated payload");
  }
  // Trailing bytes would mean the recorded dims disagree with the payload.
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw TensorIoError(TensorIoError::Code::BadDims,
                        "payload longer than dims imply");
  }
  if (dtype == 1) {
    std::vector<float> v(n);
    std::memcpy(v.data(), raw.data(), want);
    t.data = std::move(v);
  } else {
    std::vector<double> v(n);
    std::memcpy(v.data(), raw.data(), want);
    t.data = std::move(v);
  }
  return t;
}

std::filesystem::path manifest_path(const std::filesystem::path& artifact) {
  std::filesystem::path p = artifact;
  p += ".manifest.json";
  return p;
}

void write_manifest(const std::filesystem::path& artifact,
                    const nlohmann::json& manifest) {
  std::ofstream out(manifest_path(artifact));
  if (!out) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot write manifest for " + artifact.string());
  }
  out << manifest.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::filesystem::path& artifact) {
  std::ifstream in(manifest_path(artifact));
  if (!in) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot read manifest for " + artifact.string());
  }
  return nlohmann::json::parse(in);
}

}  // namespace cndiff
