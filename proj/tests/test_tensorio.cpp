#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "cndiff/errors.hpp"
#include "cndiff/rng.hpp"
#include "cndiff/tensorio.hpp"

#include <nlohmann/json.hpp>

using namespace cndiff;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "cndiff_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("identity matrix file layout") {
  const fs::path path = temp_file("ident.cnt");
  const std::uint64_t dims[2] = {2, 2};
  const double payload[4] = {1.0, 0.0, 0.0, 1.0};
  write_tensor(path, dims, std::span<const double>(payload, 4));

  // 8 header bytes + 2 x 8 dim bytes + 32 payload bytes.
  CHECK(fs::file_size(path) == 8 + 16 + 32);

  std::ifstream in(path, std::ios::binary);
  char header[8];
  in.read(header, 8);
  CHECK(std::string(header, 4) == "CNT1");
  CHECK(header[4] == 2);  // dtype f64
  CHECK(header[5] == 2);  // ndim
  CHECK(header[6] == 0);
  CHECK(header[7] == 0);

  const Tensor t = read_tensor(path);
  CHECK(t.dtype() == 2);
  REQUIRE(t.dims == std::vector<std::uint64_t>{2, 2});
  const auto& data = std::get<std::vector<double>>(t.data);
  CHECK(data == std::vector<double>{1.0, 0.0, 0.0, 1.0});
}

TEST_CASE("empty dims rejected") {
  const double payload[1] = {0.0};
  CHECK_THROWS_AS(write_tensor(temp_file("bad.cnt"), {},
                               std::span<const double>(payload, 1)),
                  TensorIoError);
}

TEST_CASE("seeded random grid round-trips bit-exactly") {
  const fs::path path = temp_file("rt.cnt");
  Rng rng(123);
  std::vector<double> values(16 * 16);
  for (double& v : values) v = rng.normal();
  const std::uint64_t dims[2] = {16, 16};
  write_tensor(path, dims, std::span<const double>(values));
  const Tensor t = read_tensor(path);
  const auto& back = std::get<std::vector<double>>(t.data);
  REQUIRE(back.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Bitwise comparison, not tolerance.
    CHECK(std::memcmp(&back[i], &values[i], sizeof(double)) == 0);
  }
}

TEST_CASE("random shapes and both dtypes round-trip") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int ndim = 1 + static_cast<int>(rng.below(3));
    std::vector<std::uint64_t> dims;
    std::uint64_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      dims.push_back(1 + rng.below(6));
      n *= dims.back();
    }
    const fs::path path = temp_file("shape.cnt");
    if (trial % 2 == 0) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.normal();
      write_tensor(path, dims, std::span<const double>(v));
      const Tensor t = read_tensor(path);
      CHECK(t.dims == dims);
      CHECK(std::get<std::vector<double>>(t.data) == v);
    } else {
      std::vector<float> v(n);
      for (float& x : v) x = static_cast<float>(rng.normal());
      write_tensor(path, dims, std::span<const float>(v));
      const Tensor t = read_tensor(path);
      CHECK(t.dims == dims);
      CHECK(std::get<std::vector<float>>(t.data) == v);
    }
  }
}

TEST_CASE("bad magic, truncation, bad dtype") {
  const fs::path path = temp_file("mal.cnt");
  const std::uint64_t dims[1] = {4};
  const double payload[4] = {1, 2, 3, 4};
  write_tensor(path, dims, std::span<const double>(payload, 4));

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
    f.close();
    try {
      read_tensor(path);
      FAIL("expected TensorIoError");
    } catch (const TensorIoError& e) {
      CHECK(e.code() == TensorIoError::Code::BadMagic);
    }
  }

  SUBCASE("truncated payload") {
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 1);
    try {
      read_tensor(path);
      FAIL("expected TensorIoError");
    } catch (const TensorIoError& e) {
      CHECK(e.code() == TensorIoError::Code::Truncated);
    }
  }

  SUBCASE("unsupported dtype") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char bad = 9;
    f.write(&bad, 1);
    f.close();
    try {
      read_tensor(path);
      FAIL("expected TensorIoError");
    } catch (const TensorIoError& e) {
      CHECK(e.code() == TensorIoError::Code::UnsupportedDtype);
    }
  }
}

TEST_CASE("manifest sidecar naming and round trip") {
  const fs::path artifact = temp_file("artifact.cnt");
  nlohmann::json m;
  m["seed"] = 42;
  m["resolution"] = 16;
  write_manifest(artifact, m);
  CHECK(fs::exists(temp_file("artifact.cnt.manifest.json")));
  const nlohmann::json back = read_manifest(artifact);
  CHECK(back["seed"] == 42);
  CHECK(back["resolution"] == 16);
}
