#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "isclp/errors.hpp"
#include "isclp/wav.hpp"

using namespace isclp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / (std::string("isclp_test_") + name); }

Eigen::MatrixXd ramp(Eigen::Index n, Eigen::Index channels) {
  Eigen::MatrixXd x(n, channels);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < channels; ++c) x(i, c) = 0.9 * std::sin(0.01 * static_cast<double>(i * (c + 1)));
  return x;
}

}  // namespace

TEST_CASE("float wav round trip is exact at float precision") {
  const auto path = temp_file("float.wav");
  const Eigen::MatrixXd x = ramp(1000, 3);
  wav::write_wav(path.string(), x, 16000.0, wav::SampleFormat::Float32);
  const auto back = wav::read_wav(path.string());
  CHECK(back.sample_rate == 16000.0);
  REQUIRE(back.samples.rows() == 1000);
  REQUIRE(back.samples.cols() == 3);
  CHECK((back.samples - x).cwiseAbs().maxCoeff() < 1e-7);
  fs::remove(path);
}

TEST_CASE("pcm16 wav round trip within half a quantization step") {
  const auto path = temp_file("pcm.wav");
  Eigen::MatrixXd x = ramp(500, 2);
  x(0, 0) = 1.5;  // clipped
  wav::write_wav(path.string(), x, 8000.0, wav::SampleFormat::Pcm16);
  const auto back = wav::read_wav(path.string());
  CHECK(back.sample_rate == 8000.0);
  CHECK(back.samples(0, 0) == doctest::Approx(32767.0 / 32768.0));
  CHECK((back.samples.bottomRows(499) - x.bottomRows(499)).cwiseAbs().maxCoeff() <= 0.5 / 32768.0);
  CHECK(fs::file_size(path) == 44 + 500 * 2 * 2);
  fs::remove(path);
}

TEST_CASE("read errors name the path") {
  const std::string missing = "/nonexistent/dir/input.wav";
  try {
    wav::read_wav(missing);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }

  const auto junk = temp_file("junk.wav");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "this is not a wav file";
  }
  try {
    wav::read_wav(junk.string());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find(junk.string()) != std::string::npos);
  }
  fs::remove(junk);
}
