#include <cmath>
#include <random>

#include <doctest.h>

#include "isclp/errors.hpp"
#include "isclp/metrics.hpp"
#include "isclp/scenario.hpp"

using namespace isclp;

namespace {

Eigen::VectorXd speech(unsigned seed = 3) { return scenario::synth_speech(48000, 16000.0, seed); }

Eigen::VectorXd noise(Eigen::Index n, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

}  // namespace

TEST_CASE("fwseg-SIR of a perfect estimate hits the ceiling") {
  const auto s = speech();
  CHECK(metrics::fwseg_sir(s, s) == doctest::Approx(35.0));
  metrics::MetricOptions mag;
  mag.band_error = metrics::BandError::Magnitude;
  CHECK(metrics::fwseg_sir(s, s, mag) == doctest::Approx(35.0));
}

TEST_CASE("fwseg-SIR of a silent estimate is near the floor") {
  const auto s = speech();
  const double v = metrics::fwseg_sir(s, Eigen::VectorXd::Zero(s.size()));
  CHECK(v >= -10.0);
  CHECK(v <= 0.0);
}

TEST_CASE("fwseg-SIR with -50 dB noise") {
  // Spectrally flat reference, so every band sits about 50 dB above the noise.
  const auto s = noise(48000, 1.0, 7);
  const double v = metrics::fwseg_sir(s, s + noise(s.size(), std::pow(10.0, -2.5), 4));
  CHECK(v >= 30.0);
}

TEST_CASE("fwseg-SIR drops as noise grows") {
  const auto s = speech();
  double prev = 36.0;
  for (double db : {-30.0, -20.0, -10.0, 0.0}) {
    const double v = metrics::fwseg_sir(s, s + noise(s.size(), std::pow(10.0, db / 20.0), 5));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("fwseg-SIR is not gain invariant") {
  const auto s = speech();
  CHECK(metrics::fwseg_sir(s, 0.5 * s) < 35.0);
  // A half-amplitude estimate leaves an error of half the reference in every
  // band: 20 log10(2) dB.
  CHECK(metrics::fwseg_sir(s, 0.5 * s) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));
}

TEST_CASE("metrics reject length mismatch") {
  const auto s = speech();
  CHECK_THROWS_AS(metrics::fwseg_sir(s, s.head(100)), InputError);
  CHECK_THROWS_AS(metrics::cepstral_distance(s, s.head(100)), InputError);
}

TEST_CASE("levinson against a known AR(1) process") {
  // r[k] = a^k is the autocorrelation of x(n) = a x(n-1) + w(n).
  const double a = 0.8;
  Eigen::VectorXd r(4);
  for (int k = 0; k < 4; ++k) r(k) = std::pow(a, k);
  Eigen::VectorXd lpc;
  REQUIRE(metrics::levinson(r, lpc));
  CHECK(lpc(0) == 1.0);
  CHECK(lpc(1) == doctest::Approx(-a));
  CHECK(std::abs(lpc(2)) < 1e-12);
  CHECK(std::abs(lpc(3)) < 1e-12);
  // ln 1/(1 - a z^-1) = sum a^n / n z^-n.
  const Eigen::VectorXd c = metrics::lpc_cepstrum(lpc, 5);
  for (int n = 1; n <= 5; ++n) CHECK(c(n - 1) == doctest::Approx(std::pow(a, n) / n));

  Eigen::VectorXd bad(3);
  bad << 0.0, 0.0, 0.0;
  CHECK_FALSE(metrics::levinson(bad, lpc));
}

TEST_CASE("cepstral distance examples") {
  const auto s = speech();
  CHECK(metrics::cepstral_distance(s, s) == doctest::Approx(0.0));
  CHECK(metrics::cepstral_distance(s, 0.5 * s) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  const double v = metrics::cepstral_distance(s, noise(s.size(), 1.0, 6));
  CHECK(v >= 5.0);
  CHECK(v <= 10.0);
  CHECK(metrics::cepstral_distance(Eigen::VectorXd::Zero(1000), Eigen::VectorXd::Zero(1000)) == 0.0);
}
