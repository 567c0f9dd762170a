#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "isclp/errors.hpp"
#include "isclp/scenario.hpp"
#include "isclp/spatial.hpp"
#include "isclp/stft.hpp"

using namespace isclp;

namespace {

scenario::SceneConfig short_scene(double seconds = 2.0) {
  scenario::SceneConfig c;
  c.duration = seconds;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("fft convolution matches direct convolution") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(300), h(37);
  for (auto& v : x) v = nd(rng);
  for (auto& v : h) v = nd(rng);
  const Eigen::VectorXd y = scenario::fft_convolve(x, h, 336);
  for (Eigen::Index n = 0; n < 336; ++n) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < h.size(); ++k)
      if (n - k >= 0 && n - k < x.size()) acc += h(k) * x(n - k);
    CHECK(y(n) == doctest::Approx(acc).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("rir is deterministic per seed") {
  const auto pos = spatial::linear_array(4, 0.08);
  const Eigen::MatrixXd a = scenario::synth_rir(pos, 30.0, 0.4, 9);
  const Eigen::MatrixXd b = scenario::synth_rir(pos, 30.0, 0.4, 9);
  const Eigen::MatrixXd c = scenario::synth_rir(pos, 30.0, 0.4, 10);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(scenario::synth_rir(pos, 0.0, 0.0, 1), ConfigError);
}

TEST_CASE("rir direct path sits at the base delay of mic 1") {
  const auto pos = spatial::linear_array(4, 0.08);
  const Eigen::MatrixXd r = scenario::synth_rir(pos, 0.0, 0.3, 3);
  const Eigen::Index base = scenario::rir_base_delay(pos, 16000.0);
  CHECK(r(base, 0) == doctest::Approx(1.0));
  for (Eigen::Index n = 0; n < base; ++n) CHECK(std::abs(r(n, 0)) < 1e-15);
}

TEST_CASE("rir energy envelope falls 60 dB over T60") {
  const auto pos = spatial::linear_array(2, 0.08);
  const double t60 = 0.5;
  const Eigen::MatrixXd r = scenario::synth_rir(pos, 0.0, t60, 5);
  const Eigen::Index start = scenario::rir_base_delay(pos, 16000.0) + 1;
  const Eigen::Index t60_len = static_cast<Eigen::Index>(t60 * 16000.0);
  // Least-squares line through the log energy of 10 ms blocks of the tail.
  const Eigen::Index block = 160;
  std::vector<double> t, e;
  for (Eigen::Index b0 = start + block; b0 + block <= start + t60_len; b0 += block) {
    const double energy = r.col(0).segment(b0, block).squaredNorm() + r.col(1).segment(b0, block).squaredNorm();
    t.push_back(static_cast<double>(b0 - start) + 0.5 * block);
    e.push_back(10.0 * std::log10(energy));
  }
  const double n = static_cast<double>(t.size());
  double st = 0, se = 0, stt = 0, ste = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    se += e[i];
    stt += t[i] * t[i];
    ste += t[i] * e[i];
  }
  const double slope = (n * ste - st * se) / (n * stt - st * st);
  CHECK(slope * static_cast<double>(t60_len) == doctest::Approx(-60.0).epsilon(1.0 / 60.0));
}

TEST_CASE("rir collapses onto the direct path as T60 shrinks") {
  const auto pos = spatial::linear_array(3, 0.08);
  scenario::RirOptions opt;
  opt.drr_db = 40.0;
  const Eigen::MatrixXd r = scenario::synth_rir(pos, 0.0, 1e-4, 2, opt);
  const Eigen::Index base = scenario::rir_base_delay(pos, 16000.0);
  for (Eigen::Index m = 0; m < 3; ++m) {
    const double total = r.col(m).squaredNorm();
    CHECK(r(base, m) * r(base, m) / total > 0.999);
  }
  // At fixed DRR the tail energy is kept, so it piles up within two samples
  // of the direct path instead of vanishing.
  const Eigen::MatrixXd r0 = scenario::synth_rir(pos, 0.0, 1e-4, 2);
  const double near = r0.col(0).segment(base, 3).squaredNorm();
  CHECK(1.0 - near / r0.col(0).squaredNorm() < 1e-6);
}

TEST_CASE("diffuse noise follows the sinc coherence") {
  const auto pos = spatial::linear_array(2, 0.08);
  const Eigen::MatrixXd v = scenario::diffuse_noise(pos, 16000.0, 512, 160000, 256, 3);
  CHECK(0.5 * (scenario::power(v.col(0)) + scenario::power(v.col(1))) == doctest::Approx(1.0).epsilon(1e-12));
  // Welch estimate with 256-sample segments: twice the averages of the
  // generation grid, so the estimator spread near zero coherence stays well
  // under the tolerance.
  stft::StftConfig cfg;
  cfg.window_length = 256;
  cfg.hop = 128;
  const auto grid = stft::analyze(v, cfg);
  double worst = 0.0;
  for (std::size_t k = 1; k < grid.bins() - 1; ++k) {
    std::complex<double> cross = 0.0;
    double p0 = 0.0, p1 = 0.0;
    for (std::size_t l = 0; l < grid.frames(); ++l) {
      cross += grid.at(l, k, 0) * std::conj(grid.at(l, k, 1));
      p0 += std::norm(grid.at(l, k, 0));
      p1 += std::norm(grid.at(l, k, 1));
    }
    const double f = static_cast<double>(k) * 16000.0 / 256.0;
    const double x = 2.0 * std::numbers::pi * f * 0.08 / spatial::kSoundSpeed;
    worst = std::max(worst, std::abs(cross.real() / std::sqrt(p0 * p1) - std::sin(x) / x));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("diffuse noise edge geometries") {
  const Eigen::MatrixXd v = scenario::diffuse_noise(Eigen::MatrixXd::Zero(2, 3), 16000.0, 512, 32000, 256, 4);
  const double c = v.col(0).dot(v.col(1)) / std::sqrt(v.col(0).squaredNorm() * v.col(1).squaredNorm());
  CHECK(c > 0.999);

  const Eigen::MatrixXd w = scenario::diffuse_noise(Eigen::MatrixXd::Zero(1, 3), 16000.0, 512, 32000, 256, 4);
  CHECK(w.cols() == 1);
  CHECK(scenario::power(w.col(0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(w.allFinite());
}

TEST_CASE("synthetic speech has unit RMS and pauses") {
  const Eigen::VectorXd s = scenario::synth_speech(48000, 16000.0, 5);
  CHECK(scenario::power(s) == doctest::Approx(1.0).epsilon(1e-9));
  int quiet = 0;
  for (Eigen::Index b = 0; b + 256 <= s.size(); b += 256) quiet += s.segment(b, 256).squaredNorm() < 1e-3 * 256 ? 1 : 0;
  CHECK(quiet > 0);
}

TEST_CASE("scene config validation") {
  auto c = short_scene();
  c.sources[0].target = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_scene();
  c.mics = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_scene();
  c.duration = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_scene();
  c.sources[0].signal_path = "/nonexistent/source.wav";
  try {
    scenario::build_scene(c);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/source.wav") != std::string::npos);
  }
}

TEST_CASE("scene is deterministic and sums its components") {
  auto c = short_scene();
  scenario::SourceSpec interferer;
  interferer.doa_deg = 60.0;
  interferer.target = false;
  c.sources.push_back(interferer);
  const auto a = scenario::build_scene(c);
  const auto b = scenario::build_scene(c);
  CHECK((a.mix - b.mix).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.reference - b.reference).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd sum = a.noise;
  for (const auto& x : a.components) sum += x;
  CHECK((a.mix - sum).cwiseAbs().maxCoeff() == 0.0);

  // Equal reverberant power of interferer and target at mic 1.
  CHECK(scenario::power(a.components[1].col(0)) ==
        doctest::Approx(scenario::power(a.components[0].col(0))).epsilon(1e-9));
  REQUIRE(a.retf.size() == 257);
  for (const auto& h : a.retf) CHECK((h.row(0) - Eigen::RowVectorXcd::Ones(h.cols())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scene SNR is set at mic 1") {
  auto c = short_scene();
  for (double snr : {-5.0, 0.0, 10.0, 25.0}) {
    c.snr_db = snr;
    const auto s = scenario::build_scene(c);
    const double measured = 10.0 * std::log10(scenario::power(s.components[0].col(0)) / scenario::power(s.noise.col(0)));
    CHECK(std::abs(measured - snr) < 0.1);
  }
  c.snr_db = std::nullopt;
  const auto quiet = scenario::build_scene(c);
  CHECK(quiet.noise.cwiseAbs().maxCoeff() == 0.0);
  CHECK(quiet.mix.rows() == 32000);

  auto again = scenario::build_scene(short_scene());
  scenario::set_scene_snr(again, 3.0);
  const double measured =
      10.0 * std::log10(scenario::power(again.components[0].col(0)) / scenario::power(again.noise.col(0)));
  CHECK(measured == doctest::Approx(3.0).epsilon(1e-9));
}
