#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include <doctest.h>

#include "isclp/errors.hpp"
#include "isclp/kalman.hpp"
#include "isclp/spatial.hpp"

using namespace isclp;
using core::Complex;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXcd a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {nd(rng), nd(rng)};
  return a;
}

core::ProcessModel small_model(double alpha = 0.9) {
  core::ProcessModel m;
  m.alpha = alpha;
  m.beta = 0.5;
  m.psi_sc = 1.0;
  m.psi_lp = 0.4;
  m.filter_length = 2;
  m.channels = 3;
  m.num_targets = 1;
  return m;
}

core::KalmanState random_state(Eigen::Index dim, std::mt19937_64& rng) {
  core::KalmanState s;
  s.w_hat = random_matrix(dim, 1, rng);
  const MatrixXcd a = random_matrix(dim, dim, rng);
  s.err_cov = a * a.adjoint() + 0.1 * MatrixXcd::Identity(dim, dim);
  return s;
}

double min_eigenvalue(const MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(a);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("tuning converts to linear parameters") {
  core::ProcessTuning t;
  CHECK(1.0 - t.alpha() == doctest::Approx(std::pow(10.0, -2.5)));
  CHECK(t.beta() == doctest::Approx(std::pow(10.0, -0.1)));
  CHECK(t.psi_lp() == doctest::Approx(std::pow(10.0, -0.4)));
  CHECK(t.psi_sc(0.0, 8000.0) == doctest::Approx(1.0));
  CHECK(t.psi_sc(8000.0, 8000.0) == doctest::Approx(std::pow(10.0, -1.5)));
  CHECK(t.psi_sc(4000.0, 8000.0) == doctest::Approx(std::pow(10.0, -0.75)));
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("filter length 1 is rejected") {
  core::ProcessTuning t;
  t.filter_length = 1;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  auto m = small_model();
  m.filter_length = 1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  CHECK_THROWS_AS(core::BinProcessor{m}, ConfigError);
}

TEST_CASE("model dimensions and prior") {
  const auto m = core::ProcessModel::for_bin(core::ProcessTuning{}, 4, 1, 0.0, 8000.0);
  CHECK(m.state_dim() == 6 * 4 - 1);
  CHECK(m.sc_dim() == 3);
  const Eigen::VectorXd d = m.prior_diagonal();
  REQUIRE(d.size() == 23);
  for (int i = 0; i < 3; ++i) CHECK(d(i) == doctest::Approx(m.psi_sc));
  for (int block = 1; block <= 5; ++block)
    for (int j = 0; j < 4; ++j) CHECK(d(3 + 4 * (block - 1) + j) == doctest::Approx(std::pow(m.psi_lp, block)));
}

TEST_CASE("input vector stacks blocked output and delayed frames") {
  std::mt19937_64 rng(1);
  const MatrixXcd h = random_matrix(2, 1, rng);
  MatrixXcd hn = h / h(0, 0);
  const MatrixXcd bm = spatial::build_bm(hn);
  core::DelayLine delay(2, 1);

  const VectorXcd u0 = core::assemble_input(hn.col(0), bm, delay);
  CHECK(u0.size() == 3);
  CHECK(u0.cwiseAbs().maxCoeff() < 1e-15);

  for (int trial = 0; trial < 10; ++trial) {
    const VectorXcd y = random_matrix(2, 1, rng);
    const VectorXcd prev = delay.at(0);
    const VectorXcd u = core::assemble_input(y, bm, delay);
    CHECK(std::abs(u(0) - (bm.adjoint() * y)(0)) < 1e-14);
    CHECK((u.tail(2) - prev).cwiseAbs().maxCoeff() == 0.0);
    delay.push(y);
  }
}

TEST_CASE("delay line keeps the newest frame first") {
  core::DelayLine d(2, 3);
  for (int i = 1; i <= 4; ++i) d.push(VectorXcd::Constant(2, Complex(i, -i)));
  CHECK(d.at(0)(0) == Complex(4, -4));
  CHECK(d.at(1)(0) == Complex(3, -3));
  CHECK(d.at(2)(1) == Complex(2, -2));
}

TEST_CASE("time update fixed point and alpha = 1") {
  const auto m = small_model();
  auto s = core::KalmanState::initial(m);
  const MatrixXcd prior = s.err_cov;
  CHECK((prior - MatrixXcd(m.prior_diagonal().cast<Complex>().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
  core::time_update(s, m);
  CHECK((s.err_cov - prior).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(2);
  auto r = random_state(m.state_dim(), rng);
  const auto before = r;
  core::time_update(r, small_model(1.0));
  CHECK((r.w_hat - before.w_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.err_cov - before.err_cov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("without measurements the state relaxes geometrically") {
  const auto m = small_model(0.8);
  std::mt19937_64 rng(3);
  auto s = random_state(m.state_dim(), rng);
  const VectorXcd w0 = s.w_hat;
  const MatrixXcd prior = m.prior_diagonal().cast<Complex>().asDiagonal();
  const double d0 = (s.err_cov - prior).norm();
  for (int n = 1; n <= 60; ++n) {
    core::time_update(s, m);
    CHECK(s.w_hat.norm() == doctest::Approx(std::pow(m.alpha, n / 2.0) * w0.norm()).epsilon(1e-12));
    CHECK((s.err_cov - prior).norm() == doctest::Approx(std::pow(m.alpha, n) * d0).epsilon(1e-9));
  }
}

TEST_CASE("scalar measurement update by hand") {
  core::KalmanState s;
  s.w_hat = VectorXcd::Zero(1);
  s.err_cov = MatrixXcd::Ones(1, 1);
  const VectorXcd u = VectorXcd::Ones(1);
  const auto r = core::measurement_update(s, u, Complex(1.0), 1.0);
  CHECK_FALSE(r.skipped);
  CHECK(std::abs(r.error - 1.0) < 1e-15);
  CHECK(r.phi_e == doctest::Approx(2.0));
  CHECK(std::abs(s.w_hat(0) - 0.5) < 1e-15);
  CHECK(std::abs(s.err_cov(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(core::posterior_error(s, u, Complex(1.0)) - 0.5) < 1e-15);
}

TEST_CASE("zero input leaves the state alone") {
  std::mt19937_64 rng(4);
  auto s = random_state(5, rng);
  const auto before = s;
  const auto r = core::measurement_update(s, VectorXcd::Zero(5), Complex(0.3, -0.2), 2.0);
  CHECK(r.error == Complex(0.3, -0.2));
  CHECK((s.w_hat - before.w_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.err_cov - before.err_cov).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(core::posterior_error(s, VectorXcd::Zero(5), Complex(0.3, -0.2)) - r.error) == 0.0);
}

TEST_CASE("large target PSD freezes the filter") {
  std::mt19937_64 rng(5);
  auto s = random_state(4, rng);
  const VectorXcd w = s.w_hat;
  core::measurement_update(s, random_matrix(4, 1, rng), Complex(1.0, 2.0), 1e12);
  CHECK((s.w_hat - w).norm() < 1e-9);
}

TEST_CASE("measurement update keeps the covariance PSD and shrinks its trace") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ud(0.01, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_state(6, rng);
    const double trace_before = s.err_cov.trace().real();
    const double phi = ud(rng);
    const auto r = core::measurement_update(s, random_matrix(6, 1, rng), random_matrix(1, 1, rng)(0), phi);
    CHECK(r.phi_e >= phi);
    CHECK(s.err_cov.trace().real() <= trace_before + 1e-12);
    CHECK((s.err_cov - s.err_cov.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(min_eigenvalue(s.err_cov) > -1e-10);
  }
}

TEST_CASE("post gain examples") {
  core::KalmanState s;
  s.gain_prev = 1.0;
  const auto g0 = core::post_gain(s, Complex(2.0, 1.0), 2.0, 1.0, 0.0);
  CHECK(g0.gamma == doctest::Approx(0.5));
  CHECK(std::abs(g0.e_plus - Complex(1.0, 0.5)) < 1e-15);

  s.gain_prev = 1.0;
  for (int i = 0; i < 20; ++i) {
    const auto g = core::post_gain(s, Complex(0.1 * i, 1.0), 3.0, 0.01, 1.0);
    CHECK(g.gamma == 1.0);
    CHECK(g.e_plus == Complex(0.1 * i, 1.0));
  }

  s.gain_prev = 0.9;
  const double beta = std::pow(10.0, -2.0 / 20.0);
  const auto g = core::post_gain(s, Complex(1.0), 2.0, 1.0, beta);
  CHECK(g.gamma == doctest::Approx(0.7149).epsilon(1e-4));
  CHECK(g.gamma == doctest::Approx(beta * 0.9));
  CHECK(s.gain_prev == g.gamma);
}

TEST_CASE("posterior error equals the gain-scaled prior error") {
  core::KalmanState s;
  s.w_hat = VectorXcd::Zero(1);
  s.err_cov = MatrixXcd::Ones(1, 1);
  const auto r = core::measurement_update(s, VectorXcd::Ones(1), Complex(1.0), 1.0);
  CHECK(std::abs(core::posterior_error(s, VectorXcd::Ones(1), Complex(1.0)) - 0.5 * r.error) < 1e-15);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ud(0.01, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto st = random_state(4, rng);
    const VectorXcd u = random_matrix(4, 1, rng);
    const Complex q = random_matrix(1, 1, rng)(0);
    const double phi = ud(rng);
    const auto m = core::measurement_update(st, u, q, phi);
    const Complex plus = core::posterior_error(st, u, q);
    CHECK(std::abs(plus - (phi / m.phi_e) * m.error) < 1e-12 * std::abs(m.error));
  }
}

TEST_CASE("covariance conditioning floors negative eigenvalues") {
  MatrixXcd a = MatrixXcd::Identity(3, 3);
  a(2, 2) = -0.5;
  CHECK(core::condition_covariance(a, true));
  CHECK(min_eigenvalue(a) > -1e-14);
  MatrixXcd b = 2.0 * MatrixXcd::Identity(3, 3);
  CHECK_FALSE(core::condition_covariance(b, true));
}

TEST_CASE("bin processor on all-zero input") {
  const auto m = core::ProcessModel::for_bin(core::ProcessTuning{}, 3, 1, 1000.0, 8000.0);
  core::BinProcessor proc(m);
  const MatrixXcd h = MatrixXcd::Ones(3, 1);
  const MatrixXcd prior = m.prior_diagonal().cast<Complex>().asDiagonal();
  for (int l = 0; l < 50; ++l) {
    const auto out = proc.step(VectorXcd::Zero(3), h, 0.0);
    CHECK(out.e == Complex(0.0));
    CHECK(out.e_plus == Complex(0.0));
    CHECK(out.gamma > 0.0);
    CHECK(out.gamma <= 1.0);
  }
  CHECK(proc.state().w_hat.cwiseAbs().maxCoeff() == 0.0);
  CHECK((proc.state().err_cov - prior).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("bin processor rebuilds its spatial filters only on RETF changes") {
  const auto m = core::ProcessModel::for_bin(core::ProcessTuning{}, 3, 1, 1000.0, 8000.0);
  core::BinProcessor proc(m);
  std::mt19937_64 rng(8);
  MatrixXcd h = random_matrix(3, 1, rng);
  h /= h(0, 0);
  for (int l = 0; l < 5; ++l) proc.step(random_matrix(3, 1, rng), h, 1.0);
  CHECK(proc.spatial_rebuilds() == 1);
  CHECK(std::abs((proc.matched_filter().adjoint() * h)(0, 0) - 1.0) < 1e-12);
  h(1, 0) += 0.1;
  proc.step(random_matrix(3, 1, rng), h, 1.0);
  CHECK(proc.spatial_rebuilds() == 2);
  CHECK((proc.blocking_matrix().adjoint() * h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("process_bin checks stream lengths") {
  const auto m = core::ProcessModel::for_bin(core::ProcessTuning{}, 2, 1, 1000.0, 8000.0);
  std::vector<VectorXcd> frames(3, VectorXcd::Ones(2));
  std::vector<MatrixXcd> retf(2, MatrixXcd::Ones(2, 1));
  std::vector<double> psd(3, 1.0);
  CHECK_THROWS_AS(core::process_bin(frames, retf, psd, m), InputError);
  retf.push_back(MatrixXcd::Ones(2, 1));
  CHECK(core::process_bin(frames, retf, psd, m).size() == 3);
}
