#include "isclp/kalman.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "isclp/errors.hpp"
#include "isclp/linalg.hpp"
#include "isclp/spatial.hpp"

namespace isclp::core {

double ProcessTuning::alpha() const { return 1.0 - std::pow(10.0, alpha_db / 10.0); }
double ProcessTuning::beta() const { return std::pow(10.0, beta_db / 20.0); }
double ProcessTuning::psi_lp() const { return std::pow(10.0, psi_lp_db / 10.0); }

double ProcessTuning::psi_sc(double frequency, double nyquist) const {
  const double t = nyquist > 0.0 ? frequency / nyquist : 0.0;
  return std::pow(10.0, (psi_sc_db_low + (psi_sc_db_high - psi_sc_db_low) * t) / 10.0);
}

void ProcessTuning::validate() const {
  if (filter_length < 2) {
    throw ConfigError("filter length L must be >= 2, got " + std::to_string(filter_length));
  }
  if (!std::isfinite(alpha_db) || alpha_db >= 0.0) throw ConfigError("alpha-db must be finite and < 0");
  if (!std::isfinite(beta_db) || beta_db > 0.0) throw ConfigError("beta-db must be <= 0");
  if (!std::isfinite(psi_lp_db) || psi_lp_db >= 0.0) throw ConfigError("psi-lp-db must be finite and < 0");
  if (!std::isfinite(psi_sc_db_low) || !std::isfinite(psi_sc_db_high)) {
    throw ConfigError("psi-sc-db endpoints must be finite");
  }
}

ProcessModel ProcessModel::for_bin(const ProcessTuning& tuning, Eigen::Index channels,
                                   Eigen::Index num_targets, double frequency, double nyquist) {
  tuning.validate();
  ProcessModel m;
  m.alpha = tuning.alpha();
  m.beta = tuning.beta();
  m.psi_sc = tuning.psi_sc(frequency, nyquist);
  m.psi_lp = tuning.psi_lp();
  m.filter_length = tuning.filter_length;
  m.channels = channels;
  m.num_targets = num_targets;
  m.validate();
  return m;
}

Eigen::VectorXd ProcessModel::prior_diagonal() const {
  Eigen::VectorXd d(state_dim());
  d.head(sc_dim()).setConstant(psi_sc);
  double power = 1.0;
  for (std::size_t i = 1; i < filter_length; ++i) {
    power *= psi_lp;
    d.segment(sc_dim() + static_cast<Eigen::Index>(i - 1) * channels, channels).setConstant(power);
  }
  return d;
}

void ProcessModel::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(psi_sc > 0.0)) throw ConfigError("psi_sc must be positive");
  if (!(psi_lp > 0.0 && psi_lp < 1.0)) throw ConfigError("psi_lp must lie in (0, 1)");
  if (filter_length < 2) throw ConfigError("filter length L must be >= 2");
  if (num_targets < 1 || num_targets >= channels) throw ConfigError("need 1 <= N_T < M");
}

KalmanState KalmanState::initial(const ProcessModel& model) {
  KalmanState s;
  s.w_hat = Eigen::VectorXcd::Zero(model.state_dim());
  s.err_cov = model.prior_diagonal().cast<Complex>().asDiagonal();
  return s;
}

DelayLine::DelayLine(Eigen::Index channels, std::size_t depth)
    : channels_(channels),
      depth_(depth),
      buffer_(depth * static_cast<std::size_t>(channels), Complex(0.0, 0.0)) {}

Eigen::Map<const Eigen::VectorXcd> DelayLine::at(std::size_t i) const {
  const std::size_t slot = (head_ + i) % depth_;
  return {buffer_.data() + slot * static_cast<std::size_t>(channels_), channels_};
}

void DelayLine::push(const Eigen::VectorXcd& y) {
  if (y.size() != channels_) throw InputError("DelayLine::push: channel count mismatch");
  if (depth_ == 0) return;
  head_ = (head_ + depth_ - 1) % depth_;
  Eigen::Map<Eigen::VectorXcd>(buffer_.data() + head_ * static_cast<std::size_t>(channels_), channels_) = y;
}

Eigen::VectorXcd assemble_input(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& blocking,
                                const DelayLine& delay) {
  const Eigen::Index m = y.size();
  if (blocking.rows() != m || delay.channels() != m) {
    throw InputError("assemble_input: dimension mismatch between y, B and the delay line");
  }
  const Eigen::Index sc = blocking.cols();
  Eigen::VectorXcd u(sc + static_cast<Eigen::Index>(delay.depth()) * m);
  u.head(sc).noalias() = blocking.adjoint() * y;
  for (std::size_t i = 0; i < delay.depth(); ++i) {
    u.segment(sc + static_cast<Eigen::Index>(i) * m, m) = delay.at(i);
  }
  return u;
}

void time_update(KalmanState& state, const ProcessModel& model) {
  const double a = model.alpha;
  state.w_hat *= std::sqrt(a);
  state.err_cov *= a;
  state.err_cov.diagonal().real() += (1.0 - a) * model.prior_diagonal();
  linalg::symmetrize(state.err_cov);
}

bool condition_covariance(Eigen::MatrixXcd& err_cov, bool full_check) {
  linalg::symmetrize(err_cov);
  const double trace = err_cov.trace().real();
  const double tol = -1e-10 * std::abs(trace);
  bool ok = err_cov.allFinite() && (err_cov.diagonal().real().array() >= tol).all();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver;
  bool solved = false;
  if (ok && full_check) {
    solver.compute(err_cov);
    solved = true;
    ok = solver.eigenvalues().minCoeff() >= tol;
  }
  if (ok) return false;
  if (!err_cov.allFinite()) throw NumericalError("Kalman error covariance became non-finite");
  if (!solved) solver.compute(err_cov);
  const Eigen::VectorXd floored = solver.eigenvalues().cwiseMax(0.0);
  err_cov = solver.eigenvectors() * floored.cast<Complex>().asDiagonal() * solver.eigenvectors().adjoint();
  linalg::symmetrize(err_cov);
  return true;
}

MeasurementResult measurement_update(KalmanState& state, const Eigen::VectorXcd& u, Complex q,
                                     double phi_target) {
  if (u.size() != state.w_hat.size()) throw InputError("measurement_update: input dimension mismatch");
  if (!u.allFinite() || !std::isfinite(q.real()) || !std::isfinite(q.imag()) || !std::isfinite(phi_target)) {
    throw InputError("measurement_update: non-finite input");
  }
  if (phi_target < 0.0) throw InputError("measurement_update: target PSD must be non-negative");

  MeasurementResult r;
  // e* = q* - u^H w  <=>  e = q - w^H u
  r.error = q - state.w_hat.dot(u);
  const Eigen::VectorXcd psi_u = state.err_cov * u;
  r.phi_e = u.dot(psi_u).real() + phi_target;
  if (!(r.phi_e >= kPhiEFloor)) {
    r.skipped = true;
    return r;
  }
  const Eigen::VectorXcd gain = psi_u / r.phi_e;
  state.w_hat += gain * std::conj(r.error);
  // Psi - k u^H Psi = Psi - (Psi u)(Psi u)^H / phi_e
  state.err_cov.noalias() -= gain * psi_u.adjoint();
  condition_covariance(state.err_cov, false);
  return r;
}

GainResult post_gain(KalmanState& state, Complex error, double phi_e, double phi_target, double beta) {
  const double wiener = std::min(1.0, phi_target / std::max(phi_e, kPhiEFloor));
  double gamma = std::max(wiener, beta * state.gain_prev);
  gamma = std::clamp(gamma, kGainFloor, 1.0);
  state.gain_prev = gamma;
  return {gamma * error, gamma};
}

Complex posterior_error(const KalmanState& state, const Eigen::VectorXcd& u, Complex q) {
  return q - state.w_hat.dot(u);
}

BinProcessor::BinProcessor(const ProcessModel& model)
    : model_(model),
      state_(KalmanState::initial(model)),
      delay_(model.channels, model.filter_length - 1) {
  model_.validate();
}

FrameOutput BinProcessor::step(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_target,
                               double phi_target) {
  if (y.size() != model_.channels || h_target.rows() != model_.channels ||
      h_target.cols() != model_.num_targets) {
    throw InputError("BinProcessor::step: dimension mismatch");
  }
  const bool rebuild = h_cached_.size() == 0 ||
                       (h_target - h_cached_).norm() > 1e-6 * h_cached_.norm();
  if (rebuild) {
    mf_ = spatial::build_mf(h_target);
    bm_ = spatial::build_bm(h_target);
    h_cached_ = h_target;
    ++rebuilds_;
  }

  const Complex q = mf_.dot(y);  // g^H y
  const Eigen::VectorXcd u = assemble_input(y, bm_, delay_);
  time_update(state_, model_);
  const MeasurementResult m = measurement_update(state_, u, q, phi_target);
  if (!m.skipped && (state_.frame_index + 1) % 100 == 0) condition_covariance(state_.err_cov, true);
  const GainResult g = post_gain(state_, m.error, m.phi_e, phi_target, model_.beta);
  delay_.push(y);
  ++state_.frame_index;
  return {m.error, g.e_plus, g.gamma, m.phi_e, m.skipped};
}

std::vector<FrameOutput> process_bin(std::span<const Eigen::VectorXcd> frames,
                                     std::span<const Eigen::MatrixXcd> retf_stream,
                                     std::span<const double> psd_stream, const ProcessModel& model) {
  if (frames.size() != retf_stream.size() || frames.size() != psd_stream.size()) {
    throw InputError("process_bin: frame, RETF and PSD streams are misaligned");
  }
  BinProcessor proc(model);
  std::vector<FrameOutput> out;
  out.reserve(frames.size());
  for (std::size_t l = 0; l < frames.size(); ++l) out.push_back(proc.step(frames[l], retf_stream[l], psd_stream[l]));
  return out;
}

}  // namespace isclp::core
