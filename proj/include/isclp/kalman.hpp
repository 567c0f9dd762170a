#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace isclp::core {

using Complex = std::complex<double>;

// Global tuning in the units it is usually quoted in. Converted to a
// per-bin ProcessModel with for_bin().
struct ProcessTuning {
  double alpha_db = -25.0;        // 10 log10(1 - alpha)
  double beta_db = -2.0;          // 20 log10(beta)
  double psi_lp_db = -4.0;        // 10 log10(psi_lp)
  double psi_sc_db_low = 0.0;     // 10 log10(psi_sc) at 0 Hz
  double psi_sc_db_high = -15.0;  // 10 log10(psi_sc) at the Nyquist frequency
  std::size_t filter_length = 6;  // L, number of stacked frames (current + L-1 delayed)

  double alpha() const;
  double beta() const;
  double psi_lp() const;
  // Linear-in-dB interpolation between the endpoints over [0, nyquist].
  double psi_sc(double frequency, double nyquist) const;
  void validate() const;
};

struct ProcessModel {
  double alpha = 0.0;
  double beta = 0.0;
  double psi_sc = 1.0;
  double psi_lp = 0.5;
  std::size_t filter_length = 2;
  Eigen::Index channels = 2;
  Eigen::Index num_targets = 1;

  static ProcessModel for_bin(const ProcessTuning& tuning, Eigen::Index channels,
                              Eigen::Index num_targets, double frequency, double nyquist);

  Eigen::Index sc_dim() const { return channels - num_targets; }
  Eigen::Index state_dim() const {
    return static_cast<Eigen::Index>(filter_length) * channels - num_targets;
  }
  // Diagonal of the prior state covariance guess: psi_sc for the SC part,
  // psi_lp^i for the i-th delayed block of M LP coefficients.
  Eigen::VectorXd prior_diagonal() const;
  // alpha in (0, 1] (1 only for analysis), beta in [0, 1], psi_sc > 0,
  // psi_lp in (0, 1), L >= 2, 1 <= N_T < M.
  void validate() const;
};

struct KalmanState {
  Eigen::VectorXcd w_hat;    // stacked [SC; LP] filter estimate
  Eigen::MatrixXcd err_cov;  // state estimation error covariance, Hermitian PSD
  double gain_prev = 1.0;
  std::size_t frame_index = 0;

  // w = 0, error covariance = prior guess, gain = 1.
  static KalmanState initial(const ProcessModel& model);
};

// Last L-1 microphone frames, newest first, zero initialised.
class DelayLine {
 public:
  DelayLine(Eigen::Index channels, std::size_t depth);

  std::size_t depth() const { return depth_; }
  Eigen::Index channels() const { return channels_; }
  // i = 0 is y(l-1).
  Eigen::Map<const Eigen::VectorXcd> at(std::size_t i) const;
  void push(const Eigen::VectorXcd& y);

 private:
  Eigen::Index channels_;
  std::size_t depth_;
  std::size_t head_ = 0;  // slot of the newest frame
  std::vector<Complex> buffer_;
};

// u = [B^H y; y(l-1); ...; y(l-L+1)].
Eigen::VectorXcd assemble_input(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& blocking,
                                const DelayLine& delay);

// w = sqrt(alpha) w+,  Psi = alpha Psi+ + (1 - alpha) Psi_bar.
void time_update(KalmanState& state, const ProcessModel& model);

inline constexpr double kPhiEFloor = 1e-20;
inline constexpr double kGainFloor = 1e-12;

struct MeasurementResult {
  Complex error;         // prior error e, the enhanced-signal estimate
  double phi_e = 0.0;    // u^H Psi u + phi_sT
  bool skipped = false;  // phi_e fell below kPhiEFloor; state untouched
};

MeasurementResult measurement_update(KalmanState& state, const Eigen::VectorXcd& u, Complex q,
                                     double phi_target);

struct GainResult {
  Complex e_plus;
  double gamma = 1.0;
};

// gamma = max(phi_sT / phi_e, beta * gamma_prev), e+ = gamma e. Stores gamma.
GainResult post_gain(KalmanState& state, Complex error, double phi_e, double phi_target, double beta);

// q - w+^H u, evaluated with the posterior filter.
Complex posterior_error(const KalmanState& state, const Eigen::VectorXcd& u, Complex q);

// Re-symmetrizes the error covariance and, if a cheap diagnostic (or the full
// eigen check when full_check is set) fails, floors its eigenvalues at zero.
// Returns true if flooring was applied.
bool condition_covariance(Eigen::MatrixXcd& err_cov, bool full_check);

struct FrameOutput {
  Complex e;
  Complex e_plus;
  double gamma = 1.0;
  double phi_e = 0.0;
  bool update_skipped = false;
};

// Per-bin ISCLP recursion carrying the Kalman state, delay line and the cached
// matched filter / blocking matrix.
class BinProcessor {
 public:
  explicit BinProcessor(const ProcessModel& model);

  FrameOutput step(const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h_target, double phi_target);

  const KalmanState& state() const { return state_; }
  const ProcessModel& model() const { return model_; }
  const Eigen::VectorXcd& matched_filter() const { return mf_; }
  const Eigen::MatrixXcd& blocking_matrix() const { return bm_; }
  std::size_t spatial_rebuilds() const { return rebuilds_; }

 private:
  ProcessModel model_;
  KalmanState state_;
  DelayLine delay_;
  Eigen::MatrixXcd h_cached_;
  Eigen::VectorXcd mf_;
  Eigen::MatrixXcd bm_;
  std::size_t rebuilds_ = 0;
};

// Runs a BinProcessor over aligned per-frame streams. Throws InputError if
// the streams differ in length.
std::vector<FrameOutput> process_bin(std::span<const Eigen::VectorXcd> frames,
                                     std::span<const Eigen::MatrixXcd> retf_stream,
                                     std::span<const double> psd_stream, const ProcessModel& model);

}  // namespace isclp::core
