#pragma once

#include <Eigen/Core>

namespace isclp::metrics {

// How the per-band interference term of fwseg_sir is formed.
enum class BandError {
  Magnitude,  // (|S_ref|_band - |S_est|_band)^2 with band-summed magnitudes (Hu-Loizou)
  Complex,    // sum over the band of |S_ref(k) - S_est(k)|^2
};

struct MetricOptions {
  double sample_rate = 16000.0;
  Eigen::Index frame_length = 512;  // 32 ms at 16 kHz, 50 % overlap
  int bands = 25;
  BandError band_error = BandError::Magnitude;
  double weight_exponent = 0.2;
  double sir_floor_db = -10.0;
  double sir_ceiling_db = 35.0;
  int lpc_order = 10;
  double cd_ceiling_db = 10.0;
  double activity_range_db = 40.0;  // frames quieter than max - range are ignored
};

// Frequency-weighted segmental SIR in dB over Hann frames with 50 % overlap
// and triangular mel bands. Per band, the reference band energy over the
// interference energy, clipped; bands are weighted by the reference band
// magnitude raised to weight_exponent. Throws InputError on length mismatch.
double fwseg_sir(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate,
                 const MetricOptions& options = {});

// Mean LPC-cepstral distance in dB over active frames. Throws InputError on
// length mismatch. Returns 0 if no frame is usable.
double cepstral_distance(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate,
                         const MetricOptions& options = {});

// LPC polynomial [1, a_1, ..., a_p] via Levinson-Durbin on the autocorrelation
// r[0..p]. Returns false if the recursion hits a non-positive error.
bool levinson(const Eigen::VectorXd& autocorr, Eigen::VectorXd& lpc);

// Cepstral coefficients c_1..c_n of 1 / A(z).
Eigen::VectorXd lpc_cepstrum(const Eigen::VectorXd& lpc, int count);

}  // namespace isclp::metrics
