#include "isclp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "isclp/errors.hpp"

namespace isclp::metrics {

namespace {

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* who) {
  if (a.size() != b.size()) {
    throw InputError(std::string(who) + ": reference has " + std::to_string(a.size()) +
                     " samples, estimate has " + std::to_string(b.size()));
  }
}

Eigen::VectorXd hann(Eigen::Index n) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Eigen::Index frame_total(Eigen::Index samples, Eigen::Index len) {
  const Eigen::Index hop = len / 2;
  return samples < len ? 0 : (samples - len) / hop + 1;
}

// Frames whose windowed reference energy lies within range_db of the loudest.
std::vector<bool> active_frames(const Eigen::VectorXd& reference, const Eigen::VectorXd& window, double range_db) {
  const Eigen::Index len = window.size();
  const Eigen::Index count = frame_total(reference.size(), len);
  std::vector<double> energy(static_cast<std::size_t>(count));
  double peak = 0.0;
  for (Eigen::Index l = 0; l < count; ++l) {
    const double e = reference.segment(l * (len / 2), len).cwiseProduct(window).squaredNorm();
    energy[static_cast<std::size_t>(l)] = e;
    peak = std::max(peak, e);
  }
  std::vector<bool> active(energy.size(), false);
  if (peak <= 0.0) return active;
  const double threshold = peak * std::pow(10.0, -range_db / 10.0);
  for (std::size_t l = 0; l < energy.size(); ++l) active[l] = energy[l] > 0.0 && energy[l] >= threshold;
  return active;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank, bands x bins, spanning 0 Hz to Nyquist.
Eigen::MatrixXd mel_bank(int bands, Eigen::Index fft_len, double fs) {
  const Eigen::Index bins = fft_len / 2 + 1;
  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(bands, bins);
  const double top = hz_to_mel(fs / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[static_cast<std::size_t>(b)];
    const double mid = edges[static_cast<std::size_t>(b) + 1];
    const double hi = edges[static_cast<std::size_t>(b) + 2];
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(fft_len);
      if (f > lo && f <= mid) bank(b, k) = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) bank(b, k) = (hi - f) / (hi - mid);
    }
  }
  return bank;
}

Eigen::VectorXcd spectrum(const Eigen::VectorXd& frame, Eigen::FFT<double>& fft) {
  std::vector<double> in(frame.data(), frame.data() + frame.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Eigen::VectorXd autocorrelation(const Eigen::VectorXd& x, int order) {
  Eigen::VectorXd r(order + 1);
  for (int k = 0; k <= order; ++k) {
    r(k) = x.head(x.size() - k).dot(x.tail(x.size() - k));
  }
  return r;
}

}  // namespace

bool levinson(const Eigen::VectorXd& autocorr, Eigen::VectorXd& lpc) {
  const Eigen::Index p = autocorr.size() - 1;
  lpc = Eigen::VectorXd::Zero(p + 1);
  lpc(0) = 1.0;
  double err = autocorr(0);
  if (!(err > 0.0)) return false;
  for (Eigen::Index i = 1; i <= p; ++i) {
    double acc = autocorr(i);
    for (Eigen::Index j = 1; j < i; ++j) acc += lpc(j) * autocorr(i - j);
    const double k = -acc / err;
    if (!(std::abs(k) < 1.0)) return false;
    Eigen::VectorXd prev = lpc;
    for (Eigen::Index j = 1; j < i; ++j) lpc(j) = prev(j) + k * prev(i - j);
    lpc(i) = k;
    err *= 1.0 - k * k;
    if (!(err > 0.0)) return false;
  }
  return true;
}

Eigen::VectorXd lpc_cepstrum(const Eigen::VectorXd& lpc, int count) {
  const Eigen::Index p = lpc.size() - 1;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(count + 1);
  for (int n = 1; n <= count; ++n) {
    double acc = n <= p ? -lpc(n) : 0.0;
    for (int k = 1; k < n; ++k) {
      if (n - k <= p) acc -= (static_cast<double>(k) / n) * c(k) * lpc(n - k);
    }
    c(n) = acc;
  }
  return c.tail(count);
}

double fwseg_sir(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate, const MetricOptions& options) {
  check_lengths(reference, estimate, "fwseg_sir");
  const Eigen::Index len = options.frame_length;
  const Eigen::VectorXd window = hann(len);
  const std::vector<bool> active = active_frames(reference, window, options.activity_range_db);
  const Eigen::MatrixXd bank = mel_bank(options.bands, len, options.sample_rate);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);

  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t l = 0; l < active.size(); ++l) {
    if (!active[l]) continue;
    const Eigen::Index start = static_cast<Eigen::Index>(l) * (len / 2);
    const Eigen::VectorXcd ref = spectrum(reference.segment(start, len).cwiseProduct(window), fft);
    const Eigen::VectorXcd est = spectrum(estimate.segment(start, len).cwiseProduct(window), fft);
    const Eigen::VectorXd ref_mag = bank * ref.cwiseAbs();
    Eigen::VectorXd signal, error;
    if (options.band_error == BandError::Complex) {
      signal = bank * ref.cwiseAbs2();
      error = bank * (ref - est).cwiseAbs2();
    } else {
      signal = ref_mag.cwiseAbs2();
      error = (ref_mag - bank * est.cwiseAbs()).cwiseAbs2();
    }
    double num = 0.0;
    double den = 0.0;
    for (int b = 0; b < options.bands; ++b) {
      double sir = options.sir_ceiling_db;
      if (error(b) > 0.0) sir = signal(b) > 0.0 ? 10.0 * std::log10(signal(b) / error(b)) : options.sir_floor_db;
      sir = std::clamp(sir, options.sir_floor_db, options.sir_ceiling_db);
      const double w = std::pow(ref_mag(b), options.weight_exponent);
      num += w * sir;
      den += w;
    }
    if (den <= 0.0) continue;
    total += num / den;
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

double cepstral_distance(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate,
                         const MetricOptions& options) {
  check_lengths(reference, estimate, "cepstral_distance");
  const Eigen::Index len = options.frame_length;
  const Eigen::VectorXd window = hann(len);
  const std::vector<bool> active = active_frames(reference, window, options.activity_range_db);
  const double scale = 10.0 / std::numbers::ln10;

  double total = 0.0;
  std::size_t used = 0;
  Eigen::VectorXd a_ref, a_est;
  for (std::size_t l = 0; l < active.size(); ++l) {
    if (!active[l]) continue;
    const Eigen::Index start = static_cast<Eigen::Index>(l) * (len / 2);
    const Eigen::VectorXd x = reference.segment(start, len).cwiseProduct(window);
    const Eigen::VectorXd y = estimate.segment(start, len).cwiseProduct(window);
    if (!levinson(autocorrelation(x, options.lpc_order), a_ref)) continue;
    double cd = options.cd_ceiling_db;
    if (y.squaredNorm() > 0.0) {
      if (!levinson(autocorrelation(y, options.lpc_order), a_est)) continue;
      const Eigen::VectorXd diff =
          lpc_cepstrum(a_ref, options.lpc_order) - lpc_cepstrum(a_est, options.lpc_order);
      cd = std::min(scale * std::sqrt(2.0 * diff.squaredNorm()), options.cd_ceiling_db);
    }
    total += cd;
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

}  // namespace isclp::metrics
