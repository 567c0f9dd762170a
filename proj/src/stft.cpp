#include "isclp/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "isclp/errors.hpp"

namespace isclp::stft {

void StftConfig::validate() const {
  if (window_length < 2 || window_length % 2 != 0) {
    throw ConfigError("window_length must be even and >= 2, got " +
                      std::to_string(window_length));
  }
  if (hop == 0 || window_length % hop != 0 || window_length < 2 * hop) {
    throw ConfigError("hop " + std::to_string(hop) + " must divide window_length " +
                      std::to_string(window_length) + " with at least 50% overlap");
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

std::vector<double> make_window(const StftConfig& config) {
  config.validate();
  const std::size_t n = config.window_length;
  // Periodic Hann sums to window_length / (2 * hop) over shifts; rescale so the
  // squared sqrt-window overlap-adds to exactly one.
  const double cola = static_cast<double>(n) / (2.0 * static_cast<double>(config.hop));
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    w[i] = std::sqrt(hann / cola);
  }
  return w;
}

TimeFrequencyGrid::TimeFrequencyGrid(std::size_t frames, std::size_t channels,
                                     StftConfig config)
    : frames_(frames),
      bins_(config.num_bins()),
      channels_(channels),
      config_(config),
      data_(frames * config.num_bins() * channels, Complex(0.0, 0.0)) {}

std::size_t frame_count(std::size_t num_samples, const StftConfig& config) {
  if (num_samples <= config.window_length) return 1;
  const std::size_t rest = num_samples - config.window_length;
  return 1 + (rest + config.hop - 1) / config.hop;
}

TimeFrequencyGrid analyze(const Eigen::MatrixXd& signal, const StftConfig& config) {
  config.validate();
  if (signal.rows() == 0 || signal.cols() == 0) throw InputError("analyze: empty signal");
  if (!signal.allFinite()) throw InputError("analyze: signal contains non-finite samples");

  const auto num_samples = static_cast<std::size_t>(signal.rows());
  const auto channels = static_cast<std::size_t>(signal.cols());
  const std::size_t n = config.window_length;
  const std::vector<double> window = make_window(config);

  TimeFrequencyGrid grid(frame_count(num_samples, config), channels, config);
  grid.set_signal_length(num_samples);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> segment(n);
  std::vector<Complex> spectrum;
  for (std::size_t l = 0; l < grid.frames(); ++l) {
    const std::size_t start = l * config.hop;
    for (std::size_t m = 0; m < channels; ++m) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = start + i;
        const double sample =
            t < num_samples ? signal(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) : 0.0;
        segment[i] = window[i] * sample;
      }
      fft.fwd(spectrum, segment);
      for (std::size_t k = 0; k < grid.bins(); ++k) grid.at(l, k, m) = spectrum[k];
    }
  }
  return grid;
}

Eigen::MatrixXd synthesize(const TimeFrequencyGrid& grid) {
  const StftConfig& config = grid.config();
  config.validate();
  if (grid.bins() != config.num_bins() ||
      grid.data().size() != grid.frames() * grid.bins() * grid.channels()) {
    throw InputError("synthesize: grid dimensions inconsistent with its configuration");
  }
  const std::size_t n = config.window_length;
  const std::size_t full_length = grid.frames() == 0 ? 0 : (grid.frames() - 1) * config.hop + n;
  const std::size_t out_length = grid.signal_length() > 0 ? grid.signal_length() : full_length;
  const std::vector<double> window = make_window(config);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(full_length),
                                              static_cast<Eigen::Index>(grid.channels()));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> spectrum(grid.bins());
  std::vector<double> segment;
  for (std::size_t l = 0; l < grid.frames(); ++l) {
    const std::size_t start = l * config.hop;
    for (std::size_t m = 0; m < grid.channels(); ++m) {
      for (std::size_t k = 0; k < grid.bins(); ++k) spectrum[k] = grid.at(l, k, m);
      // DC and Nyquist must be real for a real inverse.
      spectrum.front() = Complex(spectrum.front().real(), 0.0);
      spectrum.back() = Complex(spectrum.back().real(), 0.0);
      fft.inv(segment, spectrum, static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(m)) += window[i] * segment[i];
      }
    }
  }
  if (out_length < full_length) out.conservativeResize(static_cast<Eigen::Index>(out_length), Eigen::NoChange);
  return out;
}

}  // namespace isclp::stft
