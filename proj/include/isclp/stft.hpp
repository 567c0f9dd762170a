#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace isclp::stft {

using Complex = std::complex<double>;

struct StftConfig {
  std::size_t window_length = 512;
  std::size_t hop = 256;
  double sample_rate = 16000.0;

  std::size_t num_bins() const { return window_length / 2 + 1; }
  // Throws ConfigError unless window_length is even, hop divides it and
  // window_length >= 2 * hop.
  void validate() const;
};

// Periodic Hann window raised to the power 0.5. Used for both analysis and
// synthesis, so the squared window sums to one over hop shifts.
std::vector<double> make_window(const StftConfig& config);

// Complex spectra indexed (frame, bin, channel). Channels are contiguous so a
// per-bin microphone vector y(l, k) is a contiguous slice.
class TimeFrequencyGrid {
 public:
  TimeFrequencyGrid() = default;
  TimeFrequencyGrid(std::size_t frames, std::size_t channels, StftConfig config);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }
  const StftConfig& config() const { return config_; }

  // Number of time samples this grid was analysed from; zero when unknown.
  std::size_t signal_length() const { return signal_length_; }
  void set_signal_length(std::size_t n) { signal_length_ = n; }

  Complex& at(std::size_t frame, std::size_t bin, std::size_t channel) {
    return data_[(frame * bins_ + bin) * channels_ + channel];
  }
  const Complex& at(std::size_t frame, std::size_t bin, std::size_t channel) const {
    return data_[(frame * bins_ + bin) * channels_ + channel];
  }

  // Microphone vector for (frame, bin).
  Eigen::Map<Eigen::VectorXcd> frame_vector(std::size_t frame, std::size_t bin) {
    return {data_.data() + (frame * bins_ + bin) * channels_,
            static_cast<Eigen::Index>(channels_)};
  }
  Eigen::Map<const Eigen::VectorXcd> frame_vector(std::size_t frame, std::size_t bin) const {
    return {data_.data() + (frame * bins_ + bin) * channels_,
            static_cast<Eigen::Index>(channels_)};
  }

  const std::vector<Complex>& data() const { return data_; }
  std::vector<Complex>& data() { return data_; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t channels_ = 0;
  StftConfig config_{};
  std::size_t signal_length_ = 0;
  std::vector<Complex> data_;
};

// Number of frames produced for a signal of n samples. The tail is zero
// padded so the last partial frame is complete.
std::size_t frame_count(std::size_t num_samples, const StftConfig& config);

// signal is samples x channels. Frame l covers [l*hop, l*hop + window_length).
TimeFrequencyGrid analyze(const Eigen::MatrixXd& signal, const StftConfig& config);

// Weighted overlap-add with the synthesis window. Returns
// (frames - 1) * hop + window_length samples, or signal_length() samples when
// the grid carries one.
Eigen::MatrixXd synthesize(const TimeFrequencyGrid& grid);

}  // namespace isclp::stft
