#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "isclp/spatial.hpp"

namespace isclp::scenario {

// Real FFT-based linear convolution, truncated to out_length samples.
Eigen::VectorXd fft_convolve(const Eigen::VectorXd& signal, const Eigen::VectorXd& kernel,
                             Eigen::Index out_length);

struct RirOptions {
  double sample_rate = 16000.0;
  double drr_db = 0.0;  // direct-to-reverberant energy ratio at every microphone
  double sound_speed = spatial::kSoundSpeed;
};

// Far-field direct path (windowed-sinc fractional delay, unit gain) plus an
// exponentially decaying Gaussian tail whose energy falls 60 dB in t60.
// Returns taps x M. Microphone 1 has an integer direct-path delay.
Eigen::MatrixXd synth_rir(const Eigen::MatrixXd& positions, double doa_deg, double t60, std::uint64_t seed,
                          const RirOptions& options = {});

// Integer direct-path delay of microphone 1 used by synth_rir.
Eigen::Index rir_base_delay(const Eigen::MatrixXd& positions, double sample_rate,
                            double sound_speed = spatial::kSoundSpeed);

struct NoiseOptions {
  bool speech_shaped = true;  // -6 dB/octave above 500 Hz, same in every channel
};

// Spatially diffuse noise: per bin, independent complex Gaussian frames mixed
// through a square root of the sinc coherence of positions (M x 3), then
// overlap-added. Returns samples x M, scaled to unit power averaged over
// channels. Any geometry is accepted, including M = 1 and coincident mics.
Eigen::MatrixXd diffuse_noise(const Eigen::MatrixXd& positions, double sample_rate, std::size_t window_length,
                              Eigen::Index num_samples, std::size_t hop, std::uint64_t seed,
                              const NoiseOptions& options = {});

// Speech-like test signal: syllables of pulse-excited or noise-excited
// formant filters separated by pauses. Unit RMS over the whole signal.
Eigen::VectorXd synth_speech(Eigen::Index num_samples, double sample_rate, std::uint64_t seed);

struct SourceSpec {
  double doa_deg = 0.0;
  bool target = true;
  std::string signal_path;  // mono WAV; empty means synthetic speech
  std::string rir_path;     // M-channel WAV RIR; empty means synthetic
  double power_db = 0.0;    // reverberant power at mic 1 relative to the targets (non-targets only)
};

struct SceneConfig {
  Eigen::Index mics = 4;
  double spacing = 0.08;
  double sample_rate = 16000.0;
  std::vector<SourceSpec> sources{SourceSpec{}};
  double t60 = 0.4;
  double drr_db = 0.0;
  std::optional<double> snr_db = 10.0;  // nullopt: no noise
  double duration = 10.0;
  std::uint64_t seed = 1;
  std::size_t window_length = 512;  // early/late split and STFT size for RETFs
  std::size_t hop = 256;

  // At least one target, M > N, positive durations.
  void validate() const;
  Eigen::MatrixXd positions() const { return spatial::linear_array(mics, spacing); }
  std::vector<Eigen::Index> target_indices() const;
};

struct SceneTruth {
  Eigen::MatrixXd mix;                      // samples x M
  std::vector<Eigen::MatrixXd> components;  // reverberant source images x_n, samples x M
  Eigen::MatrixXd noise;                    // samples x M (zero without noise)
  Eigen::MatrixXd noise_template;           // unit-power diffuse noise before SNR scaling
  Eigen::VectorXd reference;                // target early image at mic 1
  std::vector<Eigen::VectorXd> dry_sources;
  std::vector<Eigen::MatrixXd> rirs;
  std::vector<Eigen::MatrixXcd> retf;       // per bin, M x N, unit first row
  std::vector<Eigen::Index> targets;
};

SceneTruth build_scene(const SceneConfig& config);

// Rescales a scene's noise to a new SNR and rebuilds the mix.
void set_scene_snr(SceneTruth& scene, std::optional<double> snr_db);

double power(const Eigen::VectorXd& x);

}  // namespace isclp::scenario
