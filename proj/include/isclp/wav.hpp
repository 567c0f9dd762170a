#pragma once

#include <string>

#include <Eigen/Core>

namespace isclp::wav {

enum class SampleFormat { Pcm16, Float32 };

struct WavData {
  Eigen::MatrixXd samples;  // samples x channels, nominally in [-1, 1]
  double sample_rate = 0.0;
};

// Reads 16-bit PCM or 32-bit float WAV (plain or WAVE_FORMAT_EXTENSIBLE).
// Throws InputError naming the path on any failure.
WavData read_wav(const std::string& path);

// PCM16 output uses the same 1/32768 scale as the reader and saturates at
// the int16 range.
void write_wav(const std::string& path, const Eigen::MatrixXd& samples, double sample_rate,
               SampleFormat format = SampleFormat::Float32);

}  // namespace isclp::wav
