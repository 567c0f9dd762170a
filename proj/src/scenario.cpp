#include "isclp/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "isclp/errors.hpp"
#include "isclp/stft.hpp"
#include "isclp/wav.hpp"

namespace isclp::scenario {

namespace {

using Complex = std::complex<double>;
constexpr Eigen::Index kFracDelayHalfWidth = 16;

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> real_fft(const Eigen::VectorXd& x, Eigen::Index nfft) {
  std::vector<double> buf(static_cast<std::size_t>(nfft), 0.0);
  std::copy(x.data(), x.data() + std::min(x.size(), nfft), buf.begin());
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> spec;
  fft.fwd(spec, buf);
  return spec;
}

Eigen::VectorXd real_ifft(const std::vector<Complex>& spec, Eigen::Index nfft, Eigen::Index out_length) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf;
  fft.inv(buf, spec, nfft);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_length);
  const Eigen::Index n = std::min(out_length, nfft);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = buf[static_cast<std::size_t>(i)];
  return out;
}

// Delay of each microphone relative to microphone 1 in seconds for a far-field
// source; same sign convention as spatial::steering_vector.
Eigen::VectorXd relative_delays(const Eigen::MatrixXd& positions, double doa_deg, double sound_speed) {
  const double theta = doa_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d dir(std::sin(theta), std::cos(theta), 0.0);
  Eigen::VectorXd tau(positions.rows());
  for (Eigen::Index m = 0; m < positions.rows(); ++m) {
    tau(m) = -(positions.row(m) - positions.row(0)).dot(dir) / sound_speed;
  }
  return tau;
}

// Two-pole resonator with unity gain at DC-normalised peak.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double process(double x, double freq, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    const double y = (1.0 - r) * x + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct Vowel {
  std::array<double, 4> formants;
};

constexpr std::array<Vowel, 7> kVowels{{
    {{730, 1090, 2440, 3400}},  // a
    {{270, 2290, 3010, 3700}},  // i
    {{300, 870, 2240, 3300}},   // u
    {{530, 1840, 2480, 3500}},  // e
    {{570, 840, 2410, 3300}},   // o
    {{660, 1720, 2410, 3400}},  // ae
    {{490, 1350, 1690, 3300}},  // er
}};
constexpr std::array<double, 4> kBandwidths{60, 90, 120, 160};

Eigen::VectorXd load_mono(const std::string& path, double sample_rate, Eigen::Index num_samples) {
  const wav::WavData w = wav::read_wav(path);
  if (std::abs(w.sample_rate - sample_rate) > 0.5) {
    throw InputError("source " + path + " has sample rate " + std::to_string(w.sample_rate) +
                     ", expected " + std::to_string(sample_rate));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_samples);
  const Eigen::Index n = std::min(num_samples, w.samples.rows());
  out.head(n) = w.samples.col(0).head(n);
  return out;
}

}  // namespace

double power(const Eigen::VectorXd& x) { return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<double>(x.size()); }

Eigen::VectorXd fft_convolve(const Eigen::VectorXd& signal, const Eigen::VectorXd& kernel, Eigen::Index out_length) {
  if (signal.size() == 0 || kernel.size() == 0) return Eigen::VectorXd::Zero(out_length);
  const Eigen::Index nfft = next_pow2(signal.size() + kernel.size() - 1);
  std::vector<Complex> a = real_fft(signal, nfft);
  const std::vector<Complex> b = real_fft(kernel, nfft);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return real_ifft(a, nfft, out_length);
}

Eigen::Index rir_base_delay(const Eigen::MatrixXd& positions, double sample_rate, double sound_speed) {
  double extent = 0.0;
  for (Eigen::Index m = 0; m < positions.rows(); ++m) {
    extent = std::max(extent, (positions.row(m) - positions.row(0)).norm());
  }
  return kFracDelayHalfWidth + 8 + static_cast<Eigen::Index>(std::ceil(extent / sound_speed * sample_rate));
}

Eigen::MatrixXd synth_rir(const Eigen::MatrixXd& positions, double doa_deg, double t60, std::uint64_t seed,
                          const RirOptions& options) {
  if (!(t60 > 0.0)) throw ConfigError("synth_rir: T60 must be positive");
  const double fs = options.sample_rate;
  const Eigen::Index mics = positions.rows();
  const Eigen::Index base = rir_base_delay(positions, fs, options.sound_speed);
  const Eigen::VectorXd tau = relative_delays(positions, doa_deg, options.sound_speed);

  // Amplitude decays by 1000 (energy by 60 dB) over t60.
  const double decay = std::log(1000.0) / (t60 * fs);
  const double tail_energy = std::pow(10.0, -options.drr_db / 10.0);
  const double sigma = std::sqrt(tail_energy * (1.0 - std::exp(-2.0 * decay)));
  const auto tail_len = static_cast<Eigen::Index>(std::ceil(t60 * fs * 80.0 / 60.0)) + 1;
  const Eigen::Index taps = base + 2 * kFracDelayHalfWidth + tail_len;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd rir = Eigen::MatrixXd::Zero(taps, mics);
  for (Eigen::Index m = 0; m < mics; ++m) {
    const double delay = static_cast<double>(base) + tau(m) * fs;
    const auto centre = static_cast<Eigen::Index>(std::floor(delay));
    for (Eigen::Index n = centre - kFracDelayHalfWidth; n <= centre + kFracDelayHalfWidth + 1; ++n) {
      const double x = static_cast<double>(n) - delay;
      if (std::abs(x) >= static_cast<double>(kFracDelayHalfWidth)) continue;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / static_cast<double>(kFracDelayHalfWidth));
      rir(n, m) += sinc * win;
    }
    const Eigen::Index start = static_cast<Eigen::Index>(std::ceil(delay)) + 1;
    for (Eigen::Index n = start; n < taps; ++n) {
      rir(n, m) += sigma * std::exp(-decay * static_cast<double>(n - start)) * normal(rng);
    }
  }
  return rir;
}

Eigen::MatrixXd diffuse_noise(const Eigen::MatrixXd& positions, double sample_rate, std::size_t window_length,
                              Eigen::Index num_samples, std::size_t hop, std::uint64_t seed,
                              const NoiseOptions& options) {
  stft::StftConfig cfg;
  cfg.window_length = window_length;
  cfg.hop = hop;
  cfg.sample_rate = sample_rate;
  cfg.validate();
  if (positions.cols() != 3 || positions.rows() < 1) throw InputError("diffuse_noise: positions must be M x 3");
  const Eigen::Index mics = positions.rows();
  const std::size_t frames = stft::frame_count(static_cast<std::size_t>(num_samples), cfg);

  std::vector<Eigen::MatrixXcd> roots;
  roots.reserve(cfg.num_bins());
  for (std::size_t k = 0; k < cfg.num_bins(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window_length);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(spatial::sinc_coherence(positions, f));
    const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    double shape = 1.0;
    if (options.speech_shaped) {
      shape = 1.0 / std::sqrt(1.0 + (f / 500.0) * (f / 500.0));
    }
    roots.push_back(shape * es.eigenvectors() * s.cast<Complex>().asDiagonal());
  }

  stft::TimeFrequencyGrid grid(frames, static_cast<std::size_t>(mics), cfg);
  grid.set_signal_length(static_cast<std::size_t>(num_samples));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::VectorXcd z(mics);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t k = 0; k < cfg.num_bins(); ++k) {
      for (Eigen::Index m = 0; m < mics; ++m) z(m) = Complex(normal(rng), normal(rng));
      grid.frame_vector(l, k) = roots[k] * z;
    }
  }
  Eigen::MatrixXd noise = stft::synthesize(grid);
  const double p = noise.squaredNorm() / static_cast<double>(noise.size());
  if (p > 0.0) noise /= std::sqrt(p);
  return noise;
}

Eigen::VectorXd synth_speech(Eigen::Index num_samples, double sample_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto range = [&](double a, double b) { return a + (b - a) * uni(rng); };
  std::normal_distribution<double> normal(0.0, 1.0);

  const double fs = sample_rate;
  const double speaker_f0 = range(95.0, 220.0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_samples);

  Eigen::Index t = static_cast<Eigen::Index>(range(0.02, 0.15) * fs);
  while (t < num_samples) {
    const auto len = static_cast<Eigen::Index>(range(0.12, 0.35) * fs);
    const bool voiced = uni(rng) < 0.8;
    const Vowel& va = kVowels[static_cast<std::size_t>(uni(rng) * kVowels.size()) % kVowels.size()];
    const Vowel& vb = kVowels[static_cast<std::size_t>(uni(rng) * kVowels.size()) % kVowels.size()];
    const double f0_start = speaker_f0 * range(0.85, 1.2);
    const double f0_end = f0_start * range(0.75, 1.05);
    const double amp = range(0.4, 1.0);
    const double attack = 0.02 * fs;
    const double release = 0.05 * fs;

    std::array<Resonator, 4> tract{};
    Resonator glottal_lp{};
    double phase = 1.0;
    double prev_excitation = 0.0;
    for (Eigen::Index i = 0; i < len && t + i < num_samples; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(len);
      double excitation;
      if (voiced) {
        const double f0 = f0_start + (f0_end - f0_start) * frac;
        phase += f0 / fs;
        double pulse = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          pulse = 1.0;
        }
        // Low-passed pulse train approximates the glottal flow derivative.
        excitation = glottal_lp.process(pulse, 0.0, 400.0, fs) * 8.0 + 0.01 * normal(rng);
      } else {
        excitation = 0.3 * normal(rng);
      }
      double s = excitation;
      for (std::size_t f = 0; f < tract.size(); ++f) {
        const double formant = voiced ? va.formants[f] + (vb.formants[f] - va.formants[f]) * frac
                                      : 1000.0 + 1200.0 * static_cast<double>(f) + 400.0 * frac;
        s = tract[f].process(s, formant, kBandwidths[f] * (voiced ? 1.0 : 3.0), fs) * 4.0;
      }
      // Lip radiation.
      const double radiated = s - prev_excitation;
      prev_excitation = s;
      const double n = static_cast<double>(i);
      const double env = std::min({1.0, n / attack, (static_cast<double>(len) - n) / release});
      out(t + i) += amp * std::max(env, 0.0) * radiated;
    }
    t += len;
    const double pause = uni(rng) < 0.15 ? range(0.3, 0.6) : range(0.05, 0.25);
    t += static_cast<Eigen::Index>(pause * fs);
  }
  const double rms = std::sqrt(power(out));
  if (rms > 0.0) out /= rms;
  return out;
}

void SceneConfig::validate() const {
  if (mics < 2) throw ConfigError("scene needs at least two microphones");
  if (!(spacing > 0.0)) throw ConfigError("microphone spacing must be positive");
  if (sources.empty()) throw ConfigError("scene needs at least one source");
  if (static_cast<Eigen::Index>(sources.size()) >= mics) throw ConfigError("scene needs M > N");
  if (std::none_of(sources.begin(), sources.end(), [](const SourceSpec& s) { return s.target; })) {
    throw ConfigError("scene needs at least one target source");
  }
  if (!(t60 > 0.0)) throw ConfigError("T60 must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (snr_db && !std::isfinite(*snr_db)) throw ConfigError("SNR must be finite (omit it to disable noise)");
}

std::vector<Eigen::Index> SceneConfig::target_indices() const {
  std::vector<Eigen::Index> t;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].target) t.push_back(static_cast<Eigen::Index>(i));
  }
  return t;
}

void set_scene_snr(SceneTruth& scene, std::optional<double> snr_db) {
  const Eigen::Index rows = scene.noise_template.rows();
  const Eigen::Index cols = scene.noise_template.cols();
  Eigen::VectorXd target_mic1 = Eigen::VectorXd::Zero(rows);
  for (Eigen::Index t : scene.targets) target_mic1 += scene.components[static_cast<std::size_t>(t)].col(0);
  scene.noise.setZero(rows, cols);
  if (snr_db) {
    const double pv = power(scene.noise_template.col(0));
    if (pv > 0.0) {
      const double scale = std::sqrt(power(target_mic1) / (pv * std::pow(10.0, *snr_db / 10.0)));
      scene.noise = scale * scene.noise_template;
    }
  }
  scene.mix = scene.noise;
  for (const auto& c : scene.components) scene.mix += c;
}

SceneTruth build_scene(const SceneConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(std::llround(config.duration * config.sample_rate));
  const Eigen::MatrixXd positions = config.positions();
  const Eigen::Index mics = config.mics;
  const auto nsrc = static_cast<Eigen::Index>(config.sources.size());
  const auto early_len = static_cast<Eigen::Index>(config.window_length);

  SceneTruth scene;
  scene.targets = config.target_indices();
  std::seed_seq seq{config.seed, static_cast<std::uint64_t>(0x15c1b)};
  std::vector<std::uint64_t> seeds(2 * config.sources.size() + 1);
  seq.generate(seeds.begin(), seeds.end());

  RirOptions rir_opts;
  rir_opts.sample_rate = config.sample_rate;
  rir_opts.drr_db = config.drr_db;
  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    const SourceSpec& spec = config.sources[i];
    scene.dry_sources.push_back(spec.signal_path.empty() ? synth_speech(n, config.sample_rate, seeds[2 * i])
                                                         : load_mono(spec.signal_path, config.sample_rate, n));
    if (spec.rir_path.empty()) {
      scene.rirs.push_back(synth_rir(positions, spec.doa_deg, config.t60, seeds[2 * i + 1], rir_opts));
    } else {
      const wav::WavData w = wav::read_wav(spec.rir_path);
      if (w.samples.cols() != mics) throw InputError("RIR " + spec.rir_path + " must have one channel per microphone");
      scene.rirs.push_back(w.samples);
    }
  }

  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    Eigen::MatrixXd image(n, mics);
    for (Eigen::Index m = 0; m < mics; ++m) image.col(m) = fft_convolve(scene.dry_sources[i], scene.rirs[i].col(m), n);
    scene.components.push_back(std::move(image));
  }

  // Non-targets are set relative to the combined target power at mic 1.
  double target_power = 0.0;
  {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
    for (Eigen::Index idx : scene.targets) t += scene.components[static_cast<std::size_t>(idx)].col(0);
    target_power = power(t);
  }
  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    if (config.sources[i].target) continue;
    const double p = power(scene.components[i].col(0));
    if (p <= 0.0) continue;
    const double scale = std::sqrt(target_power * std::pow(10.0, config.sources[i].power_db / 10.0) / p);
    scene.components[i] *= scale;
    scene.dry_sources[i] *= scale;
  }

  scene.reference = Eigen::VectorXd::Zero(n);
  for (Eigen::Index idx : scene.targets) {
    const auto i = static_cast<std::size_t>(idx);
    scene.reference += fft_convolve(scene.dry_sources[i], scene.rirs[i].col(0).head(std::min(early_len, scene.rirs[i].rows())), n);
  }

  // True RETFs from the early part of each RIR.
  const std::size_t bins = config.window_length / 2 + 1;
  scene.retf.assign(bins, Eigen::MatrixXcd(mics, nsrc));
  for (Eigen::Index s = 0; s < nsrc; ++s) {
    const Eigen::MatrixXd& rir = scene.rirs[static_cast<std::size_t>(s)];
    std::vector<std::vector<Complex>> spectra;
    for (Eigen::Index m = 0; m < mics; ++m) {
      const Eigen::VectorXd early = rir.col(m).head(std::min(early_len, rir.rows()));
      spectra.push_back(real_fft(early, early_len));
    }
    for (std::size_t k = 0; k < bins; ++k) {
      const Complex ref = spectra[0][k];
      for (Eigen::Index m = 0; m < mics; ++m) {
        scene.retf[k](m, s) = std::abs(ref) > 1e-12 ? spectra[static_cast<std::size_t>(m)][k] / ref : Complex(m == 0 ? 1.0 : 0.0);
      }
      scene.retf[k](0, s) = 1.0;
    }
  }

  scene.noise_template = diffuse_noise(positions, config.sample_rate, config.window_length, n, config.hop, seeds.back());
  set_scene_snr(scene, config.snr_db);
  return scene;
}

}  // namespace isclp::scenario
