#include "isclp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "isclp/errors.hpp"
#include "isclp/spatial.hpp"

namespace isclp::pipeline {

const char* to_string(EstimatorKind kind) { return kind == EstimatorKind::Blind ? "blind" : "oracle"; }

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "blind") return EstimatorKind::Blind;
  if (name == "oracle") return EstimatorKind::Oracle;
  throw ConfigError("unknown estimator '" + name + "' (expected blind or oracle)");
}

void EnhanceOptions::validate(Eigen::Index channels) const {
  stft.validate();
  tuning.validate();
  if (channels < 2) throw ConfigError("enhancement needs at least two microphone channels");
  if (targets.empty()) throw ConfigError("at least one target source is required");
  for (Eigen::Index t : targets) {
    if (t < 0 || t >= static_cast<Eigen::Index>(source_doas.size())) {
      throw ConfigError("target index " + std::to_string(t) + " has no source direction");
    }
  }
  if (static_cast<Eigen::Index>(source_doas.size()) >= channels) {
    throw ConfigError("number of sources must be smaller than the number of microphones");
  }
  if (estimator == EstimatorKind::Blind && positions.rows() != channels) {
    throw ConfigError("array geometry has " + std::to_string(positions.rows()) + " microphones but the signal has " +
                      std::to_string(channels) + " channels");
  }
}

namespace {

struct BinTrace {
  std::vector<core::FrameOutput> out;
  std::vector<double> phi_target;
  std::vector<double> retf_change;
};

BinTrace run_bin(const stft::TimeFrequencyGrid& grid, std::size_t k, const EnhanceOptions& options,
                 const OracleInputs* oracle, const spatial::CoherenceModel* coherence) {
  const auto mics = static_cast<Eigen::Index>(grid.channels());
  const auto num_targets = static_cast<Eigen::Index>(options.targets.size());
  const double fs = options.stft.sample_rate;
  const double freq = static_cast<double>(k) * fs / static_cast<double>(options.stft.window_length);
  const core::ProcessModel model = core::ProcessModel::for_bin(options.tuning, mics, num_targets, freq, fs / 2.0);
  core::BinProcessor proc(model);

  BinTrace trace;
  trace.out.reserve(grid.frames());
  trace.phi_target.reserve(grid.frames());
  trace.retf_change.reserve(grid.frames());

  if (options.estimator == EstimatorKind::Oracle) {
    const Eigen::MatrixXcd& h = oracle->h_target.at(k);
    for (std::size_t l = 0; l < grid.frames(); ++l) {
      double phi = std::norm(oracle->target_early.at(l, k, 0));
      if (options.oracle_smoothing > 0.0 && l > 0) {
        phi = options.oracle_smoothing * trace.phi_target.back() + (1.0 - options.oracle_smoothing) * phi;
      }
      trace.out.push_back(proc.step(grid.frame_vector(l, k), h, phi));
      trace.phi_target.push_back(phi);
      trace.retf_change.push_back(0.0);
    }
    return trace;
  }

  Eigen::MatrixXcd h0(mics, static_cast<Eigen::Index>(options.source_doas.size()));
  for (std::size_t n = 0; n < options.source_doas.size(); ++n) {
    h0.col(static_cast<Eigen::Index>(n)) = spatial::steering_vector(options.positions, options.source_doas[n], freq);
  }
  psd::BlindEstimator est(coherence->gamma(k), coherence->default_loading(k), h0, options.targets, options.blind);
  Eigen::MatrixXcd h_prev;
  for (std::size_t l = 0; l < grid.frames(); ++l) {
    const Eigen::VectorXcd y = grid.frame_vector(l, k);
    const psd::TargetEstimate te = est.step(y);
    trace.out.push_back(proc.step(y, te.h_target, te.phi_target));
    trace.phi_target.push_back(te.phi_target);
    trace.retf_change.push_back(h_prev.size() == 0 ? 0.0 : (te.h_target - h_prev).norm());
    h_prev = te.h_target;
  }
  return trace;
}

}  // namespace

EnhanceResult enhance(const Eigen::MatrixXd& signal, const EnhanceOptions& options, const OracleInputs* oracle) {
  const Eigen::Index mics = signal.cols();
  options.validate(mics);
  if (!signal.allFinite()) throw InputError("input signal contains non-finite samples");

  const stft::TimeFrequencyGrid grid = stft::analyze(signal, options.stft);
  const std::size_t frames = grid.frames();
  const std::size_t bins = grid.bins();

  if (options.estimator == EstimatorKind::Oracle) {
    if (oracle == nullptr) throw ConfigError("the oracle estimator needs ground-truth inputs");
    if (oracle->target_early.frames() != frames || oracle->target_early.bins() != bins ||
        oracle->h_target.size() != bins) {
      throw InputError("oracle inputs are not aligned with the signal grid");
    }
    for (const auto& h : oracle->h_target) {
      if (h.rows() != mics || h.cols() != static_cast<Eigen::Index>(options.targets.size())) {
        throw InputError("oracle RETF has the wrong shape");
      }
    }
  }

  std::unique_ptr<spatial::CoherenceModel> coherence;
  if (options.estimator == EstimatorKind::Blind) {
    coherence = std::make_unique<spatial::CoherenceModel>(options.positions, options.stft.sample_rate,
                                                          options.stft.window_length);
  }

  std::vector<BinTrace> traces(bins);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < bins; k = next++) {
      try {
        traces[k] = run_bin(grid, k, options, oracle, coherence.get());
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(bins));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnhanceResult result;
  result.error = stft::TimeFrequencyGrid(frames, 1, options.stft);
  result.error_plus = stft::TimeFrequencyGrid(frames, 1, options.stft);
  result.error.set_signal_length(grid.signal_length());
  result.error_plus.set_signal_length(grid.signal_length());
  result.gamma.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  result.diagnostics.resize(frames);
  for (std::size_t l = 0; l < frames; ++l) {
    FrameDiagnostics& d = result.diagnostics[l];
    for (std::size_t k = 0; k < bins; ++k) {
      const core::FrameOutput& o = traces[k].out[l];
      result.error.at(l, k, 0) = o.e;
      result.error_plus.at(l, k, 0) = o.e_plus;
      result.gamma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = o.gamma;
      d.gamma_mean += o.gamma;
      d.phi_e_mean += o.phi_e;
      d.phi_target_mean += traces[k].phi_target[l];
      d.retf_change_norm += traces[k].retf_change[l];
      d.skipped_bins += o.update_skipped ? 1 : 0;
    }
    const auto nb = static_cast<double>(bins);
    d.gamma_mean /= nb;
    d.phi_e_mean /= nb;
    d.phi_target_mean /= nb;
    d.retf_change_norm /= nb;
  }
  result.enhanced = stft::synthesize(result.error_plus).col(0);
  return result;
}

}  // namespace isclp::pipeline
