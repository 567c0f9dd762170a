#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "isclp/kalman.hpp"
#include "isclp/psd_retf.hpp"
#include "isclp/stft.hpp"

namespace isclp::pipeline {

enum class EstimatorKind { Blind, Oracle };

const char* to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

struct EnhanceOptions {
  stft::StftConfig stft{};
  core::ProcessTuning tuning{};
  EstimatorKind estimator = EstimatorKind::Blind;
  Eigen::MatrixXd positions;             // M x 3, needed by the blind estimator
  std::vector<double> source_doas{0.0};  // initial RETF guesses for the blind estimator, one per source
  std::vector<Eigen::Index> targets{0};  // indices into source_doas
  psd::BlindEstimatorConfig blind{};
  double oracle_smoothing = 0.0;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate(Eigen::Index channels) const;
};

// Ground truth for the oracle estimator.
struct OracleInputs {
  stft::TimeFrequencyGrid target_early;   // single channel: target early image at mic 1
  std::vector<Eigen::MatrixXcd> h_target; // per bin, M x N_T
};

struct FrameDiagnostics {
  double gamma_mean = 0.0;
  double phi_e_mean = 0.0;
  double phi_target_mean = 0.0;
  double retf_change_norm = 0.0;  // mean over bins of ||H_T(l) - H_T(l-1)||_F
  std::size_t skipped_bins = 0;
};

struct EnhanceResult {
  stft::TimeFrequencyGrid error;       // e, single channel
  stft::TimeFrequencyGrid error_plus;  // e+ = gamma e, single channel
  Eigen::MatrixXd gamma;               // frames x bins
  Eigen::VectorXd enhanced;            // synthesized e+
  std::vector<FrameDiagnostics> diagnostics;
};

// Runs the per-bin estimator and ISCLP filter over a samples x M signal.
// Bins are processed in parallel; results do not depend on the thread count.
EnhanceResult enhance(const Eigen::MatrixXd& signal, const EnhanceOptions& options,
                      const OracleInputs* oracle = nullptr);

}  // namespace isclp::pipeline
