#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isclp/metrics.hpp"
#include "isclp/pipeline.hpp"
#include "isclp/scenario.hpp"

namespace isclp::experiment {

struct ExperimentConfig {
  scenario::SceneConfig scene{};  // seed and snr_db are overridden per run
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> snrs_db{10.0};
  std::vector<std::size_t> filter_lengths{6};
  std::vector<pipeline::EstimatorKind> estimators{pipeline::EstimatorKind::Oracle};
  core::ProcessTuning tuning{};
  psd::BlindEstimatorConfig blind{};
  double oracle_smoothing = 0.0;
  stft::StftConfig stft{};
  double eval_start = 4.0;  // seconds
  double eval_end = 10.0;   // seconds; clipped to the scene length
  metrics::MetricOptions metric{};  // sample_rate is taken from the scene
  unsigned threads = 0;

  void validate() const;
};

struct SceneResult {
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  std::size_t filter_length = 0;
  pipeline::EstimatorKind estimator = pipeline::EstimatorKind::Oracle;
  double fwseg_sir_mic = 0.0;
  double fwseg_sir_enhanced = 0.0;
  double cd_mic = 0.0;
  double cd_enhanced = 0.0;

  double fwseg_sir_delta() const { return fwseg_sir_enhanced - fwseg_sir_mic; }
  double cd_delta() const { return cd_enhanced - cd_mic; }
};

struct SummaryRow {
  double snr_db = 0.0;
  std::size_t filter_length = 0;
  pipeline::EstimatorKind estimator = pipeline::EstimatorKind::Oracle;
  std::size_t count = 0;
  double fwseg_sir_mic = 0.0;
  double fwseg_sir_enhanced = 0.0;
  double fwseg_sir_delta = 0.0;
  double cd_mic = 0.0;
  double cd_enhanced = 0.0;
  double cd_delta = 0.0;
};

struct ExperimentResult {
  std::vector<SceneResult> scenes;
  std::vector<SummaryRow> medians;  // one per (snr, L, estimator), medians over seeds

  const SummaryRow* find(double snr_db, std::size_t filter_length, pipeline::EstimatorKind estimator) const;
};

// Evaluates mic 1 and the enhanced output against the target early image over
// the evaluation window.
SceneResult evaluate(const scenario::SceneTruth& scene, const Eigen::VectorXd& enhanced, double sample_rate,
                     double eval_start, double eval_end, const metrics::MetricOptions& metric = {});

// Enhancement options derived from a scene: array geometry, source
// directions, targets and, for the oracle, the ground-truth inputs.
pipeline::EnhanceOptions scene_options(const scenario::SceneConfig& scene, const ExperimentConfig& config,
                                       pipeline::EstimatorKind estimator, std::size_t filter_length);
pipeline::OracleInputs oracle_inputs(const scenario::SceneTruth& scene, const stft::StftConfig& stft);

ExperimentResult run_experiment(const ExperimentConfig& config);

double median(std::vector<double> values);

// CSV with a header row, one row per scene followed by one median row per
// (snr_db, filter_length, estimator).
void write_csv(std::ostream& out, const ExperimentResult& result);

}  // namespace isclp::experiment
