#include "isclp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "isclp/errors.hpp"
#include "isclp/metrics.hpp"

namespace isclp::experiment {

void ExperimentConfig::validate() const {
  scene.validate();
  stft.validate();
  tuning.validate();
  if (seeds.empty() || snrs_db.empty() || filter_lengths.empty() || estimators.empty()) {
    throw ConfigError("experiment needs at least one seed, SNR, filter length and estimator");
  }
  for (std::size_t l : filter_lengths) {
    core::ProcessTuning t = tuning;
    t.filter_length = l;
    t.validate();
  }
  if (!(eval_start >= 0.0) || !(eval_end > eval_start)) throw ConfigError("evaluation window must have end > start >= 0");
  if (eval_start * scene.sample_rate >= std::floor(scene.duration * scene.sample_rate)) {
    throw ConfigError("evaluation window starts after the end of the scene");
  }
  if (std::abs(stft.sample_rate - scene.sample_rate) > 0.5) throw ConfigError("STFT and scene sample rates differ");
}

const SummaryRow* ExperimentResult::find(double snr_db, std::size_t filter_length,
                                         pipeline::EstimatorKind estimator) const {
  for (const auto& row : medians) {
    if (row.snr_db == snr_db && row.filter_length == filter_length && row.estimator == estimator) return &row;
  }
  return nullptr;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SceneResult evaluate(const scenario::SceneTruth& scene, const Eigen::VectorXd& enhanced, double sample_rate,
                     double eval_start, double eval_end, const metrics::MetricOptions& metric) {
  const Eigen::Index n = scene.reference.size();
  if (enhanced.size() != n) throw InputError("enhanced signal length differs from the scene length");
  const auto start = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::llround(eval_start * sample_rate)));
  const auto end = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::llround(eval_end * sample_rate)));
  const Eigen::VectorXd ref = scene.reference.segment(start, end - start);
  const Eigen::VectorXd mic = scene.mix.col(0).segment(start, end - start);
  const Eigen::VectorXd enh = enhanced.segment(start, end - start);
  metrics::MetricOptions mo = metric;
  mo.sample_rate = sample_rate;
  SceneResult r;
  r.fwseg_sir_mic = metrics::fwseg_sir(ref, mic, mo);
  r.fwseg_sir_enhanced = metrics::fwseg_sir(ref, enh, mo);
  r.cd_mic = metrics::cepstral_distance(ref, mic, mo);
  r.cd_enhanced = metrics::cepstral_distance(ref, enh, mo);
  return r;
}

pipeline::EnhanceOptions scene_options(const scenario::SceneConfig& scene, const ExperimentConfig& config,
                                       pipeline::EstimatorKind estimator, std::size_t filter_length) {
  pipeline::EnhanceOptions opt;
  opt.stft = config.stft;
  opt.tuning = config.tuning;
  opt.tuning.filter_length = filter_length;
  opt.estimator = estimator;
  opt.positions = scene.positions();
  opt.source_doas.clear();
  for (const auto& s : scene.sources) opt.source_doas.push_back(s.doa_deg);
  opt.targets = scene.target_indices();
  opt.blind = config.blind;
  opt.oracle_smoothing = config.oracle_smoothing;
  opt.threads = config.threads;
  return opt;
}

pipeline::OracleInputs oracle_inputs(const scenario::SceneTruth& scene, const stft::StftConfig& stft) {
  pipeline::OracleInputs in;
  in.target_early = stft::analyze(scene.reference, stft);
  in.h_target.reserve(scene.retf.size());
  for (const auto& h : scene.retf) {
    Eigen::MatrixXcd ht(h.rows(), static_cast<Eigen::Index>(scene.targets.size()));
    for (std::size_t i = 0; i < scene.targets.size(); ++i) ht.col(static_cast<Eigen::Index>(i)) = h.col(scene.targets[i]);
    in.h_target.push_back(std::move(ht));
  }
  return in;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) {
    scenario::SceneConfig sc = config.scene;
    sc.seed = seed;
    sc.snr_db = config.snrs_db.front();
    scenario::SceneTruth scene = scenario::build_scene(sc);
    const pipeline::OracleInputs oracle = oracle_inputs(scene, config.stft);
    for (double snr : config.snrs_db) {
      scenario::set_scene_snr(scene, snr);
      for (std::size_t l : config.filter_lengths) {
        for (pipeline::EstimatorKind est : config.estimators) {
          const pipeline::EnhanceOptions opt = scene_options(sc, config, est, l);
          const pipeline::EnhanceResult out = pipeline::enhance(scene.mix, opt, &oracle);
          SceneResult r = evaluate(scene, out.enhanced, sc.sample_rate, config.eval_start, config.eval_end, config.metric);
          r.seed = seed;
          r.snr_db = snr;
          r.filter_length = l;
          r.estimator = est;
          result.scenes.push_back(r);
        }
      }
    }
  }

  for (double snr : config.snrs_db) {
    for (std::size_t l : config.filter_lengths) {
      for (pipeline::EstimatorKind est : config.estimators) {
        std::vector<double> sm, se, sd, cm, ce, cdd;
        for (const auto& r : result.scenes) {
          if (r.snr_db != snr || r.filter_length != l || r.estimator != est) continue;
          sm.push_back(r.fwseg_sir_mic);
          se.push_back(r.fwseg_sir_enhanced);
          sd.push_back(r.fwseg_sir_delta());
          cm.push_back(r.cd_mic);
          ce.push_back(r.cd_enhanced);
          cdd.push_back(r.cd_delta());
        }
        SummaryRow row;
        row.snr_db = snr;
        row.filter_length = l;
        row.estimator = est;
        row.count = sm.size();
        row.fwseg_sir_mic = median(sm);
        row.fwseg_sir_enhanced = median(se);
        row.fwseg_sir_delta = median(sd);
        row.cd_mic = median(cm);
        row.cd_enhanced = median(ce);
        row.cd_delta = median(cdd);
        result.medians.push_back(row);
      }
    }
  }
  return result;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& out, const ExperimentResult& result) {
  out << "row,seed,snr_db,filter_length,estimator,count,fwseg_sir_mic1,fwseg_sir_enhanced,fwseg_sir_delta,"
         "cd_mic1,cd_enhanced,cd_delta\n";
  for (const auto& r : result.scenes) {
    out << "scene," << r.seed << ',' << fixed(r.snr_db) << ',' << r.filter_length << ','
        << pipeline::to_string(r.estimator) << ",1," << fixed(r.fwseg_sir_mic) << ',' << fixed(r.fwseg_sir_enhanced)
        << ',' << fixed(r.fwseg_sir_delta()) << ',' << fixed(r.cd_mic) << ',' << fixed(r.cd_enhanced) << ','
        << fixed(r.cd_delta()) << '\n';
  }
  for (const auto& m : result.medians) {
    out << "median,," << fixed(m.snr_db) << ',' << m.filter_length << ',' << pipeline::to_string(m.estimator) << ','
        << m.count << ',' << fixed(m.fwseg_sir_mic) << ',' << fixed(m.fwseg_sir_enhanced) << ','
        << fixed(m.fwseg_sir_delta) << ',' << fixed(m.cd_mic) << ',' << fixed(m.cd_enhanced) << ','
        << fixed(m.cd_delta) << '\n';
  }
}

}  // namespace isclp::experiment
