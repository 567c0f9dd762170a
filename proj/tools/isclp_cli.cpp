// isclp: command-line front end for enhancement runs, experiments and a quick self test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isclp/errors.hpp"
#include "isclp/experiment.hpp"
#include "isclp/kalman.hpp"
#include "isclp/pipeline.hpp"
#include "isclp/scenario.hpp"
#include "isclp/spatial.hpp"
#include "isclp/stft.hpp"
#include "isclp/wav.hpp"

namespace fs = std::filesystem;
using namespace isclp;

namespace {

struct RunConfig {
  std::string mode = "enhance";
  std::string input;
  std::string out = "out";
  std::vector<double> snr_db{10.0};
  bool no_noise = false;
  std::vector<std::size_t> filter_length{6};
  core::ProcessTuning tuning{};
  std::string estimator = "blind";
  std::uint64_t seed = 1;
  std::size_t num_seeds = 1;

  // scene
  Eigen::Index mics = 4;
  double spacing = 0.08;
  double t60 = 0.4;
  double drr_db = 0.0;
  double duration = 10.0;
  double target_doa = 0.0;
  std::vector<double> interferer_doa;
  double interferer_power_db = 0.0;
  std::string source_wav;
  std::string interferer_wav;
  std::vector<std::string> rir_wav;

  // processing
  double lambda = 0.726;
  double mu = 0.2;
  double oracle_smoothing = 0.0;
  double eval_start = 4.0;
  double eval_end = 10.0;
  unsigned threads = 0;
  bool write_scene = false;
  bool pcm16 = false;
};

std::vector<pipeline::EstimatorKind> estimators_of(const std::string& name) {
  if (name == "both") return {pipeline::EstimatorKind::Oracle, pipeline::EstimatorKind::Blind};
  return {pipeline::parse_estimator(name)};
}

scenario::SceneConfig scene_config(const RunConfig& rc) {
  scenario::SceneConfig scene;
  scene.mics = rc.mics;
  scene.spacing = rc.spacing;
  scene.t60 = rc.t60;
  scene.drr_db = rc.drr_db;
  scene.duration = rc.duration;
  scene.seed = rc.seed;
  scene.snr_db = rc.no_noise ? std::nullopt : std::optional<double>(rc.snr_db.front());
  scene.sources.clear();
  scenario::SourceSpec target;
  target.doa_deg = rc.target_doa;
  target.signal_path = rc.source_wav;
  scene.sources.push_back(target);
  for (double doa : rc.interferer_doa) {
    scenario::SourceSpec s;
    s.doa_deg = doa;
    s.target = false;
    s.power_db = rc.interferer_power_db;
    s.signal_path = rc.interferer_wav;
    scene.sources.push_back(s);
  }
  if (!rc.rir_wav.empty()) {
    if (rc.rir_wav.size() != scene.sources.size())
      throw ConfigError("--rir-wav needs one file per source (" + std::to_string(scene.sources.size()) + ")");
    for (std::size_t i = 0; i < rc.rir_wav.size(); ++i) scene.sources[i].rir_path = rc.rir_wav[i];
  }
  scene.validate();
  return scene;
}

void check_filter_lengths(const RunConfig& rc) {
  if (rc.filter_length.empty()) throw ConfigError("--filter-length needs at least one value");
  for (std::size_t L : rc.filter_length)
    if (L < 2) throw ConfigError("filter length must be at least 2, got " + std::to_string(L));
}

void write_diagnostics(const fs::path& path, const pipeline::EnhanceResult& result, const stft::StftConfig& stft) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "frame,time_s,gamma_mean,phi_e_mean,phi_target_mean,retf_change_norm,skipped_bins\n";
  char line[256];
  for (std::size_t l = 0; l < result.diagnostics.size(); ++l) {
    const auto& d = result.diagnostics[l];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.9g,%.9g,%.9g,%.9g,%zu\n", l,
                  static_cast<double>(l * stft.hop) / stft.sample_rate, d.gamma_mean, d.phi_e_mean,
                  d.phi_target_mean, d.retf_change_norm, d.skipped_bins);
    out << line;
  }
  if (!out) throw InputError("failed writing " + path.string());
}

int run_enhance(const RunConfig& rc) {
  check_filter_lengths(rc);
  fs::create_directories(rc.out);
  const auto kinds = estimators_of(rc.estimator);
  if (kinds.size() != 1) throw ConfigError("enhance mode takes --estimator blind or oracle");
  const auto kind = kinds.front();

  pipeline::EnhanceOptions options;
  options.tuning = rc.tuning;
  options.tuning.filter_length = rc.filter_length.front();
  options.estimator = kind;
  options.blind.fit.retf_step = rc.mu;
  options.blind.lambda = rc.lambda;
  options.oracle_smoothing = rc.oracle_smoothing;
  options.threads = rc.threads;

  Eigen::MatrixXd signal;
  std::optional<pipeline::OracleInputs> oracle;
  const auto start = std::chrono::steady_clock::now();
  if (!rc.input.empty()) {
    if (kind == pipeline::EstimatorKind::Oracle)
      throw ConfigError("the oracle estimator needs a synthesized scene; omit --input");
    auto data = wav::read_wav(rc.input);
    signal = std::move(data.samples);
    options.stft.sample_rate = data.sample_rate;
    options.positions = spatial::linear_array(signal.cols(), rc.spacing);
    options.source_doas = {rc.target_doa};
    for (double doa : rc.interferer_doa) options.source_doas.push_back(doa);
    options.targets = {0};
  } else {
    const auto scene_cfg = scene_config(rc);
    auto scene = scenario::build_scene(scene_cfg);
    experiment::ExperimentConfig ec;
    ec.tuning = options.tuning;
    ec.blind = options.blind;
    ec.oracle_smoothing = rc.oracle_smoothing;
    ec.threads = rc.threads;
    options = experiment::scene_options(scene_cfg, ec, kind, options.tuning.filter_length);
    if (kind == pipeline::EstimatorKind::Oracle) oracle = experiment::oracle_inputs(scene, options.stft);
    signal = scene.mix;
    if (rc.write_scene) {
      wav::write_wav((fs::path(rc.out) / "mix.wav").string(), scene.mix, scene_cfg.sample_rate);
      wav::write_wav((fs::path(rc.out) / "reference.wav").string(), scene.reference, scene_cfg.sample_rate);
    }
  }

  const auto result = pipeline::enhance(signal, options, oracle ? &*oracle : nullptr);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto format = rc.pcm16 ? wav::SampleFormat::Pcm16 : wav::SampleFormat::Float32;
  wav::write_wav((fs::path(rc.out) / "enhanced.wav").string(), result.enhanced, options.stft.sample_rate, format);
  write_diagnostics(fs::path(rc.out) / "diagnostics.csv", result, options.stft);
  std::printf("enhanced %ld samples x %ld channels with %s estimator, L=%zu, in %.2f s -> %s\n",
              static_cast<long>(signal.rows()), static_cast<long>(signal.cols()), pipeline::to_string(kind),
              options.tuning.filter_length, seconds, rc.out.c_str());
  return 0;
}

int run_experiment_mode(const RunConfig& rc) {
  check_filter_lengths(rc);
  if (rc.num_seeds == 0) throw ConfigError("--num-seeds must be positive");
  experiment::ExperimentConfig ec;
  ec.scene = scene_config(rc);
  ec.seeds.clear();
  for (std::size_t i = 0; i < rc.num_seeds; ++i) ec.seeds.push_back(rc.seed + i);
  ec.snrs_db = rc.snr_db;
  ec.filter_lengths = rc.filter_length;
  ec.estimators = estimators_of(rc.estimator);
  ec.tuning = rc.tuning;
  ec.blind.lambda = rc.lambda;
  ec.blind.fit.retf_step = rc.mu;
  ec.oracle_smoothing = rc.oracle_smoothing;
  ec.eval_start = rc.eval_start;
  ec.eval_end = rc.eval_end;
  ec.threads = rc.threads;
  ec.validate();

  const auto result = experiment::run_experiment(ec);
  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / "metrics.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  experiment::write_csv(out, result);
  out.close();
  if (!out) throw InputError("failed writing " + path.string());

  for (const auto& row : result.medians)
    std::printf("snr %6.1f dB  L=%2zu  %-6s  n=%zu  fwseg-SIR %+.2f dB  CD %+.2f dB\n", row.snr_db,
                row.filter_length, pipeline::to_string(row.estimator), row.count, row.fwseg_sir_delta,
                row.cd_delta);
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

bool report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-22s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  return ok;
}

int run_selftest(const RunConfig& rc) {
  bool all = true;
  char buf[128];

  {
    stft::StftConfig cfg;
    std::mt19937_64 rng(rc.seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(16000, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    const auto grid = stft::analyze(x, cfg);
    const Eigen::MatrixXd y = stft::synthesize(grid);
    const Eigen::Index a = cfg.window_length, b = x.rows() - cfg.window_length;
    const double err = (y.middleRows(a, b - a) - x.middleRows(a, b - a)).squaredNorm() /
                       x.middleRows(a, b - a).squaredNorm();
    std::snprintf(buf, sizeof buf, "interior error %.1f dB", 10.0 * std::log10(err + 1e-300));
    all &= report("stft_round_trip", err < 1e-8, buf);
  }

  {
    const auto positions = spatial::linear_array(4, 0.08);
    const Eigen::MatrixXcd h = spatial::steering_vector(positions, 20.0, 1000.0);
    const Eigen::VectorXcd g = spatial::build_mf(h);
    const Eigen::MatrixXcd bm = spatial::build_bm(h);
    const double cg = (g.adjoint() * h - Eigen::MatrixXcd::Ones(1, 1)).cwiseAbs().maxCoeff();
    const double cb = (bm.adjoint() * h).cwiseAbs().maxCoeff();
    std::snprintf(buf, sizeof buf, "|g^H h - 1| %.1e, |B^H h| %.1e", cg, cb);
    all &= report("spatial_constraints", cg < 1e-10 && cb < 1e-10, buf);
  }

  {
    RunConfig small = rc;
    small.duration = 3.0;
    small.interferer_doa.clear();
    small.rir_wav.clear();
    small.source_wav.clear();
    const auto scene_cfg = scene_config(small);
    const auto scene = scenario::build_scene(scene_cfg);
    experiment::ExperimentConfig ec;
    ec.threads = rc.threads;
    bool ok = true;
    std::string detail;
    for (auto kind : {pipeline::EstimatorKind::Oracle, pipeline::EstimatorKind::Blind}) {
      const auto options = experiment::scene_options(scene_cfg, ec, kind, 6);
      const auto oracle = experiment::oracle_inputs(scene, options.stft);
      const auto result =
          pipeline::enhance(scene.mix, options, kind == pipeline::EstimatorKind::Oracle ? &oracle : nullptr);
      const bool finite = result.enhanced.allFinite();
      const bool gains = (result.gamma.array() > 0.0).all() && (result.gamma.array() <= 1.0).all();
      ok &= finite && gains;
      detail += std::string(pipeline::to_string(kind)) + (finite && gains ? " ok " : " bad ");
    }
    all &= report("short_scene", ok, detail);
  }

  std::printf("%s\n", all ? "selftest passed" : "selftest FAILED");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISCLP Kalman filter for multichannel speech enhancement"};
  app.set_config("--config", "", "key = value configuration file; flags given on the command line win");
  app.get_config_formatter_base()->arrayDelimiter(',');
  RunConfig rc;

  app.add_option("--mode", rc.mode, "enhance | experiment | selftest")
      ->check(CLI::IsMember({"enhance", "experiment", "selftest"}))
      ->capture_default_str();
  app.add_option("--input", rc.input, "multichannel WAV to enhance (blind estimator); omit to synthesize a scene");
  app.add_option("--out", rc.out, "output directory")->capture_default_str();
  app.add_option("--snr-db", rc.snr_db, "diffuse-noise SNR at mic 1 in dB; several values sweep in experiment mode")
      ->capture_default_str();
  app.add_flag("--no-noise", rc.no_noise, "synthesize scenes without diffuse noise");
  app.add_option("--filter-length", rc.filter_length,
                 "L, stacked frames incl. the current one (>= 2); several values sweep in experiment mode "
                 "[published setting: 6]")
      ->capture_default_str();
  app.add_option("--alpha-db", rc.tuning.alpha_db, "10 log10(1 - alpha), state transition [published setting]")
      ->capture_default_str();
  app.add_option("--beta-db", rc.tuning.beta_db, "20 log10(beta), post-gain decay floor [published setting]")
      ->capture_default_str();
  app.add_option("--psi-lp-db", rc.tuning.psi_lp_db,
                 "10 log10 of the initial LP state variance [published setting]")
      ->capture_default_str();
  app.add_option("--psi-sc-db-low", rc.tuning.psi_sc_db_low,
                 "10 log10 of the SC state variance at 0 Hz [published setting]")
      ->capture_default_str();
  app.add_option("--psi-sc-db-high", rc.tuning.psi_sc_db_high,
                 "10 log10 of the SC state variance at Nyquist, linear in dB between [published setting]")
      ->capture_default_str();
  app.add_option("--estimator", rc.estimator, "blind | oracle | both (both: experiment mode only)")
      ->check(CLI::IsMember({"blind", "oracle", "both"}))
      ->capture_default_str();
  app.add_option("--seed", rc.seed, "scene seed (first seed in experiment mode)")->capture_default_str();
  app.add_option("--num-seeds", rc.num_seeds, "consecutive seeds per experiment point")->capture_default_str();

  app.add_option("--mics", rc.mics, "microphones in the uniform linear array")->capture_default_str();
  app.add_option("--mic-spacing", rc.spacing, "microphone spacing in m [published setting: 0.08]")
      ->capture_default_str();
  app.add_option("--t60", rc.t60, "synthetic reverberation time in s")->capture_default_str();
  app.add_option("--drr-db", rc.drr_db, "synthetic direct-to-reverberant ratio in dB")->capture_default_str();
  app.add_option("--duration", rc.duration, "scene length in s")->capture_default_str();
  app.add_option("--target-doa", rc.target_doa, "target direction in degrees from broadside")->capture_default_str();
  app.add_option("--interferer-doa", rc.interferer_doa, "interferer directions in degrees");
  app.add_option("--interferer-power-db", rc.interferer_power_db,
                 "interferer reverberant power relative to the target at mic 1")
      ->capture_default_str();
  app.add_option("--source-wav", rc.source_wav, "mono WAV for the target signal (default: synthetic speech)");
  app.add_option("--interferer-wav", rc.interferer_wav, "mono WAV used for every interferer");
  app.add_option("--rir-wav", rc.rir_wav, "one M-channel RIR WAV per source, target first");

  app.add_option("--lambda", rc.lambda, "covariance smoothing factor of the blind estimator")->capture_default_str();
  app.add_option("--mu", rc.mu, "RETF update step of the blind estimator")->capture_default_str();
  app.add_option("--oracle-smoothing", rc.oracle_smoothing, "recursive smoothing of the oracle target PSD (0: none)")
      ->capture_default_str();
  app.add_option("--eval-start", rc.eval_start, "metric window start in s")->capture_default_str();
  app.add_option("--eval-end", rc.eval_end, "metric window end in s")->capture_default_str();
  app.add_option("--threads", rc.threads, "worker threads for the per-bin loop (0: all cores)")->capture_default_str();
  app.add_flag("--write-scene", rc.write_scene, "also write mix.wav and reference.wav for synthesized scenes");
  app.add_flag("--pcm16", rc.pcm16, "write enhanced.wav as 16-bit PCM instead of float");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (rc.mode == "enhance") return run_enhance(rc);
    if (rc.mode == "experiment") return run_experiment_mode(rc);
    return run_selftest(rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "isclp: error: %s\n", e.what());
    return 1;
  }
}
