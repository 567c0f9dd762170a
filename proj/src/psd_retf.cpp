#include "isclp/psd_retf.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "isclp/errors.hpp"

namespace isclp::psd {

SmoothedCovariance SmoothedCovariance::zero(Eigen::Index channels, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("smoothing constant must lie in (0, 1)");
  return {Eigen::MatrixXcd::Zero(channels, channels), lambda, Eigen::VectorXd::Zero(channels)};
}

double smoothing_constant(std::size_t hop, double sample_rate, double time_constant) {
  return std::exp(-static_cast<double>(hop) / (sample_rate * time_constant));
}

SmoothedCovariance smooth_covariance(const SmoothedCovariance& prev, const Eigen::VectorXcd& y) {
  if (y.size() != prev.psi.rows()) throw InputError("smooth_covariance: channel count mismatch");
  SmoothedCovariance next = prev;
  next.psi = prev.lambda * prev.psi + (1.0 - prev.lambda) * (y * y.adjoint());
  linalg::symmetrize(next.psi);
  return next;
}

Eigen::VectorXd desmooth_eigenvalues(const Eigen::VectorXd& sigma_now, const Eigen::VectorXd& sigma_prev,
                                     double lambda, double floor) {
  if (sigma_now.size() != sigma_prev.size()) throw InputError("desmooth_eigenvalues: size mismatch");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("desmooth_eigenvalues: lambda must lie in (0, 1)");
  return ((sigma_now - lambda * sigma_prev) / (1.0 - lambda)).cwiseMax(floor);
}

GevdDecomposition decompose(const Eigen::VectorXd& sigma, const Eigen::MatrixXcd& eigenvectors,
                            const linalg::HermitianMatrix& gamma, Eigen::Index num_sources) {
  const Eigen::Index m = sigma.size();
  if (num_sources < 0 || num_sources >= m) throw InputError("decompose: need N < M");
  if (eigenvectors.rows() != m || eigenvectors.cols() != m || gamma.dim() != m) {
    throw InputError("decompose: dimension mismatch");
  }
  GevdDecomposition d;
  d.phi_d = std::max(0.0, sigma.tail(m - num_sources).mean());
  const Eigen::MatrixXcd mapped = gamma.matrix() * eigenvectors.leftCols(num_sources);
  d.early_sqrt.resize(m, num_sources);
  for (Eigen::Index i = 0; i < num_sources; ++i) {
    d.early_sqrt.col(i) = mapped.col(i) * std::sqrt(std::max(sigma(i) - d.phi_d, 0.0));
  }
  d.phi_s = Eigen::VectorXd::Zero(num_sources);
  return d;
}

SquareRootFit fit_square_root(const Eigen::MatrixXcd& early_sqrt, const Eigen::MatrixXcd& h_prior,
                              const FitOptions& options) {
  const Eigen::Index m = h_prior.rows();
  const Eigen::Index n = h_prior.cols();
  if (early_sqrt.rows() != m || early_sqrt.cols() != n) throw InputError("fit_square_root: shape mismatch");

  SquareRootFit fit{Eigen::VectorXd::Zero(n), h_prior, Eigen::MatrixXcd::Identity(n, n),
                    std::vector<bool>(static_cast<std::size_t>(n), false)};
  if (early_sqrt.norm() == 0.0) return fit;

  // Start from the least-squares PSDs of Psi_xe = H Diag[phi] H^H, which makes
  // the first Procrustes step exact for model-consistent input.
  const Eigen::MatrixXcd gram = h_prior.adjoint() * h_prior;
  const Eigen::MatrixXcd projected = gram.ldlt().solve(h_prior.adjoint() * early_sqrt);
  Eigen::VectorXd root(n);
  for (Eigen::Index i = 0; i < n; ++i) root(i) = projected.row(i).norm();

  Eigen::MatrixXcd aligned = early_sqrt;
  for (int it = 0; it < std::max(options.iterations, 1); ++it) {
    const Eigen::MatrixXcd target = h_prior * root.cast<std::complex<double>>().asDiagonal();
    linalg::ProcrustesResult pr = linalg::procrustes_rotation(early_sqrt, target);
    if (pr.degenerate) pr = linalg::procrustes_rotation(early_sqrt, h_prior);
    fit.rotation = pr.rotation;
    aligned = early_sqrt * fit.rotation;
    for (Eigen::Index i = 0; i < n; ++i) {
      root(i) = std::abs(h_prior.col(i).dot(aligned.col(i))) / h_prior.col(i).squaredNorm();
    }
  }
  fit.phi_s = root.array().square();

  if (!options.update_retf) return fit;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double threshold = options.activity_threshold.size() == n ? options.activity_threshold(i) : 0.0;
    if (!(fit.phi_s(i) > threshold)) continue;
    const std::complex<double> ref = aligned(0, i);
    if (std::abs(ref) <= 1e-12 * aligned.col(i).norm() || std::abs(ref) == 0.0) continue;
    const Eigen::VectorXcd observed = aligned.col(i) / ref;
    fit.h_post.col(i) = (1.0 - options.retf_step) * h_prior.col(i) + options.retf_step * observed;
    fit.h_post(0, i) = 1.0;
    fit.updated[static_cast<std::size_t>(i)] = true;
  }
  return fit;
}

TargetEstimate extract_target(const Eigen::VectorXd& phi_s, const Eigen::MatrixXcd& h_post,
                              std::span<const Eigen::Index> targets) {
  TargetEstimate t;
  t.h_target.resize(h_post.rows(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Eigen::Index idx = targets[i];
    if (idx < 0 || idx >= phi_s.size() || idx >= h_post.cols()) throw InputError("extract_target: bad target index");
    t.phi_target += phi_s(idx);
    t.h_target.col(static_cast<Eigen::Index>(i)) = h_post.col(idx);
  }
  return t;
}

BlindEstimator::BlindEstimator(const linalg::HermitianMatrix& gamma, double loading, Eigen::MatrixXcd h_initial,
                               std::vector<Eigen::Index> targets, BlindEstimatorConfig config)
    : gamma_(gamma.matrix() + loading * Eigen::MatrixXcd::Identity(gamma.dim(), gamma.dim())),
      gamma_chol_(linalg::cholesky(gamma_)),
      h_(std::move(h_initial)),
      targets_(std::move(targets)),
      config_(std::move(config)),
      cov_(SmoothedCovariance::zero(gamma.dim(), config_.lambda)),
      history_(static_cast<std::size_t>(h_.cols())) {
  if (h_.rows() != gamma.dim() || h_.cols() >= h_.rows()) throw InputError("BlindEstimator: need M x N RETFs with N < M");
}

TargetEstimate BlindEstimator::step(const Eigen::VectorXcd& y) {
  const Eigen::Index m = h_.rows();
  cov_ = smooth_covariance(cov_, y);
  const linalg::GeneralizedEvd g = linalg::gevd_whitened(linalg::HermitianMatrix(cov_.psi), gamma_chol_);
  const double floor = 1e-10 * cov_.psi.trace().real() / static_cast<double>(m);
  const Eigen::VectorXd sigma = desmooth_eigenvalues(g.eigenvalues, cov_.prev_eigenvalues, cov_.lambda, floor);
  cov_.prev_eigenvalues = g.eigenvalues;

  last_ = decompose(sigma, g.eigenvectors, gamma_, h_.cols());

  FitOptions opts = config_.fit;
  opts.activity_threshold.resize(h_.cols());
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const auto& hist = history_[i];
    const double mean = hist.empty() ? 0.0 : std::accumulate(hist.begin(), hist.end(), 0.0) / static_cast<double>(hist.size());
    opts.activity_threshold(static_cast<Eigen::Index>(i)) = config_.activity_ratio * mean;
  }
  const SquareRootFit fit = fit_square_root(last_.early_sqrt, h_, opts);
  last_.phi_s = fit.phi_s;
  for (std::size_t i = 0; i < history_.size(); ++i) {
    history_[i].push_back(fit.phi_s(static_cast<Eigen::Index>(i)));
    if (history_[i].size() > config_.activity_history) history_[i].pop_front();
  }
  h_ = fit.h_post;
  return extract_target(fit.phi_s, h_, targets_);
}

std::vector<TargetEstimate> oracle_estimates(std::span<const std::complex<double>> target_early,
                                             const Eigen::MatrixXcd& h_target, double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("oracle smoothing must lie in [0, 1)");
  std::vector<TargetEstimate> out;
  out.reserve(target_early.size());
  double phi = 0.0;
  for (std::size_t l = 0; l < target_early.size(); ++l) {
    const double inst = std::norm(target_early[l]);
    phi = (l == 0 || smoothing == 0.0) ? inst : smoothing * phi + (1.0 - smoothing) * inst;
    out.push_back({phi, h_target});
  }
  return out;
}

}  // namespace isclp::psd
