#pragma once

#include <complex>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "isclp/linalg.hpp"

namespace isclp::psd {

// Recursively averaged microphone covariance of one bin.
struct SmoothedCovariance {
  Eigen::MatrixXcd psi;              // M x M, Hermitian PSD
  double lambda = 0.7;               // smoothing constant in (0, 1)
  Eigen::VectorXd prev_eigenvalues;  // generalized eigenvalues of the previous frame, descending

  static SmoothedCovariance zero(Eigen::Index channels, double lambda);
};

// lambda = exp(-hop / (fs * time_constant)).
double smoothing_constant(std::size_t hop, double sample_rate, double time_constant = 0.05);

// psi <- lambda psi + (1 - lambda) y y^H.
SmoothedCovariance smooth_covariance(const SmoothedCovariance& prev, const Eigen::VectorXcd& y);

// Inverse of the first-order recursive average, floored:
// max((now - lambda prev) / (1 - lambda), floor).
Eigen::VectorXd desmooth_eigenvalues(const Eigen::VectorXd& sigma_now, const Eigen::VectorXd& sigma_prev,
                                     double lambda, double floor);

struct GevdDecomposition {
  double phi_d = 0.0;          // diffuse PSD
  Eigen::MatrixXcd early_sqrt; // M x N square root of the early covariance
  Eigen::VectorXd phi_s;       // per-source early PSDs, filled by the square-root fit
};

// Splits Psi_y = Psi_xe + phi_d Gamma given descending generalized
// eigenvalues and Gamma-orthonormal eigenvectors: phi_d is the mean of the
// M - N smallest eigenvalues and column i of the square root is
// Gamma x_i sqrt(max(sigma_i - phi_d, 0)).
GevdDecomposition decompose(const Eigen::VectorXd& sigma, const Eigen::MatrixXcd& eigenvectors,
                            const linalg::HermitianMatrix& gamma, Eigen::Index num_sources);

struct FitOptions {
  int iterations = 3;
  double retf_step = 0.2;             // blend factor mu towards the observed RETF
  Eigen::VectorXd activity_threshold; // per source; empty means update every column with phi_s > 0
  bool update_retf = true;
};

struct SquareRootFit {
  Eigen::VectorXd phi_s;     // |phi^{1/2}|^2
  Eigen::MatrixXcd h_post;   // unit first row
  Eigen::MatrixXcd rotation; // N x N unitary
  std::vector<bool> updated; // per column: RETF blended this frame
};

// Alternating fit of early_sqrt Omega ~= H Diag[phi^{1/2}]: Procrustes for
// Omega, per-column least squares for phi^{1/2}, then a damped RETF update
// where the source is active.
SquareRootFit fit_square_root(const Eigen::MatrixXcd& early_sqrt, const Eigen::MatrixXcd& h_prior,
                              const FitOptions& options = {});

struct TargetEstimate {
  double phi_target = 0.0;   // sum of target-source early PSDs
  Eigen::MatrixXcd h_target; // M x N_T
};

TargetEstimate extract_target(const Eigen::VectorXd& phi_s, const Eigen::MatrixXcd& h_post,
                              std::span<const Eigen::Index> targets);

struct BlindEstimatorConfig {
  double lambda = 0.726;
  FitOptions fit{};
  std::size_t activity_history = 20;
  double activity_ratio = 0.1;
};

// Per-bin blind estimator: smoothing, GEVD against Gamma, desmoothing,
// decomposition and square-root fit, with RETF recursion H(l) = H+(l-1).
class BlindEstimator {
 public:
  BlindEstimator(const linalg::HermitianMatrix& gamma, double loading, Eigen::MatrixXcd h_initial,
                 std::vector<Eigen::Index> targets, BlindEstimatorConfig config = {});

  TargetEstimate step(const Eigen::VectorXcd& y);

  const Eigen::MatrixXcd& retf() const { return h_; }
  const GevdDecomposition& last_decomposition() const { return last_; }

 private:
  linalg::HermitianMatrix gamma_;  // loaded Gamma
  Eigen::MatrixXcd gamma_chol_;
  Eigen::MatrixXcd h_;
  std::vector<Eigen::Index> targets_;
  BlindEstimatorConfig config_;
  SmoothedCovariance cov_;
  std::vector<std::deque<double>> history_;
  GevdDecomposition last_;
};

// Ground-truth estimates: phi_sT = |s_T(l)|^2, optionally recursively averaged
// with smoothing in [0, 1) (0 disables), and the fixed true target RETFs.
std::vector<TargetEstimate> oracle_estimates(std::span<const std::complex<double>> target_early,
                                             const Eigen::MatrixXcd& h_target, double smoothing = 0.0);

}  // namespace isclp::psd
