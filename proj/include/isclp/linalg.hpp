#pragma once

#include <Eigen/Core>

namespace isclp::linalg {

// Square complex matrix that is Hermitian to within 1e-10 (max-abs). The
// constructor symmetrizes its input, so every producer yields A == A^H.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const Eigen::MatrixXcd& a);

  static HermitianMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return a_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return a_; }
  double trace() const { return a_.trace().real(); }

 private:
  Eigen::MatrixXcd a_;
};

// In-place (A + A^H) / 2.
void symmetrize(Eigen::MatrixXcd& a);

// Lower-triangular L with L L^H = A + loading * I. Throws NumericalError
// carrying the failing leading-minor index when the loaded matrix is not
// positive definite.
Eigen::MatrixXcd cholesky(const HermitianMatrix& a, double loading = 0.0);

struct HermitianEvd {
  Eigen::VectorXd eigenvalues;    // descending
  Eigen::MatrixXcd eigenvectors;  // unitary, columns match eigenvalues
};

// A = Q diag(eigenvalues) Q^H. Ties keep original (ascending-solver) order
// reversed stably. Throws InputError on non-finite entries.
HermitianEvd hermitian_evd(const HermitianMatrix& a);

struct GeneralizedEvd {
  Eigen::VectorXd eigenvalues;    // descending
  Eigen::MatrixXcd eigenvectors;  // X^H (Gamma + loading I) X = I
};

// Solves Psi x = lambda (Gamma + loading I) x by Cholesky whitening of Gamma
// followed by a Hermitian EVD.
GeneralizedEvd gevd(const HermitianMatrix& psi, const HermitianMatrix& gamma, double loading = 0.0);

// Same as gevd() with a precomputed lower Cholesky factor of the loaded Gamma.
GeneralizedEvd gevd_whitened(const HermitianMatrix& psi, const Eigen::MatrixXcd& gamma_chol);

// H (H^H H)^{-1} rhs. Throws NumericalError when H^H H has condition number
// >= 1e12.
Eigen::VectorXcd solve_gram(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& rhs);

struct ProcrustesResult {
  Eigen::MatrixXcd rotation;  // N x N unitary
  bool degenerate = false;    // A^H B was (numerically) zero; rotation is I
};

// Unitary Omega minimizing ||A Omega - B||_F, i.e. the polar factor U V^H of
// A^H B = U S V^H.
ProcrustesResult procrustes_rotation(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace isclp::linalg
