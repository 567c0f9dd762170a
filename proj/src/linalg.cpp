#include "isclp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "isclp/errors.hpp"

namespace isclp::linalg {

void symmetrize(Eigen::MatrixXcd& a) {
  const Eigen::MatrixXcd h = 0.5 * (a + a.adjoint());
  a = h;
}

HermitianMatrix::HermitianMatrix(const Eigen::MatrixXcd& a) : a_(a) {
  if (a.rows() != a.cols()) throw InputError("HermitianMatrix: matrix is not square");
  symmetrize(a_);
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  return HermitianMatrix(Eigen::MatrixXcd::Identity(dim, dim));
}

Eigen::MatrixXcd cholesky(const HermitianMatrix& a, double loading) {
  const Eigen::Index n = a.dim();
  const Eigen::MatrixXcd& m = a.matrix();
  if (!m.allFinite()) throw InputError("cholesky: non-finite entries");
  Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = m(j, j).real() + loading;
    for (Eigen::Index k = 0; k < j; ++k) diag -= std::norm(l(j, k));
    if (!(diag > 0.0)) {
      throw NumericalError("cholesky: matrix not positive definite at leading minor " +
                               std::to_string(j + 1),
                           j + 1);
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      std::complex<double> s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / ljj;
    }
  }
  return l;
}

HermitianEvd hermitian_evd(const HermitianMatrix& a) {
  if (!a.matrix().allFinite()) throw InputError("hermitian_evd: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a.matrix());
  if (solver.info() != Eigen::Success) throw NumericalError("hermitian_evd: solver did not converge");
  const Eigen::Index n = a.dim();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& values = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return values(x) > values(y); });
  HermitianEvd out{Eigen::VectorXd(n), Eigen::MatrixXcd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = values(order[static_cast<std::size_t>(i)]);
    out.eigenvectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

GeneralizedEvd gevd_whitened(const HermitianMatrix& psi, const Eigen::MatrixXcd& gamma_chol) {
  if (psi.dim() != gamma_chol.rows()) throw InputError("gevd: dimension mismatch");
  // C = L^{-1} Psi L^{-H}; eigenvectors of C map back through L^{-H}.
  const auto tri = gamma_chol.triangularView<Eigen::Lower>();
  Eigen::MatrixXcd tmp = tri.solve(psi.matrix());
  Eigen::MatrixXcd whitened = tri.solve(tmp.adjoint()).eval();
  const HermitianEvd evd = hermitian_evd(HermitianMatrix(whitened));
  GeneralizedEvd out;
  out.eigenvalues = evd.eigenvalues;
  out.eigenvectors = gamma_chol.adjoint().triangularView<Eigen::Upper>().solve(evd.eigenvectors);
  return out;
}

GeneralizedEvd gevd(const HermitianMatrix& psi, const HermitianMatrix& gamma, double loading) {
  if (psi.dim() != gamma.dim()) throw InputError("gevd: dimension mismatch");
  return gevd_whitened(psi, cholesky(gamma, loading));
}

Eigen::VectorXcd solve_gram(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& rhs) {
  if (h.cols() != rhs.size()) throw InputError("solve_gram: rhs size does not match columns of H");
  if (h.cols() == 0 || h.cols() > h.rows()) throw InputError("solve_gram: H must be tall with >= 1 column");
  const Eigen::MatrixXcd gram = h.adjoint() * h;
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  const double largest = ev.maxCoeff();
  const double smallest = ev.minCoeff();
  if (!(largest > 0.0) || !(smallest > largest * 1e-12)) {
    throw NumericalError("solve_gram: H^H H is rank deficient or too ill-conditioned");
  }
  return h * gram.ldlt().solve(rhs);
}

ProcrustesResult procrustes_rotation(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("procrustes_rotation: shape mismatch");
  if (a.cols() > a.rows()) throw InputError("procrustes_rotation: requires N <= M");
  const Eigen::Index n = a.cols();
  const Eigen::MatrixXcd cross = a.adjoint() * b;
  const double scale = a.norm() * b.norm();
  if (!(cross.norm() > 1e-14 * scale) || scale == 0.0) {
    return {Eigen::MatrixXcd::Identity(n, n), true};
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU() * svd.matrixV().adjoint(), false};
}

}  // namespace isclp::linalg
