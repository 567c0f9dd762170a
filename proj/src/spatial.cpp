#include "isclp/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "isclp/errors.hpp"

namespace isclp::spatial {

namespace {

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

bool full_column_rank(const Eigen::MatrixXcd& a) {
  if (a.cols() == 0) return true;
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues();
  return sv(sv.size() - 1) >= 1e-8 * sv(0) && sv(0) > 0.0;
}

}  // namespace

Eigen::MatrixXcd RetfMatrix::target_columns() const {
  Eigen::MatrixXcd out(h.rows(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = h.col(targets[i]);
  return out;
}

void RetfMatrix::normalize() {
  for (Eigen::Index n = 0; n < h.cols(); ++n) {
    const std::complex<double> first = h(0, n);
    if (std::abs(first) < 1e-12 * std::max(1.0, h.col(n).norm())) {
      throw NumericalError("RetfMatrix: column " + std::to_string(n) + " has a vanishing reference entry", n);
    }
    h.col(n) /= first;
    h(0, n) = 1.0;
  }
}

void RetfMatrix::validate() const {
  if (!h.allFinite()) throw InputError("RetfMatrix: non-finite entries");
  if (h.cols() >= h.rows()) throw InputError("RetfMatrix: need N < M");
  for (Eigen::Index n = 0; n < h.cols(); ++n) {
    if (std::abs(h(0, n) - 1.0) > 1e-9) throw InputError("RetfMatrix: first row must equal one");
  }
  if (targets.empty()) throw InputError("RetfMatrix: empty target set");
  for (Eigen::Index t : targets) {
    if (t < 0 || t >= h.cols()) throw InputError("RetfMatrix: target index out of range");
  }
}

CoherenceModel::CoherenceModel(Eigen::MatrixXd positions, double sample_rate,
                               std::size_t window_length, double sound_speed)
    : positions_(std::move(positions)),
      sample_rate_(sample_rate),
      window_length_(window_length),
      sound_speed_(sound_speed) {
  const Eigen::Index m = positions_.rows();
  if (positions_.cols() != 3) throw InputError("CoherenceModel: positions must be M x 3");
  if (m < 2) throw InputError("CoherenceModel: need at least two microphones");
  Eigen::MatrixXd dist(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      dist(i, j) = (positions_.row(i) - positions_.row(j)).norm();
      if (i != j && dist(i, j) < 1e-9) {
        throw InputError("CoherenceModel: microphones " + std::to_string(i + 1) + " and " +
                         std::to_string(j + 1) + " coincide");
      }
    }
  }
  const std::size_t bins = window_length / 2 + 1;
  gammas_.reserve(bins);
  for (std::size_t k = 0; k < bins; ++k) gammas_.emplace_back(sinc_coherence(positions_, bin_frequency(k), sound_speed_));
}

double CoherenceModel::bin_frequency(std::size_t k) const {
  return static_cast<double>(k) * sample_rate_ / static_cast<double>(window_length_);
}

double CoherenceModel::default_loading(std::size_t k) const {
  const auto& g = gamma(k);
  return 1e-6 * g.trace() / static_cast<double>(g.dim());
}

Eigen::MatrixXcd sinc_coherence(const Eigen::MatrixXd& positions, double frequency, double sound_speed) {
  const Eigen::Index m = positions.rows();
  const double omega = 2.0 * std::numbers::pi * frequency / sound_speed;
  Eigen::MatrixXcd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) g(i, j) = sinc(omega * (positions.row(i) - positions.row(j)).norm());
  }
  return g;
}

CoherenceModel diffuse_coherence(const Eigen::MatrixXd& positions, double sample_rate,
                                 std::size_t window_length, double sound_speed) {
  return CoherenceModel(positions, sample_rate, window_length, sound_speed);
}

Eigen::MatrixXd linear_array(Eigen::Index mics, double spacing) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mics, 3);
  for (Eigen::Index m = 0; m < mics; ++m) p(m, 0) = static_cast<double>(m) * spacing;
  return p;
}

Eigen::VectorXcd steering_vector(const Eigen::MatrixXd& positions, double doa_deg, double frequency,
                                 double sound_speed) {
  const double theta = doa_deg * std::numbers::pi / 180.0;
  // Unit vector towards the source; broadside is +y for an array along x.
  const Eigen::Vector3d dir(std::sin(theta), std::cos(theta), 0.0);
  Eigen::VectorXcd h(positions.rows());
  for (Eigen::Index m = 0; m < positions.rows(); ++m) {
    // Plane wave reaches microphones closer to the source earlier.
    const double tau = -(positions.row(m) - positions.row(0)).dot(dir) / sound_speed;
    h(m) = std::polar(1.0, -2.0 * std::numbers::pi * frequency * tau);
  }
  return h;
}

Eigen::VectorXcd build_mf(const Eigen::MatrixXcd& h_target) {
  return linalg::solve_gram(h_target, Eigen::VectorXcd::Ones(h_target.cols()));
}

Eigen::MatrixXcd build_bm(const Eigen::MatrixXcd& h_target) {
  const Eigen::Index m = h_target.rows();
  const Eigen::Index nt = h_target.cols();
  if (nt == 0 || nt >= m) throw InputError("build_bm: need 1 <= N_T < M");
  const Eigen::Index width = m - nt;

  Eigen::MatrixXcd projection = Eigen::MatrixXcd::Identity(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    projection.col(j) -= linalg::solve_gram(h_target, h_target.row(j).adjoint());
  }
  linalg::symmetrize(projection);

  Eigen::MatrixXcd b = projection.leftCols(width);
  if (full_column_rank(b)) return b;

  // Repair 1: the width projection columns with the largest norms.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return projection.col(x).norm() > projection.col(y).norm();
  });
  std::vector<Eigen::Index> chosen(order.begin(), order.begin() + width);
  std::sort(chosen.begin(), chosen.end());
  for (Eigen::Index i = 0; i < width; ++i) b.col(i) = projection.col(chosen[static_cast<std::size_t>(i)]);
  if (full_column_rank(b)) return b;

  // Repair 2: orthonormal null-space basis.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_target, Eigen::ComputeFullU);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(nt - 1) < 1e-8 * sv(0)) throw NumericalError("build_bm: H_T is rank deficient");
  return svd.matrixU().rightCols(width);
}

}  // namespace isclp::spatial
