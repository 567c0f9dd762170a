#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "isclp/linalg.hpp"

namespace isclp::spatial {

inline constexpr double kSoundSpeed = 343.0;

// Per-bin M x N relative early transfer functions (first row pinned to one)
// together with the ordered target index set.
struct RetfMatrix {
  Eigen::MatrixXcd h;
  std::vector<Eigen::Index> targets;

  Eigen::MatrixXcd target_columns() const;
  // Rescales every column so that its first entry is one. Throws
  // NumericalError if a column has a vanishing first entry.
  void normalize();
  // Throws InputError unless the unit-first-row invariant holds within 1e-9,
  // the matrix is finite, N < M and every target index is valid.
  void validate() const;
};

// Spherically isotropic (sinc) coherence for a fixed array geometry.
class CoherenceModel {
 public:
  // positions: M x 3 in meters.
  CoherenceModel(Eigen::MatrixXd positions, double sample_rate, std::size_t window_length,
                 double sound_speed = kSoundSpeed);

  Eigen::Index channels() const { return positions_.rows(); }
  std::size_t bins() const { return gammas_.size(); }
  const Eigen::MatrixXd& positions() const { return positions_; }
  double sample_rate() const { return sample_rate_; }
  std::size_t window_length() const { return window_length_; }
  double bin_frequency(std::size_t k) const;

  const linalg::HermitianMatrix& gamma(std::size_t k) const { return gammas_.at(k); }

  // Diagonal loading used when whitening against Gamma: 1e-6 * trace / dim.
  double default_loading(std::size_t k) const;

 private:
  Eigen::MatrixXd positions_;
  double sample_rate_;
  std::size_t window_length_;
  double sound_speed_;
  std::vector<linalg::HermitianMatrix> gammas_;
};

CoherenceModel diffuse_coherence(const Eigen::MatrixXd& positions, double sample_rate,
                                 std::size_t window_length, double sound_speed = kSoundSpeed);

// Raw sinc coherence at one frequency with no geometry checks; coincident
// positions give unit coherence.
Eigen::MatrixXcd sinc_coherence(const Eigen::MatrixXd& positions, double frequency, double sound_speed = kSoundSpeed);

// Uniform linear array along x, first microphone at the origin.
Eigen::MatrixXd linear_array(Eigen::Index mics, double spacing);

// Far-field steering vector relative to microphone 1 for a direction of
// arrival measured from broadside in the x-y plane.
Eigen::VectorXcd steering_vector(const Eigen::MatrixXd& positions, double doa_deg,
                                 double frequency, double sound_speed = kSoundSpeed);

// g = H_T (H_T^H H_T)^{-1} 1, so that g^H H_T = 1^T.
Eigen::VectorXcd build_mf(const Eigen::MatrixXcd& h_target);

// First M - N_T columns of the projection onto the null space of H_T^H, with
// rank repair when those columns are degenerate.
Eigen::MatrixXcd build_bm(const Eigen::MatrixXcd& h_target);

}  // namespace isclp::spatial
