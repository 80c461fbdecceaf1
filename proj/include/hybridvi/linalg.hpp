#pragma once

#include <Eigen/Dense>

namespace hybridvi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Low-rank-plus-diagonal covariance Sigma = B B^T + D^2, D = diag(d).
// B is m x k with zero strict upper triangle (identification constraint),
// all d[i] > 0. k = 0 is the plain diagonal (mean-field) case.
struct FactorCovariance {
  int m = 0;
  int k = 0;
  MatrixXd B;  // m x k
  VectorXd d;  // m

  FactorCovariance() = default;
  FactorCovariance(MatrixXd B_in, VectorXd d_in);

  static FactorCovariance diagonal(VectorXd d_in);

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  MatrixXd dense() const;  // materializes Sigma (tests / small m only)
};

// (B B^T + D^2)^{-1} v via the Woodbury identity
//   D^{-2} - D^{-2} B (I + B^T D^{-2} B)^{-1} B^T D^{-2},
// never forming the m x m inverse. O(m k^2 + k^3).
VectorXd woodbury_solve(const FactorCovariance& fc, const VectorXd& v);
MatrixXd woodbury_solve_matrix(const FactorCovariance& fc, const MatrixXd& V);

// log |B B^T + D^2| = log |I + B^T D^{-2} B| + 2 sum_i log d_i.
double woodbury_logdet(const FactorCovariance& fc);

// mu + B zeta1 + d o zeta2; deterministic in its inputs, which is what the
// reparameterization trick needs.
VectorXd sample_lowrank_normal(const VectorXd& mu, const FactorCovariance& fc,
                               const VectorXd& zeta1, const VectorXd& zeta2);

// Number of free (lower-trapezoid) entries of an m x k factor loading block.
inline int vech_size(int m, int k) { return m * k - k * (k - 1) / 2; }

// Column-major packing of the lower-trapezoid entries of B; the fixed layout
// used everywhere lambda vectors are serialized.
VectorXd vech_lower(const MatrixXd& B);
MatrixXd unvech_lower(const VectorXd& v, int m, int k);

}  // namespace hybridvi
