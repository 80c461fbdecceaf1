#include "hybridvi/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace hybridvi {

FactorCovariance::FactorCovariance(MatrixXd B_in, VectorXd d_in)
    : m(static_cast<int>(d_in.size())),
      k(static_cast<int>(B_in.cols())),
      B(std::move(B_in)),
      d(std::move(d_in)) {
  validate();
}

FactorCovariance FactorCovariance::diagonal(VectorXd d_in) {
  FactorCovariance fc;
  fc.m = static_cast<int>(d_in.size());
  fc.k = 0;
  fc.B = MatrixXd::Zero(fc.m, 0);
  fc.d = std::move(d_in);
  fc.validate();
  return fc;
}

void FactorCovariance::validate() const {
  if (m <= 0) throw std::invalid_argument("FactorCovariance: m must be positive");
  if (k < 0 || k > m) throw std::invalid_argument("FactorCovariance: need 0 <= k <= m");
  if (B.rows() != m || B.cols() != k || d.size() != m) {
    throw std::invalid_argument("FactorCovariance: inconsistent shapes");
  }
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < j && i < m; ++i) {
      if (B(i, j) != 0.0) {
        throw std::invalid_argument("FactorCovariance: B must have zero upper triangle");
      }
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!(d[i] > 0.0)) throw std::invalid_argument("FactorCovariance: all d[i] must be > 0");
  }
}

MatrixXd FactorCovariance::dense() const {
  MatrixXd sigma = B * B.transpose();
  sigma.diagonal() += d.cwiseProduct(d);
  return sigma;
}

namespace {

// Cholesky of the k x k inner matrix I + B^T D^{-2} B.
Eigen::LLT<MatrixXd> inner_llt(const FactorCovariance& fc) {
  const VectorXd dinv2 = fc.d.cwiseProduct(fc.d).cwiseInverse();
  MatrixXd inner = MatrixXd::Identity(fc.k, fc.k);
  inner.noalias() += fc.B.transpose() * dinv2.asDiagonal() * fc.B;
  Eigen::LLT<MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("woodbury: singular inner k x k system");
  }
  return llt;
}

}  // namespace

VectorXd woodbury_solve(const FactorCovariance& fc, const VectorXd& v) {
  if (v.size() != fc.m) throw std::invalid_argument("woodbury_solve: length mismatch");
  const VectorXd dinv2 = fc.d.cwiseProduct(fc.d).cwiseInverse();
  const VectorXd u = dinv2.cwiseProduct(v);
  if (fc.k == 0) return u;
  const auto llt = inner_llt(fc);
  const VectorXd w = llt.solve(fc.B.transpose() * u);
  return u - dinv2.cwiseProduct(fc.B * w);
}

MatrixXd woodbury_solve_matrix(const FactorCovariance& fc, const MatrixXd& V) {
  if (V.rows() != fc.m) throw std::invalid_argument("woodbury_solve_matrix: row mismatch");
  const VectorXd dinv2 = fc.d.cwiseProduct(fc.d).cwiseInverse();
  const MatrixXd U = dinv2.asDiagonal() * V;
  if (fc.k == 0) return U;
  const auto llt = inner_llt(fc);
  const MatrixXd W = llt.solve(fc.B.transpose() * U);
  return U - dinv2.asDiagonal() * (fc.B * W);
}

double woodbury_logdet(const FactorCovariance& fc) {
  double logdet = 2.0 * fc.d.array().log().sum();
  if (fc.k == 0) return logdet;
  const auto llt = inner_llt(fc);
  logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return logdet;
}

VectorXd sample_lowrank_normal(const VectorXd& mu, const FactorCovariance& fc,
                               const VectorXd& zeta1, const VectorXd& zeta2) {
  if (mu.size() != fc.m || zeta2.size() != fc.m || zeta1.size() != fc.k) {
    throw std::invalid_argument("sample_lowrank_normal: dimension mismatch");
  }
  VectorXd out = mu + fc.d.cwiseProduct(zeta2);
  if (fc.k > 0) out.noalias() += fc.B * zeta1;
  return out;
}

VectorXd vech_lower(const MatrixXd& B) {
  const int m = static_cast<int>(B.rows());
  const int k = static_cast<int>(B.cols());
  VectorXd v(vech_size(m, k));
  int idx = 0;
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < m; ++i) v[idx++] = B(i, j);
  }
  return v;
}

MatrixXd unvech_lower(const VectorXd& v, int m, int k) {
  if (v.size() != vech_size(m, k)) {
    throw std::invalid_argument("unvech_lower: wrong packed length");
  }
  MatrixXd B = MatrixXd::Zero(m, k);
  int idx = 0;
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < m; ++i) B(i, j) = v[idx++];
  }
  return B;
}

}  // namespace hybridvi
