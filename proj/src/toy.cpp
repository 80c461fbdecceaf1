#include "hybridvi/toy.hpp"

#include <cmath>
#include <stdexcept>

namespace hybridvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("mvn_logpdf: covariance not PD");
  const VectorXd r = x - mean;
  const VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (x.size() * kLog2Pi + logdet + w.squaredNorm());
}
}  // namespace

ConjugateToyModel::ConjugateToyModel(VectorXd mu0, MatrixXd sigma0, double sz, double sy,
                                     MatrixXd y)
    : m_(static_cast<int>(mu0.size())),
      n_(static_cast<int>(y.rows())),
      mu0_(std::move(mu0)),
      sigma0_(std::move(sigma0)),
      sz_(sz),
      sy_(sy),
      y_(std::move(y)) {
  if (sigma0_.rows() != m_ || sigma0_.cols() != m_ || y_.cols() != m_) {
    throw std::invalid_argument("ConjugateToyModel: shape mismatch");
  }
  sigma0_inv_ = sigma0_.llt().solve(MatrixXd::Identity(m_, m_));
  const double v_marg = sz_ * sz_ + sy_ * sy_;
  post_prec_ = sigma0_inv_ + (n_ / v_marg) * MatrixXd::Identity(m_, m_);
  post_cov_ = post_prec_.llt().solve(MatrixXd::Identity(m_, m_));
  VectorXd ysum = y_.colwise().sum();
  post_mean_ = post_cov_ * (sigma0_inv_ * mu0_ + ysum / v_marg);

  // Evidence via the dense stacked Gaussian: y_stack ~ N(1 (x) mu0,
  // I v_marg + J (x) Sigma0). Oracle-grade, small n*m only.
  MatrixXd big = MatrixXd::Zero(n_ * m_, n_ * m_);
  VectorXd big_mean(n_ * m_);
  for (int i = 0; i < n_; ++i) {
    big_mean.segment(i * m_, m_) = mu0_;
    for (int j = 0; j < n_; ++j) {
      big.block(i * m_, j * m_, m_, m_) = sigma0_;
      if (i == j) big.block(i * m_, j * m_, m_, m_) += v_marg * MatrixXd::Identity(m_, m_);
    }
  }
  VectorXd y_stack(n_ * m_);
  for (int i = 0; i < n_; ++i) y_stack.segment(i * m_, m_) = y_.row(i).transpose();
  log_evidence_ = mvn_logpdf(y_stack, big_mean, big);
}

ConjugateToyModel ConjugateToyModel::simulate(VectorXd mu0, MatrixXd sigma0, double sz, double sy,
                                              int n_units, Rng& rng) {
  const int m = static_cast<int>(mu0.size());
  const Eigen::LLT<MatrixXd> llt(sigma0);
  VectorXd eps(m);
  for (int i = 0; i < m; ++i) eps[i] = rng.normal();
  const VectorXd theta = mu0 + llt.matrixL() * eps;
  MatrixXd y(n_units, m);
  for (int i = 0; i < n_units; ++i) {
    for (int j = 0; j < m; ++j) {
      const double z = theta[j] + sz * rng.normal();
      y(i, j) = z + sy * rng.normal();
    }
  }
  return ConjugateToyModel(std::move(mu0), std::move(sigma0), sz, sy, std::move(y));
}

VectorXd ConjugateToyModel::init_latent(Rng&) const { return VectorXd::Zero(n_ * m_); }

void ConjugateToyModel::sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps,
                                      Rng& rng) const {
  if (n_sweeps < 1) return;
  std::vector<int> all(n_);
  for (int i = 0; i < n_; ++i) all[i] = i;
  sample_latent_units(theta, z, all, 1, rng);  // exact conditional: one pass suffices
}

void ConjugateToyModel::sample_latent_units(const VectorXd& theta, VectorXd& z,
                                            const std::vector<int>& units, int n_sweeps,
                                            Rng& rng) const {
  if (n_sweeps < 1) return;
  const double prec = 1.0 / (sz_ * sz_) + 1.0 / (sy_ * sy_);
  const double s2 = 1.0 / prec;
  const double s = std::sqrt(s2);
  for (int i : units) {
    for (int j = 0; j < m_; ++j) {
      const double mean = s2 * (y_(i, j) / (sy_ * sy_) + theta[j] / (sz_ * sz_));
      z[i * m_ + j] = mean + s * rng.normal();
    }
  }
}

VectorXd ConjugateToyModel::grad_log_g(const VectorXd& theta, const VectorXd& z) const {
  VectorXd acc = VectorXd::Zero(m_);
  for (int i = 0; i < n_; ++i) acc += z.segment(i * m_, m_);
  return (acc - n_ * theta) / (sz_ * sz_) - sigma0_inv_ * (theta - mu0_);
}

VectorXd ConjugateToyModel::grad_log_g_units(const VectorXd& theta, const VectorXd& z,
                                             const std::vector<int>& units) const {
  if (units.empty()) throw std::invalid_argument("grad_log_g_units: empty subset");
  VectorXd acc = VectorXd::Zero(m_);
  for (int i : units) acc += z.segment(i * m_, m_) - theta;
  acc *= static_cast<double>(n_) / static_cast<double>(units.size()) / (sz_ * sz_);
  return acc - sigma0_inv_ * (theta - mu0_);
}

double ConjugateToyModel::log_g(const VectorXd& theta, const VectorXd& z) const {
  double out = mvn_logpdf(theta, mu0_, sigma0_);
  for (int i = 0; i < n_; ++i) {
    const VectorXd zi = z.segment(i * m_, m_);
    out += -0.5 * m_ * (kLog2Pi + 2.0 * std::log(sz_)) -
           0.5 * (zi - theta).squaredNorm() / (sz_ * sz_);
    out += -0.5 * m_ * (kLog2Pi + 2.0 * std::log(sy_)) -
           0.5 * (y_.row(i).transpose() - zi).squaredNorm() / (sy_ * sy_);
  }
  return out;
}

double ConjugateToyModel::diagnostic(const VectorXd& theta, const VectorXd& z) const {
  return log_g(theta, z);
}

double ConjugateToyModel::prior_logpdf(const VectorXd& theta) const {
  return mvn_logpdf(theta, mu0_, sigma0_);
}

double ConjugateToyModel::marginal_loglik(const VectorXd& theta) const {
  const double v = sz_ * sz_ + sy_ * sy_;
  double out = 0.0;
  for (int i = 0; i < n_; ++i) {
    out += -0.5 * m_ * (kLog2Pi + std::log(v)) -
           0.5 * (y_.row(i).transpose() - theta).squaredNorm() / v;
  }
  return out;
}

VectorXd ConjugateToyModel::exact_elbo_gradient(const GaussianFactorVA& va) const {
  // L0(lambda) = log Z - KL(q || p(theta|y)); both Gaussians, so the
  // gradient has the closed form below.
  const MatrixXd sigma_q = va.cov().dense();
  const MatrixXd sigma_q_inv = sigma_q.llt().solve(MatrixXd::Identity(m_, m_));
  const MatrixXd diff = sigma_q_inv - post_prec_;

  const int k = va.cov().k;
  VectorXd grad(va.step_dim());
  grad.head(m_) = post_prec_ * (post_mean_ - va.mu());
  const MatrixXd gb = diff * va.cov().B;
  int idx = m_;
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < m_; ++i) grad[idx++] = gb(i, j);
  }
  grad.tail(m_) = diff.diagonal().cwiseProduct(va.cov().d);
  return grad;
}

int ToyAugmentedModel::dim() const { return toy_.dim_theta() * (1 + toy_.unit_count()); }

double ToyAugmentedModel::log_g(const VectorXd& psi) const {
  const int m = toy_.dim_theta();
  return toy_.log_g(psi.head(m), psi.tail(psi.size() - m));
}

VectorXd ToyAugmentedModel::grad_log_g(const VectorXd& psi) const {
  const int m = toy_.dim_theta();
  const int n = toy_.unit_count();
  const VectorXd theta = psi.head(m);
  const VectorXd z = psi.tail(n * m);
  VectorXd grad(dim());
  grad.head(m) = toy_.grad_log_g(theta, z);
  const double sz2 = toy_.sz() * toy_.sz();
  const double sy2 = toy_.sy() * toy_.sy();
  for (int i = 0; i < n; ++i) {
    const VectorXd zi = z.segment(i * m, m);
    grad.segment(m + i * m, m) =
        (toy_.data().row(i).transpose() - zi) / sy2 - (zi - theta) / sz2;
  }
  return grad;
}

}  // namespace hybridvi
