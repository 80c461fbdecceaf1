#include "hybridvi/va.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hybridvi/yeo_johnson.hpp"

namespace hybridvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_draw(const ReparamDraw& draw, int m, int k) {
  if (draw.theta.size() != m || draw.zeta2.size() != m || draw.zeta1.size() != k) {
    throw std::invalid_argument("jacobian_action: stale draw, dimensions disagree with lambda");
  }
}
}  // namespace

ReparamDraw VaFamily::sample_reparam(Rng& rng) const {
  VectorXd zeta1(factor_dim()), zeta2(dim_theta());
  for (int i = 0; i < zeta1.size(); ++i) zeta1[i] = rng.normal();
  for (int i = 0; i < zeta2.size(); ++i) zeta2[i] = rng.normal();
  return sample_reparam(zeta1, zeta2);
}

// ---------------------------------------------------------------------------
// GaussianFactorVA

GaussianFactorVA::GaussianFactorVA(VectorXd mu, FactorCovariance cov)
    : mu_(std::move(mu)), cov_(std::move(cov)) {
  if (mu_.size() != cov_.m) throw std::invalid_argument("GaussianFactorVA: mu/cov mismatch");
}

GaussianFactorVA GaussianFactorVA::initial(int m, int k, double d0) {
  return GaussianFactorVA(VectorXd::Zero(m),
                          FactorCovariance(MatrixXd::Zero(m, k), VectorXd::Constant(m, d0)));
}

GaussianFactorVA GaussianFactorVA::unpack(const VectorXd& lambda, int m, int k) {
  const int nb = vech_size(m, k);
  if (lambda.size() != 2 * m + nb) throw std::invalid_argument("GaussianFactorVA::unpack: bad length");
  return GaussianFactorVA(lambda.head(m),
                          FactorCovariance(unvech_lower(lambda.segment(m, nb), m, k), lambda.tail(m)));
}

std::unique_ptr<VaFamily> GaussianFactorVA::clone() const {
  return std::make_unique<GaussianFactorVA>(*this);
}

int GaussianFactorVA::step_dim() const { return 2 * cov_.m + vech_size(cov_.m, cov_.k); }

ReparamDraw GaussianFactorVA::sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const {
  ReparamDraw draw;
  draw.theta = sample_lowrank_normal(mu_, cov_, zeta1, zeta2);
  draw.vartheta = draw.theta;
  draw.zeta1 = zeta1;
  draw.zeta2 = zeta2;
  return draw;
}

double GaussianFactorVA::log_density(const VectorXd& theta) const {
  const VectorXd r = theta - mu_;
  return -0.5 * (cov_.m * kLog2Pi + woodbury_logdet(cov_) + r.dot(woodbury_solve(cov_, r)));
}

VectorXd GaussianFactorVA::score_theta(const VectorXd& theta) const {
  return -woodbury_solve(cov_, theta - mu_);
}

VectorXd GaussianFactorVA::jacobian_action(const ReparamDraw& draw, const VectorXd& g) const {
  const int m = cov_.m, k = cov_.k;
  check_draw(draw, m, k);
  if (g.size() != m) throw std::invalid_argument("jacobian_action: gradient length mismatch");
  VectorXd out(step_dim());
  out.head(m) = g;
  int idx = m;
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < m; ++i) out[idx++] = g[i] * draw.zeta1[j];
  }
  out.tail(m) = g.cwiseProduct(draw.zeta2);
  return out;
}

VectorXd GaussianFactorVA::step_vector() const {
  VectorXd v(step_dim());
  const int m = cov_.m;
  v.head(m) = mu_;
  v.segment(m, vech_size(m, cov_.k)) = vech_lower(cov_.B);
  v.tail(m) = cov_.d;
  return v;
}

void GaussianFactorVA::set_step_vector(const VectorXd& v) {
  if (v.size() != step_dim()) throw std::invalid_argument("set_step_vector: bad length");
  const int m = cov_.m, k = cov_.k;
  const int nb = vech_size(m, k);
  mu_ = v.head(m);
  cov_.B = unvech_lower(v.segment(m, nb), m, k);
  cov_.d = v.tail(m).cwiseMax(kDFloor);
}

VaMeta GaussianFactorVA::meta() const { return {"gaussian_factor", cov_.m, cov_.k, 1}; }

// ---------------------------------------------------------------------------
// GaussianCopulaVA

GaussianCopulaVA::GaussianCopulaVA(VectorXd mu, FactorCovariance cov, VectorXd gamma)
    : mu_(std::move(mu)), cov_(std::move(cov)), gamma_(std::move(gamma)) {
  if (mu_.size() != cov_.m || gamma_.size() != cov_.m) {
    throw std::invalid_argument("GaussianCopulaVA: shape mismatch");
  }
  for (int i = 0; i < gamma_.size(); ++i) {
    if (!(gamma_[i] > 0.0 && gamma_[i] < 2.0)) {
      throw std::invalid_argument("GaussianCopulaVA: gamma must lie strictly in (0,2)");
    }
  }
}

GaussianCopulaVA GaussianCopulaVA::initial(int m, int k, double d0) {
  return GaussianCopulaVA(VectorXd::Zero(m),
                          FactorCovariance(MatrixXd::Zero(m, k), VectorXd::Constant(m, d0)),
                          VectorXd::Ones(m));
}

GaussianCopulaVA GaussianCopulaVA::unpack(const VectorXd& lambda, int m, int k) {
  const int nb = vech_size(m, k);
  if (lambda.size() != 3 * m + nb) throw std::invalid_argument("GaussianCopulaVA::unpack: bad length");
  return GaussianCopulaVA(lambda.head(m),
                          FactorCovariance(unvech_lower(lambda.segment(m, nb), m, k),
                                           lambda.segment(m + nb, m)),
                          lambda.tail(m));
}

std::unique_ptr<VaFamily> GaussianCopulaVA::clone() const {
  return std::make_unique<GaussianCopulaVA>(*this);
}

int GaussianCopulaVA::step_dim() const { return 3 * cov_.m + vech_size(cov_.m, cov_.k); }

ReparamDraw GaussianCopulaVA::sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const {
  ReparamDraw draw;
  draw.vartheta = sample_lowrank_normal(mu_, cov_, zeta1, zeta2);
  draw.theta.resize(cov_.m);
  for (int i = 0; i < cov_.m; ++i) {
    draw.theta[i] = yeo_johnson_inv(draw.vartheta[i], gamma_[i]);
  }
  draw.zeta1 = zeta1;
  draw.zeta2 = zeta2;
  return draw;
}

double GaussianCopulaVA::log_density(const VectorXd& theta) const {
  const int m = cov_.m;
  VectorXd vartheta(m);
  double log_jac = 0.0;
  for (int i = 0; i < m; ++i) {
    vartheta[i] = yeo_johnson(theta[i], gamma_[i]);
    log_jac += yj_log_dtheta(theta[i], gamma_[i]);
  }
  const VectorXd r = vartheta - mu_;
  return -0.5 * (m * kLog2Pi + woodbury_logdet(cov_) + r.dot(woodbury_solve(cov_, r))) + log_jac;
}

VectorXd GaussianCopulaVA::score_theta(const VectorXd& theta) const {
  const int m = cov_.m;
  VectorXd vartheta(m), tprime(m);
  for (int i = 0; i < m; ++i) {
    vartheta[i] = yeo_johnson(theta[i], gamma_[i]);
    tprime[i] = yj_dtheta(theta[i], gamma_[i]);
  }
  const VectorXd sol = woodbury_solve(cov_, vartheta - mu_);
  VectorXd score = -tprime.cwiseProduct(sol);
  for (int i = 0; i < m; ++i) {
    score[i] += (gamma_[i] - 1.0) / (std::fabs(theta[i]) + 1.0);
  }
  return score;
}

VectorXd GaussianCopulaVA::jacobian_action(const ReparamDraw& draw, const VectorXd& g) const {
  const int m = cov_.m, k = cov_.k;
  check_draw(draw, m, k);
  if (g.size() != m) throw std::invalid_argument("jacobian_action: gradient length mismatch");

  // w = (d theta / d vartheta) g, the scaling common to all blocks.
  VectorXd w(m), dgam(m);
  for (int i = 0; i < m; ++i) {
    w[i] = g[i] / yj_dtheta(draw.theta[i], gamma_[i]);
    dgam[i] = yj_dgamma(draw.theta[i], gamma_[i]);
  }
  VectorXd out(step_dim());
  out.head(m) = w;
  int idx = m;
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < m; ++i) out[idx++] = w[i] * draw.zeta1[j];
  }
  out.segment(idx, m) = w.cwiseProduct(draw.zeta2);
  // gamma block: d theta / d gamma = -(d t/d gamma)/t', then through the
  // logistic map gamma = 2*logistic(gamma_tilde).
  for (int i = 0; i < m; ++i) {
    const double dgamma_dtilde = 0.5 * gamma_[i] * (2.0 - gamma_[i]);
    out[idx + m + i] = -dgam[i] * w[i] * dgamma_dtilde;
  }
  return out;
}

VectorXd GaussianCopulaVA::step_vector() const {
  VectorXd v(step_dim());
  const int m = cov_.m;
  const int nb = vech_size(m, cov_.k);
  v.head(m) = mu_;
  v.segment(m, nb) = vech_lower(cov_.B);
  v.segment(m + nb, m) = cov_.d;
  for (int i = 0; i < m; ++i) v[m + nb + m + i] = std::log(gamma_[i] / (2.0 - gamma_[i]));
  return v;
}

void GaussianCopulaVA::set_step_vector(const VectorXd& v) {
  if (v.size() != step_dim()) throw std::invalid_argument("set_step_vector: bad length");
  const int m = cov_.m, k = cov_.k;
  const int nb = vech_size(m, k);
  mu_ = v.head(m);
  cov_.B = unvech_lower(v.segment(m, nb), m, k);
  cov_.d = v.segment(m + nb, m).cwiseMax(kDFloor);
  for (int i = 0; i < m; ++i) {
    // gamma_tilde clamped so gamma never collapses onto the interval ends
    // in floating point.
    const double gt = std::clamp(v[m + nb + m + i], -30.0, 30.0);
    gamma_[i] = 2.0 / (1.0 + std::exp(-gt));
  }
}

VectorXd GaussianCopulaVA::pack() const {
  VectorXd v = step_vector();
  v.tail(cov_.m) = gamma_;
  return v;
}

VaMeta GaussianCopulaVA::meta() const { return {"gaussian_copula_yj", cov_.m, cov_.k, 1}; }

VectorXd GaussianCopulaVA::mean_theta(int n_draws, Rng& rng) const {
  VectorXd acc = VectorXd::Zero(cov_.m);
  for (int s = 0; s < n_draws; ++s) {
    acc += sample_reparam(rng).theta;
  }
  return acc / static_cast<double>(n_draws);
}

}  // namespace hybridvi
