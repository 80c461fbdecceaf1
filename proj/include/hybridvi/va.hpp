#pragma once

#include <memory>
#include <string>

#include "hybridvi/linalg.hpp"
#include "hybridvi/rng.hpp"

namespace hybridvi {

// One reparameterized draw: theta is a deterministic function of the noise
// (zeta1, zeta2) and the variational parameters that produced it.
struct ReparamDraw {
  VectorXd theta;     // m
  VectorXd vartheta;  // m; pre-transform Gaussian draw (== theta, Gaussian family)
  VectorXd zeta1;     // factor noise (length k, concatenated across blocks)
  VectorXd zeta2;     // idiosyncratic noise (length m)
};

struct VaMeta {
  std::string family;
  int m = 0;
  int k = 0;
  int layout_version = 1;
};

// A marginal approximation q^0_lambda(theta) with a generative (reparameterized)
// representation. Immutable value semantics: one SGA step works on one snapshot.
//
// Two parameter layouts appear below. pack() is the natural lambda used for
// serialization; step_vector()/with_step_vector() expose the unconstrained
// vector the optimizer moves (identical to pack() except that the copula
// family's gamma block is replaced by its logit and d is floored on update).
class VaFamily {
 public:
  virtual ~VaFamily() = default;
  virtual std::unique_ptr<VaFamily> clone() const = 0;

  virtual int dim_theta() const = 0;
  virtual int factor_dim() const = 0;  // length of zeta1
  virtual int step_dim() const = 0;

  virtual ReparamDraw sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const = 0;
  ReparamDraw sample_reparam(Rng& rng) const;

  virtual double log_density(const VectorXd& theta) const = 0;

  // grad_theta log q^0_lambda(theta).
  virtual VectorXd score_theta(const VectorXd& theta) const = 0;

  // d theta^T / d lambda * g, laid out like step_vector(), computed blockwise
  // without materializing the m x |lambda| Jacobian. The draw must have been
  // produced under the current lambda.
  virtual VectorXd jacobian_action(const ReparamDraw& draw, const VectorXd& g) const = 0;

  virtual VectorXd step_vector() const = 0;
  virtual void set_step_vector(const VectorXd& v) = 0;

  virtual VectorXd pack() const = 0;
  virtual VaMeta meta() const = 0;

  // Monte Carlo mean of theta under q^0 (closed form where available).
  virtual VectorXd mean_theta(int n_draws, Rng& rng) const = 0;
};

class GaussianFactorVA : public VaFamily {
 public:
  GaussianFactorVA(VectorXd mu, FactorCovariance cov);

  // mu = 0, B = 0, d = 0.01: the default SGA starting point.
  static GaussianFactorVA initial(int m, int k, double d0 = 0.01);
  static GaussianFactorVA unpack(const VectorXd& lambda, int m, int k);

  const VectorXd& mu() const { return mu_; }
  const FactorCovariance& cov() const { return cov_; }

  std::unique_ptr<VaFamily> clone() const override;
  int dim_theta() const override { return cov_.m; }
  int factor_dim() const override { return cov_.k; }
  int step_dim() const override;
  using VaFamily::sample_reparam;
  ReparamDraw sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const override;
  double log_density(const VectorXd& theta) const override;
  VectorXd score_theta(const VectorXd& theta) const override;
  VectorXd jacobian_action(const ReparamDraw& draw, const VectorXd& g) const override;
  VectorXd step_vector() const override;
  void set_step_vector(const VectorXd& v) override;
  VectorXd pack() const override { return step_vector(); }
  VaMeta meta() const override;
  VectorXd mean_theta(int, Rng&) const override { return mu_; }

 private:
  VectorXd mu_;
  FactorCovariance cov_;
};

// Yeo-Johnson Gaussian factor copula: vartheta ~ N(mu, B B^T + D^2) on the
// transformed scale, theta_i = t_{gamma_i}^{-1}(vartheta_i). gamma_i is kept
// strictly inside (0,2) through gamma = 2*logistic(gamma_tilde); the gamma
// block of jacobian_action is chain-ruled through that map.
class GaussianCopulaVA : public VaFamily {
 public:
  GaussianCopulaVA(VectorXd mu, FactorCovariance cov, VectorXd gamma);

  static GaussianCopulaVA initial(int m, int k, double d0 = 0.01);
  static GaussianCopulaVA unpack(const VectorXd& lambda, int m, int k);

  const VectorXd& mu() const { return mu_; }
  const FactorCovariance& cov() const { return cov_; }
  const VectorXd& gamma() const { return gamma_; }

  std::unique_ptr<VaFamily> clone() const override;
  int dim_theta() const override { return cov_.m; }
  int factor_dim() const override { return cov_.k; }
  int step_dim() const override;
  using VaFamily::sample_reparam;
  ReparamDraw sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const override;
  double log_density(const VectorXd& theta) const override;
  VectorXd score_theta(const VectorXd& theta) const override;
  VectorXd jacobian_action(const ReparamDraw& draw, const VectorXd& g) const override;
  VectorXd step_vector() const override;
  void set_step_vector(const VectorXd& v) override;
  VectorXd pack() const override;
  VaMeta meta() const override;
  VectorXd mean_theta(int n_draws, Rng& rng) const override;

 private:
  VectorXd mu_;
  FactorCovariance cov_;
  VectorXd gamma_;  // each in (0,2)
};

// Lower floor applied to d after every SGA update.
constexpr double kDFloor = 1e-8;

}  // namespace hybridvi
