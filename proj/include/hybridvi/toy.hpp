#pragma once

#include "hybridvi/diagnostics.hpp"
#include "hybridvi/engine.hpp"

namespace hybridvi {

// Conjugate Gaussian toy model with one latent vector per unit:
//   theta ~ N(mu0, Sigma0),   z_i | theta ~ N(theta, sz^2 I),
//   y_i | z_i ~ N(z_i, sy^2 I),   i = 1..n.
// Everything is tractable: the theta posterior, the evidence, the exact
// conditional p(z|theta,y) and the closed-form ELBO gradient for a Gaussian
// factor VA. It is the oracle model behind the engine-level tests.
class ConjugateToyModel : public LatentModel {
 public:
  ConjugateToyModel(VectorXd mu0, MatrixXd sigma0, double sz, double sy, MatrixXd y);

  // Draws theta/z/y from the generative model.
  static ConjugateToyModel simulate(VectorXd mu0, MatrixXd sigma0, double sz, double sy,
                                    int n_units, Rng& rng);

  int dim_theta() const override { return m_; }
  int unit_count() const override { return n_; }
  VectorXd init_latent(Rng& rng) const override;
  void sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps, Rng& rng) const override;
  void sample_latent_units(const VectorXd& theta, VectorXd& z, const std::vector<int>& units,
                           int n_sweeps, Rng& rng) const override;
  VectorXd grad_log_g(const VectorXd& theta, const VectorXd& z) const override;
  VectorXd grad_log_g_units(const VectorXd& theta, const VectorXd& z,
                            const std::vector<int>& units) const override;
  double log_g(const VectorXd& theta, const VectorXd& z) const override;
  double diagnostic(const VectorXd& theta, const VectorXd& z) const override;

  // Closed forms.
  VectorXd posterior_mean() const { return post_mean_; }
  MatrixXd posterior_cov() const { return post_cov_; }
  double log_evidence() const { return log_evidence_; }
  double marginal_loglik(const VectorXd& theta) const;  // log p(y | theta)
  double prior_logpdf(const VectorXd& theta) const;

  // Exact grad_lambda L0 for a Gaussian factor VA, laid out like its step
  // vector. The oracle for the Theorem-1 unbiasedness test.
  VectorXd exact_elbo_gradient(const GaussianFactorVA& va) const;

  const MatrixXd& data() const { return y_; }
  double sz() const { return sz_; }
  double sy() const { return sy_; }

 private:
  int m_ = 0, n_ = 0;
  VectorXd mu0_;
  MatrixXd sigma0_, sigma0_inv_;
  double sz_ = 1.0, sy_ = 1.0;
  MatrixXd y_;  // n x m
  VectorXd post_mean_;
  MatrixXd post_cov_, post_prec_;
  double log_evidence_ = 0.0;
};

// The same toy posterior over the stacked vector (theta, z_1, ..., z_n) for
// the augmented mean-field benchmark.
class ToyAugmentedModel : public AugmentedModel {
 public:
  explicit ToyAugmentedModel(const ConjugateToyModel& toy) : toy_(toy) {}
  int dim() const override;
  double log_g(const VectorXd& psi) const override;
  VectorXd grad_log_g(const VectorXd& psi) const override;

 private:
  const ConjugateToyModel& toy_;
};

}  // namespace hybridvi
