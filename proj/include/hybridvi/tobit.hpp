#pragma once

#include <vector>

#include "hybridvi/diagnostics.hpp"
#include "hybridvi/engine.hpp"
#include "hybridvi/linalg.hpp"

namespace hybridvi {

// Panel of censored weekly responses. Cell (i,t) lives at row i*T + t of X;
// censored cells are exactly those with y == 0. W is the declared
// index-subset of X columns carrying random coefficients.
struct TobitData {
  int N = 0, T = 0, p = 0, r = 0;
  MatrixXd X;                  // (N*T) x p
  MatrixXd y;                  // N x T, >= 0
  std::vector<int> w_idx;      // r column indices into X
  std::vector<bool> censored;  // N*T, censored[i*T+t] <=> y(i,t) == 0

  int cell(int i, int t) const { return i * T + t; }
  void validate() const;
};

// Unconstrained parameter vector theta = (beta, xi, c, kappa, l):
// xi = log omega, c = log(1/sigma), kappa = log diag(L), l the free
// below-diagonal entries of L (column-major).
struct TobitParams {
  VectorXd beta;   // p
  VectorXd xi;     // r
  double c = 0.0;
  VectorXd kappa;  // k_alpha
  VectorXd l;      // below-diagonal count

  static int n_lower(int r, int k_alpha);
  static int dim(int p, int r, int k_alpha);
  static TobitParams unpack(const VectorXd& theta, int p, int r, int k_alpha);
  VectorXd pack() const;

  int k_alpha() const { return static_cast<int>(kappa.size()); }
  double sigma() const;           // e^{-c}
  MatrixXd loading() const;       // L, r x k_alpha
  VectorXd omega() const;         // e^{xi}
};

struct TobitPrior {
  double sigma_beta2 = 100.0;  // Sigma_beta = sigma_beta2 * I
  double sigma_l2 = 100.0;
};

// V_alpha = L L^T + diag(omega) as a FactorCovariance (solve/logdet reuse
// the Woodbury path).
FactorCovariance assemble_v_alpha(const TobitParams& params);

struct TobitLatent {
  MatrixXd alpha;    // N x r
  VectorXd ystar_u;  // one entry per censored cell, scan order

  VectorXd pack() const;
  static TobitLatent unpack(const VectorXd& z, const TobitData& data);
};

double log_g_tobit(const TobitData& data, const TobitParams& params, const TobitLatent& latent,
                   const TobitPrior& prior);
VectorXd grad_log_g_tobit(const TobitData& data, const TobitParams& params,
                          const TobitLatent& latent, const TobitPrior& prior);

// E(y|alpha,theta) = eta Phi(eta/sigma) + sigma phi(eta/sigma) per cell;
// root mean squared error against the observed y.
double rmse_metric(const TobitData& data, const MatrixXd& alpha, const TobitParams& params);

struct HeterogeneityStat {
  double mean = 0.0, lo = 0.0, hi = 0.0;  // mean and central 95% interval
};
struct HeterogeneityReport {
  HeterogeneityStat total, focal, cross;
};

// TH / FBH / CBH distributions over posterior (or variational) draws of
// V_alpha; focal and cross are index sets into the W columns.
HeterogeneityReport heterogeneity(const TobitData& data, const std::vector<MatrixXd>& v_draws,
                                  const std::vector<int>& focal, const std::vector<int>& cross);

// The LatentModel adapter; owns per-unit caches (sum_t w w^T, censored cell
// lists). z layout: [alpha row-major (N x r), ystar_u].
class TobitModel : public LatentModel {
 public:
  TobitModel(TobitData data, int k_alpha, TobitPrior prior = {});

  const TobitData& data() const { return data_; }
  const TobitPrior& prior() const { return prior_; }
  int k_alpha() const { return k_alpha_; }

  int dim_theta() const override;
  int unit_count() const override { return data_.N; }
  VectorXd init_latent(Rng& rng) const override;
  void sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps, Rng& rng) const override;
  void sample_latent_units(const VectorXd& theta, VectorXd& z, const std::vector<int>& units,
                           int n_sweeps, Rng& rng) const override;
  VectorXd grad_log_g(const VectorXd& theta, const VectorXd& z) const override;
  VectorXd grad_log_g_units(const VectorXd& theta, const VectorXd& z,
                            const std::vector<int>& units) const override;
  double log_g(const VectorXd& theta, const VectorXd& z) const override;
  double diagnostic(const VectorXd& theta, const VectorXd& z) const override;

  TobitParams unpack(const VectorXd& theta) const;

  // Gibbs conditionals (exact draws; exposed for the sampler tests).
  void sample_alpha_conditional(const TobitParams& params, TobitLatent& latent, Rng& rng,
                                const std::vector<int>* units = nullptr) const;
  void sample_ystar_conditional(const TobitParams& params, TobitLatent& latent, Rng& rng,
                                const std::vector<int>* units = nullptr) const;

  // Closed-form conditional moments of alpha_i given the current latents.
  void alpha_conditional_moments(const TobitParams& params, const TobitLatent& latent, int i,
                                 VectorXd* mean, MatrixXd* cov) const;

  const MatrixXd& sum_ww(int i) const { return sum_ww_[i]; }

 private:
  TobitData data_;
  int k_alpha_ = 0;
  TobitPrior prior_;
  std::vector<MatrixXd> sum_ww_;              // per unit, r x r
  std::vector<std::vector<int>> unit_cens_;   // per unit: censored cell ids
  std::vector<int> cens_pos_;                 // cell id -> ystar index (-1 if observed)
};

// Augmented posterior over (theta, alpha) with ystar integrated out
// analytically (censored cells contribute Phi terms); the target of the
// Gaussian benchmarks. psi layout: [theta, alpha row-major].
class TobitAugmentedModel : public AugmentedModel {
 public:
  explicit TobitAugmentedModel(const TobitModel& model) : model_(model) {}
  int dim() const override;
  double log_g(const VectorXd& psi) const override;
  VectorXd grad_log_g(const VectorXd& psi) const override;
  double diagnostic(const VectorXd& psi) const override;

 private:
  const TobitModel& model_;
};

// Grouped adaptive random-walk Metropolis-Hastings over theta combined with
// the exact alpha / ystar conditionals.
struct TobitMcmcConfig {
  long n_sweeps = 200000;
  double burn_frac = 0.5;
  int thin_to = 10000;       // max stored draws after burn-in
  int group_size = 10;
  int adapt_interval = 100;  // sweeps per adaptation window
  double accept_lo = 0.10;
  double accept_hi = 0.20;
  double scale_init = 0.1;
  double scale_factor = 1.1;
};

struct TobitMcmcResult {
  MatrixXd theta_draws;     // n_keep x m (thinned, post burn-in)
  MatrixXd alpha_mean;      // N x r posterior mean (all post burn-in sweeps)
  VectorXd ystar_mean;      // censored cells posterior mean
  VectorXd accept_rate;     // per theta coordinate
  VectorXd ess;             // per theta coordinate (thinned chain)
  TobitParams final_params;
  TobitLatent final_latent;
  std::vector<int> flagged_coords;  // acceptance outside [0.05, 0.5]

  VectorXd theta_mean() const;
  VectorXd theta_sd() const;
};

TobitMcmcResult mcmc_tobit(const TobitModel& model, const TobitMcmcConfig& cfg, Rng& rng,
                           const TobitParams* init = nullptr);

// Synthetic panel: intercept column, standard-normal continuous columns and
// (for p >= 4) two Bernoulli(0.5) columns; W defaults to the first r
// columns. Records the generating latents for oracle tests.
struct TobitSimTruth {
  TobitParams params;
  MatrixXd alpha;   // N x r
  MatrixXd ystar;   // N x T (uncensored utilities)
};

TobitData simulate_tobit(int N, int T, int p, int r, const TobitParams& true_params,
                         const std::vector<int>& w_idx, Rng& rng, TobitSimTruth* truth = nullptr);

}  // namespace hybridvi
