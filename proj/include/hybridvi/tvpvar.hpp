#pragma once

#include <vector>

#include "hybridvi/diagnostics.hpp"
#include "hybridvi/engine.hpp"

namespace hybridvi {

struct TVPVARData {
  int T = 0, N = 0, p = 1;
  MatrixXd y;  // T x N

  void validate() const;
};

// Per-equation regression form: y_{i,t} = xtilde_t' eta_{i,t} + eps_t with
// xtilde_t = (y_{t-1}', ..., y_{t-p}', 1, -y_{1:i-1,t}') and the recursive
// triangular structure across equations. Equation index is 0-based here;
// q = J/2 = p N + i + 1. Rows run over t = p+1..T (the first p observations
// condition the likelihood).
struct EquationDesign {
  int eq = 0;
  int N = 0, p = 0;
  int T_eff = 0;
  int q = 0;        // J/2
  MatrixXd xtilde;  // T_eff x q
  VectorXd y_i;     // T_eff
};

EquationDesign build_design(const TVPVARData& data, int eq);

// Unconstrained per-equation parameters (tau, log chi, log xi, log nu,
// log kappa, hbar, probit rho, log sigma^2); alpha = sqrt(xi) tau o sqrt(chi)
// is the non-centered coefficient map. The first q entries of alpha are
// eta_0, the last q the signed sqrt(v) scalings.
struct TvpParams {
  VectorXd tau;      // J
  VectorXd chi_log;  // J
  double xi_log = 0.0;
  VectorXd nu_log;   // J
  double kappa_log = 0.0;
  double hbar = 0.0;
  double rho_probit = 0.0;
  double sigma2_log = 0.0;

  static int dim(int J) { return 3 * J + 5; }
  static TvpParams unpack(const VectorXd& theta, int J);
  VectorXd pack() const;

  int J() const { return static_cast<int>(tau.size()); }
  VectorXd alpha() const;
  double rho() const;     // 2 Phi(rho_probit) - 1
  double sigma2() const;  // exp(sigma2_log)
  // Stationary AR(1) variance sigma^2 / (1 - rho^2).
  double h1_var() const;
};

// Latent layout: [h (T_eff), eta_tilde row-major (T_eff x q)].
struct TvpLatent {
  VectorXd h;          // T_eff
  MatrixXd eta_tilde;  // T_eff x q

  VectorXd pack() const;
  static TvpLatent unpack(const VectorXd& z, int T_eff, int q);
};

double log_g_tvpvar(const EquationDesign& design, const TvpParams& params,
                    const TvpLatent& latent);
VectorXd grad_log_g_tvpvar(const EquationDesign& design, const TvpParams& params,
                           const TvpLatent& latent);

// Carter-Kohn forward-filter backward-sampler for the state deviations given
// the volatilities. Throws on a non-PD filter covariance.
MatrixXd ffbs_eta(const EquationDesign& design, const TvpParams& params, const VectorXd& h,
                  Rng& rng);

// Kim-Shephard-Chib auxiliary-mixture sampler for the log-volatilities given
// the states. c_off guards log(e^2).
VectorXd sample_h_ksc(const EquationDesign& design, const TvpParams& params,
                      const MatrixXd& eta_tilde, const VectorXd& h_current, Rng& rng,
                      double c_off = 1e-6);

// The seven-normal mixture for log chi^2_1 (component probability, mean
// relative to -1.2704, variance).
struct KscComponent {
  double prob, mean, var;
};
const std::vector<KscComponent>& ksc_mixture();

// Exact moments of the embedded mixture (for the oracle test).
void ksc_mixture_moments(double* mean, double* variance);

class TvpVarEquationModel : public LatentModel {
 public:
  explicit TvpVarEquationModel(EquationDesign design);

  const EquationDesign& design() const { return design_; }

  int dim_theta() const override { return TvpParams::dim(2 * design_.q); }
  VectorXd init_latent(Rng& rng) const override;
  void sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps, Rng& rng) const override;
  VectorXd grad_log_g(const VectorXd& theta, const VectorXd& z) const override;
  double log_g(const VectorXd& theta, const VectorXd& z) const override;
  double diagnostic(const VectorXd& theta, const VectorXd& z) const override;

  TvpParams unpack(const VectorXd& theta) const {
    return TvpParams::unpack(theta, 2 * design_.q);
  }

 private:
  EquationDesign design_;
  VectorXd h_init_;  // rolling-window log residual variance from an OLS pre-fit
};

// Augmented target over psi = (theta, h, eta_tilde) for the Gaussian
// benchmark VAs.
class TvpVarAugmentedModel : public AugmentedModel {
 public:
  explicit TvpVarAugmentedModel(const TvpVarEquationModel& model) : model_(model) {}
  int dim() const override;
  double log_g(const VectorXd& psi) const override;
  VectorXd grad_log_g(const VectorXd& psi) const override;

 private:
  const TvpVarEquationModel& model_;
};

// Maps per-equation coefficient vectors eta_{i,t} (i = 0..N-1) at one time
// point back to the structural VAR quantities: unitriangular L_t (by exact
// back-substitution of L_t^{-1}), intercept beta_0t and lag matrices B_st.
struct VarCoefficients {
  VectorXd beta0;           // N
  std::vector<MatrixXd> B;  // p matrices, N x N
  MatrixXd L;               // N x N unitriangular
};

VarCoefficients recover_var_coefficients(const std::vector<VectorXd>& eta_t, int N, int p);

// One-step-ahead predictive density on a grid: the state innovation is
// integrated analytically, the volatility innovation by Gauss-Hermite
// quadrature.
struct PredictiveDensity {
  VectorXd grid;
  VectorXd dens;
  double mass = 0.0;  // trapezoid integral over the grid
};

PredictiveDensity predictive_density(const TvpParams& params, const VectorXd& eta_tilde_t,
                                     double h_t, const VectorXd& xtilde_next,
                                     const VectorXd& grid, int n_quad = 32);

// Average KL divergence over time between predictives evaluated at the VA
// means and at the exact-posterior means.
double predictive_kl(const EquationDesign& design, const TvpParams& params_va,
                     const TvpLatent& latent_va, const TvpParams& params_exact,
                     const TvpLatent& latent_exact, int grid_points = 1201);

struct TvpSimHyper {
  double coef_rw_sd = 0.01;   // random-walk sd of the beta_t elements
  double l_rw_sd = 0.01;      // random-walk sd of the free L_t elements
  double init_coef_scale = 0.25;
  double init_spectral_radius = 0.5;
  VectorXd hbar;              // N
  VectorXd rho;               // N
  VectorXd sigma_e;           // N (vol-of-vol, sd)
};

struct TvpSimTruth {
  MatrixXd h;                          // T x N log-volatilities
  std::vector<VarCoefficients> coefs;  // per t
};

TVPVARData simulate_tvpvar(int N, int T, int p, const TvpSimHyper& hyper, Rng& rng,
                           TvpSimTruth* truth = nullptr);

// Per-equation Gibbs sampler: FFBS for the states, KSC for the volatilities,
// conjugate normal update for alpha, inverse-gamma horseshoe updates and
// scalar adaptive random-walk MH for (hbar, rho, sigma2).
struct TvpMcmcConfig {
  long n_sweeps = 20000;
  double burn_frac = 0.5;
  int thin_to = 5000;
  double scale_init = 0.2;
  int adapt_interval = 100;
  double accept_lo = 0.2;
  double accept_hi = 0.4;
  double scale_factor = 1.1;
};

struct TvpMcmcResult {
  MatrixXd theta_draws;  // thinned, VI parameterization (3J+5 columns)
  VectorXd h_mean;       // posterior mean path
  VectorXd vol_mean;     // posterior mean of exp(h/2)
  MatrixXd eta_mean;     // T_eff x q posterior mean of eta_tilde
  VectorXd accept_rate;  // (hbar, rho, sigma2)
  VectorXd ess;          // per theta coordinate
  TvpParams final_params;
  TvpLatent final_latent;

  VectorXd theta_mean() const;
};

TvpMcmcResult mcmc_tvpvar_equation(const TvpVarEquationModel& model, const TvpMcmcConfig& cfg,
                                   Rng& rng);

// One sweep of the horseshoe conditional updates with no data (alpha drawn
// from its prior); exposed for the prior-invariance oracle test.
void horseshoe_prior_gibbs_sweep(VectorXd& chi, double& xi, VectorXd& nu, double& kappa,
                                 VectorXd& alpha, Rng& rng);

}  // namespace hybridvi
