#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hybridvi/engine.hpp"
#include "hybridvi/va.hpp"

namespace hybridvi {

// A model exposing densities over a stacked vector psi (parameters plus
// latent blocks), used by the plain reparameterization-gradient benchmarks.
class AugmentedModel {
 public:
  virtual ~AugmentedModel() = default;
  virtual int dim() const = 0;
  virtual double log_g(const VectorXd& psi) const = 0;
  virtual VectorXd grad_log_g(const VectorXd& psi) const = 0;
  virtual double diagnostic(const VectorXd& psi) const {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

// Block-diagonal Gaussian factor VA over a stacked vector: independent
// GaussianFactorVA segments (theta, alpha_1, ..., alpha_N), each with its own
// factor count. All blocks with k = 0 gives the mean-field benchmark.
class AugmentedGaussianVA : public VaFamily {
 public:
  struct BlockSpec {
    std::string name;
    int dim = 0;
    int k = 0;
  };

  AugmentedGaussianVA(std::vector<BlockSpec> specs, double d0 = 0.01);

  const std::vector<BlockSpec>& specs() const { return specs_; }
  const GaussianFactorVA& block(int b) const { return blocks_[b]; }
  int block_offset(int b) const { return theta_offsets_[b]; }

  std::unique_ptr<VaFamily> clone() const override;
  int dim_theta() const override { return total_dim_; }
  int factor_dim() const override { return total_k_; }
  int step_dim() const override { return total_step_; }
  using VaFamily::sample_reparam;
  ReparamDraw sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const override;
  double log_density(const VectorXd& theta) const override;
  VectorXd score_theta(const VectorXd& theta) const override;
  VectorXd jacobian_action(const ReparamDraw& draw, const VectorXd& g) const override;
  VectorXd step_vector() const override;
  void set_step_vector(const VectorXd& v) override;
  VectorXd pack() const override { return step_vector(); }
  VaMeta meta() const override;
  VectorXd mean_theta(int, Rng&) const override;

 private:
  std::vector<BlockSpec> specs_;
  std::vector<GaussianFactorVA> blocks_;
  std::vector<int> theta_offsets_, zeta1_offsets_, step_offsets_;
  int total_dim_ = 0, total_k_ = 0, total_step_ = 0;
};

// Standard (non-hybrid) reparameterization-gradient SGA over an augmented
// VA; runs through run_sga with a null latent sampler.
FitResult fit_augmented_benchmark(const AugmentedModel& model, const AugmentedGaussianVA& va_init,
                                  const FitConfig& cfg);

// Monte Carlo ELBO estimate E_q[log g - log q] with its standard error.
// Valid for families with tractable log q only.
std::pair<double, double> elbo_estimate(const AugmentedModel& model, const VaFamily& va,
                                        int n_draws, Rng& rng);

struct GradCheckReport {
  VectorXd analytic;
  VectorXd numeric;
  VectorXd rel_error;
  VectorXd step_used;
  double max_rel_error = 0.0;
  std::vector<int> flagged;  // coordinates with rel_error > tolerance
  double tolerance = 1e-4;

  bool ok() const { return flagged.empty(); }
};

// Central finite differences with per-coordinate step max(1e-6, 1e-7 |x_i|).
GradCheckReport grad_check(const std::function<double(const VectorXd&)>& f,
                           const std::function<VectorXd(const VectorXd&)>& g,
                           const VectorXd& point, double tolerance = 1e-4);

// ESS = n / (1 + 2 sum rho_k), autocorrelations accumulated until the first
// negative consecutive pair (Geyer's initial positive sequence). A constant
// chain is degenerate: returns 1 and sets the flag.
double effective_sample_size(const std::vector<double>& chain, bool* degenerate = nullptr);

// Trapezoid-rule KL( p || q ) on a shared grid; densities below 1e-300
// contribute zero.
double kl_1d(const VectorXd& p_grid, const VectorXd& q_grid, const VectorXd& grid);

}  // namespace hybridvi
