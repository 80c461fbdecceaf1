#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "hybridvi/va.hpp"

namespace hybridvi {

// Contract a latent-variable model fulfills so the engine can calibrate the
// hybrid approximation against it. The latent state z is a flat vector with
// a model-defined layout. grad_log_g is the joint gradient of
// log p(y|theta,z) + log p(z|theta) + log p(theta) with respect to theta.
// sample_latent applies n_sweeps of a sampler whose invariant distribution
// is p(z|theta,y), warm-started at the passed-in z.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual int dim_theta() const = 0;
  virtual VectorXd init_latent(Rng& rng) const = 0;
  virtual void sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps, Rng& rng) const = 0;
  virtual VectorXd grad_log_g(const VectorXd& theta, const VectorXd& z) const = 0;
  virtual double log_g(const VectorXd& theta, const VectorXd& z) const = 0;

  // Sub-sampling support: g factors across units as
  // sum_i k_i(theta, z_i) + grad log p(theta). Models without this
  // factorization keep unit_count() == 0.
  virtual int unit_count() const { return 0; }
  virtual VectorXd grad_log_g_units(const VectorXd& theta, const VectorXd& z,
                                    const std::vector<int>& units) const;
  virtual void sample_latent_units(const VectorXd& theta, VectorXd& z,
                                   const std::vector<int>& units, int n_sweeps, Rng& rng) const;

  // Scalar convergence diagnostic recorded in the trace (NaN when absent).
  virtual double diagnostic(const VectorXd& theta, const VectorXd& z) const {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct AdadeltaState {
  VectorXd acc_grad_sq;  // E[g^2]
  VectorXd acc_step_sq;  // E[dx^2]
  double rho_decay = 0.95;
  double epsilon_fuzz = 1e-6;

  AdadeltaState() = default;
  AdadeltaState(int dim, double rho, double eps);

  // Returns the update Delta; the caller applies lambda <- lambda + Delta.
  VectorXd step(const VectorXd& grad);
};

struct FitConfig {
  int n_steps = 1000;
  int n_sweeps = 5;
  std::optional<int> subsample_size;
  std::uint64_t seed = 1;
  int trace_every = 100;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double grad_clip = 1e4;
  bool plateau_stop = false;
  int plateau_window = 500;
  double plateau_rel_tol = 1e-4;

  void validate(int n_units) const;
};

struct TraceRow {
  int step = 0;
  double grad_norm = 0.0;
  double diagnostic = 0.0;
  double elapsed_ms = 0.0;
};

struct FitTrace {
  std::vector<TraceRow> rows;
  std::vector<int> snapshot_steps;
  std::vector<VectorXd> lambda_snapshots;  // natural (pack) layout
  std::vector<VectorXd> latent_snapshots;
  long clip_events = 0;
  int steps_run = 0;
  bool plateau_stopped = false;
};

struct FitResult {
  std::unique_ptr<VaFamily> va;           // final iterate
  std::unique_ptr<VaFamily> va_tail_avg;  // step vector averaged over the last half
  FitTrace trace;
  VectorXd final_latent;
};

// Theorem-1 estimate: d theta^T/d lambda (grad_theta log g(theta,z) -
// grad_theta log q^0). Unbiased for grad_lambda L when z is an exact draw
// from p(z|theta,y).
VectorXd hybrid_gradient(const LatentModel& model, const VaFamily& va,
                         const ReparamDraw& draw, const VectorXd& z);

// Sub-sampled variant: the unit sum is replaced by (n/|S|) sum_{j in S} k_j
// plus the prior gradient.
VectorXd subsampled_gradient(const LatentModel& model, const VaFamily& va,
                             const ReparamDraw& draw, const VectorXd& z,
                             const std::vector<int>& units);

// The SGA loop: per step draw theta by reparameterization, refresh z with
// n_sweeps warm-started sweeps, take the hybrid (or sub-sampled) gradient,
// and apply an ADADELTA update. Deterministic given cfg.seed.
FitResult run_sga(const LatentModel& model, const VaFamily& va_init, const FitConfig& cfg);

}  // namespace hybridvi
