#include "hybridvi/engine.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hybridvi {

VectorXd LatentModel::grad_log_g_units(const VectorXd&, const VectorXd&,
                                       const std::vector<int>&) const {
  throw std::logic_error("model does not expose per-unit gradients");
}

void LatentModel::sample_latent_units(const VectorXd&, VectorXd&, const std::vector<int>&,
                                      int, Rng&) const {
  throw std::logic_error("model does not expose per-unit latent updates");
}

AdadeltaState::AdadeltaState(int dim, double rho, double eps)
    : acc_grad_sq(VectorXd::Zero(dim)),
      acc_step_sq(VectorXd::Zero(dim)),
      rho_decay(rho),
      epsilon_fuzz(eps) {}

VectorXd AdadeltaState::step(const VectorXd& grad) {
  if (grad.size() != acc_grad_sq.size()) throw std::invalid_argument("adadelta: length mismatch");
  acc_grad_sq = rho_decay * acc_grad_sq + (1.0 - rho_decay) * grad.cwiseProduct(grad);
  const VectorXd delta =
      ((acc_step_sq.array() + epsilon_fuzz).sqrt() / (acc_grad_sq.array() + epsilon_fuzz).sqrt())
          .matrix()
          .cwiseProduct(grad);
  acc_step_sq = rho_decay * acc_step_sq + (1.0 - rho_decay) * delta.cwiseProduct(delta);
  return delta;
}

void FitConfig::validate(int n_units) const {
  if (n_steps < 0) throw std::invalid_argument("FitConfig: n_steps must be >= 0");
  if (n_sweeps < 1) throw std::invalid_argument("FitConfig: n_sweeps must be >= 1");
  if (trace_every < 1) throw std::invalid_argument("FitConfig: trace_every must be >= 1");
  if (subsample_size) {
    if (*subsample_size < 1 || *subsample_size > n_units) {
      throw std::invalid_argument("FitConfig: need 1 <= subsample_size <= unit count");
    }
  }
}

VectorXd hybrid_gradient(const LatentModel& model, const VaFamily& va,
                         const ReparamDraw& draw, const VectorXd& z) {
  const VectorXd g = model.grad_log_g(draw.theta, z) - va.score_theta(draw.theta);
  return va.jacobian_action(draw, g);
}

VectorXd subsampled_gradient(const LatentModel& model, const VaFamily& va,
                             const ReparamDraw& draw, const VectorXd& z,
                             const std::vector<int>& units) {
  const VectorXd g = model.grad_log_g_units(draw.theta, z, units) - va.score_theta(draw.theta);
  return va.jacobian_action(draw, g);
}

FitResult run_sga(const LatentModel& model, const VaFamily& va_init, const FitConfig& cfg) {
  cfg.validate(model.unit_count());
  if (va_init.dim_theta() != model.dim_theta()) {
    throw std::invalid_argument("run_sga: model and VA dimensions disagree");
  }

  FitResult result;
  result.va = va_init.clone();
  Rng rng(cfg.seed);
  VectorXd z = model.init_latent(rng);
  AdadeltaState ada(va_init.step_dim(), cfg.adadelta_rho, cfg.adadelta_eps);

  const auto t0 = std::chrono::steady_clock::now();
  double plateau_prev = std::numeric_limits<double>::quiet_NaN();
  double plateau_acc = 0.0;
  int plateau_count = 0;

  // Polyak-style tail average of the iterate path: the single-draw gradient
  // keeps the final iterate rattling around the optimum, the averaged one
  // is the point summary.
  const int avg_start = cfg.n_steps / 2;
  VectorXd avg_acc = VectorXd::Zero(va_init.step_dim());
  int avg_count = 0;

  for (int s = 0; s < cfg.n_steps; ++s) {
    const ReparamDraw draw = result.va->sample_reparam(rng);  // (a)

    VectorXd grad;
    if (cfg.subsample_size && *cfg.subsample_size < model.unit_count()) {
      const std::vector<int> units = sample_subset(model.unit_count(), *cfg.subsample_size, rng);
      model.sample_latent_units(draw.theta, z, units, cfg.n_sweeps, rng);  // (b), S(u) only
      grad = subsampled_gradient(model, *result.va, draw, z, units);       // (c)
    } else {
      model.sample_latent(draw.theta, z, cfg.n_sweeps, rng);  // (b)
      grad = hybrid_gradient(model, *result.va, draw, z);     // (c)
    }

    for (int i = 0; i < grad.size(); ++i) {
      if (grad[i] > cfg.grad_clip) {
        grad[i] = cfg.grad_clip;
        ++result.trace.clip_events;
      } else if (grad[i] < -cfg.grad_clip) {
        grad[i] = -cfg.grad_clip;
        ++result.trace.clip_events;
      }
    }

    const VectorXd delta = ada.step(grad);                          // (d)
    result.va->set_step_vector(result.va->step_vector() + delta);   // (e)
    result.trace.steps_run = s + 1;

    const VectorXd lambda = result.va->step_vector();
    if (!lambda.allFinite()) {
      throw std::runtime_error("run_sga: non-finite variational parameter at step " +
                               std::to_string(s + 1));
    }
    if (s >= avg_start) {
      avg_acc += lambda;
      ++avg_count;
    }

    const bool record = ((s + 1) % cfg.trace_every == 0) || (s + 1 == cfg.n_steps);
    double diag = std::numeric_limits<double>::quiet_NaN();
    if (record || cfg.plateau_stop) diag = model.diagnostic(draw.theta, z);
    if (record) {
      const double elapsed =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.trace.rows.push_back({s + 1, grad.norm(), diag, elapsed});
      result.trace.snapshot_steps.push_back(s + 1);
      result.trace.lambda_snapshots.push_back(result.va->pack());
      result.trace.latent_snapshots.push_back(z);
    }

    if (cfg.plateau_stop && std::isfinite(diag)) {
      plateau_acc += diag;
      if (++plateau_count == cfg.plateau_window) {
        const double mean = plateau_acc / cfg.plateau_window;
        plateau_acc = 0.0;
        plateau_count = 0;
        if (std::isfinite(plateau_prev)) {
          const double rel = std::fabs(mean - plateau_prev) /
                             std::max(1e-12, std::fabs(plateau_prev));
          if (rel < cfg.plateau_rel_tol) {
            result.trace.plateau_stopped = true;
            break;
          }
        }
        plateau_prev = mean;
      }
    }
  }

  result.va_tail_avg = result.va->clone();
  if (avg_count > 0) {
    result.va_tail_avg->set_step_vector(avg_acc / avg_count);
  }
  result.final_latent = std::move(z);
  return result;
}

}  // namespace hybridvi
