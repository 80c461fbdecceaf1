#include "hybridvi/diagnostics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hybridvi {

AugmentedGaussianVA::AugmentedGaussianVA(std::vector<BlockSpec> specs, double d0)
    : specs_(std::move(specs)) {
  if (specs_.empty()) throw std::invalid_argument("AugmentedGaussianVA: no blocks");
  for (const auto& sp : specs_) {
    theta_offsets_.push_back(total_dim_);
    zeta1_offsets_.push_back(total_k_);
    step_offsets_.push_back(total_step_);
    blocks_.push_back(GaussianFactorVA::initial(sp.dim, sp.k, d0));
    total_dim_ += sp.dim;
    total_k_ += sp.k;
    total_step_ += blocks_.back().step_dim();
  }
}

std::unique_ptr<VaFamily> AugmentedGaussianVA::clone() const {
  return std::make_unique<AugmentedGaussianVA>(*this);
}

ReparamDraw AugmentedGaussianVA::sample_reparam(const VectorXd& zeta1, const VectorXd& zeta2) const {
  if (zeta1.size() != total_k_ || zeta2.size() != total_dim_) {
    throw std::invalid_argument("AugmentedGaussianVA: noise dimension mismatch");
  }
  ReparamDraw draw;
  draw.theta.resize(total_dim_);
  draw.zeta1 = zeta1;
  draw.zeta2 = zeta2;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const auto sub = blocks_[b].sample_reparam(zeta1.segment(zeta1_offsets_[b], specs_[b].k),
                                               zeta2.segment(theta_offsets_[b], specs_[b].dim));
    draw.theta.segment(theta_offsets_[b], specs_[b].dim) = sub.theta;
  }
  draw.vartheta = draw.theta;
  return draw;
}

double AugmentedGaussianVA::log_density(const VectorXd& theta) const {
  double out = 0.0;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    out += blocks_[b].log_density(theta.segment(theta_offsets_[b], specs_[b].dim));
  }
  return out;
}

VectorXd AugmentedGaussianVA::score_theta(const VectorXd& theta) const {
  VectorXd out(total_dim_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    out.segment(theta_offsets_[b], specs_[b].dim) =
        blocks_[b].score_theta(theta.segment(theta_offsets_[b], specs_[b].dim));
  }
  return out;
}

VectorXd AugmentedGaussianVA::jacobian_action(const ReparamDraw& draw, const VectorXd& g) const {
  if (draw.theta.size() != total_dim_ || g.size() != total_dim_) {
    throw std::invalid_argument("AugmentedGaussianVA: stale draw or gradient mismatch");
  }
  VectorXd out(total_step_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    ReparamDraw sub;
    sub.theta = draw.theta.segment(theta_offsets_[b], specs_[b].dim);
    sub.vartheta = sub.theta;
    sub.zeta1 = draw.zeta1.segment(zeta1_offsets_[b], specs_[b].k);
    sub.zeta2 = draw.zeta2.segment(theta_offsets_[b], specs_[b].dim);
    out.segment(step_offsets_[b], blocks_[b].step_dim()) =
        blocks_[b].jacobian_action(sub, g.segment(theta_offsets_[b], specs_[b].dim));
  }
  return out;
}

VectorXd AugmentedGaussianVA::step_vector() const {
  VectorXd out(total_step_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    out.segment(step_offsets_[b], blocks_[b].step_dim()) = blocks_[b].step_vector();
  }
  return out;
}

void AugmentedGaussianVA::set_step_vector(const VectorXd& v) {
  if (v.size() != total_step_) throw std::invalid_argument("AugmentedGaussianVA: bad step length");
  for (size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].set_step_vector(v.segment(step_offsets_[b], blocks_[b].step_dim()));
  }
}

VaMeta AugmentedGaussianVA::meta() const {
  return {"augmented_gaussian", total_dim_, total_k_, 1};
}

VectorXd AugmentedGaussianVA::mean_theta(int, Rng&) const {
  VectorXd out(total_dim_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    out.segment(theta_offsets_[b], specs_[b].dim) = blocks_[b].mu();
  }
  return out;
}

namespace {

// Adapts an AugmentedModel to the LatentModel contract with an empty latent
// state, so the benchmark fit reuses the same SGA loop.
class NullLatentAdapter : public LatentModel {
 public:
  explicit NullLatentAdapter(const AugmentedModel& m) : model_(m) {}
  int dim_theta() const override { return model_.dim(); }
  VectorXd init_latent(Rng&) const override { return VectorXd(0); }
  void sample_latent(const VectorXd&, VectorXd&, int, Rng&) const override {}
  VectorXd grad_log_g(const VectorXd& theta, const VectorXd&) const override {
    return model_.grad_log_g(theta);
  }
  double log_g(const VectorXd& theta, const VectorXd&) const override {
    return model_.log_g(theta);
  }
  double diagnostic(const VectorXd& theta, const VectorXd&) const override {
    return model_.diagnostic(theta);
  }

 private:
  const AugmentedModel& model_;
};

}  // namespace

FitResult fit_augmented_benchmark(const AugmentedModel& model, const AugmentedGaussianVA& va_init,
                                  const FitConfig& cfg) {
  NullLatentAdapter adapter(model);
  return run_sga(adapter, va_init, cfg);
}

std::pair<double, double> elbo_estimate(const AugmentedModel& model, const VaFamily& va,
                                        int n_draws, Rng& rng) {
  if (n_draws < 1) throw std::invalid_argument("elbo_estimate: need n_draws >= 1");
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < n_draws; ++s) {
    const ReparamDraw draw = va.sample_reparam(rng);
    const double v = model.log_g(draw.theta) - va.log_density(draw.theta);
    const double delta = v - mean;
    mean += delta / (s + 1);
    m2 += delta * (v - mean);
  }
  const double se = (n_draws > 1) ? std::sqrt(m2 / (n_draws - 1.0) / n_draws) : 0.0;
  return {mean, se};
}

GradCheckReport grad_check(const std::function<double(const VectorXd&)>& f,
                           const std::function<VectorXd(const VectorXd&)>& g,
                           const VectorXd& point, double tolerance) {
  const int n = static_cast<int>(point.size());
  GradCheckReport rep;
  rep.tolerance = tolerance;
  rep.analytic = g(point);
  if (rep.analytic.size() != n) throw std::invalid_argument("grad_check: gradient length mismatch");
  rep.numeric.resize(n);
  rep.rel_error.resize(n);
  rep.step_used.resize(n);
  for (int i = 0; i < n; ++i) {
    const double h = std::max(1e-6, 1e-7 * std::fabs(point[i]));
    VectorXd xp = point, xm = point;
    xp[i] += h;
    xm[i] -= h;
    rep.numeric[i] = (f(xp) - f(xm)) / (2.0 * h);
    rep.step_used[i] = h;
    const double denom = std::max({1.0, std::fabs(rep.analytic[i]), std::fabs(rep.numeric[i])});
    rep.rel_error[i] = std::fabs(rep.analytic[i] - rep.numeric[i]) / denom;
    rep.max_rel_error = std::max(rep.max_rel_error, rep.rel_error[i]);
    if (rep.rel_error[i] > tolerance) rep.flagged.push_back(i);
  }
  return rep;
}

double effective_sample_size(const std::vector<double>& chain, bool* degenerate) {
  const int n = static_cast<int>(chain.size());
  if (degenerate) *degenerate = false;
  if (n < 2) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / n;
  double c0 = 0.0;
  for (double v : chain) c0 += (v - mean) * (v - mean);
  c0 /= n;
  if (c0 <= 1e-14 * std::max(1.0, mean * mean)) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  auto autocov = [&](int lag) {
    double acc = 0.0;
    for (int t = 0; t + lag < n; ++t) acc += (chain[t] - mean) * (chain[t + lag] - mean);
    return acc / n;
  };
  double sum = 0.0;
  for (int k = 1; k + 1 < n; k += 2) {
    const double pair = (autocov(k) + autocov(k + 1)) / c0;
    if (pair < 0.0) break;
    sum += pair;
  }
  const double ess = n / (1.0 + 2.0 * sum);
  return std::max(1.0, std::min(ess, static_cast<double>(n)));
}

double kl_1d(const VectorXd& p_grid, const VectorXd& q_grid, const VectorXd& grid) {
  if (p_grid.size() != grid.size() || q_grid.size() != grid.size()) {
    throw std::invalid_argument("kl_1d: grid length mismatch");
  }
  const int n = static_cast<int>(grid.size());
  auto integrand = [&](int i) {
    const double p = p_grid[i];
    if (p < 1e-300) return 0.0;
    const double q = std::max(q_grid[i], 1e-300);
    return p * std::log(p / q);
  };
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    acc += 0.5 * (integrand(i) + integrand(i + 1)) * (grid[i + 1] - grid[i]);
  }
  return acc;
}

}  // namespace hybridvi
