#include "hybridvi/tobit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hybridvi/stats.hpp"

namespace hybridvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

VectorXd quantiles_95(std::vector<double> v, double* mean_out) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  std::sort(v.begin(), v.end());
  const auto at = [&](double q) {
    const double pos = q * (v.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - lo;
    return (1 - w) * v[lo] + w * v[hi];
  };
  *mean_out = mean;
  VectorXd out(2);
  out << at(0.025), at(0.975);
  return out;
}

}  // namespace

void TobitData::validate() const {
  if (N <= 0 || T < 0 || p <= 0 || r <= 0 || r > p) {
    throw std::invalid_argument("TobitData: need N>0, T>=0, 0<r<=p");
  }
  if (X.rows() != static_cast<long>(N) * T || X.cols() != p) {
    throw std::invalid_argument("TobitData: X must be (N*T) x p");
  }
  if (y.rows() != N || y.cols() != T) throw std::invalid_argument("TobitData: y must be N x T");
  if (static_cast<int>(w_idx.size()) != r) throw std::invalid_argument("TobitData: w_idx size != r");
  for (int j : w_idx) {
    if (j < 0 || j >= p) throw std::invalid_argument("TobitData: w_idx out of range");
  }
  if (static_cast<int>(censored.size()) != N * T) {
    throw std::invalid_argument("TobitData: censored mask size mismatch");
  }
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      if (y(i, t) < 0.0) throw std::invalid_argument("TobitData: y must be >= 0");
      if (censored[cell(i, t)] != (y(i, t) == 0.0)) {
        throw std::invalid_argument("TobitData: censored mask inconsistent with y");
      }
    }
  }
}

int TobitParams::n_lower(int r, int k_alpha) {
  int count = 0;
  for (int j = 0; j < k_alpha; ++j) count += std::max(0, r - j - 1);
  return count;
}

int TobitParams::dim(int p, int r, int k_alpha) {
  return p + r + 1 + k_alpha + n_lower(r, k_alpha);
}

TobitParams TobitParams::unpack(const VectorXd& theta, int p, int r, int k_alpha) {
  if (theta.size() != dim(p, r, k_alpha)) throw std::invalid_argument("TobitParams: bad length");
  TobitParams out;
  int idx = 0;
  out.beta = theta.segment(idx, p);
  idx += p;
  out.xi = theta.segment(idx, r);
  idx += r;
  out.c = theta[idx++];
  out.kappa = theta.segment(idx, k_alpha);
  idx += k_alpha;
  out.l = theta.segment(idx, n_lower(r, k_alpha));
  return out;
}

VectorXd TobitParams::pack() const {
  VectorXd out(beta.size() + xi.size() + 1 + kappa.size() + l.size());
  int idx = 0;
  out.segment(idx, beta.size()) = beta;
  idx += static_cast<int>(beta.size());
  out.segment(idx, xi.size()) = xi;
  idx += static_cast<int>(xi.size());
  out[idx++] = c;
  out.segment(idx, kappa.size()) = kappa;
  idx += static_cast<int>(kappa.size());
  out.segment(idx, l.size()) = l;
  return out;
}

double TobitParams::sigma() const { return std::exp(-c); }

MatrixXd TobitParams::loading() const {
  const int r = static_cast<int>(xi.size());
  const int ka = k_alpha();
  MatrixXd L = MatrixXd::Zero(r, ka);
  for (int j = 0; j < ka; ++j) L(j, j) = std::exp(kappa[j]);
  int idx = 0;
  for (int j = 0; j < ka; ++j) {
    for (int i = j + 1; i < r; ++i) L(i, j) = l[idx++];
  }
  return L;
}

VectorXd TobitParams::omega() const { return xi.array().exp(); }

FactorCovariance assemble_v_alpha(const TobitParams& params) {
  return FactorCovariance(params.loading(), params.omega().cwiseSqrt());
}

VectorXd TobitLatent::pack() const {
  VectorXd out(alpha.size() + ystar_u.size());
  int idx = 0;
  for (int i = 0; i < alpha.rows(); ++i) {
    out.segment(idx, alpha.cols()) = alpha.row(i).transpose();
    idx += static_cast<int>(alpha.cols());
  }
  out.tail(ystar_u.size()) = ystar_u;
  return out;
}

TobitLatent TobitLatent::unpack(const VectorXd& z, const TobitData& data) {
  const int n_cens =
      static_cast<int>(std::count(data.censored.begin(), data.censored.end(), true));
  if (z.size() != static_cast<long>(data.N) * data.r + n_cens) {
    throw std::invalid_argument("TobitLatent: bad packed length");
  }
  TobitLatent out;
  out.alpha.resize(data.N, data.r);
  for (int i = 0; i < data.N; ++i) {
    out.alpha.row(i) = z.segment(static_cast<long>(i) * data.r, data.r).transpose();
  }
  out.ystar_u = z.tail(n_cens);
  return out;
}

namespace {

// Fills ystar for every cell: observed value when uncensored, the latent
// utility otherwise.
double cell_ystar(const TobitData& data, const TobitLatent& latent,
                  const std::vector<int>& cens_pos, int i, int t) {
  const int c = data.cell(i, t);
  return data.censored[c] ? latent.ystar_u[cens_pos[c]] : data.y(i, t);
}

std::vector<int> build_cens_pos(const TobitData& data) {
  std::vector<int> pos(data.N * data.T, -1);
  int k = 0;
  for (int c = 0; c < data.N * data.T; ++c) {
    if (data.censored[c]) pos[c] = k++;
  }
  return pos;
}

struct VAlphaTerms {
  MatrixXd vinv;     // r x r
  double logdet;
  MatrixXd loading;  // L
  VectorXd omega;
};

VAlphaTerms v_alpha_terms(const TobitParams& params) {
  const auto fc = assemble_v_alpha(params);
  VAlphaTerms out;
  out.vinv = woodbury_solve_matrix(fc, MatrixXd::Identity(fc.m, fc.m));
  out.logdet = woodbury_logdet(fc);
  out.loading = params.loading();
  out.omega = params.omega();
  return out;
}

double theta_prior_logpdf(const TobitParams& params, const TobitPrior& prior) {
  const int p = static_cast<int>(params.beta.size());
  const int r = static_cast<int>(params.xi.size());
  const int ka = params.k_alpha();
  double out = 0.0;
  out += -0.5 * p * (kLog2Pi + std::log(prior.sigma_beta2)) -
         0.5 * params.beta.squaredNorm() / prior.sigma_beta2;
  for (int i = 0; i < r; ++i) out += -params.xi[i] - std::exp(-params.xi[i]);
  // p(c) is flat.
  for (int j = 0; j < ka; ++j) {
    out += std::log(2.0) - 0.5 * (kLog2Pi + std::log(prior.sigma_l2)) -
           std::exp(2.0 * params.kappa[j]) / (2.0 * prior.sigma_l2) + params.kappa[j];
  }
  out += -0.5 * params.l.size() * (kLog2Pi + std::log(prior.sigma_l2)) -
         0.5 * params.l.squaredNorm() / prior.sigma_l2;
  return out;
}

// Gradient of the theta prior, stacked like TobitParams::pack().
VectorXd theta_prior_grad(const TobitParams& params, const TobitPrior& prior) {
  const int p = static_cast<int>(params.beta.size());
  const int r = static_cast<int>(params.xi.size());
  const int ka = params.k_alpha();
  const int nl = static_cast<int>(params.l.size());
  VectorXd out(TobitParams::dim(p, r, ka));
  int idx = 0;
  out.segment(idx, p) = -params.beta / prior.sigma_beta2;
  idx += p;
  for (int i = 0; i < r; ++i) out[idx + i] = -1.0 + std::exp(-params.xi[i]);
  idx += r;
  out[idx++] = 0.0;  // flat prior on c
  for (int j = 0; j < ka; ++j) {
    out[idx + j] = -std::exp(2.0 * params.kappa[j]) / prior.sigma_l2 + 1.0;
  }
  idx += ka;
  out.segment(idx, nl) = -params.l / prior.sigma_l2;
  return out;
}

// Stacks the (kappa, l) gradient contributions of a full r x k_alpha
// gradient matrix GL (d f / d L) into the packed layout, applying the
// exp(kappa) Jacobian on the diagonal.
void scatter_loading_grad(const MatrixXd& GL, const TobitParams& params, VectorXd* out,
                          int kappa_off, int l_off) {
  const int r = static_cast<int>(params.xi.size());
  const int ka = params.k_alpha();
  for (int j = 0; j < ka; ++j) {
    (*out)[kappa_off + j] += GL(j, j) * std::exp(params.kappa[j]);
  }
  int idx = 0;
  for (int j = 0; j < ka; ++j) {
    for (int i = j + 1; i < r; ++i) (*out)[l_off + idx++] += GL(i, j);
  }
}

}  // namespace

double log_g_tobit(const TobitData& data, const TobitParams& params, const TobitLatent& latent,
                   const TobitPrior& prior) {
  const auto cens_pos = build_cens_pos(data);
  const double e2c = std::exp(2.0 * params.c);
  const long n = static_cast<long>(data.N) * data.T;
  const auto va = v_alpha_terms(params);

  double rss = 0.0;
  for (int i = 0; i < data.N; ++i) {
    for (int t = 0; t < data.T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(params.beta);
      for (int j = 0; j < data.r; ++j) eta += data.X(c, data.w_idx[j]) * latent.alpha(i, j);
      const double res = cell_ystar(data, latent, cens_pos, i, t) - eta;
      rss += res * res;
    }
  }
  double out = -0.5 * n * kLog2Pi + n * params.c - 0.5 * e2c * rss;
  out += -0.5 * data.N * data.r * kLog2Pi - 0.5 * data.N * va.logdet;
  for (int i = 0; i < data.N; ++i) {
    const VectorXd ai = latent.alpha.row(i).transpose();
    out += -0.5 * ai.dot(va.vinv * ai);
  }
  out += theta_prior_logpdf(params, prior);
  return out;
}

namespace {

// Sum over a unit subset of the per-unit gradient terms k_j (likelihood plus
// alpha_j prior), stacked like TobitParams::pack().
VectorXd grad_units_sum(const TobitData& data, const TobitParams& params,
                        const TobitLatent& latent, const std::vector<int>& cens_pos,
                        const std::vector<int>& units) {
  const int p = data.p, r = data.r;
  const int ka = params.k_alpha();
  const int m = TobitParams::dim(p, r, ka);
  const double e2c = std::exp(2.0 * params.c);
  const auto va = v_alpha_terms(params);

  VectorXd grad = VectorXd::Zero(m);
  const int beta_off = 0, xi_off = p, c_off = p + r, kappa_off = p + r + 1,
            l_off = p + r + 1 + ka;

  VectorXd sum_res_x = VectorXd::Zero(p);
  double rss = 0.0;
  long n_cells = 0;
  MatrixXd A = MatrixXd::Zero(r, r);  // sum over subset of alpha alpha^T
  for (int i : units) {
    const VectorXd ai = latent.alpha.row(i).transpose();
    A.noalias() += ai * ai.transpose();
    for (int t = 0; t < data.T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(params.beta);
      for (int j = 0; j < r; ++j) eta += data.X(c, data.w_idx[j]) * ai[j];
      const double res = cell_ystar(data, latent, cens_pos, i, t) - eta;
      rss += res * res;
      sum_res_x += res * data.X.row(c).transpose();
      ++n_cells;
    }
  }
  grad.segment(beta_off, p) = e2c * sum_res_x;
  grad[c_off] = static_cast<double>(n_cells) - e2c * rss;

  const int n_units = static_cast<int>(units.size());
  const MatrixXd GV = -0.5 * n_units * va.vinv + 0.5 * va.vinv * A * va.vinv;
  const MatrixXd GL = 2.0 * GV * va.loading;
  scatter_loading_grad(GL, params, &grad, kappa_off, l_off);
  for (int i = 0; i < r; ++i) grad[xi_off + i] = va.omega[i] * GV(i, i);
  return grad;
}

}  // namespace

VectorXd grad_log_g_tobit(const TobitData& data, const TobitParams& params,
                          const TobitLatent& latent, const TobitPrior& prior) {
  const auto cens_pos = build_cens_pos(data);
  std::vector<int> all(data.N);
  std::iota(all.begin(), all.end(), 0);
  return grad_units_sum(data, params, latent, cens_pos, all) + theta_prior_grad(params, prior);
}

double rmse_metric(const TobitData& data, const MatrixXd& alpha, const TobitParams& params) {
  const double sigma = params.sigma();
  double acc = 0.0;
  for (int i = 0; i < data.N; ++i) {
    for (int t = 0; t < data.T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(params.beta);
      for (int j = 0; j < data.r; ++j) eta += data.X(c, data.w_idx[j]) * alpha(i, j);
      const double yhat = censored_normal_mean(eta, sigma);
      acc += (data.y(i, t) - yhat) * (data.y(i, t) - yhat);
    }
  }
  return std::sqrt(acc / (static_cast<double>(data.N) * data.T));
}

HeterogeneityReport heterogeneity(const TobitData& data, const std::vector<MatrixXd>& v_draws,
                                  const std::vector<int>& focal, const std::vector<int>& cross) {
  if (v_draws.empty()) throw std::invalid_argument("heterogeneity: no draws");
  const int r = data.r;
  // Quadratic forms depend on draws only through V, so accumulate the
  // second-moment matrix of w once.
  MatrixXd Sww = MatrixXd::Zero(r, r);
  for (int i = 0; i < data.N; ++i) {
    for (int t = 0; t < data.T; ++t) {
      VectorXd w(r);
      for (int j = 0; j < r; ++j) w[j] = data.X(data.cell(i, t), data.w_idx[j]);
      Sww.noalias() += w * w.transpose();
    }
  }
  const double scale = 1.0 / (static_cast<double>(data.N) * r);
  auto block_trace = [&](const MatrixXd& V, const std::vector<int>& idx) {
    double acc = 0.0;
    for (size_t a = 0; a < idx.size(); ++a) {
      for (size_t b = 0; b < idx.size(); ++b) {
        acc += V(idx[a], idx[b]) * Sww(idx[a], idx[b]);
      }
    }
    return scale * acc;
  };
  std::vector<int> all(r);
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> th, fbh, cbh;
  for (const auto& V : v_draws) {
    th.push_back(block_trace(V, all));
    fbh.push_back(block_trace(V, focal));
    cbh.push_back(block_trace(V, cross));
  }
  HeterogeneityReport rep;
  VectorXd q;
  q = quantiles_95(th, &rep.total.mean);
  rep.total.lo = q[0];
  rep.total.hi = q[1];
  q = quantiles_95(fbh, &rep.focal.mean);
  rep.focal.lo = q[0];
  rep.focal.hi = q[1];
  q = quantiles_95(cbh, &rep.cross.mean);
  rep.cross.lo = q[0];
  rep.cross.hi = q[1];
  return rep;
}

// ---------------------------------------------------------------------------
// TobitModel

TobitModel::TobitModel(TobitData data, int k_alpha, TobitPrior prior)
    : data_(std::move(data)), k_alpha_(k_alpha), prior_(prior) {
  data_.validate();
  if (k_alpha_ < 0 || k_alpha_ > data_.r) {
    throw std::invalid_argument("TobitModel: need 0 <= k_alpha <= r");
  }
  sum_ww_.resize(data_.N);
  unit_cens_.resize(data_.N);
  for (int i = 0; i < data_.N; ++i) {
    MatrixXd s = MatrixXd::Zero(data_.r, data_.r);
    for (int t = 0; t < data_.T; ++t) {
      const int c = data_.cell(i, t);
      VectorXd w(data_.r);
      for (int j = 0; j < data_.r; ++j) w[j] = data_.X(c, data_.w_idx[j]);
      s.noalias() += w * w.transpose();
      if (data_.censored[c]) unit_cens_[i].push_back(c);
    }
    sum_ww_[i] = std::move(s);
  }
  cens_pos_ = build_cens_pos(data_);
}

int TobitModel::dim_theta() const { return TobitParams::dim(data_.p, data_.r, k_alpha_); }

TobitParams TobitModel::unpack(const VectorXd& theta) const {
  return TobitParams::unpack(theta, data_.p, data_.r, k_alpha_);
}

VectorXd TobitModel::init_latent(Rng& rng) const {
  TobitLatent latent;
  latent.alpha = MatrixXd::Zero(data_.N, data_.r);
  const int n_cens =
      static_cast<int>(std::count(data_.censored.begin(), data_.censored.end(), true));
  latent.ystar_u.resize(n_cens);
  for (int i = 0; i < n_cens; ++i) latent.ystar_u[i] = trunc_normal_below(0.0, 1.0, 0.0, rng);
  return latent.pack();
}

void TobitModel::alpha_conditional_moments(const TobitParams& params, const TobitLatent& latent,
                                           int i, VectorXd* mean, MatrixXd* cov) const {
  const auto va = v_alpha_terms(params);
  const double e2c = std::exp(2.0 * params.c);
  const MatrixXd A = va.vinv + e2c * sum_ww_[i];
  VectorXd b = VectorXd::Zero(data_.r);
  for (int t = 0; t < data_.T; ++t) {
    const int c = data_.cell(i, t);
    const double resid = cell_ystar(data_, latent, cens_pos_, i, t) -
                         data_.X.row(c).dot(params.beta);
    for (int j = 0; j < data_.r; ++j) b[j] += resid * data_.X(c, data_.w_idx[j]);
  }
  b *= e2c;
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("alpha conditional: A not PD");
  *mean = llt.solve(b);
  *cov = llt.solve(MatrixXd::Identity(data_.r, data_.r));
}

void TobitModel::sample_alpha_conditional(const TobitParams& params, TobitLatent& latent,
                                          Rng& rng, const std::vector<int>* units) const {
  const auto va = v_alpha_terms(params);
  const double e2c = std::exp(2.0 * params.c);
  std::vector<int> all;
  if (!units) {
    all.resize(data_.N);
    std::iota(all.begin(), all.end(), 0);
  }
  const std::vector<int>& idx = units ? *units : all;
  for (int i : idx) {
    const MatrixXd A = va.vinv + e2c * sum_ww_[i];
    VectorXd b = VectorXd::Zero(data_.r);
    for (int t = 0; t < data_.T; ++t) {
      const int c = data_.cell(i, t);
      const double resid = cell_ystar(data_, latent, cens_pos_, i, t) -
                           data_.X.row(c).dot(params.beta);
      for (int j = 0; j < data_.r; ++j) b[j] += resid * data_.X(c, data_.w_idx[j]);
    }
    b *= e2c;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw std::runtime_error("alpha conditional: A not PD");
    VectorXd eps(data_.r);
    for (int j = 0; j < data_.r; ++j) eps[j] = rng.normal();
    latent.alpha.row(i) = (llt.solve(b) + llt.matrixU().solve(eps)).transpose();
  }
}

void TobitModel::sample_ystar_conditional(const TobitParams& params, TobitLatent& latent,
                                          Rng& rng, const std::vector<int>* units) const {
  const double sigma = params.sigma();
  std::vector<int> all;
  if (!units) {
    all.resize(data_.N);
    std::iota(all.begin(), all.end(), 0);
  }
  const std::vector<int>& idx = units ? *units : all;
  for (int i : idx) {
    for (int c : unit_cens_[i]) {
      double eta = data_.X.row(c).dot(params.beta);
      for (int j = 0; j < data_.r; ++j) {
        eta += data_.X(c, data_.w_idx[j]) * latent.alpha(i, j);
      }
      latent.ystar_u[cens_pos_[c]] = trunc_normal_below(eta, sigma, 0.0, rng);
    }
  }
}

void TobitModel::sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps, Rng& rng) const {
  sample_latent_units(theta, z, {}, n_sweeps, rng);
}

void TobitModel::sample_latent_units(const VectorXd& theta, VectorXd& z,
                                     const std::vector<int>& units, int n_sweeps,
                                     Rng& rng) const {
  const TobitParams params = unpack(theta);
  TobitLatent latent = TobitLatent::unpack(z, data_);
  const std::vector<int>* subset = units.empty() ? nullptr : &units;
  for (int s = 0; s < n_sweeps; ++s) {
    sample_alpha_conditional(params, latent, rng, subset);
    sample_ystar_conditional(params, latent, rng, subset);
  }
  z = latent.pack();
}

VectorXd TobitModel::grad_log_g(const VectorXd& theta, const VectorXd& z) const {
  const TobitParams params = unpack(theta);
  const TobitLatent latent = TobitLatent::unpack(z, data_);
  return grad_log_g_tobit(data_, params, latent, prior_);
}

VectorXd TobitModel::grad_log_g_units(const VectorXd& theta, const VectorXd& z,
                                      const std::vector<int>& units) const {
  if (units.empty()) throw std::invalid_argument("grad_log_g_units: empty subset");
  const TobitParams params = unpack(theta);
  const TobitLatent latent = TobitLatent::unpack(z, data_);
  const double scale = static_cast<double>(data_.N) / static_cast<double>(units.size());
  return scale * grad_units_sum(data_, params, latent, cens_pos_, units) +
         theta_prior_grad(params, prior_);
}

double TobitModel::log_g(const VectorXd& theta, const VectorXd& z) const {
  return log_g_tobit(data_, unpack(theta), TobitLatent::unpack(z, data_), prior_);
}

double TobitModel::diagnostic(const VectorXd& theta, const VectorXd& z) const {
  const TobitParams params = unpack(theta);
  const TobitLatent latent = TobitLatent::unpack(z, data_);
  return rmse_metric(data_, latent.alpha, params);
}

// ---------------------------------------------------------------------------
// Augmented (theta, alpha) posterior with ystar integrated out

int TobitAugmentedModel::dim() const {
  return model_.dim_theta() + model_.data().N * model_.data().r;
}

double TobitAugmentedModel::log_g(const VectorXd& psi) const {
  const auto& data = model_.data();
  const int m = model_.dim_theta();
  const TobitParams params = model_.unpack(psi.head(m));
  const double e2c = std::exp(2.0 * params.c);
  const auto va = v_alpha_terms(params);

  double out = 0.0;
  for (int i = 0; i < data.N; ++i) {
    const VectorXd ai = psi.segment(m + static_cast<long>(i) * data.r, data.r);
    for (int t = 0; t < data.T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(params.beta);
      for (int j = 0; j < data.r; ++j) eta += data.X(c, data.w_idx[j]) * ai[j];
      if (data.censored[c]) {
        out += norm_logcdf(-eta * std::exp(params.c));
      } else {
        const double res = data.y(i, t) - eta;
        out += params.c - 0.5 * kLog2Pi - 0.5 * e2c * res * res;
      }
    }
    out += -0.5 * data.r * kLog2Pi - 0.5 * va.logdet - 0.5 * ai.dot(va.vinv * ai);
  }
  out += theta_prior_logpdf(params, model_.prior());
  return out;
}

VectorXd TobitAugmentedModel::grad_log_g(const VectorXd& psi) const {
  const auto& data = model_.data();
  const int m = model_.dim_theta();
  const int p = data.p, r = data.r;
  const TobitParams params = model_.unpack(psi.head(m));
  const int ka = params.k_alpha();
  const double ec = std::exp(params.c);
  const double e2c = ec * ec;
  const auto va = v_alpha_terms(params);

  VectorXd grad = VectorXd::Zero(dim());
  const int beta_off = 0, xi_off = p, c_off = p + r, kappa_off = p + r + 1,
            l_off = p + r + 1 + ka;

  MatrixXd A = MatrixXd::Zero(r, r);
  for (int i = 0; i < data.N; ++i) {
    const VectorXd ai = psi.segment(m + static_cast<long>(i) * data.r, r);
    A.noalias() += ai * ai.transpose();
    VectorXd galpha = -va.vinv * ai;
    for (int t = 0; t < data.T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(params.beta);
      for (int j = 0; j < r; ++j) eta += data.X(c, data.w_idx[j]) * ai[j];
      double deta, dc;
      if (data.censored[c]) {
        const double u = -eta * ec;
        const double mills = inv_mills(u);
        deta = -ec * mills;
        dc = u * mills;
      } else {
        const double res = data.y(i, t) - eta;
        deta = e2c * res;
        dc = 1.0 - e2c * res * res;
      }
      grad.segment(beta_off, p) += deta * data.X.row(c).transpose();
      for (int j = 0; j < r; ++j) galpha[j] += deta * data.X(c, data.w_idx[j]);
      grad[c_off] += dc;
    }
    grad.segment(m + static_cast<long>(i) * r, r) = galpha;
  }
  const MatrixXd GV = -0.5 * data.N * va.vinv + 0.5 * va.vinv * A * va.vinv;
  const MatrixXd GL = 2.0 * GV * va.loading;
  scatter_loading_grad(GL, params, &grad, kappa_off, l_off);
  for (int i = 0; i < r; ++i) grad[xi_off + i] = va.omega[i] * GV(i, i);
  grad.head(m) += theta_prior_grad(params, model_.prior());
  return grad;
}

double TobitAugmentedModel::diagnostic(const VectorXd& psi) const {
  const auto& data = model_.data();
  const int m = model_.dim_theta();
  const TobitParams params = model_.unpack(psi.head(m));
  MatrixXd alpha(data.N, data.r);
  for (int i = 0; i < data.N; ++i) {
    alpha.row(i) = psi.segment(m + static_cast<long>(i) * data.r, data.r).transpose();
  }
  return rmse_metric(data, alpha, params);
}

// ---------------------------------------------------------------------------
// MCMC

VectorXd TobitMcmcResult::theta_mean() const {
  return theta_draws.colwise().mean().transpose();
}

VectorXd TobitMcmcResult::theta_sd() const {
  const VectorXd mean = theta_mean();
  VectorXd out(theta_draws.cols());
  for (int j = 0; j < theta_draws.cols(); ++j) {
    out[j] = std::sqrt((theta_draws.col(j).array() - mean[j]).square().sum() /
                       std::max<long>(1, theta_draws.rows() - 1));
  }
  return out;
}

TobitMcmcResult mcmc_tobit(const TobitModel& model, const TobitMcmcConfig& cfg, Rng& rng,
                           const TobitParams* init) {
  const auto& data = model.data();
  const int m = model.dim_theta();
  TobitParams params = init ? *init
                            : model.unpack(VectorXd::Zero(m));
  TobitLatent latent = TobitLatent::unpack(model.init_latent(rng), data);

  const long burn = static_cast<long>(cfg.burn_frac * cfg.n_sweeps);
  const long n_post = cfg.n_sweeps - burn;
  const long thin_stride = std::max<long>(1, n_post / std::max(1, cfg.thin_to));
  const long n_keep = (n_post + thin_stride - 1) / thin_stride;

  TobitMcmcResult result;
  result.theta_draws.resize(std::max<long>(n_keep, 0), m);
  result.alpha_mean = MatrixXd::Zero(data.N, data.r);
  result.ystar_mean = VectorXd::Zero(latent.ystar_u.size());

  VectorXd scales = VectorXd::Constant(m, cfg.scale_init);
  VectorXd window_prop = VectorXd::Zero(m), window_acc = VectorXd::Zero(m);
  VectorXd total_prop = VectorXd::Zero(m), total_acc = VectorXd::Zero(m);

  VectorXd theta = params.pack();
  double logg = model.log_g(theta, latent.pack());
  long kept = 0;

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);

  for (long sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
    // Steps 1-2: exact conditionals.
    model.sample_alpha_conditional(params, latent, rng);
    model.sample_ystar_conditional(params, latent, rng);
    const VectorXd z = latent.pack();
    logg = model.log_g(theta, z);

    // Step 3: grouped random-walk MH over theta.
    for (int i = m - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < m; start += cfg.group_size) {
      const int len = std::min(cfg.group_size, m - start);
      VectorXd proposal = theta;
      for (int g = 0; g < len; ++g) {
        const int e = order[start + g];
        proposal[e] += scales[e] * rng.normal();
        window_prop[e] += 1;
        total_prop[e] += 1;
      }
      const double logg_new = model.log_g(proposal, z);
      if (std::log(rng.uniform()) < logg_new - logg) {
        theta = proposal;
        logg = logg_new;
        params = model.unpack(theta);
        for (int g = 0; g < len; ++g) {
          const int e = order[start + g];
          window_acc[e] += 1;
          total_acc[e] += 1;
        }
      }
    }

    if ((sweep + 1) % cfg.adapt_interval == 0) {
      for (int e = 0; e < m; ++e) {
        if (window_prop[e] == 0) continue;
        const double rate = window_acc[e] / window_prop[e];
        if (rate < cfg.accept_lo) {
          scales[e] /= cfg.scale_factor;
        } else if (rate > cfg.accept_hi) {
          scales[e] *= cfg.scale_factor;
        }
      }
      window_prop.setZero();
      window_acc.setZero();
    }

    if (sweep >= burn) {
      const long post = sweep - burn;
      result.alpha_mean += latent.alpha;
      result.ystar_mean += latent.ystar_u;
      if (post % thin_stride == 0 && kept < n_keep) {
        result.theta_draws.row(kept++) = theta.transpose();
      }
    }
  }

  if (n_post > 0) {
    result.alpha_mean /= static_cast<double>(n_post);
    result.ystar_mean /= static_cast<double>(n_post);
  }
  result.theta_draws.conservativeResize(kept, m);
  result.accept_rate.resize(m);
  for (int e = 0; e < m; ++e) {
    result.accept_rate[e] = total_prop[e] > 0 ? total_acc[e] / total_prop[e] : 0.0;
    if (result.accept_rate[e] < 0.05 || result.accept_rate[e] > 0.5) {
      result.flagged_coords.push_back(e);
    }
  }
  result.ess.resize(m);
  for (int e = 0; e < m; ++e) {
    std::vector<double> col(kept);
    for (long s = 0; s < kept; ++s) col[s] = result.theta_draws(s, e);
    result.ess[e] = kept > 0 ? effective_sample_size(col) : 0.0;
  }
  result.final_params = params;
  result.final_latent = latent;
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic data

TobitData simulate_tobit(int N, int T, int p, int r, const TobitParams& true_params,
                         const std::vector<int>& w_idx, Rng& rng, TobitSimTruth* truth) {
  TobitData data;
  data.N = N;
  data.T = T;
  data.p = p;
  data.r = r;
  data.w_idx = w_idx;
  data.X.resize(static_cast<long>(N) * T, p);
  const int n_binary = (p >= 4) ? 2 : 0;
  for (long c = 0; c < data.X.rows(); ++c) {
    data.X(c, 0) = 1.0;
    for (int j = 1; j < p; ++j) {
      if (j >= p - n_binary) {
        data.X(c, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      } else {
        data.X(c, j) = rng.normal();
      }
    }
  }

  const auto fc = assemble_v_alpha(true_params);
  const double sigma = true_params.sigma();
  MatrixXd alpha(N, r);
  MatrixXd ystar(N, T);
  data.y.resize(N, T);
  data.censored.assign(static_cast<size_t>(N) * T, false);
  for (int i = 0; i < N; ++i) {
    VectorXd z1(fc.k), z2(r);
    for (int j = 0; j < fc.k; ++j) z1[j] = rng.normal();
    for (int j = 0; j < r; ++j) z2[j] = rng.normal();
    alpha.row(i) = sample_lowrank_normal(VectorXd::Zero(r), fc, z1, z2).transpose();
    for (int t = 0; t < T; ++t) {
      const int c = data.cell(i, t);
      double eta = data.X.row(c).dot(true_params.beta);
      for (int j = 0; j < r; ++j) eta += data.X(c, w_idx[j]) * alpha(i, j);
      ystar(i, t) = eta + sigma * rng.normal();
      data.y(i, t) = std::max(0.0, ystar(i, t));
      data.censored[c] = data.y(i, t) == 0.0;
    }
  }
  data.validate();
  if (truth) {
    truth->params = true_params;
    truth->alpha = alpha;
    truth->ystar = ystar;
  }
  return data;
}

}  // namespace hybridvi
