#include "hybridvi/tvpvar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hybridvi/stats.hpp"

namespace hybridvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

VectorXd full_regressor(const EquationDesign& d, const VectorXd& eta_tilde_s, int s) {
  // x_s = (xtilde_s, xtilde_s o eta_tilde_s): J = 2q entries.
  VectorXd x(2 * d.q);
  x.head(d.q) = d.xtilde.row(s).transpose();
  x.tail(d.q) = d.xtilde.row(s).transpose().cwiseProduct(eta_tilde_s);
  return x;
}

// Draw from N(mean, cov) with symmetrization and a tiny jitter retry.
VectorXd mvn_draw(const VectorXd& mean, MatrixXd cov, Rng& rng) {
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-12 * std::max(1.0, cov.diagonal().maxCoeff());
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("ffbs: filter covariance lost positive definiteness");
    }
  }
  VectorXd eps(mean.size());
  for (int i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return mean + llt.matrixL() * eps;
}

}  // namespace

void TVPVARData::validate() const {
  if (N <= 0 || p <= 0 || T <= p) throw std::invalid_argument("TVPVARData: need T > p, N > 0");
  if (y.rows() != T || y.cols() != N) throw std::invalid_argument("TVPVARData: y must be T x N");
  if (!y.allFinite()) throw std::invalid_argument("TVPVARData: missing values not supported");
}

EquationDesign build_design(const TVPVARData& data, int eq) {
  data.validate();
  if (eq < 0 || eq >= data.N) throw std::invalid_argument("build_design: equation out of range");
  EquationDesign d;
  d.eq = eq;
  d.N = data.N;
  d.p = data.p;
  d.T_eff = data.T - data.p;
  d.q = data.p * data.N + eq + 1;
  d.xtilde.resize(d.T_eff, d.q);
  d.y_i.resize(d.T_eff);
  for (int s = 0; s < d.T_eff; ++s) {
    const int t = s + data.p;  // 0-based row of y
    int col = 0;
    for (int lag = 1; lag <= data.p; ++lag) {
      for (int j = 0; j < data.N; ++j) d.xtilde(s, col++) = data.y(t - lag, j);
    }
    d.xtilde(s, col++) = 1.0;
    for (int j = 0; j < eq; ++j) d.xtilde(s, col++) = -data.y(t, j);
    d.y_i[s] = data.y(t, eq);
  }
  return d;
}

TvpParams TvpParams::unpack(const VectorXd& theta, int J) {
  if (theta.size() != dim(J)) throw std::invalid_argument("TvpParams: bad length");
  TvpParams out;
  out.tau = theta.segment(0, J);
  out.chi_log = theta.segment(J, J);
  out.xi_log = theta[2 * J];
  out.nu_log = theta.segment(2 * J + 1, J);
  out.kappa_log = theta[3 * J + 1];
  out.hbar = theta[3 * J + 2];
  out.rho_probit = theta[3 * J + 3];
  out.sigma2_log = theta[3 * J + 4];
  return out;
}

VectorXd TvpParams::pack() const {
  const int n = J();
  VectorXd out(dim(n));
  out.segment(0, n) = tau;
  out.segment(n, n) = chi_log;
  out[2 * n] = xi_log;
  out.segment(2 * n + 1, n) = nu_log;
  out[3 * n + 1] = kappa_log;
  out[3 * n + 2] = hbar;
  out[3 * n + 3] = rho_probit;
  out[3 * n + 4] = sigma2_log;
  return out;
}

VectorXd TvpParams::alpha() const {
  return std::sqrt(std::exp(xi_log)) *
         tau.cwiseProduct((chi_log * 0.5).array().exp().matrix());
}

double TvpParams::rho() const { return 2.0 * norm_cdf(rho_probit) - 1.0; }

double TvpParams::sigma2() const { return std::exp(sigma2_log); }

double TvpParams::h1_var() const {
  const double r = rho();
  return sigma2() / (1.0 - r * r);
}

VectorXd TvpLatent::pack() const {
  VectorXd out(h.size() + eta_tilde.size());
  out.head(h.size()) = h;
  int idx = static_cast<int>(h.size());
  for (int s = 0; s < eta_tilde.rows(); ++s) {
    out.segment(idx, eta_tilde.cols()) = eta_tilde.row(s).transpose();
    idx += static_cast<int>(eta_tilde.cols());
  }
  return out;
}

TvpLatent TvpLatent::unpack(const VectorXd& z, int T_eff, int q) {
  if (z.size() != T_eff + static_cast<long>(T_eff) * q) {
    throw std::invalid_argument("TvpLatent: bad packed length");
  }
  TvpLatent out;
  out.h = z.head(T_eff);
  out.eta_tilde.resize(T_eff, q);
  for (int s = 0; s < T_eff; ++s) {
    out.eta_tilde.row(s) = z.segment(T_eff + static_cast<long>(s) * q, q).transpose();
  }
  return out;
}

namespace {

double theta_prior_logpdf(const TvpParams& params) {
  const int J = params.J();
  const double xi = std::exp(params.xi_log);
  const double kappa = std::exp(params.kappa_log);
  double out = 0.0;
  for (int j = 0; j < J; ++j) {
    const double nu = std::exp(params.nu_log[j]);
    out += -0.5 * kLog2Pi - 0.5 * params.tau[j] * params.tau[j];                       // tau
    out += -0.5 * std::log(M_PI * nu) - 0.5 * params.chi_log[j] -
           std::exp(-params.chi_log[j]) / nu;                                          // chi|nu
    out += -0.5 * std::log(M_PI) - 0.5 * params.nu_log[j] - std::exp(-params.nu_log[j]);  // nu
  }
  out += -0.5 * std::log(M_PI * kappa) - 0.5 * params.xi_log - std::exp(-params.xi_log) / kappa;
  out += -0.5 * std::log(M_PI) - 0.5 * params.kappa_log - std::exp(-params.kappa_log);
  out += -0.5 * (kLog2Pi + std::log(100.0)) - params.hbar * params.hbar / 200.0;
  const double u = norm_cdf(params.rho_probit);
  out += -lbeta(25.0, 5.0) + 24.0 * std::log(u) + 4.0 * std::log1p(-u) +
         norm_logpdf(params.rho_probit);
  out += 0.5 * std::log(0.5) - 0.5 * std::log(M_PI) + 0.5 * params.sigma2_log -
         0.5 * std::exp(params.sigma2_log);
  return out;
}

}  // namespace

double log_g_tvpvar(const EquationDesign& design, const TvpParams& params,
                    const TvpLatent& latent) {
  const int T = design.T_eff, q = design.q;
  const VectorXd alpha = params.alpha();
  double out = 0.0;
  for (int s = 0; s < T; ++s) {
    const VectorXd x = full_regressor(design, latent.eta_tilde.row(s).transpose(), s);
    const double e = design.y_i[s] - x.dot(alpha);
    out += -0.5 * kLog2Pi - 0.5 * latent.h[s] - 0.5 * e * e * std::exp(-latent.h[s]);
  }
  // State priors.
  out += -0.5 * q * kLog2Pi - 0.5 * latent.eta_tilde.row(0).squaredNorm();
  for (int s = 1; s < T; ++s) {
    out += -0.5 * q * kLog2Pi -
           0.5 * (latent.eta_tilde.row(s) - latent.eta_tilde.row(s - 1)).squaredNorm();
  }
  const double rho = params.rho(), sigma2 = params.sigma2(), s2 = params.h1_var();
  out += -0.5 * (kLog2Pi + std::log(s2)) -
         0.5 * (latent.h[0] - params.hbar) * (latent.h[0] - params.hbar) / s2;
  for (int s = 1; s < T; ++s) {
    const double resid = latent.h[s] - params.hbar - rho * (latent.h[s - 1] - params.hbar);
    out += -0.5 * (kLog2Pi + params.sigma2_log) - 0.5 * resid * resid / sigma2;
  }
  out += theta_prior_logpdf(params);
  return out;
}

VectorXd grad_log_g_tvpvar(const EquationDesign& design, const TvpParams& params,
                           const TvpLatent& latent) {
  const int T = design.T_eff, q = design.q, J = 2 * q;
  const VectorXd alpha = params.alpha();
  const VectorXd sqrt_chi = (params.chi_log * 0.5).array().exp().matrix();
  const double sqrt_xi = std::exp(0.5 * params.xi_log);
  const double xi = std::exp(params.xi_log);
  const double kappa = std::exp(params.kappa_log);

  // W = sum_s e_s exp(-h_s) x_s.
  VectorXd W = VectorXd::Zero(J);
  for (int s = 0; s < T; ++s) {
    const VectorXd x = full_regressor(design, latent.eta_tilde.row(s).transpose(), s);
    const double e = design.y_i[s] - x.dot(alpha);
    W += e * std::exp(-latent.h[s]) * x;
  }

  VectorXd grad(TvpParams::dim(J));
  // tau block.
  grad.segment(0, J) = sqrt_xi * sqrt_chi.cwiseProduct(W) - params.tau;
  // chi_log block.
  for (int j = 0; j < J; ++j) {
    const double chi = std::exp(params.chi_log[j]);
    const double nu = std::exp(params.nu_log[j]);
    grad[J + j] = 0.5 * params.tau[j] * sqrt_xi * sqrt_chi[j] * W[j] - 0.5 + 1.0 / (nu * chi);
  }
  // xi_log.
  grad[2 * J] = 0.5 * alpha.dot(W) - 0.5 + 1.0 / (kappa * xi);
  // nu_log block.
  for (int j = 0; j < J; ++j) {
    const double chi = std::exp(params.chi_log[j]);
    const double nu = std::exp(params.nu_log[j]);
    grad[2 * J + 1 + j] = (-0.5 + 1.0 / (nu * chi)) + (-0.5 + 1.0 / nu);
  }
  // kappa_log.
  grad[3 * J + 1] = (-0.5 + 1.0 / (kappa * xi)) + (-0.5 + 1.0 / kappa);

  const double rho = params.rho(), sigma2 = params.sigma2(), s2 = params.h1_var();
  const double d1 = latent.h[0] - params.hbar;
  double sum_resid = 0.0, sum_lag_resid = 0.0, sum_resid2 = 0.0;
  for (int s = 1; s < T; ++s) {
    const double lag = latent.h[s - 1] - params.hbar;
    const double resid = latent.h[s] - params.hbar - rho * lag;
    sum_resid += resid;
    sum_lag_resid += lag * resid;
    sum_resid2 += resid * resid;
  }
  // hbar.
  grad[3 * J + 2] = -params.hbar / 100.0 + d1 / s2 + (1.0 - rho) / sigma2 * sum_resid;
  // rho_probit.
  const double u = norm_cdf(params.rho_probit);
  const double phi_r = norm_pdf(params.rho_probit);
  const double dlik_drho =
      rho / (1.0 - rho * rho) * (d1 * d1 / s2 - 1.0) + sum_lag_resid / sigma2;
  grad[3 * J + 3] = dlik_drho * 2.0 * phi_r + 24.0 * phi_r / u - 4.0 * phi_r / (1.0 - u) -
                    params.rho_probit;
  // sigma2_log.
  grad[3 * J + 4] =
      -0.5 * sigma2 + 0.5 * d1 * d1 / s2 + (-(T - 1) * 0.5 + 0.5 * sum_resid2 / sigma2);
  return grad;
}

// ---------------------------------------------------------------------------
// Samplers

MatrixXd ffbs_eta(const EquationDesign& design, const TvpParams& params, const VectorXd& h,
                  Rng& rng) {
  const int T = design.T_eff, q = design.q;
  if (h.size() != T) throw std::invalid_argument("ffbs_eta: h length mismatch");
  const VectorXd alpha = params.alpha();
  const VectorXd eta0 = alpha.head(q);
  const VectorXd sv = alpha.tail(q);

  std::vector<VectorXd> a_filt(T);
  std::vector<MatrixXd> p_filt(T);
  VectorXd a = VectorXd::Zero(q);
  MatrixXd P = MatrixXd::Identity(q, q);  // eta_tilde_1 ~ N(0, I) prior
  for (int s = 0; s < T; ++s) {
    if (s > 0) P.diagonal().array() += 1.0;  // random-walk innovation
    const VectorXd c = design.xtilde.row(s).transpose().cwiseProduct(sv);
    const double d_s = design.xtilde.row(s).dot(eta0);
    const double f = c.dot(P * c) + std::exp(h[s]);
    const VectorXd pc = P * c;
    const double v = design.y_i[s] - d_s - c.dot(a);
    a += pc * (v / f);
    P -= pc * pc.transpose() / f;
    P = 0.5 * (P + P.transpose()).eval();
    a_filt[s] = a;
    p_filt[s] = P;
  }

  MatrixXd draw(T, q);
  VectorXd next = mvn_draw(a_filt[T - 1], p_filt[T - 1], rng);
  draw.row(T - 1) = next.transpose();
  for (int s = T - 2; s >= 0; --s) {
    // eta_{s+1} = eta_s + innov, innov ~ N(0, I): condition the filtered
    // state on the drawn successor.
    const MatrixXd& Ps = p_filt[s];
    const MatrixXd gain = Ps * (Ps + MatrixXd::Identity(q, q)).llt().solve(MatrixXd::Identity(q, q));
    const VectorXd mean = a_filt[s] + gain * (next - a_filt[s]);
    const MatrixXd cov = Ps - gain * Ps;
    next = mvn_draw(mean, cov, rng);
    draw.row(s) = next.transpose();
  }
  return draw;
}

const std::vector<KscComponent>& ksc_mixture() {
  // Seven-normal approximation to log chi^2_1; means stored relative to the
  // overall mean -1.2704.
  static const std::vector<KscComponent> mix = {
      {0.00730, -10.12999, 5.79596}, {0.10556, -3.97281, 2.61369},
      {0.00002, -8.56686, 5.17950},  {0.04395, 2.77786, 0.16735},
      {0.34001, 0.61942, 0.64009},   {0.24566, 1.79518, 0.34023},
      {0.25750, -1.08819, 1.26261}};
  return mix;
}

void ksc_mixture_moments(double* mean, double* variance) {
  double m = 0.0, v = 0.0;
  for (const auto& c : ksc_mixture()) {
    const double mu = c.mean - 1.2704;
    m += c.prob * mu;
  }
  for (const auto& c : ksc_mixture()) {
    const double mu = c.mean - 1.2704;
    v += c.prob * ((mu - m) * (mu - m) + c.var);
  }
  *mean = m;
  *variance = v;
}

VectorXd sample_h_ksc(const EquationDesign& design, const TvpParams& params,
                      const MatrixXd& eta_tilde, const VectorXd& h_current, Rng& rng,
                      double c_off) {
  const int T = design.T_eff;
  const VectorXd alpha = params.alpha();
  const auto& mix = ksc_mixture();
  const int K = static_cast<int>(mix.size());

  // log(e_s^2 + c_off) as pseudo-observations of h_s + log chi^2_1.
  VectorXd ystar(T);
  for (int s = 0; s < T; ++s) {
    const VectorXd x = full_regressor(design, eta_tilde.row(s).transpose(), s);
    const double e = design.y_i[s] - x.dot(alpha);
    ystar[s] = std::log(e * e + c_off);
  }

  // Mixture indicators given the current h.
  std::vector<int> comp(T);
  std::vector<double> logp(K);
  for (int s = 0; s < T; ++s) {
    double mx = -1e300;
    for (int k = 0; k < K; ++k) {
      const double resid = ystar[s] - h_current[s] - (mix[k].mean - 1.2704);
      logp[k] = std::log(mix[k].prob) - 0.5 * std::log(mix[k].var) -
                0.5 * resid * resid / mix[k].var;
      mx = std::max(mx, logp[k]);
    }
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      logp[k] = std::exp(logp[k] - mx);
      total += logp[k];
    }
    double u = rng.uniform() * total;
    int pick = K - 1;
    for (int k = 0; k < K; ++k) {
      u -= logp[k];
      if (u <= 0.0) {
        pick = k;
        break;
      }
    }
    comp[s] = pick;
  }

  // Scalar FFBS on the linearized volatility state space.
  const double rho = params.rho(), sigma2 = params.sigma2();
  std::vector<double> a_filt(T), p_filt(T);
  double a = params.hbar;
  double P = params.h1_var();
  for (int s = 0; s < T; ++s) {
    if (s > 0) {
      a = params.hbar + rho * (a - params.hbar);
      P = rho * rho * P + sigma2;
    }
    const double mk = mix[comp[s]].mean - 1.2704;
    const double vk = mix[comp[s]].var;
    const double f = P + vk;
    const double gain = P / f;
    a += gain * (ystar[s] - mk - a);
    P -= gain * P;
    a_filt[s] = a;
    p_filt[s] = P;
  }
  VectorXd draw(T);
  double next = a_filt[T - 1] + std::sqrt(std::max(p_filt[T - 1], 0.0)) * rng.normal();
  draw[T - 1] = next;
  for (int s = T - 2; s >= 0; --s) {
    const double denom = rho * rho * p_filt[s] + sigma2;
    double mean = a_filt[s];
    double var = p_filt[s];
    if (denom > 0.0) {
      const double gain = rho * p_filt[s] / denom;
      mean += gain * (next - params.hbar - rho * (a_filt[s] - params.hbar));
      var -= gain * rho * p_filt[s];
    }
    next = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
    draw[s] = next;
  }
  return draw;
}

// ---------------------------------------------------------------------------
// Model adapter

TvpVarEquationModel::TvpVarEquationModel(EquationDesign design) : design_(std::move(design)) {
  // OLS pre-fit on the base regressors; rolling-window residual variance
  // seeds the log-volatility path.
  const int T = design_.T_eff;
  MatrixXd xtx = design_.xtilde.transpose() * design_.xtilde;
  xtx.diagonal().array() += 1e-6 * std::max(1.0, xtx.diagonal().maxCoeff());
  const VectorXd b = xtx.ldlt().solve(design_.xtilde.transpose() * design_.y_i);
  const VectorXd resid = design_.y_i - design_.xtilde * b;
  h_init_.resize(T);
  const int window = std::max(5, T / 15);
  for (int s = 0; s < T; ++s) {
    const int lo = std::max(0, s - window + 1);
    double acc = 0.0;
    for (int u = lo; u <= s; ++u) acc += resid[u] * resid[u];
    acc /= (s - lo + 1);
    h_init_[s] = std::log(std::max(acc, 1e-8));
  }
}

VectorXd TvpVarEquationModel::init_latent(Rng&) const {
  TvpLatent latent;
  latent.h = h_init_;
  latent.eta_tilde = MatrixXd::Zero(design_.T_eff, design_.q);
  return latent.pack();
}

void TvpVarEquationModel::sample_latent(const VectorXd& theta, VectorXd& z, int n_sweeps,
                                        Rng& rng) const {
  const TvpParams params = unpack(theta);
  TvpLatent latent = TvpLatent::unpack(z, design_.T_eff, design_.q);
  for (int s = 0; s < n_sweeps; ++s) {
    latent.h = sample_h_ksc(design_, params, latent.eta_tilde, latent.h, rng);
    latent.eta_tilde = ffbs_eta(design_, params, latent.h, rng);
  }
  z = latent.pack();
}

VectorXd TvpVarEquationModel::grad_log_g(const VectorXd& theta, const VectorXd& z) const {
  return grad_log_g_tvpvar(design_, unpack(theta),
                           TvpLatent::unpack(z, design_.T_eff, design_.q));
}

double TvpVarEquationModel::log_g(const VectorXd& theta, const VectorXd& z) const {
  return log_g_tvpvar(design_, unpack(theta), TvpLatent::unpack(z, design_.T_eff, design_.q));
}

double TvpVarEquationModel::diagnostic(const VectorXd& theta, const VectorXd& z) const {
  return log_g(theta, z);
}

// ---------------------------------------------------------------------------
// Augmented target

int TvpVarAugmentedModel::dim() const {
  const auto& d = model_.design();
  return TvpParams::dim(2 * d.q) + d.T_eff + d.T_eff * d.q;
}

double TvpVarAugmentedModel::log_g(const VectorXd& psi) const {
  const auto& d = model_.design();
  const int m = TvpParams::dim(2 * d.q);
  return log_g_tvpvar(d, model_.unpack(psi.head(m)),
                      TvpLatent::unpack(psi.tail(psi.size() - m), d.T_eff, d.q));
}

VectorXd TvpVarAugmentedModel::grad_log_g(const VectorXd& psi) const {
  const auto& d = model_.design();
  const int T = d.T_eff, q = d.q;
  const int m = TvpParams::dim(2 * q);
  const TvpParams params = model_.unpack(psi.head(m));
  const TvpLatent latent = TvpLatent::unpack(psi.tail(psi.size() - m), T, q);
  const VectorXd alpha = params.alpha();
  const VectorXd sv = alpha.tail(q);

  VectorXd grad(dim());
  grad.head(m) = grad_log_g_tvpvar(d, params, latent);

  const double rho = params.rho(), sigma2 = params.sigma2(), s2 = params.h1_var();
  // h block.
  for (int s = 0; s < T; ++s) {
    const VectorXd x = full_regressor(d, latent.eta_tilde.row(s).transpose(), s);
    const double e = d.y_i[s] - x.dot(alpha);
    double g = -0.5 + 0.5 * e * e * std::exp(-latent.h[s]);
    if (s == 0) {
      g += -(latent.h[0] - params.hbar) / s2;
    } else {
      g += -(latent.h[s] - params.hbar - rho * (latent.h[s - 1] - params.hbar)) / sigma2;
    }
    if (s + 1 < T) {
      g += rho * (latent.h[s + 1] - params.hbar - rho * (latent.h[s] - params.hbar)) / sigma2;
    }
    grad[m + s] = g;
  }
  // eta_tilde block.
  for (int s = 0; s < T; ++s) {
    const VectorXd c = d.xtilde.row(s).transpose().cwiseProduct(sv);
    const VectorXd x = full_regressor(d, latent.eta_tilde.row(s).transpose(), s);
    const double e = d.y_i[s] - x.dot(alpha);
    VectorXd g = e * std::exp(-latent.h[s]) * c;
    if (s == 0) {
      g -= latent.eta_tilde.row(0).transpose();
    } else {
      g -= (latent.eta_tilde.row(s) - latent.eta_tilde.row(s - 1)).transpose();
    }
    if (s + 1 < T) {
      g += (latent.eta_tilde.row(s + 1) - latent.eta_tilde.row(s)).transpose();
    }
    grad.segment(m + T + static_cast<long>(s) * q, q) = g;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Structural recovery and predictives

VarCoefficients recover_var_coefficients(const std::vector<VectorXd>& eta_t, int N, int p) {
  if (static_cast<int>(eta_t.size()) != N) {
    throw std::invalid_argument("recover_var_coefficients: need one eta per equation");
  }
  MatrixXd Linv = MatrixXd::Identity(N, N);
  MatrixXd gamma0(N, 1);
  std::vector<MatrixXd> Gamma(p, MatrixXd(N, N));
  for (int i = 0; i < N; ++i) {
    const int q = p * N + i + 1;
    if (eta_t[i].size() != q) {
      throw std::invalid_argument("recover_var_coefficients: eta length mismatch");
    }
    int col = 0;
    for (int lag = 0; lag < p; ++lag) {
      for (int j = 0; j < N; ++j) Gamma[lag](i, j) = eta_t[i][col++];
    }
    gamma0(i, 0) = eta_t[i][col++];
    for (int j = 0; j < i; ++j) Linv(i, j) = eta_t[i][col++];
  }
  // Invert the unitriangular Linv exactly by forward substitution.
  MatrixXd L = MatrixXd::Identity(N, N);
  for (int c = 0; c < N; ++c) {
    for (int i = c + 1; i < N; ++i) {
      double acc = 0.0;
      for (int k = c; k < i; ++k) acc += Linv(i, k) * L(k, c);
      L(i, c) = -acc;
    }
  }
  VarCoefficients out;
  out.L = L;
  out.beta0 = L * gamma0;
  out.B.resize(p);
  for (int lag = 0; lag < p; ++lag) out.B[lag] = L * Gamma[lag];
  return out;
}

namespace {

// Nodes/weights for int f(x) N(x; mu, sigma2) dx by Gauss-Hermite quadrature
// (Golub-Welsch on the Hermite Jacobi matrix).
void gauss_hermite(int n, VectorXd* nodes, VectorXd* weights) {
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(i / 2.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  *nodes = es.eigenvalues();
  weights->resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    (*weights)[i] = v0 * v0;  // sum to 1 (weights / sqrt(pi))
  }
}

}  // namespace

PredictiveDensity predictive_density(const TvpParams& params, const VectorXd& eta_tilde_t,
                                     double h_t, const VectorXd& xtilde_next,
                                     const VectorXd& grid, int n_quad) {
  const int q = static_cast<int>(xtilde_next.size());
  const VectorXd alpha = params.alpha();
  if (alpha.size() != 2 * q || eta_tilde_t.size() != q) {
    throw std::invalid_argument("predictive_density: dimension mismatch");
  }
  const VectorXd eta0 = alpha.head(q);
  const VectorXd sv = alpha.tail(q);
  const double mean = xtilde_next.dot(eta0) + xtilde_next.cwiseProduct(sv).dot(eta_tilde_t);
  const double state_var = xtilde_next.cwiseProduct(sv).squaredNorm();
  const double h_mean = params.hbar + params.rho() * (h_t - params.hbar);
  const double h_sd = std::sqrt(params.sigma2());

  VectorXd nodes, weights;
  if (h_sd < 1e-9) {
    nodes = VectorXd::Zero(1);
    weights = VectorXd::Ones(1);
  } else {
    gauss_hermite(n_quad, &nodes, &weights);
  }
  PredictiveDensity out;
  out.grid = grid;
  out.dens = VectorXd::Zero(grid.size());
  for (int k = 0; k < nodes.size(); ++k) {
    const double hk = h_mean + std::sqrt(2.0) * h_sd * nodes[k];
    const double var = state_var + std::exp(hk);
    const double sd = std::sqrt(var);
    for (int i = 0; i < grid.size(); ++i) {
      out.dens[i] += weights[k] * norm_pdf((grid[i] - mean) / sd) / sd;
    }
  }
  for (int i = 0; i + 1 < grid.size(); ++i) {
    out.mass += 0.5 * (out.dens[i] + out.dens[i + 1]) * (grid[i + 1] - grid[i]);
  }
  return out;
}

double predictive_kl(const EquationDesign& design, const TvpParams& params_va,
                     const TvpLatent& latent_va, const TvpParams& params_exact,
                     const TvpLatent& latent_exact, int grid_points) {
  const int T = design.T_eff;
  if (T < 2) throw std::invalid_argument("predictive_kl: need at least two effective rows");
  double acc = 0.0;
  int count = 0;
  for (int s = 0; s + 1 < T; ++s) {
    const VectorXd xnext = design.xtilde.row(s + 1).transpose();
    // Shared grid wide enough for both predictives.
    auto center_scale = [&](const TvpParams& pr, const TvpLatent& lat, double* c, double* w) {
      const VectorXd alpha = pr.alpha();
      const VectorXd eta0 = alpha.head(design.q);
      const VectorXd sv = alpha.tail(design.q);
      *c = xnext.dot(eta0) + xnext.cwiseProduct(sv).dot(lat.eta_tilde.row(s).transpose());
      const double hn = pr.hbar + pr.rho() * (lat.h[s] - pr.hbar);
      *w = std::sqrt(xnext.cwiseProduct(sv).squaredNorm() +
                     std::exp(hn + 2.0 * std::sqrt(pr.sigma2())) + 1e-12);
    };
    double c1, w1, c2, w2;
    center_scale(params_va, latent_va, &c1, &w1);
    center_scale(params_exact, latent_exact, &c2, &w2);
    const double lo = std::min(c1 - 10 * w1, c2 - 10 * w2);
    const double hi = std::max(c1 + 10 * w1, c2 + 10 * w2);
    VectorXd grid(grid_points);
    for (int i = 0; i < grid_points; ++i) {
      grid[i] = lo + (hi - lo) * i / (grid_points - 1);
    }
    const auto pv = predictive_density(params_va, latent_va.eta_tilde.row(s).transpose(),
                                       latent_va.h[s], xnext, grid);
    const auto pe = predictive_density(params_exact, latent_exact.eta_tilde.row(s).transpose(),
                                       latent_exact.h[s], xnext, grid);
    acc += kl_1d(pv.dens, pe.dens, grid);
    ++count;
  }
  return acc / count;
}

// ---------------------------------------------------------------------------
// Simulation

TVPVARData simulate_tvpvar(int N, int T, int p, const TvpSimHyper& hyper, Rng& rng,
                           TvpSimTruth* truth) {
  if (hyper.hbar.size() != N || hyper.rho.size() != N || hyper.sigma_e.size() != N) {
    throw std::invalid_argument("simulate_tvpvar: hyper vectors must have length N");
  }
  // Initial lag matrices scaled to the requested spectral radius of the
  // companion form.
  std::vector<MatrixXd> B(p, MatrixXd(N, N));
  for (int lag = 0; lag < p; ++lag) {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) B[lag](i, j) = hyper.init_coef_scale * rng.normal();
    }
  }
  MatrixXd companion = MatrixXd::Zero(N * p, N * p);
  for (int lag = 0; lag < p; ++lag) companion.block(0, lag * N, N, N) = B[lag];
  if (p > 1) {
    companion.block(N, 0, N * (p - 1), N * (p - 1)).setIdentity();
  }
  const double radius = companion.eigenvalues().cwiseAbs().maxCoeff();
  if (radius > hyper.init_spectral_radius) {
    const double shrink = hyper.init_spectral_radius / radius;
    double f = shrink;
    for (int lag = 0; lag < p; ++lag) {
      B[lag] *= f;
      f *= shrink;
    }
  }
  VectorXd beta0 = VectorXd::Zero(N);
  for (int i = 0; i < N; ++i) beta0[i] = 0.1 * rng.normal();
  MatrixXd L = MatrixXd::Identity(N, N);
  for (int i = 1; i < N; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = 0.2 * rng.normal();
  }

  TVPVARData data;
  data.N = N;
  data.T = T;
  data.p = p;
  data.y.resize(T, N);
  if (truth) {
    truth->h.resize(T, N);
    truth->coefs.clear();
  }

  // Stationary start for the log-volatilities.
  VectorXd h(N);
  for (int i = 0; i < N; ++i) {
    const double sd = hyper.sigma_e[i] / std::sqrt(std::max(1e-12, 1.0 - hyper.rho[i] * hyper.rho[i]));
    h[i] = hyper.hbar[i] + sd * rng.normal();
  }

  std::vector<VectorXd> lags(p, VectorXd::Zero(N));
  for (int lag = 0; lag < p; ++lag) {
    for (int i = 0; i < N; ++i) lags[lag][i] = 0.5 * rng.normal();
  }

  for (int t = 0; t < T; ++t) {
    // Random walks on the free coefficients.
    if (t > 0) {
      for (int i = 0; i < N; ++i) beta0[i] += hyper.coef_rw_sd * rng.normal();
      for (int lag = 0; lag < p; ++lag) {
        for (int i = 0; i < N; ++i) {
          for (int j = 0; j < N; ++j) B[lag](i, j) += hyper.coef_rw_sd * rng.normal();
        }
      }
      for (int i = 1; i < N; ++i) {
        for (int j = 0; j < i; ++j) L(i, j) += hyper.l_rw_sd * rng.normal();
      }
      for (int i = 0; i < N; ++i) {
        h[i] = hyper.hbar[i] + hyper.rho[i] * (h[i] - hyper.hbar[i]) +
               hyper.sigma_e[i] * rng.normal();
      }
    }
    VectorXd eps(N);
    for (int i = 0; i < N; ++i) eps[i] = std::exp(0.5 * h[i]) * rng.normal();
    VectorXd yt = beta0 + L * eps;
    for (int lag = 0; lag < p; ++lag) yt += B[lag] * lags[lag];
    data.y.row(t) = yt.transpose();
    for (int lag = p - 1; lag > 0; --lag) lags[lag] = lags[lag - 1];
    lags[0] = yt;
    if (truth) {
      truth->h.row(t) = h.transpose();
      VarCoefficients vc;
      vc.beta0 = beta0;
      vc.B = B;
      vc.L = L;
      truth->coefs.push_back(vc);
    }
  }
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Per-equation MCMC

void horseshoe_prior_gibbs_sweep(VectorXd& chi, double& xi, VectorXd& nu, double& kappa,
                                 VectorXd& alpha, Rng& rng) {
  const int J = static_cast<int>(chi.size());
  for (int j = 0; j < J; ++j) {
    alpha[j] = std::sqrt(xi * chi[j]) * rng.normal();
  }
  for (int j = 0; j < J; ++j) {
    chi[j] = rng.inverse_gamma(1.0, 1.0 / nu[j] + alpha[j] * alpha[j] / (2.0 * xi));
    nu[j] = rng.inverse_gamma(1.0, 1.0 + 1.0 / chi[j]);
  }
  double quad = 0.0;
  for (int j = 0; j < J; ++j) quad += alpha[j] * alpha[j] / chi[j];
  xi = rng.inverse_gamma(0.5 * (J + 1), 1.0 / kappa + 0.5 * quad);
  kappa = rng.inverse_gamma(1.0, 1.0 + 1.0 / xi);
}

VectorXd TvpMcmcResult::theta_mean() const {
  return theta_draws.colwise().mean().transpose();
}

TvpMcmcResult mcmc_tvpvar_equation(const TvpVarEquationModel& model, const TvpMcmcConfig& cfg,
                                   Rng& rng) {
  const auto& d = model.design();
  const int T = d.T_eff, q = d.q, J = 2 * q;

  // State in the centered parameterization.
  VectorXd alpha = VectorXd::Zero(J);
  VectorXd chi = VectorXd::Ones(J), nu = VectorXd::Ones(J);
  double xi = 1.0, kappa = 1.0;
  double hbar = 0.0, rho_probit = 0.9, sigma2_log = std::log(0.1);
  TvpLatent latent = TvpLatent::unpack(model.init_latent(rng), T, q);

  const long burn = static_cast<long>(cfg.burn_frac * cfg.n_sweeps);
  const long n_post = cfg.n_sweeps - burn;
  const long thin_stride = std::max<long>(1, n_post / std::max(1, cfg.thin_to));
  const long n_keep = n_post > 0 ? (n_post + thin_stride - 1) / thin_stride : 0;

  TvpMcmcResult result;
  result.theta_draws.resize(n_keep, TvpParams::dim(J));
  result.h_mean = VectorXd::Zero(T);
  result.vol_mean = VectorXd::Zero(T);
  result.eta_mean = MatrixXd::Zero(T, q);

  VectorXd scales = VectorXd::Constant(3, cfg.scale_init);
  VectorXd win_prop = VectorXd::Zero(3), win_acc = VectorXd::Zero(3);
  VectorXd tot_prop = VectorXd::Zero(3), tot_acc = VectorXd::Zero(3);

  // Log prior density of the h path plus the transformed (hbar, rho, sigma2)
  // priors; the MH target for those three scalars.
  auto h_block_logpost = [&](double hb, double rp, double s2l) {
    const double rho = 2.0 * norm_cdf(rp) - 1.0;
    const double sigma2 = std::exp(s2l);
    const double s2 = sigma2 / (1.0 - rho * rho);
    double out = -0.5 * (kLog2Pi + std::log(s2)) -
                 0.5 * (latent.h[0] - hb) * (latent.h[0] - hb) / s2;
    for (int s = 1; s < T; ++s) {
      const double resid = latent.h[s] - hb - rho * (latent.h[s - 1] - hb);
      out += -0.5 * (kLog2Pi + s2l) - 0.5 * resid * resid / sigma2;
    }
    out += -hb * hb / 200.0;
    const double u = norm_cdf(rp);
    out += 24.0 * std::log(u) + 4.0 * std::log1p(-u) + norm_logpdf(rp);
    out += 0.5 * s2l - 0.5 * sigma2;
    return out;
  };

  long kept = 0;
  for (long sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
    TvpParams params;
    params.tau = alpha;  // only (hbar, rho, sigma2, alpha) enter the samplers
    params.chi_log = VectorXd::Zero(J);
    params.xi_log = 0.0;
    params.nu_log = VectorXd::Zero(J);
    params.kappa_log = 0.0;
    params.hbar = hbar;
    params.rho_probit = rho_probit;
    params.sigma2_log = sigma2_log;

    // 1. volatilities and 2. states.
    latent.h = sample_h_ksc(d, params, latent.eta_tilde, latent.h, rng);
    latent.eta_tilde = ffbs_eta(d, params, latent.h, rng);

    // 3. alpha | rest: conjugate Gaussian regression with prior
    //    alpha_j ~ N(0, xi chi_j).
    MatrixXd A = MatrixXd::Zero(J, J);
    VectorXd b = VectorXd::Zero(J);
    for (int s = 0; s < T; ++s) {
      const VectorXd x = full_regressor(d, latent.eta_tilde.row(s).transpose(), s);
      const double w = std::exp(-latent.h[s]);
      A.noalias() += w * x * x.transpose();
      b += w * d.y_i[s] * x;
    }
    for (int j = 0; j < J; ++j) A(j, j) += 1.0 / (xi * chi[j]);
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw std::runtime_error("mcmc_tvpvar: alpha precision not PD");
    VectorXd eps(J);
    for (int j = 0; j < J; ++j) eps[j] = rng.normal();
    alpha = llt.solve(b) + llt.matrixU().solve(eps);

    // 4.-7. horseshoe blocks.
    for (int j = 0; j < J; ++j) {
      chi[j] = rng.inverse_gamma(1.0, 1.0 / nu[j] + alpha[j] * alpha[j] / (2.0 * xi));
      nu[j] = rng.inverse_gamma(1.0, 1.0 + 1.0 / chi[j]);
    }
    {
      double quad = 0.0;
      for (int j = 0; j < J; ++j) quad += alpha[j] * alpha[j] / chi[j];
      xi = rng.inverse_gamma(0.5 * (J + 1), 1.0 / kappa + 0.5 * quad);
      kappa = rng.inverse_gamma(1.0, 1.0 + 1.0 / xi);
    }

    // 8. scalar adaptive RW-MH on (hbar, rho_probit, sigma2_log).
    double cur = h_block_logpost(hbar, rho_probit, sigma2_log);
    for (int which = 0; which < 3; ++which) {
      double nh = hbar, nr = rho_probit, ns = sigma2_log;
      double* target = which == 0 ? &nh : which == 1 ? &nr : &ns;
      *target += scales[which] * rng.normal();
      const double prop = h_block_logpost(nh, nr, ns);
      win_prop[which] += 1;
      tot_prop[which] += 1;
      if (std::log(rng.uniform()) < prop - cur) {
        hbar = nh;
        rho_probit = nr;
        sigma2_log = ns;
        cur = prop;
        win_acc[which] += 1;
        tot_acc[which] += 1;
      }
    }
    if ((sweep + 1) % cfg.adapt_interval == 0) {
      for (int which = 0; which < 3; ++which) {
        if (win_prop[which] == 0) continue;
        const double rate = win_acc[which] / win_prop[which];
        if (rate < cfg.accept_lo) {
          scales[which] /= cfg.scale_factor;
        } else if (rate > cfg.accept_hi) {
          scales[which] *= cfg.scale_factor;
        }
      }
      win_prop.setZero();
      win_acc.setZero();
    }

    if (sweep >= burn) {
      const long post = sweep - burn;
      result.h_mean += latent.h;
      result.vol_mean += (latent.h * 0.5).array().exp().matrix();
      result.eta_mean += latent.eta_tilde;
      if (post % thin_stride == 0 && kept < n_keep) {
        // Store in the VI (non-centered, transformed) parameterization.
        TvpParams draw;
        draw.chi_log = chi.array().log();
        draw.xi_log = std::log(xi);
        draw.nu_log = nu.array().log();
        draw.kappa_log = std::log(kappa);
        draw.tau = alpha.cwiseQuotient((std::sqrt(xi) * chi.cwiseSqrt()));
        draw.hbar = hbar;
        draw.rho_probit = rho_probit;
        draw.sigma2_log = sigma2_log;
        result.theta_draws.row(kept++) = draw.pack().transpose();
      }
    }
  }
  if (n_post > 0) {
    result.h_mean /= static_cast<double>(n_post);
    result.vol_mean /= static_cast<double>(n_post);
    result.eta_mean /= static_cast<double>(n_post);
  }
  result.theta_draws.conservativeResize(kept, TvpParams::dim(J));
  result.accept_rate.resize(3);
  for (int w = 0; w < 3; ++w) {
    result.accept_rate[w] = tot_prop[w] > 0 ? tot_acc[w] / tot_prop[w] : 0.0;
  }
  result.ess.resize(TvpParams::dim(J));
  for (int e = 0; e < result.ess.size(); ++e) {
    std::vector<double> col(kept);
    for (long s = 0; s < kept; ++s) col[s] = result.theta_draws(s, e);
    result.ess[e] = kept > 0 ? effective_sample_size(col) : 0.0;
  }
  TvpParams fin;
  fin.tau = alpha.cwiseQuotient((std::sqrt(xi) * chi.cwiseSqrt()));
  fin.chi_log = chi.array().log();
  fin.xi_log = std::log(xi);
  fin.nu_log = nu.array().log();
  fin.kappa_log = std::log(kappa);
  fin.hbar = hbar;
  fin.rho_probit = rho_probit;
  fin.sigma2_log = sigma2_log;
  result.final_params = fin;
  result.final_latent = latent;
  return result;
}

}  // namespace hybridvi
