#include "hybridvi/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace hybridvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kSqrt1_2 = 0.70710678118654752440084436210485;
}  // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x - 0.5 * kLog2Pi); }

double norm_logpdf(double x) { return -0.5 * x * x - 0.5 * kLog2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kSqrt1_2); }

double norm_logcdf(double x) {
  if (x > -8.0) {
    return std::log(0.5 * std::erfc(-x * kSqrt1_2));
  }
  // Lower tail: Phi(x) = phi(x) * R(x) with the Mills-ratio continued
  // fraction R(x) = 1/(-x + 1/(-x + 2/(-x + 3/(...)))).
  const double ax = -x;
  double cf = 0.0;
  for (int j = 40; j >= 1; --j) {
    cf = static_cast<double>(j) / (ax + cf);
  }
  const double r = 1.0 / (ax + cf);
  return norm_logpdf(x) + std::log(r);
}

double inv_mills(double x) { return std::exp(norm_logpdf(x) - norm_logcdf(x)); }

double trunc_normal_below(double mean, double sd, double upper, Rng& rng) {
  if (!(sd > 0.0)) throw std::domain_error("trunc_normal_below: sd must be positive");
  const double a = (upper - mean) / sd;
  const double logp = std::log(rng.uniform()) + norm_logcdf(a);
  double z = ndtri_log(logp);
  if (z > a) z = a;  // guard against roundoff at the boundary
  return mean + sd * z;
}

double trunc_normal_below_mean(double mean, double sd, double upper) {
  const double a = (upper - mean) / sd;
  return mean - sd * inv_mills(a);
}

double censored_normal_mean(double mean, double sd) {
  const double u = mean / sd;
  return mean * norm_cdf(u) + sd * norm_pdf(u);
}

}  // namespace hybridvi
