#include "hybridvi/yeo_johnson.hpp"

#include <cmath>
#include <stdexcept>

namespace hybridvi {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 2.0)) {
    throw std::domain_error("yeo_johnson: gamma must lie in [0,2]");
  }
}

// (s*x*e^{sx} - e^{sx} + 1) / s^2 with its s -> 0 limit x^2/2.
double power_gamma_derivative(double s, double x) {
  if (std::fabs(s) < 1e-5) {
    return 0.5 * x * x + s * x * x * x / 3.0;
  }
  const double e = std::exp(s * x);
  return (s * x * e - e + 1.0) / (s * s);
}

}  // namespace

double yeo_johnson(double theta, double gamma) {
  check_gamma(gamma);
  if (theta >= 0.0) {
    const double l = std::log1p(theta);
    if (gamma == 0.0) return l;
    return std::expm1(gamma * l) / gamma;
  }
  const double u = 2.0 - gamma;
  const double l = std::log1p(-theta);
  if (u == 0.0) return -l;
  return -std::expm1(u * l) / u;
}

double yeo_johnson_inv(double vartheta, double gamma) {
  check_gamma(gamma);
  if (vartheta >= 0.0) {
    if (gamma == 0.0) return std::expm1(vartheta);
    return std::expm1(std::log1p(gamma * vartheta) / gamma);
  }
  const double u = 2.0 - gamma;
  if (u == 0.0) return -std::expm1(-vartheta);
  return -std::expm1(std::log1p(-u * vartheta) / u);
}

double yj_dtheta(double theta, double gamma) {
  check_gamma(gamma);
  return std::exp(yj_log_dtheta(theta, gamma));
}

double yj_log_dtheta(double theta, double gamma) {
  if (theta >= 0.0) return (gamma - 1.0) * std::log1p(theta);
  return (1.0 - gamma) * std::log1p(-theta);
}

double yj_dgamma(double theta, double gamma) {
  check_gamma(gamma);
  if (theta >= 0.0) {
    return power_gamma_derivative(gamma, std::log1p(theta));
  }
  return power_gamma_derivative(2.0 - gamma, std::log1p(-theta));
}

}  // namespace hybridvi
