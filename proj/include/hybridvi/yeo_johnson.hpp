#pragma once

namespace hybridvi {

// Yeo-Johnson transform t_gamma: R -> R, strictly increasing, t_gamma(0) = 0.
// For 0 < gamma < 2:
//   theta <  0:  -((1-theta)^(2-gamma) - 1) / (2-gamma)
//   theta >= 0:  ((1+theta)^gamma - 1) / gamma
// The endpoint values gamma = 0 and gamma = 2 are admitted with their log
// limits so the transform is continuous on the closed interval; the copula
// family itself keeps gamma strictly inside (0,2).
double yeo_johnson(double theta, double gamma);

// Closed-form inverse; t_gamma preserves sign, so the branch follows
// sign(vartheta).
double yeo_johnson_inv(double vartheta, double gamma);

// d t_gamma / d theta = (1-theta)^(1-gamma) (theta<0), (1+theta)^(gamma-1) (theta>=0).
double yj_dtheta(double theta, double gamma);

// log of the above: (gamma-1) * sign(theta) * log1p(|theta|).
double yj_log_dtheta(double theta, double gamma);

// d t_gamma / d gamma, the two-branch closed form.
double yj_dgamma(double theta, double gamma);

}  // namespace hybridvi
