#pragma once

#include "hybridvi/rng.hpp"

namespace hybridvi {

double norm_pdf(double x);
double norm_logpdf(double x);
double norm_cdf(double x);

// log Phi(x), stable over the whole real line (continued fraction for the
// Mills ratio in the deep lower tail).
double norm_logcdf(double x);

// phi(x) / Phi(x), the inverse Mills ratio.
double inv_mills(double x);

// Draw from N(mean, sd^2) conditioned on x <= upper. Inverse-CDF in log
// space, so it stays exact when the truncation region is far in a tail.
double trunc_normal_below(double mean, double sd, double upper, Rng& rng);

// Mean of N(mean, sd^2) truncated to (-inf, upper]: mean - sd*phi(a)/Phi(a),
// a = (upper-mean)/sd. Used in tests against sampled moments.
double trunc_normal_below_mean(double mean, double sd, double upper);

// E[max(0, Y)] for Y ~ N(mean, sd^2): the censored-at-zero expectation
// mean*Phi(mean/sd) + sd*phi(mean/sd).
double censored_normal_mean(double mean, double sd);

}  // namespace hybridvi
