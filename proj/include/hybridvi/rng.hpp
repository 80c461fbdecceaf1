#pragma once

#include <cstdint>
#include <vector>

namespace hybridvi {

// Inverse standard normal CDF (Wichura's algorithm AS 241, PPND16).
double ndtri(double p);

// Inverse standard normal CDF given log(p). Falls back to ndtri(exp(logp))
// away from the lower tail; in the tail it works directly from logp, so it
// stays accurate for probabilities far below DBL_MIN territory.
double ndtri_log(double logp);

// xoshiro256++ seeded through splitmix64. Every random draw in the project
// goes through this class; given a seed the full draw sequence is fixed,
// which is what makes seeded runs bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1).
  double uniform();

  // Standard normal via inverse-CDF (one uniform per draw).
  double normal();

  // Gamma(shape, scale) by Marsaglia-Tsang squeeze; shape < 1 boosted.
  double gamma(double shape, double scale);

  double inverse_gamma(double shape, double rate_b);  // density ~ x^{-a-1} e^{-b/x}
  double beta(double a, double b);

  // Integer uniform on [0, n).
  std::uint64_t below(std::uint64_t n);

  // Derive an independent deterministic substream (e.g. one per equation).
  Rng substream(std::uint64_t stream_id) const;

 private:
  std::uint64_t s_[4];
};

// Simple random sample without replacement from {0,...,n-1}, sorted ascending.
std::vector<int> sample_subset(int n, int size, Rng& rng);

}  // namespace hybridvi
