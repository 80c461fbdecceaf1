#include <doctest.h>

#include <algorithm>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <vector>

#include "hybridvi/diagnostics.hpp"
#include "hybridvi/stats.hpp"
#include "hybridvi/toy.hpp"

using namespace hybridvi;

TEST_CASE("grad_check: clean quadratic passes, corrupted coordinate is flagged") {
  MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  auto f = [&](const VectorXd& x) { return 0.5 * x.dot(A * x); };
  auto g = [&](const VectorXd& x) -> VectorXd { return A * x; };
  VectorXd x0(3);
  x0 << 0.3, -1.2, 2.0;
  const auto rep = grad_check(f, g, x0);
  CHECK(rep.ok());
  CHECK(rep.max_rel_error < 1e-9);

  auto g_bad = [&](const VectorXd& x) -> VectorXd {
    VectorXd out = A * x;
    out[1] += 0.05;
    return out;
  };
  const auto rep_bad = grad_check(f, g_bad, x0);
  CHECK_FALSE(rep_bad.ok());
  REQUIRE(rep_bad.flagged.size() == 1);
  CHECK(rep_bad.flagged[0] == 1);
}

TEST_CASE("effective sample size: iid, constant and AR(1) chains") {
  Rng rng(55);
  const int n = 100000;
  std::vector<double> iid(n);
  for (auto& v : iid) v = rng.normal();
  CHECK(effective_sample_size(iid) == doctest::Approx(double(n)).epsilon(0.05));

  bool degenerate = false;
  std::vector<double> flat(500, 3.14);
  CHECK(effective_sample_size(flat, &degenerate) == 1.0);
  CHECK(degenerate);

  const double phi = 0.9;
  std::vector<double> ar(n);
  ar[0] = rng.normal();
  for (int t = 1; t < n; ++t) ar[t] = phi * ar[t - 1] + rng.normal();
  const double ratio = effective_sample_size(ar) / n;
  CHECK(ratio == doctest::Approx((1 - phi) / (1 + phi)).epsilon(0.2));
}

TEST_CASE("kl_1d: zero at equality, gaussian closed form, non-negative") {
  const int n = 4001;
  VectorXd grid(n), p(n), q(n);
  for (int i = 0; i < n; ++i) {
    grid[i] = -10.0 + 21.0 * i / (n - 1);
    p[i] = norm_pdf(grid[i]);
    q[i] = norm_pdf(grid[i] - 1.0);
  }
  CHECK(std::fabs(kl_1d(p, p, grid)) <= 1e-10);
  CHECK(kl_1d(p, q, grid) == doctest::Approx(0.5).epsilon(1e-6));

  Rng rng(66);
  for (int rep = 0; rep < 5; ++rep) {
    const double m1 = rng.normal(), s1 = 0.5 + rng.uniform();
    const double m2 = rng.normal(), s2 = 0.5 + rng.uniform();
    VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = norm_pdf((grid[i] - m1) / s1) / s1;
      b[i] = norm_pdf((grid[i] - m2) / s2) / s2;
    }
    CHECK(kl_1d(a, b, grid) >= -1e-9);
  }
}

TEST_CASE("augmented mean-field benchmark recovers the toy posterior moments") {
  Rng rng(77);
  VectorXd mu0 = VectorXd::Zero(2);
  MatrixXd sigma0 = MatrixXd::Identity(2, 2);
  sigma0(0, 1) = sigma0(1, 0) = 0.4;
  auto toy = ConjugateToyModel::simulate(mu0, sigma0, 0.8, 0.6, 8, rng);
  ToyAugmentedModel aug(toy);

  std::vector<AugmentedGaussianVA::BlockSpec> specs;
  specs.push_back({"theta", 2, 0});
  for (int i = 0; i < 8; ++i) specs.push_back({"z", 2, 0});
  FitConfig cfg;
  cfg.n_steps = 8000;
  cfg.seed = 500;
  const auto res = fit_augmented_benchmark(aug, AugmentedGaussianVA(specs, 0.05), cfg);
  const auto* va = dynamic_cast<const AugmentedGaussianVA*>(res.va_tail_avg.get());
  REQUIRE(va != nullptr);
  const VectorXd mu_p = toy.posterior_mean();
  for (int i = 0; i < 2; ++i) {
    CHECK(std::fabs(va->block(0).mu()[i] - mu_p[i]) <= 0.02 * std::max(1.0, std::fabs(mu_p[i])));
  }
}

TEST_CASE("elbo_estimate: at the exact posterior it returns the evidence") {
  Rng rng(88);
  VectorXd mu0 = VectorXd::Zero(2);
  MatrixXd sigma0 = MatrixXd::Identity(2, 2);
  auto toy = ConjugateToyModel::simulate(mu0, sigma0, 0.7, 0.5, 5, rng);

  // q = exact joint posterior factorized as p(theta|y) p(z|theta,y) is not
  // in the family; instead check the Jensen bound at random VAs and the
  // evidence value via the marginal-likelihood identity on the theta chain.
  ToyAugmentedModel aug(toy);
  std::vector<AugmentedGaussianVA::BlockSpec> specs;
  specs.push_back({"theta", 2, 0});
  for (int i = 0; i < 5; ++i) specs.push_back({"z", 2, 0});
  Rng mc(89);
  for (int rep = 0; rep < 20; ++rep) {
    AugmentedGaussianVA va(specs, 0.2 + 0.2 * mc.uniform());
    VectorXd v = va.step_vector();
    for (int i = 0; i < v.size(); ++i) v[i] += 0.3 * mc.normal();
    va.set_step_vector(v);
    const auto [elbo, se] = elbo_estimate(aug, va, 4000, mc);
    CHECK(elbo <= toy.log_evidence() + 4 * se);
  }

  // Averaging single-draw estimates equals one many-draw estimate in
  // distribution; check agreement of means within joint MC error.
  AugmentedGaussianVA va(specs, 0.3);
  Rng mc_a(90), mc_b(91);
  const auto [e1, se1] = elbo_estimate(aug, va, 20000, mc_a);
  double acc = 0.0;
  for (int s = 0; s < 20000; ++s) {
    acc += elbo_estimate(aug, va, 1, mc_b).first;
  }
  const double e2 = acc / 20000;
  CHECK(std::fabs(e1 - e2) <= 6 * se1);
}
