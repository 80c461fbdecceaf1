#include <doctest.h>

#include <algorithm>
#include <initializer_list>
#include <stdexcept>

#include <cmath>

#include "hybridvi/yeo_johnson.hpp"

using namespace hybridvi;

TEST_CASE("yeo_johnson vanishes at zero and reduces to identity at gamma=1") {
  for (double g : {0.1, 0.5, 1.0, 1.5, 1.9}) {
    CHECK(std::fabs(yeo_johnson(0.0, g)) <= 1e-15);
  }
  for (double th : {-5.0, -0.3, 0.0, 0.7, 4.2}) {
    CHECK(yeo_johnson(th, 1.0) == doctest::Approx(th).epsilon(1e-14));
    CHECK(yeo_johnson_inv(th, 1.0) == doctest::Approx(th).epsilon(1e-14));
  }
}

TEST_CASE("yeo_johnson boundary value gamma=2") {
  CHECK(yeo_johnson(1.0, 2.0) == doctest::Approx(1.5).epsilon(1e-14));  // ((2)^2-1)/2
  CHECK_THROWS_AS(yeo_johnson(1.0, 2.5), std::domain_error);
  CHECK_THROWS_AS(yeo_johnson(1.0, -0.1), std::domain_error);
}

TEST_CASE("inverse round trip over a grid") {
  for (double g = 0.1; g < 2.0; g += 0.2) {
    for (double th = -10.0; th <= 10.0; th += 0.25) {
      const double v = yeo_johnson(th, g);
      CHECK(std::fabs(yeo_johnson_inv(v, g) - th) <= 1e-12 * std::max(1.0, std::fabs(th)));
    }
  }
  CHECK(std::fabs(yeo_johnson_inv(0.0, 0.7)) <= 1e-15);
}

TEST_CASE("yj_dtheta closed form and finite differences") {
  CHECK(yj_dtheta(0.4, 1.0) == doctest::Approx(1.0));
  CHECK(yj_dtheta(-2.7, 1.0) == doctest::Approx(1.0));
  CHECK(yj_dtheta(3.0, 1.5) == doctest::Approx(2.0).epsilon(1e-14));  // 4^{0.5}
  for (double g : {0.3, 0.9, 1.4, 1.8}) {
    for (double th = -4.0; th <= 4.0; th += 0.5) {
      const double h = 1e-6;
      const double fd = (yeo_johnson(th + h, g) - yeo_johnson(th - h, g)) / (2 * h);
      CHECK(yj_dtheta(th, g) == doctest::Approx(fd).epsilon(1e-7));
      CHECK(yj_dtheta(th, g) > 0.0);
    }
  }
}

TEST_CASE("yj_dgamma closed form and finite differences") {
  for (double g : {0.2, 0.8, 1.0, 1.7}) {
    CHECK(std::fabs(yj_dgamma(0.0, g)) <= 1e-15);
  }
  CHECK(yj_dgamma(std::exp(1.0) - 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double g : {0.3, 0.9, 1.4, 1.8}) {
    for (double th = -4.0; th <= 4.0; th += 0.5) {
      const double h = 1e-6;
      const double fd = (yeo_johnson(th, g + h) - yeo_johnson(th, g - h)) / (2 * h);
      CHECK(std::fabs(yj_dgamma(th, g) - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("strict monotonicity in theta") {
  for (double g = 0.1; g < 2.0; g += 0.3) {
    double prev = yeo_johnson(-20.0, g);
    for (double th = -19.9; th <= 20.0; th += 0.1) {
      const double cur = yeo_johnson(th, g);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}
