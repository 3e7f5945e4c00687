#include <doctest.h>

#include <cmath>

#include "jdfilter/rng.hpp"

using namespace jdf;

TEST_CASE("streams are deterministic and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_equal_c = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    const auto vb = b.next_u64();
    const auto vc = c.next_u64();
    all_equal = all_equal && va == vb;
    any_equal_c = any_equal_c || va == vc;
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("uniform stays inside (0,1) with the right mean") {
  RngStream r(1, 1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 0.005);
}

TEST_CASE("normal moments") {
  RngStream r(3, 1);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("poisson mean matches the rate") {
  RngStream r(5, 1);
  const double lambda = 1.0;  // mass 2 on a horizon of 0.5
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.poisson(lambda);
  const double mean = s / n;
  const double se = std::sqrt(lambda / n);
  CHECK(std::abs(mean - lambda) <= 3.0 * se);
  CHECK(r.poisson(0.0) == 0);
}

TEST_CASE("inverse normal cdf round-trips against erfc") {
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-12}) {
    const double x = inverse_normal_cdf(p);
    CHECK(std::abs(cdf(x) - p) <= 1e-12 * std::max(1.0, std::abs(p)));
  }
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("halton base 2 prefix") {
  CHECK(halton_point(0, 1)[0] == doctest::Approx(0.5));
  CHECK(halton_point(1, 1)[0] == doctest::Approx(0.25));
  CHECK(halton_point(2, 1)[0] == doctest::Approx(0.75));
  CHECK(halton_point(0, 2)[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("substream mixing separates indices") {
  CHECK(substream(1, 0) != substream(1, 1));
  CHECK(substream(1, 0) != substream(2, 0));
}
