#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "biasamp/detmath.hpp"
#include "biasamp/rng.hpp"
#include "biasamp/stats.hpp"

using namespace biasamp;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs for state 0, from the published reference implementation.
  std::uint64_t s = 0;
  REQUIRE(splitmix64_next(s) == 0xE220A8397B1DCDAFULL);
  REQUIRE(splitmix64_next(s) == 0x6E789E6AA1B965F4ULL);
  REQUIRE(splitmix64_next(s) == 0x06C45D188009454FULL);
}

TEST_CASE("det_exp and det_log track libm closely") {
  Rng rng(12345);
  for (int i = 0; i < 20000; ++i) {
    const double z = (rng.uniform01() - 0.5) * 80.0;
    const double got = detmath::det_exp(z);
    const double want = std::exp(z);
    REQUIRE(got == Catch::Approx(want).epsilon(1e-13));
  }
  for (int i = 0; i < 20000; ++i) {
    const double x = detmath::det_exp((rng.uniform01() - 0.5) * 60.0);
    const double got = detmath::det_log(x);
    const double want = std::log(x);
    if (std::fabs(want) > 1e-10) {
      REQUIRE(got == Catch::Approx(want).epsilon(1e-13));
    } else {
      REQUIRE(std::fabs(got - want) < 1e-14);
    }
  }
}

TEST_CASE("det_exp edge behaviour") {
  REQUIRE(detmath::det_exp(0.0) == 1.0);
  REQUIRE(detmath::det_exp(800.0) == std::numeric_limits<double>::infinity());
  REQUIRE(detmath::det_exp(-800.0) == 0.0);
  REQUIRE(detmath::det_log(1.0) == 0.0);
  REQUIRE(std::isinf(detmath::det_log(0.0)));
}

TEST_CASE("sigmoid and softplus identities") {
  REQUIRE(detmath::sigmoid(0.0) == 0.5);
  REQUIRE(detmath::softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-14));
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double z = (rng.uniform01() - 0.5) * 60.0;
    REQUIRE(detmath::sigmoid(z) + detmath::sigmoid(-z) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(detmath::sigmoid(z) >= 0.0);
    REQUIRE(detmath::sigmoid(z) <= 1.0);
  }
}

TEST_CASE("rng streams are deterministic and tag-separated") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  REQUIRE(derive_seed(1, "alpha") != derive_seed(1, "beta"));
  REQUIRE(derive_seed(1, "alpha") != derive_seed(2, "alpha"));
  REQUIRE(derive_seed(1, "alpha", 0) != derive_seed(1, "alpha", 1));
  REQUIRE(derive_seed(1, "alpha") == derive_seed(1, "alpha"));
}

TEST_CASE("uniform01 stays in [0, 1) and uniform_below is in range") {
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(rng.uniform_below(7) < 7);
  }
}

TEST_CASE("normal deviates have sane moments") {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::fabs(mean) < 0.01);
  REQUIRE(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  Rng r1(77), r2(77);
  r1.shuffle(v);
  r2.shuffle(w);
  REQUIRE(v == w);
  std::set<int> seen(v.begin(), v.end());
  REQUIRE(seen.size() == 50);
}

TEST_CASE("student t quantiles match tabulated values") {
  REQUIRE(stats::student_t_quantile(0.975, 1) == Catch::Approx(12.7062047364).epsilon(1e-8));
  REQUIRE(stats::student_t_quantile(0.975, 19) == Catch::Approx(2.0930240544).epsilon(1e-8));
  REQUIRE(stats::student_t_quantile(0.975, 9) == Catch::Approx(2.2621571628).epsilon(1e-8));
  REQUIRE(stats::student_t_quantile(0.95, 5) == Catch::Approx(2.0150483733).epsilon(1e-8));
  // symmetry and median
  REQUIRE(stats::student_t_quantile(0.025, 19) ==
          Catch::Approx(-stats::student_t_quantile(0.975, 19)).epsilon(1e-12));
  REQUIRE(stats::student_t_quantile(0.5, 7) == 0.0);
}

TEST_CASE("incomplete beta sanity") {
  REQUIRE(stats::incomplete_beta(0.5, 0.5, 0.5) == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(stats::incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  REQUIRE(stats::incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1, 1) = x
  for (double x : {0.1, 0.25, 0.5, 0.9}) {
    REQUIRE(stats::incomplete_beta(1.0, 1.0, x) == Catch::Approx(x).epsilon(1e-12));
  }
}
