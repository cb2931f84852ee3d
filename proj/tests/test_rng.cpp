#include <doctest.h>

#include "pal/rng.hpp"
#include "test_util.hpp"

using namespace pal;

TEST_SUITE_BEGIN("rng");

TEST_CASE("binomial edge cases") {
  Rng rng(1);
  CHECK(rng.binomial(10, 0.0) == 0);
  CHECK(rng.binomial(10, 1.0) == 10);
  CHECK(rng.binomial(0, 0.5) == 0);
}

TEST_CASE("binomial moments") {
  Rng rng(2);
  const std::int64_t n = 50;
  for (double p : {0.05, 0.3, 0.8, 0.97}) {
    const int R = 40000;
    std::vector<double> draws(R);
    for (int r = 0; r < R; ++r) draws[r] = static_cast<double>(rng.binomial(n, p));
    const double mean = test::mean_of(draws), var = test::var_of(draws);
    const double m_true = n * p, v_true = n * p * (1.0 - p);
    CHECK(std::abs(mean - m_true) < 4.0 * std::sqrt(v_true / R));
    CHECK(std::abs(var - v_true) < 0.1 * v_true);
  }
}

TEST_CASE("binomial large-count draws stay in range") {
  Rng rng(3);
  for (int r = 0; r < 20; ++r) {
    const std::int64_t v = rng.binomial(100000, 0.98);
    CHECK(v >= 0);
    CHECK(v <= 100000);
    CHECK(std::abs(static_cast<double>(v) - 98000.0) < 5.0 * std::sqrt(100000 * 0.98 * 0.02) + 1);
  }
}

TEST_CASE("binomial refuses huge counts without the approximation flag") {
  Rng rng(4);
  CHECK_THROWS_AS(rng.binomial(100000000, 0.5), NumericalError);
  rng.allow_normal_approx(true);
  const std::int64_t v = rng.binomial(100000000, 0.5);
  CHECK(std::abs(static_cast<double>(v) - 5e7) < 1e6);
}

TEST_CASE("multinomial conserves the total and hits zero-probability cells never") {
  Rng rng(5);
  Vec p(4);
  p << 0.2, 0.0, 0.5, 0.3;
  for (int r = 0; r < 200; ++r) {
    const IVec x = rng.multinomial(100, p);
    CHECK(x.sum() == 100);
    CHECK(x[1] == 0);
    CHECK((x.array() >= 0).all());
  }
}

TEST_CASE("multinomial moments") {
  Rng rng(6);
  Vec p(3);
  p << 0.1, 0.6, 0.3;
  const int R = 30000;
  Vec mean = Vec::Zero(3);
  for (int r = 0; r < R; ++r) mean += rng.multinomial(40, p).cast<double>();
  mean /= R;
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(40 * p[i] * (1 - p[i]) / R);
    CHECK(std::abs(mean[i] - 40 * p[i]) < 4.0 * se + 1e-9);
  }
}

TEST_CASE("streams are reproducible and substreams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng s1 = Rng(42).substream(1), s2 = Rng(42).substream(2);
  int differ = 0;
  for (int i = 0; i < 32; ++i)
    if (s1.uniform() != s2.uniform()) ++differ;
  CHECK(differ > 16);
}

TEST_SUITE_END();
