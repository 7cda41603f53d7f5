#include "cpbound/compound_poisson.hpp"
#include "oracles.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace cpbound;
using testing::code_of;

TEST_CASE("renewal spec construction") {
  const auto po = build_renewal_spec(1.0, 10.0, 1.0);
  CHECK(po.kind == CompoundPoissonSpec::Kind::Geometric);
  CHECK(po.norm == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(po.pi(1) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(po.pi(2) == 0.0);
  const auto half = build_renewal_spec(0.5, 4.0, 2.0);
  CHECK(half.norm == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 1; i < 10; ++i) CHECK(half.pi(i) == doctest::Approx(std::pow(0.5, i)).epsilon(1e-14));
  CHECK(code_of([] { build_renewal_spec(0.0, 4.0, 2.0); }) == ErrorCode::ZeroC0);
  CHECK(code_of([] { build_renewal_spec(0.5, -1.0, 2.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cluster-size masses reproduce the renewal spec") {
  const double c0 = 0.7, mean = 1.8, t = 6.0, eps = 0.01;
  std::vector<double> masses;
  for (int k = 1; k <= 200; ++k) masses.push_back(eps * std::pow(1 - c0, k - 1) * c0);
  // E(X) = eps * mean / c0; masses and E(X) both carry one factor of eps.
  const auto from_masses = build_mrpp_spec(t, eps * mean / c0, masses);
  const auto direct = build_renewal_spec(c0, t, mean);
  CHECK(from_masses.norm == doctest::Approx(direct.norm).epsilon(1e-12));
  for (std::size_t i = 1; i <= 20; ++i) CHECK(from_masses.pi(i) == doctest::Approx(direct.pi(i)).epsilon(1e-10));
  CHECK(from_masses.lambda == doctest::Approx(direct.lambda).epsilon(1e-10));
  CHECK(from_masses.theta == doctest::Approx(direct.theta).epsilon(1e-8));
}

TEST_CASE("pmf of the compound law") {
  const auto po = build_renewal_spec(1.0, 10.0, 1.0);
  const auto p = pmf_vector(po, 60);
  for (int n = 0; n <= 60; ++n) CHECK(std::abs(p[n] - oracle::poisson_pmf(10.0, n)) < 1e-12);
  CHECK(pmf(po, 7) == doctest::Approx(oracle::poisson_pmf(10.0, 7)).epsilon(1e-12));

  // norm 2, c0 0.6 against explicit convolution powers.
  const auto geo = build_renewal_spec(0.6, 2.0, 0.6);
  REQUIRE(geo.norm == doctest::Approx(2.0));
  std::vector<double> severity;
  for (int i = 1; i <= 40; ++i) severity.push_back(std::pow(0.4, i - 1) * 0.6);
  const auto brute = oracle::compound_by_convolution(2.0, severity, 40);
  const auto g = pmf_vector(geo, 40);
  double worst = 0.0;
  for (int n = 0; n <= 40; ++n) worst = std::max(worst, std::abs(g[n] - brute[n]));
  CHECK(worst < 1e-10);

  // Large norms do not underflow.
  const auto big = build_renewal_spec(0.9, 2000.0, 1.0);
  const auto gb = pmf_vector(big, 4000);
  CHECK(std::accumulate(gb.begin(), gb.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("property: finite specs normalize and match convolution") {
  oracle::Gen gen(4);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t k = gen.integer(1, 6);
    auto w = gen.simplex(k);
    const double norm = gen.uniform(0.2, 4.0);
    for (auto& x : w) x *= norm;
    const auto spec = build_finite_spec(w);
    CHECK(spec.norm == doctest::Approx(norm).epsilon(1e-12));
    std::vector<double> severity(w);
    for (auto& x : severity) x /= norm;
    const auto brute = oracle::compound_by_convolution(norm, severity, 50);
    const auto p = pmf_vector(spec, 50);
    for (int n = 0; n <= 50; ++n) CHECK(std::abs(p[n] - brute[n]) < 1e-10);
    const auto far = pmf_vector(spec, 400);
    CHECK(std::accumulate(far.begin(), far.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("geometric identities") {
  oracle::Gen gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    const double c0 = gen.uniform(0.05, 1.0), t = gen.uniform(0.5, 30.0), mean = gen.uniform(0.2, 3.0);
    const auto s = build_renewal_spec(c0, t, mean);
    CHECK(s.lambda == doctest::Approx(s.norm / c0).epsilon(1e-12));
    CHECK(s.theta == doctest::Approx(2.0 * (1.0 - c0) / c0).epsilon(1e-12));
    const auto h = h1_bound(s);
    CHECK(h.value <= h.general * (1.0 + 1e-12));
    CHECK(h.value == doctest::Approx(oracle::h1_geometric(s.norm, c0)).epsilon(1e-12));
    if (c0 > 0.8) {
      REQUIRE(h.theta_holds);
      CHECK(h.theta_value == doctest::Approx(c0 * c0 / (s.norm * (5.0 * c0 - 4.0))).epsilon(1e-12));
    }
  }
}

TEST_CASE("stein constant cases") {
  const auto a = h1_bound(build_renewal_spec(1.0, 10.0, 1.0));
  CHECK(a.regime == "theta");
  CHECK(a.value == doctest::Approx(0.1).epsilon(1e-12));

  const auto s09 = build_renewal_spec(0.9, 5.0, 1.0);
  CHECK(s09.theta == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(s09.lambda == doctest::Approx(s09.norm / 0.9).epsilon(1e-12));
  CHECK(h1_bound(s09).theta_holds);

  const auto s04 = build_renewal_spec(0.4, 5.0, 1.0);
  const auto h04 = h1_bound(s04);
  CHECK_FALSE(h04.monotone_holds);
  CHECK_FALSE(h04.theta_holds);
  CHECK(h04.regime == "general");
  CHECK(h04.value == doctest::Approx(std::min(1.0, 1.0 / (s04.norm * 0.4)) * std::exp(s04.norm)).epsilon(1e-12));
}

TEST_CASE("regime boundaries for geometric specs") {
  for (double t : {0.5, 3.0, 20.0}) {
    CHECK_FALSE(h1_bound(build_renewal_spec(0.4999, t, 1.0)).monotone_holds);
    CHECK(h1_bound(build_renewal_spec(0.5, t, 1.0)).monotone_holds);
    CHECK_FALSE(h1_bound(build_renewal_spec(0.8, t, 1.0)).theta_holds);
    CHECK(h1_bound(build_renewal_spec(0.8001, t, 1.0)).theta_holds);
  }
}

TEST_CASE("total variation") {
  const std::vector<double> p{0.2, 0.5, 0.3};
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(std::vector<double>{1.0}, std::vector<double>{0.0, 1.0}) == doctest::Approx(1.0));
  const auto a = oracle::poisson_vector(1.0, 80), b = oracle::poisson_vector(1.2, 80);
  double direct = 0.0;
  for (int k = 0; k <= 80; ++k) direct += std::abs(oracle::poisson_pmf(1.0, k) - oracle::poisson_pmf(1.2, k));
  CHECK(tv_distance(a, b) == doctest::Approx(0.5 * direct).epsilon(1e-12));
  CHECK(code_of([] { tv_distance(std::vector<double>{0.5}, std::vector<double>{1.0}); }) == ErrorCode::NotNormalized);
}

TEST_CASE("property: tv is a metric on sampled pmfs") {
  oracle::Gen gen(12);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = gen.pmf(gen.integer(1, 8)), q = gen.pmf(gen.integer(1, 8)), r = gen.pmf(gen.integer(1, 8));
    CHECK(tv_distance(p, q) == tv_distance(q, p));
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15);
    CHECK(tv_distance(p, q) == doctest::Approx(oracle::half_l1(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("direct sampling matches the mean") {
  const auto s = build_renewal_spec(0.6, 5.0, 1.0);
  Rng rng(17);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(sample_compound(s, rng));
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - s.lambda) < 4.0 * se);
  // Variance of a compound Poisson is sum i^2 pi_i.
  double var = 0.0;
  for (std::size_t i = 1; i < 400; ++i) var += static_cast<double>(i * i) * s.pi(i);
  CHECK((sum2 / n - mean * mean) == doctest::Approx(var).epsilon(0.03));
}
