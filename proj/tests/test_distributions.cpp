#include "cpbound/distributions.hpp"
#include "cpbound/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace cpbound;
using D = InterarrivalDistribution;

namespace {

struct SampleMoments {
  double m1, se1, m2, se2;
};

SampleMoments sample_moments(const D& d, int n, std::uint64_t seed) {
  Rng rng(seed);
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_interarrival(d, rng);
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  return {m1, std::sqrt((m2 - m1 * m1) / n), m2, std::sqrt((s4 / n - m2 * m2) / n)};
}

std::vector<D> continuous_battery() {
  return {D::exponential(1.3),
          D::erlang(2, 1.0),
          D::erlang(3, 2.5),
          D::hyperexponential({0.05, 0.95}, {5.0, 1.0}),
          D::hyperexponential({0.3, 0.5, 0.2}, {4.0, 1.0, 0.6}),
          D::weibull(0.8, 1.0),
          D::weibull(1.7, 2.0),
          D::uniform(0.0, 1.0),
          D::numeric_density({0.0, 0.5, 1.0, 2.0}, {0.2, 1.0, 0.6, 0.3}, 1.5),
          D::exponential(1.0).with_atoms({{0.5, 0.1}, {2.0, 0.05}})};
}

}  // namespace

TEST_CASE("moments of the standard families") {
  auto e = moments(D::exponential(1.0));
  CHECK(e.m1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.m2 == doctest::Approx(2.0).epsilon(1e-14));
  auto er = moments(D::erlang(2, 2.0));
  CHECK(er.m1 == doctest::Approx(2.0 / 2.0).epsilon(1e-14));
  CHECK(er.m2 == doctest::Approx(2.0 * 3.0 / 4.0).epsilon(1e-14));
  auto h = moments(D::hyperexponential({0.5, 0.5}, {1.0, 2.0}));
  CHECK(h.m1 == doctest::Approx(0.5 * 1.0 + 0.5 * 0.5).epsilon(1e-14));
  CHECK(h.m2 == doctest::Approx(0.5 * 2.0 + 0.5 * 2.0 / 4.0).epsilon(1e-14));
  auto g = moments(D::lattice_geometric(0.25));
  CHECK(g.m1 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(g.m2 == doctest::Approx((2.0 - 0.25) / (0.25 * 0.25)).epsilon(1e-12));
  auto u = moments(D::uniform(0.0, 1.0));
  CHECK(u.m1 == doctest::Approx(0.5));
  CHECK(u.m2 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("moment failures are reported") {
  CHECK_THROWS_AS(D::exponential(-1.0), Error);
  CHECK_THROWS_AS(D::hyperexponential({0.5, 0.4}, {1.0, 2.0}), Error);
  try {
    moments(D::weibull(0.002, 1.0));
    FAIL("expected NonFiniteMoment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteMoment);
  }
}

TEST_CASE("radon-nikodym derivative") {
  const auto ref1 = ReferenceMeasure::make(1.0, TimeMode::Continuous);
  for (double x : {0.0, 0.3, 2.0, 17.0}) {
    CHECK(rn_derivative_f(D::exponential(1.0), ref1, x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const double lam = 1.7;
  const auto ref = ReferenceMeasure::make(lam, TimeMode::Continuous);
  for (double x : {0.1, 1.0, 3.5}) {
    CHECK(rn_derivative_f(D::erlang(2, lam), ref, x) == doctest::Approx(lam * x).epsilon(1e-12));
  }
  CHECK(rn_derivative_f(D::uniform(0.0, 1.0), ref1, 0.5) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
  CHECK(rn_derivative_f(D::uniform(0.0, 1.0), ref1, 1.5) == 0.0);
  // Atoms do not contribute.
  const auto mixed = D::exponential(1.0).with_atoms({{0.5, 0.2}});
  CHECK(rn_derivative_f(mixed, ref1, 0.5) == doctest::Approx(0.8).epsilon(1e-12));
  const auto lref = ReferenceMeasure::make(0.3, TimeMode::Lattice);
  for (int k = 1; k < 20; ++k) CHECK(rn_derivative_f(D::lattice_geometric(0.3), lref, k) == doctest::Approx(1.0));
}

TEST_CASE("tail infimum") {
  const auto ref1 = ReferenceMeasure::make(1.0, TimeMode::Continuous);
  for (double t : {0.0, 1.0, 10.0}) {
    CHECK(tail_inf_f(D::exponential(1.0), ref1, t) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tail_inf_f(D::hyperexponential({0.2, 0.8}, {3.0, 1.0}), ref1, t) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(tail_inf_f(D::uniform(0.0, 1.0), ref1, t) == 0.0);
    CHECK(tail_inf_f(D::erlang(2, 1.0), ref1, t) == doctest::Approx(t).epsilon(1e-12));
  }
}

TEST_CASE("reference measure domain") {
  CHECK_THROWS_AS(ReferenceMeasure::make(0.0, TimeMode::Continuous), Error);
  CHECK_THROWS_AS(ReferenceMeasure::make(1.5, TimeMode::Lattice), Error);
  CHECK_NOTHROW(ReferenceMeasure::make(1.0, TimeMode::Lattice));
  CHECK_THROWS_AS(tail_inf_f(D::exponential(1.0), ReferenceMeasure::make(0.5, TimeMode::Lattice), 1.0), Error);
}

TEST_CASE("sampling reproduces the moments") {
  auto e = sample_moments(D::exponential(1.0), 100000, 1);
  CHECK(std::abs(e.m1 - 1.0) < 3.0 * e.se1);
  auto er = sample_moments(D::erlang(2, 1.0), 100000, 2);
  CHECK(std::abs(er.m1 - 2.0) < 3.0 * er.se1);
  CHECK(std::abs(er.m2 - 6.0) < 3.0 * er.se2);
  Rng rng(3);
  const auto g = D::lattice_geometric(0.3);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = g.sample(rng);
    REQUIRE(x >= 1.0);
    REQUIRE(x == std::floor(x));
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0 / 0.3) < 3.0 * se);
}

TEST_CASE("sampling is reproducible") {
  const auto d = D::hyperexponential({0.05, 0.95}, {5.0, 1.0});
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(d.sample(a) == d.sample(b));
}

TEST_CASE("property: family moments match sample moments within 4 SE") {
  std::uint64_t seed = 10;
  auto battery = continuous_battery();
  battery.push_back(D::lattice_geometric(0.2));
  battery.push_back(D::lattice_pmf({0.0, 0.2, 0.5, 0.3}));
  battery.push_back(D::lattice_pmf({0.1, 0.3, 0.2}, 0.5));
  for (const auto& d : battery) {
    CAPTURE(d.name());
    const auto m = moments(d);
    const auto s = sample_moments(d, 100000, ++seed);
    CHECK(std::abs(s.m1 - m.m1) < 4.0 * s.se1);
    CHECK(std::abs(s.m2 - m.m2) < 4.0 * s.se2);
  }
}

TEST_CASE("property: reference-weighted density integrates to the absolutely continuous mass") {
  oracle::Gen gen(2024);
  for (const auto& d : continuous_battery()) {
    for (int rep = 0; rep < 3; ++rep) {
      const double gamma = gen.uniform(0.2, 3.0);
      const auto ref = ReferenceMeasure::make(gamma, TimeMode::Continuous);
      const double upper = d.quantile(1.0 - 1e-12) + 1.0;
      double mass = 0.0;
      // Split at the kinks of the tabulated density.
      std::vector<double> cuts{0.0, 0.5, 1.0, 2.0, upper};
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        auto g = [&](double x) { return gamma * std::exp(-gamma * x) * rn_derivative_f(d, ref, x); };
        mass += i == 0 ? oracle::gauss3_singular_left(g, cuts[i], cuts[i + 1]) : oracle::gauss3(g, cuts[i], cuts[i + 1]);
      }
      double atoms = 0.0;
      for (const auto& a : d.atoms()) atoms += a.mass;
      CAPTURE(d.name());
      CHECK(mass + atoms == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("property: tail infimum is nondecreasing in t and below sampled ratios") {
  oracle::Gen gen(77);
  for (const auto& d : continuous_battery()) {
    const double gamma = gen.uniform(0.3, 2.0);
    const auto ref = ReferenceMeasure::make(gamma, TimeMode::Continuous);
    // The infimum runs over the shrinking set (t, inf), so it can only grow with t.
    double prev = 0.0;
    for (double t = 0.0; t < 6.0; t += 0.25) {
      const double inf_t = tail_inf_f(d, ref, t);
      CAPTURE(d.name());
      CAPTURE(t);
      CHECK(inf_t >= prev * (1.0 - 1e-12));
      CHECK(inf_t >= 0.0);
      prev = inf_t;
      for (int k = 0; k < 20; ++k) {
        const double x = t + gen.uniform(1e-9, 8.0);
        CHECK(inf_t <= rn_derivative_f(d, ref, x) * (1.0 + 1e-9) + 1e-12);
      }
    }
  }
}

TEST_CASE("lattice pmf and geometric agree") {
  const auto g = D::lattice_geometric(0.4);
  std::vector<double> tab{0.0};
  for (int k = 1; k <= 60; ++k) tab.push_back(0.4 * std::pow(0.6, k - 1));
  const auto l = D::lattice_pmf(tab, 0.6);
  for (int k = 0; k < 80; ++k) CHECK(l.pmf(k) == doctest::Approx(g.pmf(k)).epsilon(1e-10));
  CHECK(moments(l).m1 == doctest::Approx(moments(g).m1).epsilon(1e-9));
}

TEST_CASE("cdf, survival and quantile are consistent") {
  for (const auto& d : continuous_battery()) {
    for (double p : {0.1, 0.5, 0.9, 0.999}) {
      const double x = d.quantile(p);
      CAPTURE(d.name());
      CHECK(d.cdf(x) >= p - 1e-9);
      CHECK(d.cdf(x) + d.survival(x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}
