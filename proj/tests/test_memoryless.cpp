#include "cpbound/memoryless.hpp"
#include "oracles.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace cpbound;
using D = InterarrivalDistribution;
using testing::code_of;

namespace {

ReferenceMeasure cont(double gamma) { return ReferenceMeasure::make(gamma, TimeMode::Continuous); }

// Brute-force tail infimum of the density ratio over a fine grid beyond t.
double brute_sigma(const std::function<double(double)>& density, double gamma, double t) {
  double best = std::numeric_limits<double>::infinity();
  for (double x = t + 1e-6; x < t + 400.0; x += 0.01) best = std::min(best, density(x) / (gamma * std::exp(-gamma * x)));
  return std::max(0.0, best) * std::exp(-gamma * t);
}

}  // namespace

TEST_CASE("closed-form profiles") {
  SUBCASE("exponential") {
    const auto p = build_profile(D::exponential(1.5), cont(1.5));
    for (double t : {0.0, 0.4, 3.0}) CHECK(p.sigma(t) == doctest::Approx(std::exp(-1.5 * t)).epsilon(1e-12));
    CHECK(p.c0() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.c1() == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
  }
  SUBCASE("hyperexponential at the slow rate") {
    const double p = 0.05;
    const auto prof = build_profile(D::hyperexponential({p, 1 - p}, {5.0, 1.0}), cont(1.0));
    for (double t : {0.0, 1.0, 4.0}) CHECK(prof.sigma(t) == doctest::Approx((1 - p) * std::exp(-t)).epsilon(1e-12));
    CHECK(prof.c0() == doctest::Approx(1 - p).epsilon(1e-9));
    CHECK(prof.c1() == doctest::Approx(1 - p).epsilon(1e-9));
  }
  SUBCASE("erlang two") {
    const double lam = 2.0;
    const auto p = build_profile(D::erlang(2, lam), cont(lam));
    for (double t : {0.0, 0.3, 2.0}) CHECK(p.sigma(t) == doctest::Approx(lam * t * std::exp(-lam * t)).epsilon(1e-12));
    CHECK(p.c0() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.c1() == doctest::Approx(2.0 / lam).epsilon(1e-9));
  }
  SUBCASE("lattice geometric") {
    const auto ref = ReferenceMeasure::make(0.3, TimeMode::Lattice);
    const auto p = build_profile(D::lattice_geometric(0.3), ref);
    for (int k = 0; k < 10; ++k) CHECK(p.sigma(k) == doctest::Approx(std::pow(0.7, k)).epsilon(1e-12));
    CHECK(p.c0() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.c1() == doctest::Approx(1.0 / 0.3).epsilon(1e-9));
  }
  SUBCASE("uniform is inapplicable") {
    const auto p = build_profile(D::uniform(0.0, 1.0), cont(1.0));
    CHECK(p.c0() == 0.0);
    CHECK_FALSE(p.applicable());
  }
}

TEST_CASE("profile constants agree with an independent quadrature") {
  oracle::Gen gen(5);
  for (int rep = 0; rep < 6; ++rep) {
    const double p = gen.uniform(0.05, 0.6), l1 = gen.uniform(3.0, 6.0), l2 = gen.uniform(0.5, 1.5);
    // Above the slow rate the ratio has an interior minimum; below it the tail infimum is 0.
    const double gamma = rep % 3 == 0 ? 0.8 * l2 : gen.uniform(1.0, 1.5) * l2;
    auto density = [&](double x) { return p * l1 * std::exp(-l1 * x) + (1 - p) * l2 * std::exp(-l2 * x); };
    const auto prof = build_profile(D::hyperexponential({p, 1 - p}, {l1, l2}), cont(gamma));
    CAPTURE(p);
    CAPTURE(gamma);
    for (double t : {0.0, 0.7, 2.5}) CHECK(prof.sigma(t) == doctest::Approx(brute_sigma(density, gamma, t)).epsilon(1e-4).scale(1e-8));
    const auto [c0, c1] = oracle::c0_c1([&](double t) { return prof.sigma(t); }, gamma, 80.0 / gamma);
    CHECK(prof.c0() == doctest::Approx(c0).epsilon(1e-7));
    CHECK(prof.c1() == doctest::Approx(c1).epsilon(1e-7));
  }
}

TEST_CASE("property: profile invariants") {
  oracle::Gen gen(9);
  const std::vector<D> laws{D::erlang(2, 1.0), D::erlang(3, 2.0), D::hyperexponential({0.2, 0.8}, {3.0, 0.7}),
                            D::weibull(0.7, 1.0), D::exponential(0.8).with_atoms({{1.0, 0.2}})};
  for (const auto& d : laws) {
    const double gamma = gen.uniform(0.3, 1.5);
    const auto p = build_profile(d, cont(gamma));
    CAPTURE(d.name());
    CAPTURE(gamma);
    CHECK(p.c0() >= 0.0);
    CHECK(p.c0() <= 1.0 + 1e-12);
    CHECK(p.c1() >= p.c0() / gamma * (1.0 - 1e-9));
    CHECK(p.c1() <= moments(d).m1 * (1.0 + 1e-9));
    double prev = 0.0;
    for (double t = 0.0; t < 8.0; t += 0.1) {
      CHECK(p.sigma(t) <= d.survival(t) + 1e-12);
      CHECK(p.G(t) >= prev * (1.0 - 1e-12));
      prev = p.G(t);
    }
  }
}

TEST_CASE("custom sigma is checked") {
  const auto d = D::erlang(2, 1.0);
  const auto ref = cont(1.0);
  // Valid: half the optimal sigma.
  const auto ok = custom_profile(d, ref, [](double t) { return 0.5 * t * std::exp(-t); });
  CHECK(ok.c0() == doctest::Approx(0.5).epsilon(1e-6));
  // G = e^t sigma must be nondecreasing.
  CHECK(code_of([&] { custom_profile(d, ref, [](double t) { return t < 1.0 ? 0.3 * t * std::exp(-t) : 0.0; }); }) ==
        ErrorCode::GNotMonotone);
  // An inflated sigma breaks sigma <= optimal.
  CHECK(code_of([&] { custom_profile(d, ref, [](double t) { return 1.5 * t * std::exp(-t); }); }) ==
        ErrorCode::SigmaExceedsBound);
  // Negative control: an exponential profile claimed for Erlang inflates c0.
  CHECK(code_of([&] { custom_profile(d, ref, [](double t) { return std::exp(-t); }); }) ==
        ErrorCode::SigmaExceedsBound);
}

TEST_CASE("joint sampler closed-form cases") {
  Rng rng(11);
  SUBCASE("exponential: zeta_hat is zero") {
    const auto d = D::exponential(1.0);
    JointSampler s(build_profile(d, cont(1.0)), d);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const auto draw = s(rng);
      CHECK(draw.zeta_hat == 0.0);
      CHECK(draw.reset);
      sum += draw.zeta;
    }
    CHECK(sum / 20000 == doctest::Approx(1.0).epsilon(0.03));
  }
  SUBCASE("erlang: chi is one and the pieces are exponential") {
    const auto d = D::erlang(2, 1.0);
    JointSampler s(build_profile(d, cont(1.0)), d);
    const int n = 40000;
    double a = 0.0, b = 0.0, ab = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto draw = s(rng);
      CHECK(draw.reset);
      a += draw.zeta_hat;
      b += draw.zeta - draw.zeta_hat;
      ab += draw.zeta_hat * (draw.zeta - draw.zeta_hat);
    }
    a /= n;
    b /= n;
    ab /= n;
    CHECK(std::abs(a - 1.0) < 4.0 / std::sqrt(n));
    CHECK(std::abs(b - 1.0) < 4.0 / std::sqrt(n));
    // Independence: covariance of two Exp(1) pieces is 0 (sd of the product about sqrt(3)).
    CHECK(std::abs(ab - a * b) < 4.0 * std::sqrt(3.0 / n));
  }
  SUBCASE("hyperexponential: reset with probability 1 - p and eta0 = 0") {
    const double p = 0.05;
    const auto d = D::hyperexponential({p, 1 - p}, {5.0, 1.0});
    JointSampler s(build_profile(d, cont(1.0)), d);
    const int n = 40000;
    int resets = 0;
    for (int i = 0; i < n; ++i) {
      const auto draw = s(rng);
      if (draw.reset) {
        ++resets;
        CHECK(draw.zeta_hat == 0.0);
      } else {
        CHECK(draw.zeta_hat == draw.zeta);
      }
    }
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(resets) / n - (1 - p)) < 4.0 * se);
  }
}

TEST_CASE("property: joint sampler preserves the marginal") {
  const std::vector<D> laws{D::erlang(2, 1.0), D::hyperexponential({0.3, 0.7}, {4.0, 1.0}), D::weibull(1.5, 1.0)};
  std::uint64_t seed = 100;
  for (const auto& d : laws) {
    const auto prof = build_profile(d, cont(1.0));
    JointSampler s(prof, d);
    Rng a(++seed), b(++seed);
    const int n = 100000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = s(a).zeta;
      y[i] = d.sample(b);
    }
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    // Two-sample Kolmogorov distance by merging.
    double dmax = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
      const double v = std::min(x[i], y[j]);
      while (i < x.size() && x[i] <= v) ++i;
      while (j < y.size() && y[j] <= v) ++j;
      dmax = std::max(dmax, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
    }
    CAPTURE(d.name());
    // 1% critical value for equal sample sizes.
    CHECK(dmax < 1.6276 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("property: conditional excess is exponential given zeta_hat <= t < zeta") {
  const auto d = D::erlang(2, 1.0);
  JointSampler s(build_profile(d, cont(1.0)), d);
  Rng rng(31);
  const int n = 200000;
  std::vector<JointDraw> draws(n);
  for (auto& dr : draws) dr = s(rng);
  for (double t : {0.5, 1.0, 2.0}) {
    int hits = 0;
    double sum = 0.0, sum2 = 0.0;
    for (const auto& dr : draws) {
      if (dr.zeta_hat <= t && dr.zeta > t) {
        ++hits;
        sum += dr.zeta - t;
        sum2 += (dr.zeta - t) * (dr.zeta - t);
      }
    }
    const double p_hat = static_cast<double>(hits) / n;
    const double sigma = t * std::exp(-t);
    CHECK(std::abs(p_hat - sigma) < 3.0 * std::sqrt(sigma * (1 - sigma) / n));
    const double mean = sum / hits;
    const double sd = std::sqrt(sum2 / hits - mean * mean);
    CHECK(std::abs(mean - 1.0) < 3.0 * sd / std::sqrt(hits));
  }
}

TEST_CASE("rate search") {
  const std::vector<double> grid{0.5, 1.0, 2.0};
  const auto e = optimize_gamma(D::exponential(1.0), 10.0, grid);
  CHECK(e.gamma_star == 1.0);
  CHECK(e.bound_star == doctest::Approx(0.0).epsilon(1e-12));
  const auto h = optimize_gamma(D::hyperexponential({0.05, 0.95}, {5.0, 1.0}), 5.0, grid);
  CHECK(h.gamma_star == 1.0);
  CHECK(h.totals.size() == 3);
  CHECK(h.bound_star == *std::min_element(h.totals.begin(), h.totals.end()));
  CHECK(code_of([&] { optimize_gamma(D::uniform(0.0, 1.0), 5.0, grid); }) == ErrorCode::AllInapplicable);
  CHECK(code_of([&] { optimize_gamma(D::exponential(1.0), 5.0, std::vector<double>{}); }) ==
        ErrorCode::InvalidArgument);
}
