#include "cpbound/bounds.hpp"
#include "cpbound/embedding.hpp"
#include "cpbound/validation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace cpbound;
using D = InterarrivalDistribution;

namespace {

ReferenceMeasure cont(double gamma) { return ReferenceMeasure::make(gamma, TimeMode::Continuous); }

BoundReport renewal(const D& d, double gamma, double t, const BoundOptions& opt = {}) {
  const auto m = moments(d);
  const auto ref = ReferenceMeasure::make(gamma, d.mode());
  return renewal_bound(build_profile(d, ref), m.m1, m.m2, t, opt);
}

BoundReport as_model(const D& d, double gamma, double t, const BoundOptions& opt = {}) {
  const auto m = MrppModel::renewal(d);
  const std::vector<double> mu{1.0};
  const auto prof = build_state_profiles(m, mu, ReferenceMeasure::make(gamma, d.mode()));
  return mrpp_bound(m, prof, mu, t, opt);
}

std::vector<D> battery() {
  return {D::hyperexponential({0.05, 0.95}, {5.0, 1.0}), D::hyperexponential({0.2, 0.8}, {3.0, 1.0}),
          D::hyperexponential({0.4, 0.6}, {2.0, 0.5}),   D::erlang(2, 1.0),
          D::exponential(0.7).with_atoms({{0.3, 0.1}}),  D::weibull(0.8, 1.0)};
}

}  // namespace

TEST_CASE("exponential gaps give a zero bound") {
  for (double t : {1.0, 10.0, 37.5}) {
    const auto r = renewal(D::exponential(1.0), 1.0, t);
    CHECK(r.total == doctest::Approx(0.0).scale(1e-12));
    CHECK(r.pi.kind == CompoundPoissonSpec::Kind::Geometric);
    CHECK(r.pi.c0 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.pi.norm == doctest::Approx(t).epsilon(1e-9));
    CHECK(as_model(D::exponential(1.0), 1.0, t).total == doctest::Approx(0.0).scale(1e-12));
  }
}

TEST_CASE("hyperexponential bound against the closed display") {
  const double p = 0.05, t = 5.0;
  const auto r = renewal(D::hyperexponential({p, 1 - p}, {5.0, 1.0}), 1.0, t);
  const double m1 = p / 5.0 + (1 - p), m2 = p * 2.0 / 25.0 + (1 - p) * 2.0;
  const double norm = t * (1 - p) / m1;
  const auto o = oracle::renewal_display(m1, m2, 1 - p, 1 - p, 1.0, t, oracle::h1_geometric(norm, 1 - p));
  CHECK(r.pi.norm == doctest::Approx(o.norm).epsilon(1e-10));
  CHECK(r.h1.value == doctest::Approx(o.h1).epsilon(1e-10));
  CHECK(r.first_term == doctest::Approx(o.first).epsilon(1e-9));
  CHECK(r.second_term == doctest::Approx(o.second).epsilon(1e-9));
  CHECK(r.total == doctest::Approx(o.total).epsilon(1e-9));
  CHECK_FALSE(r.low_quality);
}

TEST_CASE("property: renewal bound matches the display across rates and horizons") {
  oracle::Gen gen(3);
  for (int rep = 0; rep < 12; ++rep) {
    const double p = gen.uniform(0.02, 0.3), l1 = gen.uniform(2.0, 8.0), l2 = gen.uniform(0.5, 1.5);
    const double t = gen.uniform(1.0, 40.0);
    const D d = D::hyperexponential({p, 1 - p}, {l1, l2});
    const auto mo = moments(d);
    const auto r = renewal(d, l2, t);
    const double c0 = 1 - p, c1 = (1 - p) / l2;
    const auto o = oracle::renewal_display(mo.m1, mo.m2, c0, c1, l2, t, oracle::h1_geometric(t * c0 / mo.m1, c0));
    CAPTURE(rep);
    CHECK(r.total == doctest::Approx(o.total).epsilon(1e-8));
  }
}

TEST_CASE("erlang gaps at a long horizon give an uninformative bound") {
  const auto r = renewal(D::erlang(2, 1.0), 1.0, 4.0);
  CHECK(r.total >= 1.0);
  CHECK(r.capped_total == 1.0);
  CHECK(r.low_quality);
  const auto o = oracle::renewal_display(2.0, 6.0, 1.0, 2.0, 1.0, 4.0, oracle::h1_geometric(2.0, 1.0));
  CHECK(r.total == doctest::Approx(o.total).epsilon(1e-9));
}

TEST_CASE("single-state embedded coefficients") {
  const double p = 0.1, gamma = 1.0;
  const D d = D::hyperexponential({p, 1 - p}, {4.0, 1.0});
  const auto m = MrppModel::renewal(d);
  const std::vector<double> mu{1.0};
  const auto prof = build_state_profiles(m, mu, cont(gamma));
  const auto em = embedded_moments_limit(m, prof, mu);
  const auto mo = moments(d);
  const double c0 = prof[0].c0(), c1 = prof[0].c1();
  REQUIRE(c0 == doctest::Approx(1 - p).epsilon(1e-9));
  CHECK(em.h0(0) == doctest::Approx((mo.m1 - c0 / gamma) / c0).epsilon(1e-9));
  CHECK(em.ex == doctest::Approx(mo.m1 / c0).epsilon(1e-9));
  CHECK(em.h1(0) == doctest::Approx((mo.m2 - 2.0 * c1 / gamma) / c0).epsilon(1e-9));
  CHECK(em.h2(0) == doctest::Approx((mo.m1 - c1) * (mo.m1 - c0 / gamma) / (c0 * c0)).epsilon(1e-9));
  CHECK(em.h3(0) == doctest::Approx((mo.m1 - c0 / gamma) / (c0 * c0)).epsilon(1e-9));
  CHECK(em.h4(0) == doctest::Approx((mo.m1 - c1) / (c0 * c0)).epsilon(1e-9));
  for (std::size_t i = 1; i <= 10 && i <= em.masses.size(); ++i) {
    CHECK(em.masses[i - 1] == doctest::Approx(std::pow(1 - c0, i - 1.0) * c0).epsilon(1e-9));
  }
}

TEST_CASE("epsilon bookkeeping cancels in the limit") {
  const auto m = fixtures::two_state();
  const auto mu = validate_model(m).stationary;
  const auto prof = build_state_profiles(m, mu, cont(1.0));
  const auto em = embedded_moments_limit(m, prof, mu);
  const auto lim = limit_expectations(em);
  for (double eps : {1e-6, 1e-8}) {
    const auto e = expectations_at(em, eps);
    CHECK(e.ex / eps == doctest::Approx(lim.ex).epsilon(1e-4));
    CHECK(e.ey / eps == doctest::Approx(lim.ey).epsilon(1e-4));
    CHECK(e.exy / eps == doctest::Approx(lim.exy).epsilon(1e-4));
    CHECK(e.ex2 / eps == doctest::Approx(lim.ex2).epsilon(1e-4));
  }
  // Ratios entering the bound do not depend on the scale at all.
  const auto a = assemble_bound(lim, 5.0, false, false, std::nullopt);
  auto scaled = lim;
  for (double* v : {&scaled.ex, &scaled.ex2, &scaled.ey, &scaled.exy, &scaled.eu_upper, &scaled.eu_exact,
                    &scaled.mass_total, &scaled.mass_tail})
    *v *= 1e-3;
  for (auto& x : scaled.masses) x *= 1e-3;
  const auto b = assemble_bound(scaled, 5.0, false, false, std::nullopt);
  CHECK(a.total == doctest::Approx(b.total).epsilon(1e-12));
}

TEST_CASE("single-state model bound equals the renewal bound") {
  for (const auto& d : battery()) {
    for (double gamma : {1.0, 1.5}) {
      for (double t : {2.0, 10.0}) {
        const auto r = renewal(d, gamma, t);
        const auto m = as_model(d, gamma, t);
        CAPTURE(d.name());
        CAPTURE(gamma);
        CAPTURE(t);
        CHECK(m.total == doctest::Approx(r.total).epsilon(1e-9));
        CHECK(m.first_term == doctest::Approx(r.first_term).epsilon(1e-9));
        CHECK(m.pi.norm == doctest::Approx(r.pi.norm).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("lattice geometric renewal dominates the exact distance") {
  const auto r = renewal(D::lattice_geometric(0.1), 0.1, 50.0);
  const double exact = oracle::half_l1(oracle::binomial_vector(50, 0.1), oracle::poisson_vector(5.0, 200));
  CHECK(r.total >= exact);
  CHECK(r.total == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.pi.norm == doctest::Approx(5.0).epsilon(1e-9));
  // Same count through the model path.
  CHECK(as_model(D::lattice_geometric(0.1), 0.1, 50.0).total == doctest::Approx(r.total).epsilon(1e-9));
}

TEST_CASE("exact E(U) never exceeds the upper-bound variant") {
  BoundOptions exact;
  exact.exact_u = true;
  for (const auto& d : battery()) {
    const auto a = renewal(d, 1.0, 6.0), b = renewal(d, 1.0, 6.0, exact);
    CAPTURE(d.name());
    CHECK(b.total <= a.total * (1.0 + 1e-12));
    CHECK(b.u_variant == "exact");
  }
  const auto m = fixtures::two_state();
  const auto mu = validate_model(m).stationary;
  const auto prof = build_state_profiles(m, mu, cont(1.0));
  CHECK(mrpp_bound(m, prof, mu, 5.0, exact).total <= mrpp_bound(m, prof, mu, 5.0).total * (1.0 + 1e-12));
}

TEST_CASE("horizon scaling") {
  for (const auto& d : battery()) {
    const auto a = renewal(d, 1.0, 3.0), b = renewal(d, 1.0, 6.0), c = renewal(d, 1.0, 12.0);
    CAPTURE(d.name());
    CHECK(b.pi.norm == doctest::Approx(2.0 * a.pi.norm).epsilon(1e-12));
    CHECK(c.pi.norm == doctest::Approx(4.0 * a.pi.norm).epsilon(1e-12));
    CHECK(a.first_term == doctest::Approx(b.first_term).epsilon(1e-12));
    CHECK(b.second_term >= a.second_term * (1.0 - 1e-12));
    CHECK(c.second_term >= b.second_term * (1.0 - 1e-12));
  }
}

TEST_CASE("inapplicable laws") {
  CHECK(testing::code_of([] { renewal(D::uniform(0.0, 1.0), 1.0, 5.0); }) == ErrorCode::Inapplicable);
}

TEST_CASE("two-state expectations against the simulated embedded chain") {
  const auto m = fixtures::two_state();
  const auto mu = validate_model(m).stationary;
  const auto prof = build_state_profiles(m, mu, cont(1.0));
  const double eps = 0.05;
  const auto e = expectations_at(embedded_moments_limit(m, prof, mu), eps);
  const auto emb = build_embedding(m, prof, mu, eps);
  const auto s = cycle_statistics(*emb, 200000, 77);
  CHECK(std::abs(s.ex - e.ex) < 4.0 * s.ex_se);
  CHECK(std::abs(s.ex2 - e.ex2) < 4.0 * s.ex2_se);
  CHECK(std::abs(s.ey - e.ey) < 4.0 * s.ey_se);
  CHECK(std::abs(s.exy - e.exy) < 4.0 * s.exy_se);
  CHECK(std::abs(s.eu - e.eu_exact) < 4.0 * s.eu_se);
  CHECK(e.eu_exact <= e.eu_upper * (1.0 + 1e-12));
}

TEST_CASE("next-state law policies") {
  const auto m = fixtures::two_state();
  const auto ref = cont(1.0);
  const auto st = choose_mu(m, ref, "stationary-feasible", 5.0);
  const auto un = choose_mu(m, ref, "uniform", 5.0);
  const auto au = choose_mu(m, ref, "auto", 5.0);
  CHECK_FALSE(st.report);
  REQUIRE(au.report);
  const double st_total = mrpp_bound(m, st.profiles, st.mu, 5.0).total;
  const double un_total = mrpp_bound(m, un.profiles, un.mu, 5.0).total;
  CHECK(au.report->total <= std::min(st_total, un_total) * (1.0 + 1e-12));
  CHECK(testing::code_of([&] { choose_mu(m, ref, "nonsense", 5.0); }) == ErrorCode::InvalidArgument);
}
