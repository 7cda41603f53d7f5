#include "cpbound/bounds.hpp"

#include "cpbound/embedding.hpp"
#include "cpbound/error.hpp"
#include "cpbound/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpbound {
namespace {

void check_profiles(const MrppModel& m, std::span<const MemorylessProfile> profiles, std::span<const double> mu) {
  require(profiles.size() == m.size() && mu.size() == m.size(), ErrorCode::InvalidArgument,
          "need one profile and one mu entry per state");
  const double gamma = profiles.front().gamma();
  for (const auto& p : profiles) {
    require(p.gamma() == gamma && p.mode() == m.mode(), ErrorCode::InvalidArgument,
            "profiles must share the reference rate and the model mode");
  }
}

double lattice_epsilon(const BoundOptions& options, double gamma) {
  const double eps = options.epsilon.value_or(gamma);
  require(eps >= gamma && eps <= 1.0, ErrorCode::InvalidArgument, "lattice epsilon must lie in [gamma, 1]");
  return eps;
}

// Second moment of the memory-loss sojourn: exponential or geometric with mean epsilon / gamma.
double zero_sojourn_second_moment(TimeMode mode, double eps, double gamma) {
  const double d1 = eps / gamma;
  return mode == TimeMode::Lattice ? (2.0 - gamma / eps) * d1 * d1 : 2.0 * d1 * d1;
}

}  // namespace

EmbeddedMoments embedded_moments_limit(const MrppModel& m, std::span<const MemorylessProfile> profiles,
                                       std::span<const double> mu) {
  require(m.counts_all(), ErrorCode::InvalidModel, "restrict the model to its counted states first");
  require_valid(m);
  check_profiles(m, profiles, mu);
  const auto n = static_cast<Eigen::Index>(m.size());
  EmbeddedMoments e;
  e.mode = m.mode();
  e.gamma = profiles.front().gamma();
  e.mu.assign(mu.begin(), mu.end());
  const double gamma = e.gamma;
  Eigen::VectorXd muv(n);
  e.q.resize(n);
  e.c1.resize(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    muv(s) = mu[static_cast<std::size_t>(s)];
    e.q(s) = profiles[static_cast<std::size_t>(s)].c0();
    e.c1(s) = profiles[static_cast<std::size_t>(s)].c1();
  }
  require(e.q.maxCoeff() > 0.0, ErrorCode::Inapplicable, "every state has c0 = 0");

  const Eigen::MatrixXd& p = m.transition();
  e.M = p - e.q * muv.transpose();
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (e.M(s, j) < -1e-12) bad.emplace_back(static_cast<std::size_t>(s), static_cast<std::size_t>(j));
    }
  }
  if (!bad.empty()) {
    std::string msg = "mu is infeasible for transitions";
    for (const auto& [s, j] : bad) msg += " (" + m.names()[s] + "," + m.names()[j] + ")";
    throw Error(ErrorCode::InfeasibleMu, msg);
  }
  e.M = e.M.cwiseMax(0.0);

  Eigen::VectorXd em(n), em2(n);
  e.A.resize(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto ss = static_cast<std::size_t>(s);
    em(s) = m.state_mean(ss);
    em2(s) = m.state_second_moment(ss);
    for (Eigen::Index j = 0; j < n; ++j) {
      e.A(s, j) = p(s, j) * m.mean(ss, static_cast<std::size_t>(j)) - muv(j) * e.c1(s);
    }
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd mvec = em - e.q / gamma;
  Eigen::VectorXd m2vec = em2 - 2.0 * e.c1 / gamma;
  if (e.mode == TimeMode::Lattice) m2vec += e.q / gamma;

  const Eigen::MatrixXd i_m = Eigen::MatrixXd::Identity(n, n) - e.M;
  Eigen::MatrixXd rhs(n, 3);
  rhs << mvec, ones, m2vec;
  const Eigen::MatrixXd first = numeric::solve_refined(i_m, rhs);
  e.h0 = first.col(0);
  e.n = first.col(1);
  e.h1 = first.col(2);
  Eigen::MatrixXd rhs2(n, 4);
  rhs2 << e.A * e.h0, e.h0, e.A * e.n, e.A * ones;
  const Eigen::MatrixXd second = numeric::solve_refined(i_m, rhs2);
  e.h2 = second.col(0);
  e.h3 = second.col(1);
  e.h4 = second.col(2);
  e.w = second.col(3);
  e.spectral_radius = numeric::spectral_radius(e.M);

  e.ex = 1.0 / gamma + muv.dot(e.h0);
  e.ex2 = muv.dot(e.h1 + 2.0 * e.h2);
  e.ey = muv.dot(e.n);
  e.exy = muv.dot(e.h3 + e.h4);
  e.eu_upper = muv.dot(e.h0);
  e.eu_exact = muv.dot(e.w);

  // P(Y = i) / epsilon = mu' M^{i-1} q; the exact remaining tail is mu' M^i (I - M)^{-1} q.
  Eigen::VectorXd v = e.q;
  Eigen::VectorXd tail = numeric::solve_refined(i_m, e.q);
  e.mass_total = muv.dot(tail);
  constexpr std::size_t kMaxTerms = 1'000'000;
  for (std::size_t i = 1; i <= kMaxTerms; ++i) {
    e.masses.push_back(std::max(0.0, muv.dot(v)));
    v = e.M * v;
    tail = e.M * tail;
    e.mass_tail = std::max(0.0, muv.dot(tail));
    if (e.mass_tail < 1e-15 * e.mass_total) break;
  }
  return e;
}

EmbeddedExpectations expectations_at(const EmbeddedMoments& em, double eps) {
  require(eps > 0.0 && eps <= 1.0, ErrorCode::InvalidArgument, "epsilon must lie in (0, 1]");
  const double gamma = em.gamma;
  const Eigen::Map<const Eigen::VectorXd> muv(em.mu.data(), static_cast<Eigen::Index>(em.mu.size()));
  const double d1 = eps / gamma;
  const double d2 = zero_sojourn_second_moment(em.mode, eps, gamma);
  const double mh0 = muv.dot(em.h0);
  EmbeddedExpectations x;
  x.epsilon = eps;
  x.ex = d1 + eps * mh0;
  x.ex2 = d2 + 2.0 * d1 * eps * mh0 + eps * muv.dot(em.h1 + 2.0 * em.h2);
  x.ex_factorial = x.ex2 - x.ex;
  x.ey = eps * muv.dot(em.n);
  x.exy = d1 * x.ey + eps * muv.dot(em.h3 + em.h4);
  x.eu_upper = eps * d1 + eps * mh0;
  x.eu_exact = eps * d1 + eps * muv.dot(em.w);
  x.masses.reserve(em.masses.size());
  for (double v : em.masses) x.masses.push_back(eps * v);
  x.mass_total = eps * em.mass_total;
  x.mass_tail = eps * em.mass_tail;
  return x;
}

EmbeddedExpectations limit_expectations(const EmbeddedMoments& em) {
  EmbeddedExpectations x;
  x.epsilon = 0.0;
  x.ex = em.ex;
  x.ex2 = em.ex2;
  x.ex_factorial = em.ex2;
  x.ey = em.ey;
  x.exy = em.exy;
  x.eu_upper = em.eu_upper;
  x.eu_exact = em.eu_exact;
  x.masses = em.masses;
  x.mass_total = em.mass_total;
  x.mass_tail = em.mass_tail;
  return x;
}

BoundReport assemble_bound(const EmbeddedExpectations& e, double t, bool lattice, bool exact_u,
                           std::optional<double> geometric_c0) {
  require(t > 0.0, ErrorCode::InvalidArgument, "horizon t must be positive");
  require(e.ex > 0.0, ErrorCode::InvalidArgument, "E(X) must be positive");
  BoundReport r;
  r.t = t;
  r.u_variant = exact_u ? "exact" : "upper";
  r.expectations = e;
  if (geometric_c0) {
    r.pi = build_renewal_spec(*geometric_c0, t, e.ex * *geometric_c0 / e.mass_total);
  } else {
    std::vector<double> masses = e.masses;
    r.pi = build_mrpp_spec(t, e.ex, masses);
    r.pi.tail_bound += t / e.ex * e.mass_tail;
  }
  r.h1 = h1_bound(r.pi);
  // These are nonnegative; clamp cancellation noise such as E(X(X-1)) = -6e-15 for geometric gaps.
  const double x2 = std::max(0.0, lattice ? e.ex_factorial : e.ex2);
  r.first_term = 2.0 * std::max(0.0, exact_u ? e.eu_exact : e.eu_upper) / e.ex;
  r.second_factor = 3.0 * t * e.ey / e.ex;
  r.bracket_xy = std::max(0.0, e.exy) / e.ex;
  r.bracket_x2 = x2 * e.ey / (e.ex * e.ex);
  r.second_term = r.h1.value * r.second_factor * (r.bracket_xy + r.bracket_x2);
  r.total = r.first_term + r.second_term;
  r.capped_total = std::min(1.0, r.total);
  r.low_quality = r.total >= 1.0;
  return r;
}

BoundReport renewal_bound(const MemorylessProfile& profile, double m1, double m2, double t,
                          const BoundOptions& options) {
  require(profile.applicable(), ErrorCode::Inapplicable, "c0 = 0: the bound does not apply");
  require(t > 0.0, ErrorCode::InvalidArgument, "horizon t must be positive");
  require(m1 > 0.0 && std::isfinite(m1) && std::isfinite(m2), ErrorCode::NonFiniteMoment,
          "moments must be finite with positive mean");
  const double g = profile.gamma();
  const double c0 = profile.c0();
  const double c1 = profile.c1();
  const bool lattice = profile.mode() == TimeMode::Lattice;

  // One-state specialisation of the first-passage solutions.
  const double h0 = (m1 - c0 / g) / c0;
  const double a = m1 - c1;
  const double h1 = (m2 - 2.0 * c1 / g + (lattice ? c0 / g : 0.0)) / c0;
  const double h2 = a * h0 / c0;
  const double h3 = h0 / c0;
  const double h4 = a / (c0 * c0);
  const double w = a / c0;

  BoundReport r;
  if (lattice) {
    const double eps = lattice_epsilon(options, g);
    EmbeddedExpectations e;
    const double d1 = eps / g;
    e.epsilon = eps;
    e.ex = d1 + eps * h0;
    e.ex2 = zero_sojourn_second_moment(TimeMode::Lattice, eps, g) + 2.0 * d1 * eps * h0 + eps * (h1 + 2.0 * h2);
    e.ex_factorial = e.ex2 - e.ex;
    e.ey = eps / c0;
    e.exy = d1 * e.ey + eps * (h3 + h4);
    e.eu_upper = eps * d1 + eps * h0;
    e.eu_exact = eps * d1 + eps * w;
    e.mass_total = eps;
    r = assemble_bound(e, t, true, options.exact_u, c0);
    r.epsilon = eps;
  } else {
    EmbeddedExpectations e;
    e.ex = m1 / c0;
    e.ex2 = h1 + 2.0 * h2;
    e.ex_factorial = e.ex2;
    e.ey = 1.0 / c0;
    e.exy = h3 + h4;
    e.eu_upper = h0;
    e.eu_exact = w;
    e.mass_total = 1.0;
    r.expectations = e;
    r.t = t;
    r.u_variant = options.exact_u ? "exact" : "upper";
    r.pi = build_renewal_spec(c0, t, m1);
    r.h1 = h1_bound(r.pi);
    const double s1 = (m1 - c0 / g) / c0;
    const double s2 = (m1 - c1) / c0;
    const double s3 = (m2 - 2.0 * c1 / g) / m1;
    const double s4 = 2.0 * (m1 - c1) * (m1 - c0 / g) / (c0 * m1);
    r.summands = {{"mean_gap", s1}, {"mean_excess", s2}, {"second_moment", s3}, {"cross", s4}};
    r.second_factor = 3.0 * t / m1;
    r.bracket_xy = (s1 + s2) / m1;
    r.bracket_x2 = (s3 + s4) / m1;
    r.second_term = r.h1.value * 3.0 * t / (m1 * m1) * (s1 + s2 + s3 + s4);
    r.first_term = options.exact_u ? 2.0 * (m1 - c1) / m1 : 2.0 * (m1 - c0 / g) / m1;
    r.total = r.first_term + r.second_term;
    r.capped_total = std::min(1.0, r.total);
    r.low_quality = r.total >= 1.0;
  }
  r.kind = "renewal";
  r.mode = profile.mode();
  r.gamma = g;
  r.mu = {1.0};
  r.c0 = {c0};
  r.c1 = {c1};
  r.mean = m1;
  r.second_moment = m2;
  r.spectral_radius = 1.0 - c0;
  return r;
}

BoundReport mrpp_bound(const MrppModel& m, std::span<const MemorylessProfile> profiles, std::span<const double> mu,
                       double t, const BoundOptions& options) {
  check_profiles(m, profiles, mu);
  require(t > 0.0, ErrorCode::InvalidArgument, "horizon t must be positive");
  require_feasible(m, profiles, mu);
  const EmbeddedMoments em = embedded_moments_limit(m, profiles, mu);
  const bool lattice = m.mode() == TimeMode::Lattice;
  std::optional<double> eps;
  EmbeddedExpectations e;
  if (lattice) {
    eps = lattice_epsilon(options, em.gamma);
    e = expectations_at(em, *eps);
  } else {
    e = limit_expectations(em);
  }
  std::optional<double> geometric;
  if (m.size() == 1) geometric = em.q(0);
  BoundReport r = assemble_bound(e, t, lattice, options.exact_u, geometric);
  r.kind = "mrpp";
  r.mode = m.mode();
  r.gamma = em.gamma;
  r.epsilon = eps;
  r.mu = em.mu;
  for (const auto& p : profiles) {
    r.c0.push_back(p.c0());
    r.c1.push_back(p.c1());
  }
  const auto diag = validate_model(m);
  r.mean = diag.mean_sojourn;
  r.spectral_radius = em.spectral_radius;
  return r;
}

MuChoice choose_mu(const MrppModel& m, const ReferenceMeasure& ref, const std::string& policy, double t,
                   const BoundOptions& options, const NumericConfig& config) {
  const std::size_t n = m.size();
  std::vector<std::pair<std::string, std::vector<double>>> candidates;
  const auto stationary = stationary_distribution(m.transition());
  if (policy == "stationary-feasible" || policy == "auto") candidates.emplace_back("stationary-feasible", stationary);
  if (policy == "uniform" || policy == "auto") candidates.emplace_back("uniform", std::vector<double>(n, 1.0 / n));
  if (policy == "auto" && n > 1) {
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> unit(n, 0.0);
      unit[j] = 1.0;
      candidates.emplace_back("unit:" + m.names()[j], unit);
    }
  }
  require(!candidates.empty(), ErrorCode::InvalidArgument, "unknown mu policy '" + policy + "'");

  std::optional<MuChoice> best;
  for (auto& [name, mu] : candidates) {
    auto profiles = build_state_profiles(m, mu, ref, config);
    if (policy != "auto") {
      MuChoice c{mu, name, std::move(profiles), std::nullopt};
      return c;
    }
    try {
      BoundReport r = mrpp_bound(m, profiles, mu, t, options);
      if (!best || r.total < best->report->total) best = MuChoice{mu, name, std::move(profiles), std::move(r)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Inapplicable) throw;
    }
  }
  require(best.has_value(), ErrorCode::AllInapplicable, "no candidate mu gives c0 > 0 in any state");
  return *best;
}

}  // namespace cpbound
