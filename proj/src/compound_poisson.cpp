#include "cpbound/compound_poisson.hpp"

#include "cpbound/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cpbound {

double CompoundPoissonSpec::pi(std::size_t i) const {
  if (i == 0) return 0.0;
  if (kind == Kind::Geometric) return norm * std::pow(1.0 - c0, static_cast<double>(i - 1)) * c0;
  return i <= finite.size() ? finite[i - 1] : 0.0;
}

std::string_view to_string(CompoundPoissonSpec::Kind kind) noexcept {
  return kind == CompoundPoissonSpec::Kind::Geometric ? "geometric" : "finite";
}

CompoundPoissonSpec build_renewal_spec(double c0, double t, double mean) {
  require(c0 > 0.0, ErrorCode::ZeroC0, "c0 = 0: no compound Poisson approximation is available");
  require(c0 <= 1.0 + 1e-12, ErrorCode::InvalidArgument, "c0 must lie in (0, 1]");
  require(t > 0.0 && mean > 0.0 && std::isfinite(mean), ErrorCode::InvalidArgument, "t and mean must be positive");
  CompoundPoissonSpec s;
  s.kind = CompoundPoissonSpec::Kind::Geometric;
  s.c0 = std::min(c0, 1.0);
  s.norm = t * s.c0 / mean;
  s.lambda = s.norm / s.c0;
  s.theta = 2.0 * (1.0 - s.c0) / s.c0;
  return s;
}

CompoundPoissonSpec build_finite_spec(std::vector<double> pi) {
  CompoundPoissonSpec s;
  s.kind = CompoundPoissonSpec::Kind::Finite;
  double total = 0.0;
  for (double v : pi) {
    require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidArgument, "pi entries must be nonnegative");
    total += v;
  }
  // Drop the trailing tail once it is negligible relative to ||pi||.
  double tail = 0.0;
  while (!pi.empty() && tail + pi.back() < 1e-12 * total) {
    tail += pi.back();
    pi.pop_back();
  }
  s.finite = std::move(pi);
  s.tail_bound = tail;
  double lambda = 0.0, second = 0.0;
  for (std::size_t i = 0; i < s.finite.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    s.norm += s.finite[i];
    lambda += k * s.finite[i];
    second += k * (k - 1.0) * s.finite[i];
  }
  s.lambda = lambda;
  s.theta = lambda > 0.0 ? second / lambda : 0.0;
  return s;
}

CompoundPoissonSpec build_mrpp_spec(double t, double ex, std::span<const double> masses) {
  require(t > 0.0 && ex > 0.0 && std::isfinite(ex), ErrorCode::InvalidArgument, "t and E(X) must be positive");
  double total = 0.0;
  for (double m : masses) total += m;
  require(total <= 1.0 + 1e-9, ErrorCode::InvalidArgument, "cluster size masses exceed 1");
  require(total > 0.0, ErrorCode::ZeroC0, "cluster size masses vanish");
  std::vector<double> pi(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) pi[i] = t / ex * masses[i];
  return build_finite_spec(std::move(pi));
}

std::vector<double> pmf_vector(const CompoundPoissonSpec& spec, std::size_t n_max) {
  std::vector<double> g(n_max + 1, 0.0);
  g[0] = 1.0;
  const std::size_t k_max = spec.kind == CompoundPoissonSpec::Kind::Geometric ? n_max : spec.finite.size();
  std::vector<double> weights(std::min(k_max, n_max) + 1, 0.0);  // i * pi_i
  for (std::size_t i = 1; i < weights.size(); ++i) weights[i] = static_cast<double>(i) * spec.pi(i);
  double log_scale = 0.0;
  constexpr double kBig = 1e250;
  for (std::size_t n = 1; n <= n_max; ++n) {
    double acc = 0.0;
    const std::size_t top = std::min(n, weights.size() - 1);
    for (std::size_t i = 1; i <= top; ++i) acc += weights[i] * g[n - i];
    g[n] = acc / static_cast<double>(n);
    if (g[n] > kBig) {
      for (std::size_t j = 0; j <= n; ++j) g[j] /= kBig;
      log_scale += std::log(kBig);
    }
  }
  const double factor = std::exp(log_scale - spec.norm);
  for (double& v : g) v *= factor;
  return g;
}

double pmf(const CompoundPoissonSpec& spec, std::size_t n) { return pmf_vector(spec, n)[n]; }

std::int64_t sample_compound(const CompoundPoissonSpec& spec, Rng& rng) {
  if (spec.norm <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> pois(spec.norm);
  const std::int64_t u = pois(rng);
  std::int64_t total = 0;
  if (spec.kind == CompoundPoissonSpec::Kind::Geometric) {
    for (std::int64_t i = 0; i < u; ++i) total += sample_geometric(rng, spec.c0);
    return total;
  }
  std::vector<double> cum(spec.finite.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cum.size(); ++i) cum[i] = acc += spec.finite[i];
  for (std::int64_t i = 0; i < u; ++i) {
    const double v = uniform01(rng) * acc;
    const auto it = std::lower_bound(cum.begin(), cum.end(), v);
    total += static_cast<std::int64_t>(std::min<std::size_t>(it - cum.begin(), cum.size() - 1)) + 1;
  }
  return total;
}

SteinConstant h1_bound(const CompoundPoissonSpec& spec) {
  require(spec.norm > 0.0, ErrorCode::InvalidArgument, "H1 needs ||pi|| > 0");
  SteinConstant h;
  const double pi1 = spec.pi(1);
  const double pi2 = spec.pi(2);
  h.general = (pi1 > 1.0 ? 1.0 / pi1 : 1.0) * std::exp(spec.norm);
  h.value = h.general;
  h.regime = "general";

  if (spec.kind == CompoundPoissonSpec::Kind::Geometric) {
    h.monotone_holds = spec.c0 >= 0.5;
    h.verified_range = 0;
  } else {
    // Checked on the carried support; beyond it the condition is not claimed.
    h.monotone_holds = false;
    h.verified_range = spec.finite.size();
  }
  if (h.monotone_holds) {
    const double d = pi1 - 2.0 * pi2;
    h.monotone = 1.0;
    if (d > 0.0) h.monotone = std::min(1.0, (1.0 / d) * (1.0 / (4.0 * d) + std::max(0.0, std::log(2.0 * d))));
    if (h.monotone < h.value) {
      h.value = h.monotone;
      h.regime = "monotone";
    }
  }
  // Geometric: theta < 1/2 is c0 > 4/5; tested on c0 so rounding in theta cannot move the boundary.
  h.theta_holds = spec.kind == CompoundPoissonSpec::Kind::Geometric ? spec.c0 > 0.8 : spec.theta < 0.5;
  if (h.theta_holds) {
    h.theta_value = 1.0 / ((1.0 - 2.0 * spec.theta) * spec.lambda);
    if (h.theta_value < h.value) {
      h.value = h.theta_value;
      h.regime = "theta";
    }
  }
  return h;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  double sp = 0.0, sq = 0.0;
  for (double v : p) {
    require(v >= 0.0, ErrorCode::NotNormalized, "pmf entries must be nonnegative");
    sp += v;
  }
  for (double v : q) {
    require(v >= 0.0, ErrorCode::NotNormalized, "pmf entries must be nonnegative");
    sq += v;
  }
  require(std::abs(sp - 1.0) <= 1e-8 && std::abs(sq - 1.0) <= 1e-8, ErrorCode::NotNormalized,
          "pmf does not sum to 1 within 1e-8");
  const std::size_t n = std::max(p.size(), q.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    l1 += std::abs(a - b);
  }
  return std::min(1.0, 0.5 * l1 + 0.5 * std::abs((1.0 - sp) - (1.0 - sq)));
}

}  // namespace cpbound
