#include "cpbound/memoryless.hpp"

#include "cpbound/bounds.hpp"
#include "cpbound/error.hpp"
#include "cpbound/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace cpbound {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Branch with an owned copy of its law, so that sigma closures outlive the caller's model.
struct OwnedBranch {
  double ratio;  // P(s,s') / mu(s')
  InterarrivalDistribution law;
};

double single_sigma(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double ratio, double t) {
  if (t < 0.0 || ratio <= 0.0) return 0.0;
  if (ref.mode == TimeMode::Lattice) {
    const double k = std::floor(t);
    if (ref.gamma >= 1.0) return k < 1.0 ? ratio * rn_derivative_f(d, ref, 1.0) : 0.0;
    const double li = log_tail_inf_f(d, ref, k);
    if (li == -kInf) return 0.0;
    return std::min(1.0, ratio * std::exp(li + k * std::log1p(-ref.gamma)));
  }
  const double li = log_tail_inf_f(d, ref, t);
  if (li == -kInf) return 0.0;
  return std::min(1.0, ratio * std::exp(li - ref.gamma * t));
}

std::function<double(double)> make_min_sigma(std::vector<OwnedBranch> branches, ReferenceMeasure ref) {
  auto shared = std::make_shared<const std::vector<OwnedBranch>>(std::move(branches));
  return [shared, ref](double t) {
    double best = kInf;
    for (const OwnedBranch& b : *shared) best = std::min(best, single_sigma(b.law, ref, b.ratio, t));
    return best == kInf ? 0.0 : best;
  };
}

double horizon_for(std::span<const Branch> branches, double level) {
  double hi = 0.0;
  for (const Branch& b : branches) {
    if (b.prob > 0.0 && b.law) hi = std::max(hi, b.law->quantile(level));
  }
  return hi;
}

// c0 = gamma * int sigma, c1 = gamma * int t sigma(t) dt; lattice: gamma * sum sigma(i), gamma * sum (i+1) sigma(i).
std::pair<double, double> integrate_sigma(const std::function<double(double)>& sigma, std::span<const Branch> branches,
                                          const ReferenceMeasure& ref, const NumericConfig& config) {
  const double gamma = ref.gamma;
  if (ref.mode == TimeMode::Lattice) {
    const double last = horizon_for(branches, 1.0 - 1e-15) + 1.0;
    double c0 = 0.0, c1 = 0.0;
    for (double i = 0.0; i <= last; i += 1.0) {
      const double s = sigma(i);
      c0 += s;
      c1 += (i + 1.0) * s;
    }
    return {gamma * c0, gamma * c1};
  }
  const double end = horizon_for(branches, 1.0 - 1e-14);
  std::vector<double> pieces{0.0};
  for (const Branch& b : branches) {
    if (b.prob <= 0.0 || !b.law) continue;
    for (double x : b.law->breakpoints(gamma)) {
      if (x > 0.0 && x < end) pieces.push_back(x);
    }
  }
  // Extra cuts keyed to the decay scale of sigma.
  for (double x = 1.0 / gamma; x < end; x *= 2.0) pieces.push_back(x);
  pieces.push_back(end);
  std::sort(pieces.begin(), pieces.end());
  pieces.erase(std::unique(pieces.begin(), pieces.end()), pieces.end());
  const double tol = config.quad_tol / gamma;
  const double i0 = numeric::integrate_pieces(sigma, pieces, tol);
  const double i1 = numeric::integrate_pieces([&](double t) { return t * sigma(t); }, pieces, tol);
  return {gamma * i0, gamma * i1};
}

// Closed forms for a single law scaled by `ratio`; nullopt when quadrature is needed.
std::optional<std::pair<double, double>> closed_form_constants(const InterarrivalDistribution& d,
                                                               const ReferenceMeasure& ref, double ratio) {
  const double gamma = ref.gamma;
  if (!d.family() || d.ac_weight() <= 0.0) return std::pair{0.0, 0.0};
  if (ref.mode == TimeMode::Lattice) {
    if (gamma >= 1.0) {
      const double s0 = ratio * rn_derivative_f(d, ref, 1.0);
      return std::pair{s0, s0};
    }
    if (const auto* g = std::get_if<LatticeGeometric>(&*d.family())) {
      if (g->p > gamma) return std::pair{0.0, 0.0};
      return std::pair{ratio, ratio / g->p};
    }
    return std::nullopt;
  }
  if (std::holds_alternative<Uniform>(*d.family())) return std::pair{0.0, 0.0};
  const auto shape = tail_shape(d, ref);
  if (!shape) return std::nullopt;
  if (!std::isfinite(shape->x_star)) return std::pair{ratio * shape->f_star, ratio * shape->f_star / gamma};
  const double x = shape->x_star;
  const double e = std::exp(-gamma * x);
  const double c0 = shape->f_star * (1.0 - e) + d.survival_ac(x);
  const double c1 = shape->f_star * (1.0 - e * (1.0 + gamma * x)) / gamma + d.partial_moment_ac(x);
  return std::pair{ratio * c0, ratio * c1};
}

// NumericDensity: quadrature on the knots, analytic beyond the last knot when the tail is usable.
std::pair<double, double> numeric_density_constants(const InterarrivalDistribution& d, const ReferenceMeasure& ref,
                                                    double ratio, const NumericConfig& config) {
  const auto& nd = std::get<NumericDensity>(*d.family());
  const double gamma = ref.gamma;
  auto sigma = [&](double t) { return single_sigma(d, ref, ratio, t); };
  std::vector<double> pieces{0.0};
  pieces.insert(pieces.end(), nd.x.begin(), nd.x.end());
  std::sort(pieces.begin(), pieces.end());
  pieces.erase(std::unique(pieces.begin(), pieces.end()), pieces.end());
  const double tol = config.quad_tol / gamma;
  double c0 = gamma * numeric::integrate_pieces(sigma, pieces, tol);
  double c1 = gamma * numeric::integrate_pieces([&](double t) { return t * sigma(t); }, pieces, tol);
  const double xn = nd.x.back();
  if (tail_inf_f(d, ref, xn) > 0.0) {
    c0 += ratio * d.survival_ac(xn);
    c1 += ratio * d.partial_moment_ac(xn);
  }
  return {c0, c1};
}

std::vector<OwnedBranch> active_branches(std::span<const Branch> branches, std::span<const double> mu) {
  require(branches.size() == mu.size(), ErrorCode::InvalidArgument, "one branch per next state is required");
  std::vector<OwnedBranch> out;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (mu[j] <= 0.0) continue;
    if (branches[j].prob <= 0.0 || !branches[j].law) {
      // A charged state that cannot be reached makes sigma vanish.
      out.clear();
      out.push_back({0.0, InterarrivalDistribution::exponential(1.0)});
      return out;
    }
    out.push_back({branches[j].prob / mu[j], *branches[j].law});
  }
  require(!out.empty(), ErrorCode::InvalidArgument, "mu must put mass on at least one state");
  return out;
}

void check_mu(std::span<const double> mu) {
  double total = 0.0;
  for (double m : mu) {
    require(m >= 0.0 && std::isfinite(m), ErrorCode::InvalidArgument, "mu entries must be nonnegative");
    total += m;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "mu must sum to 1");
}

}  // namespace

MemorylessProfile::MemorylessProfile(ReferenceMeasure ref, std::function<double(double)> sigma, double c0,
                                     double c1, bool optimal)
    : ref_(ref), sigma_(std::move(sigma)), c0_(std::clamp(c0, 0.0, 1.0)), c1_(std::max(0.0, c1)),
      optimal_(optimal) {}

double MemorylessProfile::sigma(double t) const {
  if (t < 0.0) return 0.0;
  return scale_ * sigma_(t);
}

double MemorylessProfile::G(double t) const {
  const double s = sigma(t);
  if (s <= 0.0) return 0.0;
  if (ref_.mode == TimeMode::Lattice) {
    return s * std::exp(-std::floor(t) * std::log1p(-std::min(ref_.gamma, 1.0 - 1e-300)));
  }
  return s * std::exp(ref_.gamma * t);
}

MemorylessProfile MemorylessProfile::scaled(double factor) const {
  require(factor >= 0.0 && factor <= 1.0, ErrorCode::InvalidArgument, "shrink factor must lie in [0, 1]");
  MemorylessProfile out = *this;
  out.scale_ *= factor;
  out.c0_ *= factor;
  out.c1_ *= factor;
  out.optimal_ = optimal_ && factor == 1.0;
  if (!out.optimal_) out.mu_.clear();
  return out;
}

MemorylessProfile build_joint_profile(std::span<const Branch> branches, std::span<const double> mu,
                                      const ReferenceMeasure& ref, const NumericConfig& config) {
  check_mu(mu);
  for (const Branch& b : branches) {
    if (b.prob > 0.0 && b.law) {
      require(b.law->mode() == ref.mode, ErrorCode::ModeMismatch, "sojourn law and reference differ in mode");
    }
  }
  auto active = active_branches(branches, mu);
  std::optional<std::pair<double, double>> constants;
  if (active.size() == 1) {
    const OwnedBranch& b = active.front();
    constants = closed_form_constants(b.law, ref, b.ratio);
    if (!constants && ref.mode == TimeMode::Continuous && b.law.family() &&
        std::holds_alternative<NumericDensity>(*b.law.family())) {
      constants = numeric_density_constants(b.law, ref, b.ratio, config);
    }
  }
  auto sigma = make_min_sigma(std::move(active), ref);
  if (!constants) constants = integrate_sigma(sigma, branches, ref, config);
  MemorylessProfile out(ref, std::move(sigma), constants->first, constants->second, true);
  out.set_built_for_mu({mu.begin(), mu.end()});
  return out;
}

MemorylessProfile build_profile(const InterarrivalDistribution& d, const ReferenceMeasure& ref,
                                const NumericConfig& config) {
  const Branch b{1.0, &d};
  const double mu = 1.0;
  return build_joint_profile(std::span(&b, 1), std::span(&mu, 1), ref, config);
}

std::vector<double> evaluation_grid(std::span<const Branch> branches, const ReferenceMeasure& ref,
                                    const NumericConfig& config) {
  if (ref.mode == TimeMode::Lattice) {
    const double last = horizon_for(branches, 1.0 - 1e-13) + 1.0;
    require(last < 5e6, ErrorCode::InvalidArgument, "lattice support too long to tabulate");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(last) + 1);
    for (double i = 0.0; i <= last; i += 1.0) grid.push_back(i);
    return grid;
  }
  const double knee = std::max(horizon_for(branches, config.tail_quantile), 1e-12);
  const std::size_t linear = config.grid_points * 3 / 4;
  auto grid = numeric::make_grid(knee, linear, config.grid_points - linear, config.tail_factor);
  const double end = grid.back();
  for (const Branch& b : branches) {
    if (b.prob <= 0.0 || !b.law) continue;
    for (double x : b.law->breakpoints(ref.gamma)) {
      if (x > 0.0 && x < end) grid.push_back(x);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

MemorylessProfile custom_profile(std::span<const Branch> branches, std::span<const double> mu,
                                 const ReferenceMeasure& ref, std::function<double(double)> sigma,
                                 const NumericConfig& config) {
  const MemorylessProfile best = build_joint_profile(branches, mu, ref, config);
  MemorylessProfile candidate(ref, sigma, 0.0, 0.0, false);
  const auto grid = evaluation_grid(branches, ref, config);
  double prev_g = 0.0;
  for (double t : grid) {
    const double s = sigma(t);
    require(std::isfinite(s) && s >= 0.0 && s <= 1.0, ErrorCode::InvalidArgument,
            "custom sigma must take values in [0, 1]");
    const double cap = best.sigma(t);
    // Once the optimal sigma underflows, G carries no information.
    if (cap < 1e-280) continue;
    const double g = candidate.G(t);
    require(g >= prev_g * (1.0 - 1e-12), ErrorCode::GNotMonotone,
            "G(t) decreases near t = " + std::to_string(t));
    prev_g = std::max(prev_g, g);
    require(s <= cap * (1.0 + 1e-9) + 1e-15, ErrorCode::SigmaExceedsBound,
            "sigma exceeds the optimal value near t = " + std::to_string(t));
  }
  const auto [c0, c1] = integrate_sigma(sigma, branches, ref, config);
  return MemorylessProfile(ref, std::move(sigma), c0, c1, false);
}

MemorylessProfile custom_profile(const InterarrivalDistribution& d, const ReferenceMeasure& ref,
                                 std::function<double(double)> sigma, const NumericConfig& config) {
  const Branch b{1.0, &d};
  const double mu = 1.0;
  return custom_profile(std::span(&b, 1), std::span(&mu, 1), ref, std::move(sigma), config);
}

// ---------------------------------------------------------------------------

JointSampler::JointSampler(const MemorylessProfile& profile, const InterarrivalDistribution& d,
                           const NumericConfig& config)
    : JointSampler(profile, std::vector<Branch>{{1.0, &d}}, std::vector<double>{1.0}, config) {}

JointSampler::JointSampler(const MemorylessProfile& profile, std::vector<Branch> branches, std::vector<double> mu,
                           const NumericConfig& config, double reset_multiplier)
    : ref_(profile.reference()), branches_(std::move(branches)), mu_(std::move(mu)) {
  require(branches_.size() == mu_.size(), ErrorCode::InvalidArgument, "one branch per next state is required");
  require(reset_multiplier >= 0.0, ErrorCode::InvalidArgument, "reset multiplier must be nonnegative");
  const double gamma = ref_.gamma;
  const bool lattice = ref_.mode == TimeMode::Lattice;
  const double c0 = profile.c0();
  reset_prob_ = std::min(1.0, reset_multiplier * c0);

  double acc = 0.0;
  for (double m : mu_) mu_cum_.push_back(acc += m);

  dec_.chi_prob = reset_prob_;
  dec_.grid = evaluation_grid(branches_, ref_, config);
  const auto& grid = dec_.grid;
  const std::size_t n = grid.size();

  // Running gamma * int_0^t sigma (lattice: gamma * sum_{i < t} sigma(i)).
  std::vector<double> sig(n), cum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) sig[i] = profile.sigma(grid[i]);
  for (std::size_t i = 1; i < n; ++i) {
    double piece;
    if (lattice) {
      piece = sig[i - 1];
    } else {
      const double a = grid[i - 1], b = grid[i];
      piece = (b - a) / 6.0 * (sig[i - 1] + 4.0 * profile.sigma(0.5 * (a + b)) + sig[i]);
    }
    cum[i] = cum[i - 1] + gamma * piece;
  }

  dec_.eta0_cdf.resize(n);
  double run = 0.0;
  for (std::size_t i = 0; i < n; ++i) dec_.eta0_cdf[i] = run = std::max(run, sig[i] + cum[i]);
  if (run > 0.0) {
    for (double& v : dec_.eta0_cdf) v /= run;
  }

  const std::size_t k = branches_.size();
  dec_.eta2_mass.assign(k, 0.0);
  dec_.eta2_cdf.assign(k, {});
  atom_share_.assign(k, 0.0);
  continue_cum_.assign(k, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const Branch& b = branches_[j];
    if (b.prob > 0.0 && b.law) {
      const double drain = reset_multiplier * mu_[j];
      double atom_mass = 0.0;
      for (const Atom& a : b.law->atoms()) atom_mass += a.mass;
      const double mass = std::max(0.0, b.prob - drain * c0);
      dec_.eta2_mass[j] = mass;
      if (mass > 0.0) atom_share_[j] = std::min(1.0, b.prob * atom_mass / mass);
      auto& cdf = dec_.eta2_cdf[j];
      cdf.resize(n);
      double best = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double base = lattice ? b.law->cdf(grid[i]) : b.law->ac_weight() - b.law->survival_ac(grid[i]);
        cdf[i] = best = std::max(best, b.prob * base - drain * cum[i]);
      }
      if (best > 0.0) {
        for (double& v : cdf) v /= best;
      }
    }
    continue_cum_[j] = total += dec_.eta2_mass[j];
  }
}

double JointSampler::invert(const std::vector<double>& cdf, double u) const {
  const auto& grid = dec_.grid;
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.begin()) return grid.front();
  if (it == cdf.end()) return grid.back();
  const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (ref_.mode == TimeMode::Lattice) return grid[i];
  const double lo = cdf[i - 1], hi = cdf[i];
  const double w = hi > lo ? (u - lo) / (hi - lo) : 1.0;
  return grid[i - 1] + w * (grid[i] - grid[i - 1]);
}

double JointSampler::sample_eta0(Rng& rng) const { return invert(dec_.eta0_cdf, uniform01(rng)); }

std::pair<double, std::size_t> JointSampler::sample_continue(Rng& rng) const {
  const double total = continue_cum_.empty() ? 0.0 : continue_cum_.back();
  require(total > 0.0, ErrorCode::InvalidArgument, "continue branch has zero mass");
  const double u = uniform01(rng) * total;
  std::size_t j = static_cast<std::size_t>(std::upper_bound(continue_cum_.begin(), continue_cum_.end(), u) -
                                           continue_cum_.begin());
  j = std::min(j, continue_cum_.size() - 1);
  while (dec_.eta2_mass[j] <= 0.0 && j > 0) --j;
  const auto* law = branches_[j].law;
  if (atom_share_[j] > 0.0 && uniform01(rng) < atom_share_[j]) {
    double mass = 0.0;
    for (const Atom& a : law->atoms()) mass += a.mass;
    double v = uniform01(rng) * mass;
    for (const Atom& a : law->atoms()) {
      if ((v -= a.mass) <= 0.0) return {a.location, j};
    }
    return {law->atoms().back().location, j};
  }
  return {invert(dec_.eta2_cdf[j], uniform01(rng)), j};
}

JointDraw JointSampler::operator()(Rng& rng) const {
  const bool has_continue = !continue_cum_.empty() && continue_cum_.back() > 0.0;
  if (!has_continue || uniform01(rng) < reset_prob_) {
    const double eta0 = sample_eta0(rng);
    const double eta1 = ref_.mode == TimeMode::Lattice ? static_cast<double>(sample_geometric(rng, ref_.gamma))
                                                       : sample_exponential(rng, ref_.gamma);
    const double u = uniform01(rng) * mu_cum_.back();
    std::size_t v = static_cast<std::size_t>(std::upper_bound(mu_cum_.begin(), mu_cum_.end(), u) - mu_cum_.begin());
    v = std::min(v, mu_cum_.size() - 1);
    return {eta0, eta0 + eta1, v, true};
  }
  const auto [eta2, v] = sample_continue(rng);
  return {eta2, eta2, v, false};
}

// ---------------------------------------------------------------------------

GammaChoice optimize_gamma(const InterarrivalDistribution& d, double t, std::span<const double> grid,
                           const NumericConfig& config) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "rate grid is empty");
  GammaChoice out{kInf, kInf, {grid.begin(), grid.end()}, {}};
  const Moments m = d.moments();
  for (double gamma : grid) {
    const auto ref = ReferenceMeasure::make(gamma, d.mode());
    const auto profile = build_profile(d, ref, config);
    double total = kInf;
    if (profile.applicable()) total = renewal_bound(profile, m.m1, m.m2, t).total;
    out.totals.push_back(total);
    if (total < out.bound_star || (total == out.bound_star && total < kInf && gamma < out.gamma_star)) {
      out.bound_star = total;
      out.gamma_star = gamma;
    }
  }
  require(out.bound_star < kInf, ErrorCode::AllInapplicable, "no rate on the grid gives c0 > 0");
  return out;
}

}  // namespace cpbound
