#include "cpbound/distributions.hpp"

#include "cpbound/error.hpp"
#include "cpbound/numeric.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace cpbound {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTol = 1e-12;

double log_sum_exp(std::span<const double> terms) {
  double hi = -kInf;
  for (double v : terms) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : terms) s += std::exp(v - hi);
  return hi + std::log(s);
}

// Linear interpolation of the knot density at x inside [x_0, x_n].
double knot_density(const NumericDensity& nd, double x) {
  const auto it = std::upper_bound(nd.x.begin(), nd.x.end(), x);
  if (it == nd.x.begin()) return x == nd.x.front() ? nd.y.front() : 0.0;
  if (it == nd.x.end()) return x == nd.x.back() ? nd.y.back() : 0.0;
  const std::size_t i = static_cast<std::size_t>(it - nd.x.begin()) - 1;
  const double h = nd.x[i + 1] - nd.x[i];
  const double u = (x - nd.x[i]) / h;
  return nd.y[i] + u * (nd.y[i + 1] - nd.y[i]);
}

double numeric_pdf(const NumericDensity& nd, double x) {
  if (x < nd.x.front()) return 0.0;
  if (x <= nd.x.back()) return knot_density(nd, x);
  if (nd.tail_rate > 0.0) return nd.y.back() * std::exp(-nd.tail_rate * (x - nd.x.back()));
  return 0.0;
}

// Integral of x^power * y(x) over one linear segment; Simpson is exact up to cubics.
double segment_moment(const NumericDensity& nd, std::size_t i, int power) {
  const double a = nd.x[i];
  const double b = nd.x[i + 1];
  const double m = 0.5 * (a + b);
  const double ym = 0.5 * (nd.y[i] + nd.y[i + 1]);
  return (b - a) / 6.0 *
         (std::pow(a, power) * nd.y[i] + 4.0 * std::pow(m, power) * ym + std::pow(b, power) * nd.y[i + 1]);
}

double erlang_survival(int k, double rate, double x) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(k), rate * x);
}

double family_survival(const Family& fam, double x) {
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return x <= 0.0 ? 1.0 : std::exp(-e.rate * x); },
          [&](const Erlang& e) { return erlang_survival(e.shape, e.rate, x); },
          [&](const HyperExponential& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              s += h.weights[i] * (x <= 0.0 ? 1.0 : std::exp(-h.rates[i] * x));
            }
            return s;
          },
          [&](const Weibull& w) { return x <= 0.0 ? 1.0 : std::exp(-std::pow(x / w.scale, w.shape)); },
          [&](const Uniform& u) {
            if (x < u.lo) return 1.0;
            if (x >= u.hi) return 0.0;
            return (u.hi - x) / (u.hi - u.lo);
          },
          [&](const LatticeGeometric& g) {
            if (x < 1.0) return 1.0;
            return std::pow(1.0 - g.p, std::floor(x));
          },
          [&](const LatticePmf&) { return kInf; },      // handled by the class tables
          [&](const NumericDensity&) { return kInf; },  // handled by the class tables
      },
      fam);
}

// E(zeta; zeta > x) for the parametric continuous families.
double family_partial_moment(const Family& fam, double x) {
  x = std::max(x, 0.0);
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return (x + 1.0 / e.rate) * std::exp(-e.rate * x); },
          [&](const Erlang& e) { return e.shape / e.rate * erlang_survival(e.shape + 1, e.rate, x); },
          [&](const HyperExponential& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              s += h.weights[i] * (x + 1.0 / h.rates[i]) * std::exp(-h.rates[i] * x);
            }
            return s;
          },
          [&](const Weibull& w) {
            const double z = std::pow(x / w.scale, w.shape);
            return w.scale * boost::math::tgamma(1.0 + 1.0 / w.shape, z);
          },
          [&](const Uniform& u) {
            const double lo = std::max(x, u.lo);
            if (lo >= u.hi) return 0.0;
            return (u.hi * u.hi - lo * lo) / (2.0 * (u.hi - u.lo));
          },
          [&](const auto&) { return std::numeric_limits<double>::quiet_NaN(); },
      },
      fam);
}

// Log of the Radon-Nikodym derivative of the (unweighted) family density with
// respect to Exp(gamma), written per family so that exact cases stay exact.
double family_log_ratio(const Family& fam, double gamma, double x) {
  if (x < 0.0) return -kInf;
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return std::log(e.rate / gamma) + (gamma - e.rate) * x; },
          [&](const Erlang& e) {
            if (e.shape == 1) return std::log(e.rate / gamma) + (gamma - e.rate) * x;
            if (x == 0.0) return -kInf;
            return e.shape * std::log(e.rate) + (e.shape - 1) * std::log(x) - std::lgamma(e.shape) +
                   (gamma - e.rate) * x - std::log(gamma);
          },
          [&](const HyperExponential& h) {
            std::vector<double> terms(h.rates.size());
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              terms[i] = h.weights[i] > 0.0
                             ? std::log(h.weights[i] * h.rates[i] / gamma) + (gamma - h.rates[i]) * x
                             : -kInf;
            }
            return log_sum_exp(terms);
          },
          [&](const Weibull& w) {
            if (x == 0.0) {
              if (w.shape < 1.0) return kInf;
              if (w.shape > 1.0) return -kInf;
              return std::log(1.0 / (w.scale * gamma));
            }
            const double z = x / w.scale;
            return std::log(w.shape / w.scale) + (w.shape - 1.0) * std::log(z) - std::pow(z, w.shape) +
                   gamma * x - std::log(gamma);
          },
          [&](const Uniform& u) {
            if (x < u.lo || x > u.hi) return -kInf;
            return -std::log(u.hi - u.lo) + gamma * x - std::log(gamma);
          },
          [&](const NumericDensity& nd) {
            const double p = numeric_pdf(nd, x);
            return p > 0.0 ? std::log(p) + gamma * x - std::log(gamma) : -kInf;
          },
          [&](const auto&) { return -kInf; },
      },
      fam);
}

double family_log_pdf(const Family& fam, double x) {
  // Ratio against Exp(1) shifted back: log p(x) = log f(x) + log(1) - x.
  return family_log_ratio(fam, 1.0, x) - x;
}

std::optional<TailShape> family_tail_shape(const Family& fam, double gamma, double weight) {
  return std::visit(
      overloaded{
          [&](const Exponential& e) -> std::optional<TailShape> {
            if (e.rate > gamma) return TailShape{kInf, 0.0};
            if (e.rate == gamma) return TailShape{kInf, weight};
            return TailShape{0.0, weight * e.rate / gamma};
          },
          [&](const Erlang& e) -> std::optional<TailShape> {
            if (e.shape == 1) {
              if (e.rate > gamma) return TailShape{kInf, 0.0};
              if (e.rate == gamma) return TailShape{kInf, weight};
              return TailShape{0.0, weight * e.rate / gamma};
            }
            if (e.rate > gamma) return TailShape{kInf, 0.0};
            return TailShape{0.0, 0.0};
          },
          [&](const HyperExponential& h) -> std::optional<TailShape> {
            // f(x) = sum a_i exp(e_i x) is convex.
            const std::size_t n = h.rates.size();
            std::vector<double> a(n), ex(n);
            bool grows = false;
            double flat = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              a[i] = weight * h.weights[i] * h.rates[i] / gamma;
              ex[i] = gamma - h.rates[i];
              if (a[i] > 0.0 && ex[i] > 0.0) grows = true;
              if (ex[i] == 0.0) flat += a[i];
            }
            if (!grows) return TailShape{kInf, flat};
            auto fval = [&](double x) {
              double s = 0.0;
              for (std::size_t i = 0; i < n; ++i) s += a[i] * std::exp(ex[i] * x);
              return s;
            };
            auto slope = [&](double x) {
              double s = 0.0;
              for (std::size_t i = 0; i < n; ++i) s += a[i] * ex[i] * std::exp(ex[i] * x);
              return s;
            };
            if (slope(0.0) >= 0.0) return TailShape{0.0, fval(0.0)};
            double hi = 1.0;
            while (slope(hi) < 0.0) hi *= 2.0;
            const double x_star = numeric::bisect(slope, 0.0, hi);
            return TailShape{x_star, fval(x_star)};
          },
          [&](const Weibull& w) -> std::optional<TailShape> {
            if (w.shape > 1.0) return TailShape{kInf, 0.0};
            const double rate = 1.0 / w.scale;
            if (w.shape == 1.0) {
              if (rate > gamma) return TailShape{kInf, 0.0};
              if (rate == gamma) return TailShape{kInf, weight};
              return TailShape{0.0, weight * rate / gamma};
            }
            // log f is strictly convex for shape < 1 and tends to +inf at both ends.
            auto dlog = [&](double x) {
              return (w.shape - 1.0) / x - w.shape / w.scale * std::pow(x / w.scale, w.shape - 1.0) + gamma;
            };
            double lo = 1e-300;
            double hi = w.scale;
            while (dlog(hi) < 0.0) hi *= 2.0;
            const double x_star = numeric::bisect(dlog, lo, hi);
            const double f_star = weight * std::exp(family_log_ratio(w, gamma, x_star));
            return TailShape{x_star, f_star};
          },
          [&](const auto&) -> std::optional<TailShape> { return std::nullopt; },
      },
      fam);
}

void check_family(const Family& fam) {
  std::visit(
      overloaded{
          [](const Exponential& e) {
            require(e.rate > 0.0 && std::isfinite(e.rate), ErrorCode::InvalidDistribution,
                    "exponential rate must be positive");
          },
          [](const Erlang& e) {
            require(e.shape >= 1 && e.rate > 0.0 && std::isfinite(e.rate), ErrorCode::InvalidDistribution,
                    "erlang needs shape >= 1 and rate > 0");
          },
          [](const HyperExponential& h) {
            require(!h.rates.empty() && h.rates.size() == h.weights.size(), ErrorCode::InvalidDistribution,
                    "hyperexponential needs matching nonempty weights and rates");
            double total = 0.0;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              require(h.weights[i] >= 0.0 && h.rates[i] > 0.0 && std::isfinite(h.rates[i]),
                      ErrorCode::InvalidDistribution, "hyperexponential weights >= 0 and rates > 0");
              total += h.weights[i];
            }
            require(std::abs(total - 1.0) <= kMassTol, ErrorCode::InvalidDistribution,
                    "hyperexponential weights must sum to 1");
          },
          [](const Weibull& w) {
            require(w.shape > 0.0 && w.scale > 0.0, ErrorCode::InvalidDistribution,
                    "weibull needs positive shape and scale");
          },
          [](const Uniform& u) {
            require(u.lo >= 0.0 && u.hi > u.lo, ErrorCode::InvalidDistribution, "uniform needs 0 <= lo < hi");
          },
          [](const LatticeGeometric& g) {
            require(g.p > 0.0 && g.p <= 1.0, ErrorCode::InvalidDistribution, "geometric needs p in (0, 1]");
          },
          [](const LatticePmf& l) {
            require(!l.pmf.empty(), ErrorCode::InvalidDistribution, "lattice pmf is empty");
            require(l.tail_ratio >= 0.0 && l.tail_ratio < 1.0, ErrorCode::InvalidDistribution,
                    "lattice pmf tail ratio must lie in [0, 1)");
            for (double v : l.pmf) {
              require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidDistribution, "pmf entries must be >= 0");
            }
          },
          [](const NumericDensity& nd) {
            require(nd.x.size() >= 2 && nd.x.size() == nd.y.size(), ErrorCode::InvalidDistribution,
                    "numeric density needs >= 2 matching knots");
            require(nd.x.front() >= 0.0, ErrorCode::InvalidDistribution, "numeric density support must be >= 0");
            for (std::size_t i = 0; i < nd.x.size(); ++i) {
              require(nd.y[i] >= 0.0 && std::isfinite(nd.y[i]), ErrorCode::InvalidDistribution,
                      "numeric density values must be >= 0");
              if (i > 0) {
                require(nd.x[i] > nd.x[i - 1], ErrorCode::InvalidDistribution,
                        "numeric density knots must increase");
              }
            }
            require(nd.tail_rate >= 0.0, ErrorCode::InvalidDistribution, "tail rate must be >= 0");
          },
      },
      fam);
}

}  // namespace

std::string_view to_string(TimeMode mode) noexcept {
  return mode == TimeMode::Continuous ? "continuous" : "lattice";
}

InterarrivalDistribution::InterarrivalDistribution(std::optional<Family> family, TimeMode mode)
    : family_(std::move(family)), mode_(mode) {
  if (!family_) return;
  check_family(*family_);
  if (auto* l = std::get_if<LatticePmf>(&*family_)) {
    const std::size_t k_max = l->pmf.size() - 1;
    const double rho = l->tail_ratio;
    double total = std::accumulate(l->pmf.begin(), l->pmf.end(), 0.0);
    total += l->pmf[k_max] * rho / (1.0 - rho);
    require(total > 0.0, ErrorCode::InvalidDistribution, "lattice pmf has zero mass");
    for (double& v : l->pmf) v /= total;
    cum_.resize(l->pmf.size());
    cum_lb_.resize(l->pmf.size());
    double c = 0.0;
    double c_lb = 0.0;
    for (std::size_t k = 0; k <= k_max; ++k) {
      c += l->pmf[k];
      c_lb += static_cast<double>(k) * l->pmf[k];
      cum_[k] = c;
      cum_lb_[k] = c_lb;
    }
    const double kk = static_cast<double>(k_max);
    tail_mass_ = l->pmf[k_max] * rho / (1.0 - rho);
    tail_mass_lb_ = l->pmf[k_max] * (kk * rho / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)));
  } else if (auto* nd = std::get_if<NumericDensity>(&*family_)) {
    const std::size_t n = nd->x.size();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) area += segment_moment(*nd, i, 0);
    if (nd->tail_rate > 0.0) area += nd->y.back() / nd->tail_rate;
    require(area > 0.0, ErrorCode::InvalidDistribution, "numeric density has zero mass");
    for (double& v : nd->y) v /= area;
    cum_.assign(n, 0.0);
    cum_lb_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cum_[i + 1] = cum_[i] + segment_moment(*nd, i, 0);
      cum_lb_[i + 1] = cum_lb_[i] + segment_moment(*nd, i, 1);
    }
    if (nd->tail_rate > 0.0) {
      const double r = nd->tail_rate;
      const double xn = nd->x.back();
      tail_mass_ = nd->y.back() / r;
      tail_mass_lb_ = nd->y.back() * (xn / r + 1.0 / (r * r));
    }
  }
}

InterarrivalDistribution InterarrivalDistribution::exponential(double rate) {
  return {Exponential{rate}, TimeMode::Continuous};
}
InterarrivalDistribution InterarrivalDistribution::erlang(int shape, double rate) {
  return {Erlang{shape, rate}, TimeMode::Continuous};
}
InterarrivalDistribution InterarrivalDistribution::hyperexponential(std::vector<double> weights,
                                                                    std::vector<double> rates) {
  return {HyperExponential{std::move(weights), std::move(rates)}, TimeMode::Continuous};
}
InterarrivalDistribution InterarrivalDistribution::weibull(double shape, double scale) {
  return {Weibull{shape, scale}, TimeMode::Continuous};
}
InterarrivalDistribution InterarrivalDistribution::uniform(double lo, double hi) {
  return {Uniform{lo, hi}, TimeMode::Continuous};
}
InterarrivalDistribution InterarrivalDistribution::lattice_geometric(double p) {
  return {LatticeGeometric{p}, TimeMode::Lattice};
}
InterarrivalDistribution InterarrivalDistribution::lattice_pmf(std::vector<double> pmf, double tail_ratio) {
  return {LatticePmf{std::move(pmf), tail_ratio}, TimeMode::Lattice};
}
InterarrivalDistribution InterarrivalDistribution::numeric_density(std::vector<double> x, std::vector<double> y,
                                                                   double tail_rate) {
  return {NumericDensity{std::move(x), std::move(y), tail_rate}, TimeMode::Continuous};
}

InterarrivalDistribution InterarrivalDistribution::point_masses(std::vector<Atom> atoms) {
  InterarrivalDistribution d(std::nullopt, TimeMode::Continuous);
  d.ac_weight_ = 1.0;
  return d.with_atoms(std::move(atoms));
}

InterarrivalDistribution InterarrivalDistribution::with_atoms(std::vector<Atom> atoms) const {
  require(mode_ == TimeMode::Continuous, ErrorCode::InvalidDistribution,
          "atoms are only meaningful for continuous laws; use a lattice pmf instead");
  double mass = 0.0;
  for (const Atom& a : atoms) {
    require(a.location >= 0.0 && std::isfinite(a.location) && a.mass > 0.0, ErrorCode::InvalidDistribution,
            "atoms need a nonnegative location and positive mass");
    mass += a.mass;
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.location < r.location; });
  InterarrivalDistribution d = *this;
  if (!family_) {
    require(std::abs(mass - 1.0) <= kMassTol, ErrorCode::InvalidDistribution,
            "a purely atomic law needs atom masses summing to 1");
    d.ac_weight_ = 0.0;
  } else {
    require(mass <= 1.0 + kMassTol, ErrorCode::InvalidDistribution, "atom masses exceed 1");
    d.ac_weight_ = std::max(0.0, 1.0 - mass);
  }
  d.atoms_ = std::move(atoms);
  return d;
}

std::string InterarrivalDistribution::name() const {
  std::ostringstream os;
  if (!family_) {
    os << "atoms";
  } else {
    std::visit(overloaded{
                   [&](const Exponential& e) { os << "exponential(" << e.rate << ")"; },
                   [&](const Erlang& e) { os << "erlang(" << e.shape << ", " << e.rate << ")"; },
                   [&](const HyperExponential& h) {
                     os << "hyperexponential(";
                     for (std::size_t i = 0; i < h.rates.size(); ++i) {
                       os << (i ? ", " : "") << h.weights[i] << ":" << h.rates[i];
                     }
                     os << ")";
                   },
                   [&](const Weibull& w) { os << "weibull(" << w.shape << ", " << w.scale << ")"; },
                   [&](const Uniform& u) { os << "uniform(" << u.lo << ", " << u.hi << ")"; },
                   [&](const LatticeGeometric& g) { os << "lattice-geometric(" << g.p << ")"; },
                   [&](const LatticePmf& l) { os << "lattice-pmf[" << l.pmf.size() << "]"; },
                   [&](const NumericDensity& nd) { os << "numeric-density[" << nd.x.size() << "]"; },
               },
               *family_);
  }
  if (family_ && !atoms_.empty()) os << "+atoms[" << atoms_.size() << "]";
  return os.str();
}

double InterarrivalDistribution::log_pdf_ac(double x) const {
  if (!family_ || ac_weight_ <= 0.0 || mode_ != TimeMode::Continuous) return -kInf;
  return std::log(ac_weight_) + family_log_pdf(*family_, x);
}

double InterarrivalDistribution::pdf_ac(double x) const { return std::exp(log_pdf_ac(x)); }

double InterarrivalDistribution::pmf(std::int64_t k) const {
  if (mode_ != TimeMode::Lattice || !family_ || k < 0) return 0.0;
  if (const auto* g = std::get_if<LatticeGeometric>(&*family_)) {
    if (k < 1) return 0.0;
    if (g->p >= 1.0) return k == 1 ? 1.0 : 0.0;
    return g->p * std::pow(1.0 - g->p, static_cast<double>(k - 1));
  }
  const auto& l = std::get<LatticePmf>(*family_);
  const auto k_max = static_cast<std::int64_t>(l.pmf.size()) - 1;
  if (k <= k_max) return l.pmf[static_cast<std::size_t>(k)];
  return l.pmf.back() * std::pow(l.tail_ratio, static_cast<double>(k - k_max));
}

double InterarrivalDistribution::survival_ac(double x) const {
  if (!family_ || ac_weight_ <= 0.0) return 0.0;
  if (mode_ == TimeMode::Lattice) return survival(x);
  if (const auto* nd = std::get_if<NumericDensity>(&*family_)) {
    double below = 0.0;
    if (x >= nd->x.back()) {
      below = cum_.back();
      if (nd->tail_rate > 0.0) below += tail_mass_ * (1.0 - std::exp(-nd->tail_rate * (x - nd->x.back())));
    } else if (x > nd->x.front()) {
      const auto it = std::upper_bound(nd->x.begin(), nd->x.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - nd->x.begin()) - 1;
      const double u = x - nd->x[i];
      const double slope = (nd->y[i + 1] - nd->y[i]) / (nd->x[i + 1] - nd->x[i]);
      below = cum_[i] + nd->y[i] * u + 0.5 * slope * u * u;
    }
    return ac_weight_ * std::max(0.0, 1.0 - below);
  }
  return ac_weight_ * family_survival(*family_, x);
}

double InterarrivalDistribution::survival(double x) const {
  if (mode_ == TimeMode::Lattice) {
    const auto& fam = *family_;
    if (x < 0.0) return 1.0;
    const double k = std::floor(x);
    if (std::holds_alternative<LatticeGeometric>(fam)) return family_survival(fam, k);
    const auto& l = std::get<LatticePmf>(fam);
    const auto k_max = static_cast<double>(l.pmf.size() - 1);
    if (k < k_max) return std::max(0.0, 1.0 - cum_[static_cast<std::size_t>(k)]);
    // Geometric continuation beyond K.
    return l.pmf.back() * l.tail_ratio / (1.0 - l.tail_ratio) * std::pow(l.tail_ratio, k - k_max);
  }
  double s = survival_ac(x);
  for (const Atom& a : atoms_) {
    if (a.location > x) s += a.mass;
  }
  return s;
}

double InterarrivalDistribution::cdf(double x) const { return 1.0 - survival(x); }

double InterarrivalDistribution::partial_moment_ac(double x) const {
  if (!family_ || ac_weight_ <= 0.0) return 0.0;
  require(mode_ == TimeMode::Continuous, ErrorCode::ModeMismatch, "partial moment is for continuous laws");
  if (const auto* nd = std::get_if<NumericDensity>(&*family_)) {
    // Integrate x * y(x) over (x, inf) from the tables plus a partial segment.
    const double total = cum_lb_.back() + tail_mass_lb_;
    double below = 0.0;
    if (x >= nd->x.back()) {
      below = cum_lb_.back();
      if (nd->tail_rate > 0.0) {
        const double r = nd->tail_rate;
        const double xn = nd->x.back();
        const double yn = nd->y.back();
        below += tail_mass_lb_ - yn * std::exp(-r * (x - xn)) * (x / r + 1.0 / (r * r));
      }
    } else if (x > nd->x.front()) {
      const auto it = std::upper_bound(nd->x.begin(), nd->x.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - nd->x.begin()) - 1;
      NumericDensity piece{{nd->x[i], x}, {nd->y[i], knot_density(*nd, x)}, 0.0};
      below = cum_lb_[i] + segment_moment(piece, 0, 1);
    }
    return ac_weight_ * std::max(0.0, total - below);
  }
  return ac_weight_ * family_partial_moment(*family_, x);
}

double InterarrivalDistribution::quantile(double p) const {
  require(p >= 0.0 && p < 1.0, ErrorCode::InvalidArgument, "quantile level must lie in [0, 1)");
  if (mode_ == TimeMode::Lattice) {
    std::int64_t hi = 1;
    while (cdf(static_cast<double>(hi)) < p) hi *= 2;
    std::int64_t lo = 0;
    if (cdf(0.0) >= p) return 0.0;
    while (hi - lo > 1) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      (cdf(static_cast<double>(mid)) >= p ? hi : lo) = mid;
    }
    return static_cast<double>(hi);
  }
  double hi = 1.0;
  while (cdf(hi) < p) hi *= 2.0;
  return numeric::bisect([&](double x) { return cdf(x) - p; }, 0.0, hi, 1e-13);
}

Moments InterarrivalDistribution::moments() const {
  Moments m{0.0, 0.0};
  if (family_ && ac_weight_ > 0.0) {
    const Moments fm = std::visit(
        overloaded{
            [](const Exponential& e) { return Moments{1.0 / e.rate, 2.0 / (e.rate * e.rate)}; },
            [](const Erlang& e) {
              const double k = e.shape;
              return Moments{k / e.rate, k * (k + 1.0) / (e.rate * e.rate)};
            },
            [](const HyperExponential& h) {
              Moments r{0.0, 0.0};
              for (std::size_t i = 0; i < h.rates.size(); ++i) {
                r.m1 += h.weights[i] / h.rates[i];
                r.m2 += 2.0 * h.weights[i] / (h.rates[i] * h.rates[i]);
              }
              return r;
            },
            [](const Weibull& w) {
              return Moments{w.scale * std::tgamma(1.0 + 1.0 / w.shape),
                             w.scale * w.scale * std::tgamma(1.0 + 2.0 / w.shape)};
            },
            [](const Uniform& u) {
              return Moments{0.5 * (u.lo + u.hi), (u.lo * u.lo + u.lo * u.hi + u.hi * u.hi) / 3.0};
            },
            [](const LatticeGeometric& g) { return Moments{1.0 / g.p, (2.0 - g.p) / (g.p * g.p)}; },
            [](const LatticePmf& l) {
              Moments r{0.0, 0.0};
              for (std::size_t k = 0; k < l.pmf.size(); ++k) {
                const double kk = static_cast<double>(k);
                r.m1 += kk * l.pmf[k];
                r.m2 += kk * kk * l.pmf[k];
              }
              const double rho = l.tail_ratio;
              if (rho > 0.0) {
                const double kk = static_cast<double>(l.pmf.size() - 1);
                const double q = 1.0 - rho;
                const double pk = l.pmf.back();
                r.m1 += pk * (kk * rho / q + rho / (q * q));
                r.m2 += pk * (kk * kk * rho / q + 2.0 * kk * rho / (q * q) + rho * (1.0 + rho) / (q * q * q));
              }
              return r;
            },
            [](const NumericDensity& nd) {
              Moments r{0.0, 0.0};
              for (std::size_t i = 0; i + 1 < nd.x.size(); ++i) {
                r.m1 += segment_moment(nd, i, 1);
                r.m2 += segment_moment(nd, i, 2);
              }
              if (nd.tail_rate > 0.0) {
                const double rr = nd.tail_rate;
                const double xn = nd.x.back();
                const double yn = nd.y.back();
                r.m1 += yn * (xn / rr + 1.0 / (rr * rr));
                r.m2 += yn * (xn * xn / rr + 2.0 * xn / (rr * rr) + 2.0 / (rr * rr * rr));
              }
              return r;
            },
        },
        *family_);
    m.m1 += ac_weight_ * fm.m1;
    m.m2 += ac_weight_ * fm.m2;
  }
  for (const Atom& a : atoms_) {
    m.m1 += a.mass * a.location;
    m.m2 += a.mass * a.location * a.location;
  }
  require(std::isfinite(m.m1) && std::isfinite(m.m2), ErrorCode::NonFiniteMoment,
          "first or second moment of " + name() + " is not finite");
  require(m.m1 > 0.0, ErrorCode::InvalidDistribution, "mean of " + name() + " must be strictly positive");
  return m;
}

namespace {

double sample_family(const Family& fam, Rng& rng, const std::vector<double>& cum, double tail_mass) {
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return sample_exponential(rng, e.rate); },
          [&](const Erlang& e) {
            double s = 0.0;
            for (int i = 0; i < e.shape; ++i) s += sample_exponential(rng, e.rate);
            return s;
          },
          [&](const HyperExponential& h) {
            double u = uniform01(rng);
            std::size_t i = 0;
            for (; i + 1 < h.rates.size(); ++i) {
              if (u < h.weights[i]) break;
              u -= h.weights[i];
            }
            return sample_exponential(rng, h.rates[i]);
          },
          [&](const Weibull& w) { return w.scale * std::pow(-std::log(uniform01(rng)), 1.0 / w.shape); },
          [&](const Uniform& u) { return u.lo + (u.hi - u.lo) * uniform01(rng); },
          [&](const LatticeGeometric& g) { return static_cast<double>(sample_geometric(rng, g.p)); },
          [&](const LatticePmf& l) {
            const double u = uniform01(rng);
            const double body = cum.back();
            if (u < body || l.tail_ratio <= 0.0) {
              const auto it = std::lower_bound(cum.begin(), cum.end(), u);
              const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
              return static_cast<double>(k);
            }
            return static_cast<double>(l.pmf.size() - 1 + sample_geometric(rng, 1.0 - l.tail_ratio));
          },
          [&](const NumericDensity& nd) {
            const double u = uniform01(rng) * (cum.back() + tail_mass);
            if (u >= cum.back() && nd.tail_rate > 0.0) {
              return nd.x.back() + sample_exponential(rng, nd.tail_rate);
            }
            auto it = std::upper_bound(cum.begin(), cum.end(), u);
            std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
            i = std::min(i, nd.x.size() - 2);
            const double m = u - cum[i];
            const double h = nd.x[i + 1] - nd.x[i];
            const double slope = (nd.y[i + 1] - nd.y[i]) / h;
            const double y0 = nd.y[i];
            const double disc = std::max(0.0, y0 * y0 + 2.0 * slope * m);
            const double denom = y0 + std::sqrt(disc);
            const double step = denom > 0.0 ? 2.0 * m / denom : 0.0;
            return nd.x[i] + std::clamp(step, 0.0, h);
          },
      },
      fam);
}

double sample_family_length_biased(const Family& fam, Rng& rng, const std::vector<double>& cum_lb,
                                   double tail_mass_lb) {
  auto erlang_sum = [&](int k, double rate) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += sample_exponential(rng, rate);
    return s;
  };
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return erlang_sum(2, e.rate); },
          [&](const Erlang& e) { return erlang_sum(e.shape + 1, e.rate); },
          [&](const HyperExponential& h) {
            double total = 0.0;
            for (std::size_t i = 0; i < h.rates.size(); ++i) total += h.weights[i] / h.rates[i];
            double u = uniform01(rng) * total;
            std::size_t i = 0;
            for (; i + 1 < h.rates.size(); ++i) {
              const double w = h.weights[i] / h.rates[i];
              if (u < w) break;
              u -= w;
            }
            return erlang_sum(2, h.rates[i]);
          },
          [&](const Weibull& w) {
            const double y = sample_gamma(rng, 1.0 + 1.0 / w.shape);
            return w.scale * std::pow(y, 1.0 / w.shape);
          },
          [&](const Uniform& u) {
            const double v = uniform01(rng);
            return std::sqrt(u.lo * u.lo + v * (u.hi * u.hi - u.lo * u.lo));
          },
          [&](const LatticeGeometric& g) {
            return static_cast<double>(sample_geometric(rng, g.p) + sample_geometric(rng, g.p) - 1);
          },
          [&](const LatticePmf& l) {
            const double u = uniform01(rng) * (cum_lb.back() + tail_mass_lb);
            if (u < cum_lb.back() || l.tail_ratio <= 0.0) {
              const auto it = std::lower_bound(cum_lb.begin(), cum_lb.end(), u);
              const auto k =
                  std::min<std::size_t>(static_cast<std::size_t>(it - cum_lb.begin()), cum_lb.size() - 1);
              return static_cast<double>(k);
            }
            // (K + j) rho^j splits into K rho^j and j rho^j.
            const double rho = l.tail_ratio;
            const double q = 1.0 - rho;
            const double kk = static_cast<double>(l.pmf.size() - 1);
            const double w_geo = kk * rho / q;
            const double w_nb = rho / (q * q);
            std::int64_t j = 0;
            if (uniform01(rng) * (w_geo + w_nb) < w_geo) {
              j = sample_geometric(rng, q);
            } else {
              j = sample_geometric(rng, q) + sample_geometric(rng, q) - 1;
            }
            return kk + static_cast<double>(j);
          },
          [&](const NumericDensity& nd) {
            const double u = uniform01(rng) * (cum_lb.back() + tail_mass_lb);
            if (u >= cum_lb.back() && nd.tail_rate > 0.0) {
              const double r = nd.tail_rate;
              const double xn = nd.x.back();
              const double w_exp = xn / r;
              const double w_gam = 1.0 / (r * r);
              if (uniform01(rng) * (w_exp + w_gam) < w_exp) return xn + sample_exponential(rng, r);
              return xn + sample_exponential(rng, r) + sample_exponential(rng, r);
            }
            auto it = std::upper_bound(cum_lb.begin(), cum_lb.end(), u);
            std::size_t i = it == cum_lb.begin() ? 0 : static_cast<std::size_t>(it - cum_lb.begin()) - 1;
            i = std::min(i, nd.x.size() - 2);
            const double target = u - cum_lb[i];
            auto partial = [&](double x) {
              NumericDensity piece{{nd.x[i], x}, {nd.y[i], knot_density(nd, x)}, 0.0};
              return segment_moment(piece, 0, 1) - target;
            };
            if (partial(nd.x[i + 1]) <= 0.0) return nd.x[i + 1];
            return numeric::bisect(partial, nd.x[i], nd.x[i + 1], 1e-14);
          },
      },
      fam);
}

}  // namespace

double InterarrivalDistribution::sample(Rng& rng) const {
  if (!atoms_.empty()) {
    double u = uniform01(rng);
    for (const Atom& a : atoms_) {
      if (u < a.mass) return a.location;
      u -= a.mass;
    }
    if (!family_) return atoms_.back().location;
  }
  return sample_family(*family_, rng, cum_, tail_mass_);
}

double InterarrivalDistribution::sample_length_biased(Rng& rng) const {
  if (!atoms_.empty()) {
    double ac_part = 0.0;
    if (family_ && ac_weight_ > 0.0) {
      InterarrivalDistribution bare = *this;
      bare.atoms_.clear();
      bare.ac_weight_ = 1.0;
      ac_part = ac_weight_ * bare.moments().m1;
    }
    double total = ac_part;
    for (const Atom& a : atoms_) total += a.mass * a.location;
    double u = uniform01(rng) * total;
    for (const Atom& a : atoms_) {
      const double w = a.mass * a.location;
      if (u < w) return a.location;
      u -= w;
    }
    if (!family_) return atoms_.back().location;
  }
  return sample_family_length_biased(*family_, rng, cum_lb_, tail_mass_lb_);
}

std::vector<double> InterarrivalDistribution::breakpoints(double gamma) const {
  std::vector<double> bp{0.0};
  for (const Atom& a : atoms_) bp.push_back(a.location);
  if (family_) {
    std::visit(overloaded{
                   [&](const Uniform& u) {
                     bp.push_back(u.lo);
                     bp.push_back(u.hi);
                   },
                   [&](const NumericDensity& nd) { bp.insert(bp.end(), nd.x.begin(), nd.x.end()); },
                   [&](const auto&) {},
               },
               *family_);
    if (mode_ == TimeMode::Continuous) {
      if (auto shape = family_tail_shape(*family_, gamma, ac_weight_); shape && std::isfinite(shape->x_star)) {
        bp.push_back(shape->x_star);
      }
    }
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  return bp;
}

ReferenceMeasure ReferenceMeasure::make(double gamma, TimeMode mode) {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument, "reference rate must be positive");
  if (mode == TimeMode::Lattice) {
    require(gamma <= 1.0, ErrorCode::InvalidArgument, "lattice reference rate must lie in (0, 1]");
  }
  return {gamma, mode};
}

Moments moments(const InterarrivalDistribution& d) { return d.moments(); }

namespace {

double lattice_log_f(const InterarrivalDistribution& d, double gamma, std::int64_t k) {
  if (k < 1) return -kInf;
  const double p = d.pmf(k);
  if (p <= 0.0) return -kInf;
  return std::log(p) - std::log(gamma) - static_cast<double>(k - 1) * std::log1p(-gamma);
}

double continuous_log_f(const InterarrivalDistribution& d, double gamma, double x) {
  if (!d.family() || d.ac_weight() <= 0.0 || x < 0.0) return -kInf;
  return std::log(d.ac_weight()) + family_log_ratio(*d.family(), gamma, x);
}

}  // namespace

double rn_derivative_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double x) {
  require(d.mode() == ref.mode, ErrorCode::ModeMismatch, "distribution and reference differ in mode");
  if (ref.mode == TimeMode::Lattice) {
    const double k = std::round(x);
    if (k < 1.0 || std::abs(k - x) > 1e-9) return 0.0;
    if (ref.gamma >= 1.0 && k > 1.0) return 0.0;  // reference-null point
    return std::exp(lattice_log_f(d, ref.gamma, static_cast<std::int64_t>(k)));
  }
  return std::exp(continuous_log_f(d, ref.gamma, x));
}

std::optional<TailShape> tail_shape(const InterarrivalDistribution& d, const ReferenceMeasure& ref) {
  if (d.mode() != TimeMode::Continuous || !d.family() || d.ac_weight() <= 0.0) return std::nullopt;
  return family_tail_shape(*d.family(), ref.gamma, d.ac_weight());
}

double log_tail_inf_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double t) {
  require(d.mode() == ref.mode, ErrorCode::ModeMismatch, "distribution and reference differ in mode");
  require(t >= 0.0, ErrorCode::InvalidArgument, "tail infimum needs t >= 0");
  const double gamma = ref.gamma;
  if (!d.family() || d.ac_weight() <= 0.0) return -kInf;
  const Family& fam = *d.family();

  if (ref.mode == TimeMode::Lattice) {
    const auto t0 = static_cast<std::int64_t>(std::floor(t));
    if (gamma >= 1.0) return t0 < 1 ? lattice_log_f(d, gamma, 1) : kInf;
    if (const auto* g = std::get_if<LatticeGeometric>(&fam)) {
      if (g->p > gamma) return -kInf;
      if (g->p == gamma) return 0.0;
      return lattice_log_f(d, gamma, t0 + 1);
    }
    const auto& l = std::get<LatticePmf>(fam);
    const auto k_max = static_cast<std::int64_t>(l.pmf.size()) - 1;
    // Beyond K the ratio scales by tail_ratio / (1 - gamma) per step.
    if (l.tail_ratio <= 0.0 || l.tail_ratio < 1.0 - gamma || l.pmf.back() <= 0.0) return -kInf;
    double best = kInf;
    for (std::int64_t k = t0 + 1; k <= k_max; ++k) best = std::min(best, lattice_log_f(d, gamma, k));
    best = std::min(best, lattice_log_f(d, gamma, std::max(k_max, t0) + 1));
    return best;
  }

  if (auto shape = family_tail_shape(fam, gamma, d.ac_weight())) {
    if (!std::isfinite(shape->x_star)) return shape->f_star > 0.0 ? std::log(shape->f_star) : -kInf;
    if (t < shape->x_star) return shape->f_star > 0.0 ? std::log(shape->f_star) : -kInf;
    return continuous_log_f(d, gamma, t);
  }
  if (std::holds_alternative<Uniform>(fam)) return -kInf;
  const auto& nd = std::get<NumericDensity>(fam);
  if (nd.tail_rate <= 0.0 || nd.tail_rate > gamma) return -kInf;
  if (t < nd.x.front()) return -kInf;
  // On each linear piece y(x) e^{gamma x} has no interior minimum, so the
  // infimum over (t, inf) is attained at t or at a knot.
  double best = continuous_log_f(d, gamma, t);
  for (double xk : nd.x) {
    if (xk > t) best = std::min(best, continuous_log_f(d, gamma, xk));
  }
  return best;
}

double tail_inf_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double t) {
  return std::exp(log_tail_inf_f(d, ref, t));
}

double sample_interarrival(const InterarrivalDistribution& d, Rng& rng) { return d.sample(rng); }

}  // namespace cpbound
