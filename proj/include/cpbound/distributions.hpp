#pragma once

#include "cpbound/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cpbound {

enum class TimeMode { Continuous, Lattice };

std::string_view to_string(TimeMode mode) noexcept;

// Parametric families. Lattice families live on the nonnegative integers.

struct Exponential {
  double rate;
};

struct Erlang {
  int shape;
  double rate;
};

struct HyperExponential {
  std::vector<double> weights;
  std::vector<double> rates;
};

struct Weibull {
  double shape;
  double scale;
};

struct Uniform {
  double lo;
  double hi;
};

/// Geometric on {1, 2, ...}: P(k) = p (1 - p)^(k - 1).
struct LatticeGeometric {
  double p;
};

/// Tabulated pmf on {0, ..., K} with an optional geometric continuation
/// P(K + j) = P(K) * tail_ratio^j for j >= 1. Normalized on construction.
struct LatticePmf {
  std::vector<double> pmf;
  double tail_ratio = 0.0;
};

/// Piecewise-linear density through knots (x_i, y_i) with an optional
/// exponential continuation y_n * exp(-tail_rate * (x - x_n)) past the last
/// knot. Normalized on construction.
struct NumericDensity {
  std::vector<double> x;
  std::vector<double> y;
  double tail_rate = 0.0;
};

using Family = std::variant<Exponential, Erlang, HyperExponential, Weibull, Uniform, LatticeGeometric,
                            LatticePmf, NumericDensity>;

/// Point mass of the non-absolutely-continuous part (continuous mode only).
struct Atom {
  double location;
  double mass;
};

struct Moments {
  double m1;  ///< E(zeta)
  double m2;  ///< E(zeta^2)
};

/// Where the tail infimum of the density ratio is attained for families whose
/// ratio is quasi-convex: I(t) = f_star for t < x_star and f(t) afterwards.
/// x_star = +inf means the infimum is the limit f_star at infinity.
struct TailShape {
  double x_star;
  double f_star;
};

/// Interrenewal / sojourn law: a parametric absolutely continuous (or lattice)
/// part, optionally mixed with atoms. Immutable after construction.
class InterarrivalDistribution {
 public:
  static InterarrivalDistribution exponential(double rate);
  static InterarrivalDistribution erlang(int shape, double rate);
  static InterarrivalDistribution hyperexponential(std::vector<double> weights, std::vector<double> rates);
  static InterarrivalDistribution weibull(double shape, double scale);
  static InterarrivalDistribution uniform(double lo, double hi);
  static InterarrivalDistribution lattice_geometric(double p);
  static InterarrivalDistribution lattice_pmf(std::vector<double> pmf, double tail_ratio = 0.0);
  static InterarrivalDistribution numeric_density(std::vector<double> x, std::vector<double> y,
                                                  double tail_rate = 0.0);
  /// Purely atomic law; its absolutely continuous part is empty.
  static InterarrivalDistribution point_masses(std::vector<Atom> atoms);

  /// Mixture (1 - sum of atom masses) * this + atoms. Continuous mode only.
  InterarrivalDistribution with_atoms(std::vector<Atom> atoms) const;

  TimeMode mode() const noexcept { return mode_; }
  const std::optional<Family>& family() const noexcept { return family_; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  double ac_weight() const noexcept { return ac_weight_; }
  std::string name() const;

  /// Density of the absolutely continuous part (already weighted), continuous mode.
  double pdf_ac(double x) const;
  double log_pdf_ac(double x) const;
  /// Probability mass at integer k, lattice mode.
  double pmf(std::int64_t k) const;

  double cdf(double x) const;
  double survival(double x) const;
  /// P(zeta > x) restricted to the absolutely continuous part.
  double survival_ac(double x) const;
  /// E(zeta; zeta > x) restricted to the absolutely continuous part.
  double partial_moment_ac(double x) const;
  /// Smallest x with cdf(x) >= p (integer-valued in lattice mode).
  double quantile(double p) const;

  Moments moments() const;

  double sample(Rng& rng) const;
  /// Draw from the length-biased law x dF(x) / E(zeta).
  double sample_length_biased(Rng& rng) const;

  /// Points where the density has kinks, jumps, or an interior minimum of the
  /// density ratio; used to split quadrature.
  std::vector<double> breakpoints(double gamma) const;

 private:
  InterarrivalDistribution(std::optional<Family> family, TimeMode mode);

  std::optional<Family> family_;
  TimeMode mode_;
  std::vector<Atom> atoms_;
  double ac_weight_ = 1.0;
  // Cached tables for the tabulated families.
  std::vector<double> cum_;     // cumulative mass at knots / integers
  std::vector<double> cum_lb_;  // cumulative x * mass for length biasing
  double tail_mass_ = 0.0;
  double tail_mass_lb_ = 0.0;
};

/// Exponential (continuous) or geometric on {1, 2, ...} (lattice) law with mean 1/gamma.
struct ReferenceMeasure {
  double gamma;
  TimeMode mode;

  static ReferenceMeasure make(double gamma, TimeMode mode);
};

Moments moments(const InterarrivalDistribution& d);

/// Radon-Nikodym derivative of the absolutely continuous part of L(zeta) with
/// respect to the reference law.
double rn_derivative_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double x);

/// Essential infimum of rn_derivative_f over (t, inf); lattice: over {t+1, t+2, ...}.
/// Returns +inf when the range is a reference-null set (lattice, gamma = 1, t >= 1).
double tail_inf_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double t);

/// log of tail_inf_f, -inf when it vanishes. Stable for large t.
double log_tail_inf_f(const InterarrivalDistribution& d, const ReferenceMeasure& ref, double t);

/// Quasi-convex description of the density ratio, when the family has one.
std::optional<TailShape> tail_shape(const InterarrivalDistribution& d, const ReferenceMeasure& ref);

double sample_interarrival(const InterarrivalDistribution& d, Rng& rng);

}  // namespace cpbound
