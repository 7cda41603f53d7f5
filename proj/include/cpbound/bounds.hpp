#pragma once

#include "cpbound/compound_poisson.hpp"
#include "cpbound/memoryless.hpp"
#include "cpbound/mrpp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cpbound {

struct BoundOptions {
  /// Use the exact E(U) instead of the upper bound E(zeta) - c0 / gamma per state.
  bool exact_u = false;
  /// Lattice mode only: embedding parameter, in [gamma, 1]. Defaults to gamma.
  std::optional<double> epsilon;
};

/// Solutions of the first-passage systems of the embedded chain. Vectors are
/// indexed by state; M(s,s') = P(s,s') - mu(s') c0(s).
struct EmbeddedMoments {
  TimeMode mode = TimeMode::Continuous;
  double gamma = 0.0;
  std::vector<double> mu;
  Eigen::VectorXd q;   ///< c0(s)
  Eigen::VectorXd c1;  ///< c1(s)
  Eigen::MatrixXd M;
  Eigen::MatrixXd A;   ///< E(zeta 1{V1 = s'} | s) - mu(s') c1(s)
  Eigen::VectorXd h0, n, h1, h2, h3, h4, w;
  double spectral_radius = 0.0;

  // Coefficients of epsilon in the epsilon -> 0 limit (continuous mode).
  double ex = 0.0;        ///< E(X)
  double ex2 = 0.0;       ///< E(X^2)
  double ey = 0.0;        ///< E(Y)
  double exy = 0.0;       ///< E(XY)
  double eu_upper = 0.0;  ///< upper bound on E(U)
  double eu_exact = 0.0;  ///< exact E(U)
  std::vector<double> masses;  ///< P(Y = i) for i = 1, 2, ...
  double mass_total = 0.0;     ///< P(Y >= 1)
  double mass_tail = 0.0;      ///< P(Y > masses.size())
};

/// Exact expectations of the embedded renewal reward process at a given epsilon.
struct EmbeddedExpectations {
  double epsilon = 0.0;
  double ex = 0.0;
  double ex2 = 0.0;
  double ex_factorial = 0.0;  ///< E(X (X - 1)), lattice mode
  double ey = 0.0;
  double exy = 0.0;
  double eu_upper = 0.0;
  double eu_exact = 0.0;
  std::vector<double> masses;
  double mass_total = 0.0;
  double mass_tail = 0.0;
};

EmbeddedMoments embedded_moments_limit(const MrppModel& m, std::span<const MemorylessProfile> profiles,
                                       std::span<const double> mu);
EmbeddedExpectations expectations_at(const EmbeddedMoments& em, double epsilon);
/// The epsilon -> 0 coefficients packaged as expectations (all first order in epsilon).
EmbeddedExpectations limit_expectations(const EmbeddedMoments& em);

struct BoundReport {
  std::string kind;  ///< "renewal" or "mrpp"
  TimeMode mode = TimeMode::Continuous;
  double gamma = 0.0;
  double t = 0.0;
  std::optional<double> epsilon;  ///< lattice mode only
  std::vector<double> mu;
  std::vector<double> c0;
  std::vector<double> c1;
  double mean = 0.0;           ///< E(zeta) (stationary for models)
  double second_moment = 0.0;  ///< renewal only
  std::string u_variant = "upper";

  double first_term = 0.0;
  SteinConstant h1;
  double second_factor = 0.0;  ///< 3 t E(Y) / E(X)
  double bracket_xy = 0.0;     ///< E(XY) / E(X)
  double bracket_x2 = 0.0;     ///< E(X^2) E(Y) / E(X)^2 (lattice: factorial moment)
  double second_term = 0.0;
  double total = 0.0;
  double capped_total = 0.0;
  bool low_quality = false;    ///< total >= 1, the bound says nothing

  /// Named summands of the single-law bound; empty for models.
  std::vector<std::pair<std::string, double>> summands;
  CompoundPoissonSpec pi;
  double spectral_radius = 0.0;
  EmbeddedExpectations expectations;
};

/// Renewal count bound. Continuous mode evaluates the closed four-summand
/// formula; lattice mode evaluates the factorial-moment version at epsilon.
BoundReport renewal_bound(const MemorylessProfile& profile, double m1, double m2, double t,
                          const BoundOptions& options = {});

/// Bound for the count of all points of a finite-state model (restrict first
/// to count a subset).
BoundReport mrpp_bound(const MrppModel& m, std::span<const MemorylessProfile> profiles, std::span<const double> mu,
                       double t, const BoundOptions& options = {});

/// Bound assembled from embedded expectations. `geometric` marks a one-state
/// model whose cluster sizes are exactly geometric.
BoundReport assemble_bound(const EmbeddedExpectations& e, double t, bool lattice, bool exact_u,
                           std::optional<double> geometric_c0);

/// Next-state law used for resets.
struct MuChoice {
  std::vector<double> mu;
  std::string policy;
  std::vector<MemorylessProfile> profiles;
  std::optional<BoundReport> report;
};

/// policy: "stationary-feasible" (stationary law of the state chain),
/// "uniform", or "auto" (smallest bound among those and the unit vectors).
MuChoice choose_mu(const MrppModel& m, const ReferenceMeasure& ref, const std::string& policy, double t,
                   const BoundOptions& options = {}, const NumericConfig& config = {});

}  // namespace cpbound
