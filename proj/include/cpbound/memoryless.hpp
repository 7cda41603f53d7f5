#pragma once

#include "cpbound/distributions.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cpbound {

/// Numerical knobs shared by profile construction and the tabulated samplers.
struct NumericConfig {
  std::size_t grid_points = 4096;      ///< evaluation grid size
  double tail_quantile = 1.0 - 1e-6;   ///< linear grid ends at this quantile
  double tail_factor = 64.0;           ///< log-spaced grid extends to knee * tail_factor
  double quad_tol = 1e-10;             ///< absolute tolerance for c0 / c1 quadrature
};

/// One possible next state seen from the current state: transition
/// probability and the conditional sojourn law.
struct Branch {
  double prob;
  const InterarrivalDistribution* law;
};

/// Strong memoryless structure for one state: sigma(t), G(t) and the
/// constants c0 = gamma * int sigma, c1 = gamma * int int sigma (lattice: sums).
class MemorylessProfile {
 public:
  MemorylessProfile(ReferenceMeasure ref, std::function<double(double)> sigma, double c0, double c1,
                    bool optimal);

  double gamma() const noexcept { return ref_.gamma; }
  TimeMode mode() const noexcept { return ref_.mode; }
  const ReferenceMeasure& reference() const noexcept { return ref_; }

  double sigma(double t) const;
  /// sigma(t) * e^{gamma t}; lattice: sigma(t) * (1 - gamma)^{-t}.
  double G(double t) const;

  double c0() const noexcept { return c0_; }
  double c1() const noexcept { return c1_; }
  bool applicable() const noexcept { return c0_ > 0.0; }
  bool optimal() const noexcept { return optimal_; }
  /// Product of all shrink factors applied through scaled().
  double scale() const noexcept { return scale_; }

  /// sigma multiplied by `factor` in [0, 1]; G stays monotone and c0, c1 scale linearly.
  MemorylessProfile scaled(double factor) const;

  /// Next-state law the optimal profile was built for; empty for custom profiles.
  const std::vector<double>& built_for_mu() const noexcept { return mu_; }
  void set_built_for_mu(std::vector<double> mu) { mu_ = std::move(mu); }

 private:
  ReferenceMeasure ref_;
  std::function<double(double)> sigma_;
  double c0_;
  double c1_;
  bool optimal_;
  double scale_ = 1.0;
  std::vector<double> mu_;
};

/// Optimal profile for a single interrenewal law: sigma(t) = e^{-gamma t} I(t).
MemorylessProfile build_profile(const InterarrivalDistribution& d, const ReferenceMeasure& ref,
                                const NumericConfig& config = {});

/// Optimal profile for one state of a Markov renewal model with next-state law
/// mu: sigma(t) = min over s' with mu(s') > 0 of P(s,s') / mu(s') * e^{-gamma t} I_{ss'}(t).
MemorylessProfile build_joint_profile(std::span<const Branch> branches, std::span<const double> mu,
                                      const ReferenceMeasure& ref, const NumericConfig& config = {});

/// User-supplied sigma. Checked on the evaluation grid: G must be
/// nondecreasing (GNotMonotone) and sigma must not exceed the optimal sigma
/// (SigmaExceedsBound). c0 and c1 come from quadrature.
MemorylessProfile custom_profile(std::span<const Branch> branches, std::span<const double> mu,
                                 const ReferenceMeasure& ref, std::function<double(double)> sigma,
                                 const NumericConfig& config = {});
MemorylessProfile custom_profile(const InterarrivalDistribution& d, const ReferenceMeasure& ref,
                                 std::function<double(double)> sigma, const NumericConfig& config = {});

/// Grid on which profiles are verified and samplers are tabulated.
std::vector<double> evaluation_grid(std::span<const Branch> branches, const ReferenceMeasure& ref,
                                    const NumericConfig& config);

/// Tabulated cdfs of the decomposition
/// (zeta_hat, zeta - zeta_hat, V) = chi (eta0, eta1, V1) + (1 - chi) (eta2, 0, V2).
struct Decomposition {
  double chi_prob;                    ///< P(chi = 1) = c0
  std::vector<double> grid;           ///< evaluation points
  std::vector<double> eta0_cdf;       ///< P(eta0 <= t)
  std::vector<double> eta2_mass;      ///< per next state, P(chi = 0, V2 = s')
  std::vector<std::vector<double>> eta2_cdf;  ///< per next state, normalized cdf of the ac part of eta2
};

struct JointDraw {
  double zeta_hat;
  double zeta;
  std::size_t next;  ///< index into the branch list
  bool reset;        ///< chi = 1
};

/// Sampler for the joint law of (zeta_hat, zeta, V) built from a profile.
/// `reset_multiplier` != 1 deliberately corrupts the reset mass; it exists for
/// negative controls only.
class JointSampler {
 public:
  JointSampler(const MemorylessProfile& profile, std::vector<Branch> branches, std::vector<double> mu,
               const NumericConfig& config = {}, double reset_multiplier = 1.0);
  JointSampler(const MemorylessProfile& profile, const InterarrivalDistribution& d,
               const NumericConfig& config = {});

  JointDraw operator()(Rng& rng) const;
  /// Only the reset branch: eta0 given chi = 1.
  double sample_eta0(Rng& rng) const;
  /// Only the continue branch: (eta2, V2) given chi = 0.
  std::pair<double, std::size_t> sample_continue(Rng& rng) const;

  const Decomposition& decomposition() const noexcept { return dec_; }
  double reset_probability() const noexcept { return reset_prob_; }
  double gamma() const noexcept { return ref_.gamma; }
  TimeMode mode() const noexcept { return ref_.mode; }

 private:
  double invert(const std::vector<double>& cdf, double u) const;

  ReferenceMeasure ref_;
  std::vector<Branch> branches_;
  std::vector<double> mu_;
  std::vector<double> mu_cum_;
  Decomposition dec_;
  double reset_prob_;
  std::vector<double> continue_cum_;             // cumulative continue masses over next states
  std::vector<double> atom_share_;               // per next state, fraction of the continue mass on atoms
};

/// Best rate on `grid` for the single-law compound Poisson bound at horizon t.
/// Inapplicable rates score +inf; ties resolve toward the smaller rate.
struct GammaChoice {
  double gamma_star;
  double bound_star;
  std::vector<double> grid;
  std::vector<double> totals;  ///< raw total per grid rate (+inf when inapplicable)
};
GammaChoice optimize_gamma(const InterarrivalDistribution& d, double t, std::span<const double> grid,
                           const NumericConfig& config = {});

}  // namespace cpbound
