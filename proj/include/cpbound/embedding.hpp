#pragma once

#include "cpbound/memoryless.hpp"
#include "cpbound/mrpp.hpp"

#include <Eigen/Dense>

#include <memory>
#include <utility>
#include <vector>

namespace cpbound {

/// Optimal per-state profiles for the next-state law mu:
/// sigma_s(t) = min over s' with mu(s') > 0 of P(s,s') / mu(s') e^{-gamma t} I_{ss'}(t).
std::vector<MemorylessProfile> build_state_profiles(const MrppModel& m, std::span<const double> mu,
                                                    const ReferenceMeasure& ref, const NumericConfig& config = {});

/// State pairs (s, s') for which the profile of s charges more than the
/// transition s -> s' allows under mu. Empty means feasible.
std::vector<std::pair<std::size_t, std::size_t>> infeasible_pairs(const MrppModel& m,
                                                                  std::span<const MemorylessProfile> profiles,
                                                                  std::span<const double> mu,
                                                                  const NumericConfig& config = {});
/// Throws InfeasibleMu listing the pairs found by infeasible_pairs().
void require_feasible(const MrppModel& m, std::span<const MemorylessProfile> profiles, std::span<const double> mu,
                      const NumericConfig& config = {});

/// The model augmented with a memory-loss state 0 (stored as index N). From
/// state s a point of state 0 follows after zeta_hat with probability c0(s);
/// from state 0 the sojourn has mean epsilon / gamma and the next state is 0
/// with probability 1 - epsilon, otherwise drawn from mu.
class EmbeddedModel {
 public:
  EmbeddedModel(std::shared_ptr<const MrppModel> base, std::vector<MemorylessProfile> profiles,
                std::vector<double> mu, double epsilon, const NumericConfig& config, double reset_multiplier);

  const MrppModel& base() const noexcept { return *base_; }
  const std::vector<MemorylessProfile>& profiles() const noexcept { return profiles_; }
  const std::vector<double>& mu() const noexcept { return mu_; }
  double epsilon() const noexcept { return epsilon_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t zero_state() const noexcept { return base_->size(); }

  /// Kernel masses: reset mass c0(s) and continue masses P(s,s') - mu(s') c0(s).
  const Eigen::VectorXd& reset_mass() const noexcept { return reset_mass_; }
  const Eigen::MatrixXd& continue_mass() const noexcept { return continue_mass_; }

  /// Next sojourn and state of the augmented chain from `state` (zero_state() included).
  std::pair<double, std::size_t> step(std::size_t state, Rng& rng) const;

 private:
  std::shared_ptr<const MrppModel> base_;
  std::vector<MemorylessProfile> profiles_;
  std::vector<double> mu_;
  std::vector<double> mu_cum_;
  double epsilon_;
  double gamma_;
  std::vector<std::unique_ptr<JointSampler>> samplers_;
  Eigen::VectorXd reset_mass_;
  Eigen::MatrixXd continue_mass_;
};

/// Checks feasibility, then builds the samplers. `reset_multiplier` != 1
/// skips the feasibility check and corrupts the kernel (negative controls only).
std::shared_ptr<const EmbeddedModel> build_embedding(const MrppModel& m, std::vector<MemorylessProfile> profiles,
                                                     std::vector<double> mu, double epsilon,
                                                     const NumericConfig& config = {},
                                                     double reset_multiplier = 1.0);

/// Palm-type run of the augmented chain: `n_points` points starting with one at time 0 in `start_state`.
Trajectory simulate_embedded(const EmbeddedModel& em, std::size_t n_points, std::size_t start_state, Rng& rng);

/// Removes the memory-loss points.
Trajectory drop_zero_points(const Trajectory& traj, std::size_t zero_state);

}  // namespace cpbound
