#pragma once

#include "cpbound/distributions.hpp"
#include "cpbound/memoryless.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cpbound {

/// Finite-state Markov renewal point process: transition matrix P(s,s') and
/// per-transition sojourn laws D(s,s'). A model produced by restrict() is a
/// view on its parent: it carries exact transition probabilities and sojourn
/// moments, and simulates by running the parent until the next counted state.
class MrppModel {
 public:
  /// sojourns is row-major N x N; entry (s,s') must be set exactly when P(s,s') > 0.
  MrppModel(Eigen::MatrixXd transition, std::vector<std::optional<InterarrivalDistribution>> sojourns,
            std::vector<std::size_t> counted, TimeMode mode, std::vector<std::string> names = {});

  /// One-state model with i.i.d. gaps.
  static MrppModel renewal(InterarrivalDistribution d);

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.rows()); }
  TimeMode mode() const noexcept { return mode_; }
  const Eigen::MatrixXd& transition() const noexcept { return p_; }
  /// nullptr when P(s,s') = 0 or when this model is a restriction view.
  const InterarrivalDistribution* sojourn(std::size_t s, std::size_t next) const;
  const std::vector<std::size_t>& counted() const noexcept { return counted_; }
  bool is_counted(std::size_t s) const;
  bool counts_all() const noexcept { return counted_.size() == size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// E(zeta | s -> s') and E(zeta^2 | s -> s'); 0 when P(s,s') = 0.
  double mean(std::size_t s, std::size_t next) const { return m1_(s, next); }
  double second_moment(std::size_t s, std::size_t next) const { return m2_(s, next); }
  /// E(zeta | V_0 = s) and E(zeta^2 | V_0 = s).
  double state_mean(std::size_t s) const;
  double state_second_moment(std::size_t s) const;

  bool is_restriction() const noexcept { return parent_ != nullptr; }
  const MrppModel* parent() const noexcept { return parent_.get(); }
  /// For a restriction view: index of each state in the parent.
  const std::vector<std::size_t>& parent_states() const noexcept { return parent_states_; }

  /// Next sojourn and state from state s.
  std::pair<double, std::size_t> step(std::size_t s, Rng& rng) const;

  /// Branches used to build the memoryless profile of state s. For a
  /// restriction view these are the direct parent transitions into counted
  /// states, which give a certified lower bound on sigma.
  std::vector<Branch> profile_branches(std::size_t s) const;

 private:
  friend MrppModel restrict(const MrppModel& m, const std::vector<std::size_t>& b);
  MrppModel() = default;

  Eigen::MatrixXd p_;
  std::vector<std::optional<InterarrivalDistribution>> sojourns_;
  std::vector<std::size_t> counted_;
  TimeMode mode_ = TimeMode::Continuous;
  std::vector<std::string> names_;
  Eigen::MatrixXd m1_;
  Eigen::MatrixXd m2_;
  std::shared_ptr<const MrppModel> parent_;
  std::vector<std::size_t> parent_states_;
};

struct ModelDiagnostics {
  bool valid = true;
  std::vector<std::string> violations;  ///< "Code: detail" entries
  bool irreducible = false;
  double max_row_error = 0.0;
  std::vector<double> stationary;  ///< stationary law of the state chain
  double mean_sojourn = 0.0;       ///< E(zeta) under the stationary chain
  double intensity = 0.0;          ///< 1 / E(zeta)
};

ModelDiagnostics validate_model(const MrppModel& m);
/// Throws InvalidModel listing every violation.
void require_valid(const MrppModel& m);

/// Stationary law of the state chain (left Perron vector).
std::vector<double> stationary_distribution(const Eigen::MatrixXd& p);

/// Model on the states b (parent indices): kernel of (accumulated sojourn until
/// the next b-state, that state). b becomes the counted set of the result.
MrppModel restrict(const MrppModel& m, const std::vector<std::size_t>& b);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::size_t> states;
  double start = 0.0;    ///< window start (points at or before it are context)
  double horizon = 0.0;  ///< simulated through this time
};

struct PalmStart {
  std::vector<std::size_t> a;  ///< conditioning set; empty means all states
};
struct StationaryStart {};
using SimulationStart = std::variant<PalmStart, StationaryStart>;

Trajectory simulate(const MrppModel& m, const SimulationStart& start, double horizon, Rng& rng);

/// Number of points in (0, t] whose state lies in b.
std::int64_t count_in_window(const Trajectory& traj, double t, const std::vector<std::size_t>& b);

}  // namespace cpbound
