#include "cpbound/embedding.hpp"

#include "cpbound/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpbound {

std::vector<MemorylessProfile> build_state_profiles(const MrppModel& m, std::span<const double> mu,
                                                    const ReferenceMeasure& ref, const NumericConfig& config) {
  require(mu.size() == m.size(), ErrorCode::InvalidArgument, "mu must have one entry per state");
  require(ref.mode == m.mode(), ErrorCode::ModeMismatch, "reference and model differ in mode");
  std::vector<MemorylessProfile> out;
  out.reserve(m.size());
  for (std::size_t s = 0; s < m.size(); ++s) {
    const auto branches = m.profile_branches(s);
    out.push_back(build_joint_profile(branches, mu, ref, config));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> infeasible_pairs(const MrppModel& m,
                                                                  std::span<const MemorylessProfile> profiles,
                                                                  std::span<const double> mu,
                                                                  const NumericConfig& config) {
  const std::size_t n = m.size();
  require(profiles.size() == n && mu.size() == n, ErrorCode::InvalidArgument,
          "need one profile and one mu entry per state");
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  for (std::size_t s = 0; s < n; ++s) {
    const MemorylessProfile& prof = profiles[s];
    for (std::size_t j = 0; j < n; ++j) {
      const double p = m.transition()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
      if (mu[j] * prof.c0() > p + 1e-12) bad.emplace_back(s, j);
    }
    const auto& built = prof.built_for_mu();
    if (prof.optimal() && built.size() == n && std::equal(built.begin(), built.end(), mu.begin())) continue;
    // sigma_s must stay below P(s,s') / mu(s') times the optimal single-transition sigma.
    const auto branches = m.profile_branches(s);
    const auto grid = evaluation_grid(branches, prof.reference(), config);
    for (std::size_t j = 0; j < n; ++j) {
      if (mu[j] <= 0.0) continue;
      if (std::find(bad.begin(), bad.end(), std::pair{s, j}) != bad.end()) continue;
      std::vector<double> unit(n, 0.0);
      unit[j] = 1.0;
      const auto cap = build_joint_profile(branches, unit, prof.reference(), config);
      for (double t : grid) {
        if (prof.sigma(t) > cap.sigma(t) / mu[j] * (1.0 + 1e-9) + 1e-15) {
          bad.emplace_back(s, j);
          break;
        }
      }
    }
  }
  std::sort(bad.begin(), bad.end());
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
  return bad;
}

void require_feasible(const MrppModel& m, std::span<const MemorylessProfile> profiles, std::span<const double> mu,
                      const NumericConfig& config) {
  const auto bad = infeasible_pairs(m, profiles, mu, config);
  if (bad.empty()) return;
  std::ostringstream os;
  os << "mu is infeasible for transitions";
  for (const auto& [s, j] : bad) os << " (" << m.names()[s] << "," << m.names()[j] << ")";
  throw Error(ErrorCode::InfeasibleMu, os.str());
}

EmbeddedModel::EmbeddedModel(std::shared_ptr<const MrppModel> base, std::vector<MemorylessProfile> profiles,
                             std::vector<double> mu, double epsilon, const NumericConfig& config,
                             double reset_multiplier)
    : base_(std::move(base)), profiles_(std::move(profiles)), mu_(std::move(mu)), epsilon_(epsilon) {
  const std::size_t n = base_->size();
  gamma_ = profiles_.front().gamma();
  double acc = 0.0;
  for (double v : mu_) mu_cum_.push_back(acc += v);
  reset_mass_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  continue_mass_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    reset_mass_(i) = profiles_[s].c0();
    for (std::size_t j = 0; j < n; ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      continue_mass_(i, k) = base_->transition()(i, k) - mu_[j] * profiles_[s].c0();
    }
    samplers_.push_back(
        std::make_unique<JointSampler>(profiles_[s], base_->profile_branches(s), mu_, config, reset_multiplier));
  }
}

std::pair<double, std::size_t> EmbeddedModel::step(std::size_t state, Rng& rng) const {
  const std::size_t zero = zero_state();
  if (state == zero) {
    const double rate = gamma_ / epsilon_;
    const double gap = base_->mode() == TimeMode::Lattice ? static_cast<double>(sample_geometric(rng, rate))
                                                          : sample_exponential(rng, rate);
    if (uniform01(rng) >= epsilon_) return {gap, zero};
    const double u = uniform01(rng) * mu_cum_.back();
    const auto it = std::upper_bound(mu_cum_.begin(), mu_cum_.end(), u);
    return {gap, std::min(static_cast<std::size_t>(it - mu_cum_.begin()), mu_cum_.size() - 1)};
  }
  const JointDraw d = (*samplers_.at(state))(rng);
  return {d.zeta_hat, d.reset ? zero : d.next};
}

std::shared_ptr<const EmbeddedModel> build_embedding(const MrppModel& m, std::vector<MemorylessProfile> profiles,
                                                     std::vector<double> mu, double epsilon,
                                                     const NumericConfig& config, double reset_multiplier) {
  require(!m.is_restriction(), ErrorCode::InvalidModel,
          "embedding needs explicit sojourn laws; restricted models cannot be embedded");
  require_valid(m);
  require(profiles.size() == m.size() && mu.size() == m.size(), ErrorCode::InvalidArgument,
          "need one profile and one mu entry per state");
  const double gamma = profiles.front().gamma();
  for (const auto& p : profiles) {
    require(p.gamma() == gamma && p.mode() == m.mode(), ErrorCode::InvalidArgument,
            "profiles must share the reference rate and the model mode");
  }
  if (m.mode() == TimeMode::Lattice) {
    require(epsilon >= gamma && epsilon <= 1.0, ErrorCode::InvalidArgument,
            "lattice embedding needs gamma <= epsilon <= 1");
  } else {
    require(epsilon > 0.0 && epsilon <= 1.0, ErrorCode::InvalidArgument, "epsilon must lie in (0, 1]");
  }
  bool any = false;
  for (const auto& p : profiles) any = any || p.applicable();
  require(any, ErrorCode::Inapplicable, "every state has c0 = 0");
  if (reset_multiplier == 1.0) require_feasible(m, profiles, mu, config);
  return std::make_shared<const EmbeddedModel>(std::make_shared<const MrppModel>(m), std::move(profiles),
                                               std::move(mu), epsilon, config, reset_multiplier);
}

Trajectory simulate_embedded(const EmbeddedModel& em, std::size_t n_points, std::size_t start_state, Rng& rng) {
  require(start_state <= em.zero_state(), ErrorCode::InvalidArgument, "start state out of range");
  Trajectory tr;
  double time = 0.0;
  std::size_t state = start_state;
  tr.times.reserve(n_points);
  tr.states.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    tr.times.push_back(time);
    tr.states.push_back(state);
    const auto [gap, next] = em.step(state, rng);
    time += gap;
    state = next;
  }
  tr.start = 0.0;
  tr.horizon = tr.times.empty() ? 0.0 : tr.times.back();
  return tr;
}

Trajectory drop_zero_points(const Trajectory& traj, std::size_t zero_state) {
  Trajectory out;
  out.start = traj.start;
  out.horizon = traj.horizon;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.states[i] == zero_state) continue;
    out.times.push_back(traj.times[i]);
    out.states.push_back(traj.states[i]);
  }
  return out;
}

}  // namespace cpbound
