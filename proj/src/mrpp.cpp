#include "cpbound/mrpp.hpp"

#include "cpbound/error.hpp"
#include "cpbound/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cpbound {
namespace {

std::vector<bool> reachable(const Eigen::MatrixXd& p, std::size_t from, bool reverse) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = reverse ? p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s))
                               : p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
      if (w > 0.0 && !seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

std::size_t pick(std::span<const double> weights, double total, Rng& rng) {
  double u = uniform01(rng) * total;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    u -= weights[j];
    if (u <= 0.0) return j;
  }
  // Rounding: fall back to the last state with positive weight.
  for (std::size_t j = weights.size(); j-- > 0;) {
    if (weights[j] > 0.0) return j;
  }
  return 0;
}

}  // namespace

MrppModel::MrppModel(Eigen::MatrixXd transition, std::vector<std::optional<InterarrivalDistribution>> sojourns,
                     std::vector<std::size_t> counted, TimeMode mode, std::vector<std::string> names)
    : p_(std::move(transition)), sojourns_(std::move(sojourns)), counted_(std::move(counted)), mode_(mode),
      names_(std::move(names)) {
  const auto n = static_cast<std::size_t>(p_.rows());
  require(n > 0 && p_.cols() == p_.rows(), ErrorCode::InvalidModel, "transition matrix must be square and nonempty");
  require(sojourns_.size() == n * n, ErrorCode::InvalidModel, "need one sojourn slot per state pair");
  if (names_.empty()) {
    for (std::size_t s = 0; s < n; ++s) names_.push_back(std::to_string(s + 1));
  }
  require(names_.size() == n, ErrorCode::InvalidModel, "one name per state is required");
  require(!counted_.empty(), ErrorCode::InvalidModel, "counted set B is empty");
  std::sort(counted_.begin(), counted_.end());
  counted_.erase(std::unique(counted_.begin(), counted_.end()), counted_.end());
  require(counted_.back() < n, ErrorCode::InvalidModel, "counted state out of range");
  m1_ = Eigen::MatrixXd::Zero(p_.rows(), p_.cols());
  m2_ = Eigen::MatrixXd::Zero(p_.rows(), p_.cols());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      const double prob = p_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
      require(std::isfinite(prob) && prob >= 0.0, ErrorCode::InvalidModel, "transition probabilities must be nonnegative");
      auto& law = sojourns_[s * n + j];
      if (prob > 0.0) {
        require(law.has_value(), ErrorCode::InvalidModel,
                "missing sojourn law for transition " + names_[s] + " -> " + names_[j]);
        require(law->mode() == mode_, ErrorCode::ModeMismatch, "sojourn law mode differs from the model mode");
        const Moments mom = law->moments();
        m1_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = mom.m1;
        m2_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = mom.m2;
      } else {
        law.reset();
      }
    }
  }
}

MrppModel MrppModel::renewal(InterarrivalDistribution d) {
  const TimeMode mode = d.mode();
  std::vector<std::optional<InterarrivalDistribution>> soj;
  soj.emplace_back(std::move(d));
  return MrppModel(Eigen::MatrixXd::Ones(1, 1), std::move(soj), {0}, mode);
}

const InterarrivalDistribution* MrppModel::sojourn(std::size_t s, std::size_t next) const {
  if (parent_) return nullptr;
  const auto& law = sojourns_.at(s * size() + next);
  return law ? &*law : nullptr;
}

bool MrppModel::is_counted(std::size_t s) const {
  return std::binary_search(counted_.begin(), counted_.end(), s);
}

double MrppModel::state_mean(std::size_t s) const {
  const auto i = static_cast<Eigen::Index>(s);
  return p_.row(i).cwiseProduct(m1_.row(i)).sum();
}

double MrppModel::state_second_moment(std::size_t s) const {
  const auto i = static_cast<Eigen::Index>(s);
  return p_.row(i).cwiseProduct(m2_.row(i)).sum();
}

std::pair<double, std::size_t> MrppModel::step(std::size_t s, Rng& rng) const {
  if (parent_) {
    std::size_t cur = parent_states_[s];
    double total = 0.0;
    for (;;) {
      const auto [gap, next] = parent_->step(cur, rng);
      total += gap;
      const auto it = std::lower_bound(parent_states_.begin(), parent_states_.end(), next);
      if (it != parent_states_.end() && *it == next) {
        return {total, static_cast<std::size_t>(it - parent_states_.begin())};
      }
      cur = next;
    }
  }
  const auto row = p_.row(static_cast<Eigen::Index>(s));
  std::vector<double> w(size());
  for (std::size_t j = 0; j < size(); ++j) w[j] = row(static_cast<Eigen::Index>(j));
  const std::size_t next = pick(w, row.sum(), rng);
  return {sojourns_[s * size() + next]->sample(rng), next};
}

std::vector<Branch> MrppModel::profile_branches(std::size_t s) const {
  std::vector<Branch> out(size(), Branch{0.0, nullptr});
  if (!parent_) {
    for (std::size_t j = 0; j < size(); ++j) {
      const auto* law = sojourn(s, j);
      if (law) out[j] = {p_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)), law};
    }
    return out;
  }
  const std::size_t ps = parent_states_[s];
  for (std::size_t j = 0; j < size(); ++j) {
    const auto* law = parent_->sojourn(ps, parent_states_[j]);
    if (law) {
      out[j] = {parent_->transition()(static_cast<Eigen::Index>(ps), static_cast<Eigen::Index>(parent_states_[j])),
                law};
    }
  }
  return out;
}

std::vector<double> stationary_distribution(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - p.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::VectorXd pi = numeric::solve_refined(a, rhs);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= total;
  return out;
}

ModelDiagnostics validate_model(const MrppModel& m) {
  ModelDiagnostics d;
  const std::size_t n = m.size();
  const auto& p = m.transition();
  for (std::size_t s = 0; s < n; ++s) {
    const double err = std::abs(p.row(static_cast<Eigen::Index>(s)).sum() - 1.0);
    d.max_row_error = std::max(d.max_row_error, err);
    if (err > 1e-12) {
      d.violations.push_back("RowSum: row " + m.names()[s] + " sums to " +
                             std::to_string(p.row(static_cast<Eigen::Index>(s)).sum()));
    }
  }
  const auto fwd = reachable(p, 0, false);
  const auto bwd = reachable(p, 0, true);
  d.irreducible = std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
                  std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
  if (!d.irreducible) d.violations.push_back("NotIrreducible: the state chain has more than one class");
  for (std::size_t s = 0; s < n; ++s) {
    if (!std::isfinite(m.state_mean(s)) || !std::isfinite(m.state_second_moment(s))) {
      d.violations.push_back("NonFiniteMoment: state " + m.names()[s]);
    }
  }
  if (d.irreducible && d.max_row_error <= 1e-12) {
    try {
      d.stationary = stationary_distribution(p);
      for (std::size_t s = 0; s < n; ++s) d.mean_sojourn += d.stationary[s] * m.state_mean(s);
      if (d.mean_sojourn > 0.0 && std::isfinite(d.mean_sojourn)) {
        d.intensity = 1.0 / d.mean_sojourn;
      } else {
        d.violations.push_back("ZeroMean: stationary mean sojourn must be positive and finite");
      }
    } catch (const Error& e) {
      d.violations.push_back(std::string("SingularSystem: ") + e.what());
    }
  }
  d.valid = d.violations.empty();
  return d;
}

void require_valid(const MrppModel& m) {
  const auto d = validate_model(m);
  if (d.valid) return;
  std::ostringstream os;
  os << "invalid model:";
  for (const auto& v : d.violations) os << " [" << v << "]";
  throw Error(ErrorCode::InvalidModel, os.str());
}

MrppModel restrict(const MrppModel& m, const std::vector<std::size_t>& b_in) {
  std::vector<std::size_t> b = b_in;
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  require(!b.empty(), ErrorCode::BUnreachable, "restriction set is empty");
  require(b.back() < m.size(), ErrorCode::InvalidModel, "restriction state out of range");
  require_valid(m);
  const std::size_t n = m.size();
  if (b.size() == n) {
    MrppModel out = m;
    out.counted_ = b;
    return out;
  }
  std::vector<std::size_t> t;
  for (std::size_t s = 0; s < n; ++s) {
    if (!std::binary_search(b.begin(), b.end(), s)) t.push_back(s);
  }
  const auto nb = static_cast<Eigen::Index>(b.size());
  const auto nt = static_cast<Eigen::Index>(t.size());
  const auto& p = m.transition();
  auto block = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, auto&& value) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value(rows[i], cols[j]);
      }
    }
    return out;
  };
  auto prob = [&](std::size_t i, std::size_t j) { return p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); };
  auto e1 = [&](std::size_t i, std::size_t j) { return prob(i, j) * m.mean(i, j); };
  auto e2 = [&](std::size_t i, std::size_t j) { return prob(i, j) * m.second_moment(i, j); };

  const Eigen::MatrixXd i_ptt = Eigen::MatrixXd::Identity(nt, nt) - block(t, t, prob);
  Eigen::MatrixXd h, a1, a2;
  try {
    h = numeric::solve_refined(i_ptt, block(t, b, prob));
    a1 = numeric::solve_refined(i_ptt, Eigen::MatrixXd(block(t, b, e1) + block(t, t, e1) * h));
    a2 = numeric::solve_refined(
        i_ptt, Eigen::MatrixXd(block(t, b, e2) + block(t, t, e2) * h + 2.0 * block(t, t, e1) * a1));
  } catch (const Error&) {
    throw Error(ErrorCode::BUnreachable, "some unrestricted state cannot reach the restriction set");
  }
  const Eigen::MatrixXd pb = block(b, b, prob) + block(b, t, prob) * h;
  const Eigen::MatrixXd s1 = block(b, b, e1) + block(b, t, e1) * h + block(b, t, prob) * a1;
  const Eigen::MatrixXd s2 =
      block(b, b, e2) + block(b, t, e2) * h + 2.0 * block(b, t, e1) * a1 + block(b, t, prob) * a2;

  MrppModel out;
  out.p_ = pb;
  out.mode_ = m.mode();
  out.sojourns_.assign(b.size() * b.size(), std::nullopt);
  out.m1_ = Eigen::MatrixXd::Zero(nb, nb);
  out.m2_ = Eigen::MatrixXd::Zero(nb, nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      if (pb(i, j) > 1e-300) {
        out.m1_(i, j) = s1(i, j) / pb(i, j);
        out.m2_(i, j) = s2(i, j) / pb(i, j);
      } else {
        out.p_(i, j) = 0.0;
      }
    }
    out.p_.row(i) /= out.p_.row(i).sum();
  }
  out.counted_.resize(b.size());
  std::iota(out.counted_.begin(), out.counted_.end(), std::size_t{0});
  for (std::size_t s : b) out.names_.push_back(m.names()[s]);
  out.parent_ = std::make_shared<const MrppModel>(m);
  out.parent_states_ = b;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Trajectory simulate_base(const MrppModel& m, const SimulationStart& start, double horizon, Rng& rng) {
  Trajectory tr;
  tr.horizon = horizon;
  const auto pi = stationary_distribution(m.transition());
  const std::size_t n = m.size();
  double time = 0.0;
  std::size_t state = 0;
  if (const auto* palm = std::get_if<PalmStart>(&start)) {
    std::vector<double> w(n, 0.0);
    if (palm->a.empty()) {
      w = pi;
    } else {
      for (std::size_t s : palm->a) {
        require(s < n, ErrorCode::InvalidArgument, "Palm set state out of range");
        w[s] = pi[s];
      }
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    require(total > 0.0, ErrorCode::InvalidArgument, "Palm set has zero stationary mass");
    state = pick(w, total, rng);
  } else {
    // Covering interval drawn length-biased: (s, s') with weight pi_s P(s,s') E(zeta | s,s').
    std::vector<double> w(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < n; ++j) {
        w[s * n + j] = pi[s] * m.transition()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) *
                       m.mean(s, j);
      }
    }
    const std::size_t k = pick(w, std::accumulate(w.begin(), w.end(), 0.0), rng);
    const std::size_t s = k / n, next = k % n;
    const double len = m.sojourn(s, next)->sample_length_biased(rng);
    double prev;
    if (m.mode() == TimeMode::Lattice) {
      const auto span = static_cast<std::int64_t>(std::llround(len));
      prev = -static_cast<double>(static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span)));
    } else {
      prev = -uniform01(rng) * len;
    }
    tr.times.push_back(prev);
    tr.states.push_back(s);
    time = prev + len;
    state = next;
  }
  while (time <= horizon) {
    tr.times.push_back(time);
    tr.states.push_back(state);
    const auto [gap, next] = m.step(state, rng);
    time += gap;
    state = next;
  }
  return tr;
}

}  // namespace

Trajectory simulate(const MrppModel& m, const SimulationStart& start, double horizon, Rng& rng) {
  require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  if (!m.is_restriction()) return simulate_base(m, start, horizon, rng);
  // Run the parent and keep the counted states; pathwise identical to the parent.
  const auto& ps = m.parent_states();
  SimulationStart parent_start = start;
  if (auto* palm = std::get_if<PalmStart>(&parent_start)) {
    if (palm->a.empty()) {
      palm->a = ps;
    } else {
      for (std::size_t& s : palm->a) {
        require(s < ps.size(), ErrorCode::InvalidArgument, "Palm set state out of range");
        s = ps[s];
      }
    }
  }
  const Trajectory full = simulate(*m.parent(), parent_start, horizon, rng);
  Trajectory tr;
  tr.start = full.start;
  tr.horizon = full.horizon;
  for (std::size_t i = 0; i < full.times.size(); ++i) {
    const auto it = std::lower_bound(ps.begin(), ps.end(), full.states[i]);
    if (it != ps.end() && *it == full.states[i]) {
      tr.times.push_back(full.times[i]);
      tr.states.push_back(static_cast<std::size_t>(it - ps.begin()));
    }
  }
  return tr;
}

std::int64_t count_in_window(const Trajectory& traj, double t, const std::vector<std::size_t>& b) {
  require(t >= 0.0, ErrorCode::InvalidArgument, "window end must be nonnegative");
  require(t <= traj.horizon + 1e-12, ErrorCode::WindowExceedsHorizon, "window extends beyond the simulated horizon");
  std::int64_t count = 0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] > traj.start && traj.times[i] <= t &&
        std::find(b.begin(), b.end(), traj.states[i]) != b.end()) {
      ++count;
    }
  }
  return count;
}

}  // namespace cpbound
