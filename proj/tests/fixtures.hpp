#pragma once

#include "cpbound/mrpp.hpp"

#include <optional>
#include <vector>

namespace fixtures {

using cpbound::InterarrivalDistribution;
using D = InterarrivalDistribution;

/// Two states with heterogeneous sojourns; rows of P differ from each other.
inline cpbound::MrppModel two_state() {
  Eigen::MatrixXd p(2, 2);
  p << 0.3, 0.7, 0.6, 0.4;
  std::vector<std::optional<D>> laws{D::exponential(1.0), D::hyperexponential({0.05, 0.95}, {5.0, 1.0}),
                                     D::erlang(2, 1.0), D::exponential(1.0)};
  return cpbound::MrppModel(p, laws, {0, 1}, cpbound::TimeMode::Continuous, {"a", "b"});
}

/// Two states with exponential sojourns of different rates.
inline cpbound::MrppModel two_state_exponential() {
  Eigen::MatrixXd p(2, 2);
  p << 0.2, 0.8, 0.5, 0.5;
  std::vector<std::optional<D>> laws{D::exponential(2.0), D::exponential(1.0), D::exponential(0.5),
                                     D::exponential(3.0)};
  return cpbound::MrppModel(p, laws, {0, 1}, cpbound::TimeMode::Continuous, {"x", "y"});
}

}  // namespace fixtures
