#pragma once

#include "cpbound/bounds.hpp"
#include "cpbound/compound_poisson.hpp"
#include "cpbound/mrpp.hpp"
#include "cpbound/validation.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cpbound {

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double x);

nlohmann::json to_json(const CompoundPoissonSpec& spec);
nlohmann::json to_json(const SteinConstant& h1);
nlohmann::json to_json(const EmbeddedExpectations& e);
nlohmann::json to_json(const BoundReport& r);
/// Wall-clock time is left out so that reports are reproducible.
nlohmann::json to_json(const SimulationResult& r);
nlohmann::json to_json(const TvEstimate& tv);
nlohmann::json to_json(const KsResult& ks);
nlohmann::json to_json(const ConditionalTestReport& r);
nlohmann::json to_json(const RestrictionTestReport& r);
nlohmann::json to_json(const CycleStatistics& s);

/// Pretty JSON with a trailing newline.
std::string dump(const nlohmann::json& j);

/// Two-column name,value listing of the bound terms.
std::string bound_csv(const BoundReport& r);

/// Tidy table n,empirical,spec over the union of both supports.
std::string comparison_csv(const SimulationResult& r, const std::vector<double>& spec_pmf);

std::string trajectory_csv(const Trajectory& traj);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double gamma = 0.0;
  double t = 0.0;
  double c0 = 0.0;  ///< stationary average over states for models
  double c1 = 0.0;
  std::string status = "ok";  ///< "ok" or the error code name
  std::string h1_regime;
  double h1 = 0.0;
  double first_term = 0.0;
  double second_term = 0.0;
  double total = 0.0;
};
std::string sweep_csv(const std::vector<SweepRow>& rows, std::uint64_t seed);

}  // namespace cpbound
