#pragma once

#include "cpbound/bounds.hpp"
#include "cpbound/config.hpp"
#include "cpbound/error.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cpbound {

/// Bound for the model and settings of a config. gamma = "auto" picks the
/// smallest total over the grid (ties toward the smaller rate).
struct BoundRun {
  BoundReport report;
  std::string mu_policy;  ///< "given" for an explicit vector
  std::vector<double> gamma_grid;
  std::vector<double> grid_totals;  ///< +inf where the rate is inapplicable
};

BoundRun bound_from_config(const RunConfig& config, std::optional<double> gamma_override = std::nullopt,
                           std::optional<double> t_override = std::nullopt);

/// Runs "bound", "simulate", "validate" or "sweep" and writes the artifact to
/// `out`. Returns the exit status: 0 success, 1 validation failure or
/// inapplicable bound, 2 configuration error.
int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& log);

/// Exit status for an error code.
int exit_status(ErrorCode code) noexcept;

}  // namespace cpbound
