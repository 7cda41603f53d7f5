#pragma once

#include "cpbound/bounds.hpp"
#include "cpbound/distributions.hpp"
#include "cpbound/memoryless.hpp"
#include "cpbound/mrpp.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cpbound {

struct ModelConfig {
  std::string type = "renewal";  ///< "renewal" or "mrpp"
  TimeMode mode = TimeMode::Continuous;
  std::vector<std::string> states;
  std::vector<std::vector<double>> transition;
  nlohmann::json sojourn;  ///< one descriptor per state, or an N x N matrix (null where P = 0)
  nlohmann::json interarrival;
  std::vector<std::string> count;  ///< counted states B; empty means all
};

struct GammaAuto {
  std::vector<double> grid;  ///< empty: default_gamma_grid()
};
using GammaSetting = std::variant<double, GammaAuto>;

struct SimulationConfig {
  std::size_t replications = 10000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t bootstrap = 500;
  std::string trajectory_path;  ///< optional CSV export of one stationary path
};

struct ValidationConfig {
  std::size_t conditional_n = 100000;
  std::vector<double> t_grid{0.5, 1.0, 2.0};
  std::size_t restriction_n = 10000;
  double epsilon = 0.1;
  std::size_t cycles = 200000;
};

struct SweepConfig {
  std::string parameter = "gamma";  ///< "gamma" or "t"
  std::vector<double> values;
};

struct OutputConfig {
  std::string format;  ///< "json" or "csv"; empty: csv for sweep, json otherwise
  std::string path;             ///< empty writes to stdout
};

struct RunConfig {
  ModelConfig model;
  GammaSetting gamma = 1.0;
  std::variant<std::string, std::vector<double>> mu = std::string("stationary-feasible");
  std::optional<double> epsilon;
  double t = 1.0;
  bool exact_u = false;
  SimulationConfig simulation;
  ValidationConfig validation;
  std::optional<SweepConfig> sweep;
  NumericConfig numeric;
  OutputConfig output;
};

/// Default rate grid for gamma = "auto": continuous rates 2^(k/4) / mean for
/// k = -16..8, lattice rates 0.01, 0.02, ..., 1.
std::vector<double> default_gamma_grid(TimeMode mode, double mean);

/// Throws ConfigError on schema violations, including unknown keys.
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// {"family": name, "params": [...]} plus optional "atoms": [[x, mass], ...].
InterarrivalDistribution parse_distribution(const nlohmann::json& j, TimeMode mode);
nlohmann::json describe_distribution(const InterarrivalDistribution& d);

/// Full model with the counted set from the config (not restricted).
MrppModel build_model(const ModelConfig& c);
/// Parent indices of the counted states.
std::vector<std::size_t> counted_indices(const ModelConfig& c, const MrppModel& m);

}  // namespace cpbound
