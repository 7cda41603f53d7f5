#include "cpbound/config.hpp"

#include "cpbound/error.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace cpbound {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, where + ": " + msg);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) fail(where, "must be positive");
  return v;
}

std::size_t count_value(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail(where, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::uint64_t seed_value(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) fail(where, "seed must be digits");
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail(where, "seed exceeds 64 bits");
    }
  }
  fail(where, "expected an unsigned 64-bit seed");
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::string text(const json& j, const std::string& where, std::initializer_list<const char*> choices = {}) {
  if (!j.is_string()) fail(where, "expected a string");
  auto s = j.get<std::string>();
  if (choices.size() == 0) return s;
  for (const char* c : choices) {
    if (s == c) return s;
  }
  std::string list;
  for (const char* c : choices) list += std::string(list.empty() ? "" : ", ") + c;
  fail(where, "expected one of " + list);
}

TimeMode parse_mode(const json& j, const std::string& where) {
  return text(j, where, {"continuous", "lattice"}) == "lattice" ? TimeMode::Lattice : TimeMode::Continuous;
}

ModelConfig parse_model(const json& j) {
  ModelConfig m;
  if (!j.is_object() || !j.contains("type")) fail("model", "missing 'type'");
  m.type = text(j["type"], "model.type", {"renewal", "mrpp"});
  if (m.type == "renewal") {
    check_keys(j, "model", {"type", "mode", "interarrival"});
    if (!j.contains("interarrival")) fail("model", "renewal model needs 'interarrival'");
    m.interarrival = j["interarrival"];
  } else {
    check_keys(j, "model", {"type", "mode", "states", "transition", "sojourn", "count"});
    if (!j.contains("transition") || !j.contains("sojourn")) fail("model", "mrpp model needs 'transition' and 'sojourn'");
    const json& p = j["transition"];
    if (!p.is_array() || p.empty()) fail("model.transition", "expected a nonempty matrix");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.transition.push_back(numbers(p[i], "model.transition[" + std::to_string(i) + "]"));
      if (m.transition.back().size() != p.size()) fail("model.transition", "matrix must be square");
    }
    m.sojourn = j["sojourn"];
    if (!m.sojourn.is_array() || m.sojourn.size() != p.size()) {
      fail("model.sojourn", "expected one entry per state");
    }
    if (j.contains("states")) {
      const json& s = j["states"];
      if (!s.is_array() || s.size() != p.size()) fail("model.states", "expected one name per state");
      for (const auto& name : s) m.states.push_back(text(name, "model.states"));
    }
    if (j.contains("count")) {
      const json& c = j["count"];
      if (!c.is_array() || c.empty()) fail("model.count", "expected a nonempty array");
      for (const auto& v : c) {
        if (v.is_string()) {
          m.count.push_back(v.get<std::string>());
        } else if (v.is_number_integer()) {
          m.count.push_back("#" + std::to_string(count_value(v, "model.count")));
        } else {
          fail("model.count", "entries are state names or 0-based indices");
        }
      }
    }
  }
  if (j.contains("mode")) m.mode = parse_mode(j["mode"], "model.mode");
  return m;
}

GammaSetting parse_gamma(const json& j) {
  if (j.is_number()) return positive(j, "gamma");
  if (j.is_string()) {
    text(j, "gamma", {"auto"});
    return GammaAuto{};
  }
  if (j.is_object()) {
    check_keys(j, "gamma", {"grid", "min", "max", "points"});
    GammaAuto a;
    if (j.contains("grid")) {
      if (j.contains("min") || j.contains("max") || j.contains("points")) fail("gamma", "give either grid or min/max/points");
      a.grid = numbers(j["grid"], "gamma.grid");
    } else {
      if (!j.contains("min") || !j.contains("max") || !j.contains("points")) fail("gamma", "need min, max and points");
      const double lo = positive(j["min"], "gamma.min");
      const double hi = positive(j["max"], "gamma.max");
      const std::size_t n = count_value(j["points"], "gamma.points");
      if (hi < lo || n < 1) fail("gamma", "need min <= max and points >= 1");
      for (std::size_t i = 0; i < n; ++i) {
        a.grid.push_back(n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1)));
      }
    }
    if (a.grid.empty()) fail("gamma.grid", "grid is empty");
    for (double g : a.grid) {
      if (!(g > 0.0)) fail("gamma.grid", "rates must be positive");
    }
    return a;
  }
  fail("gamma", "expected a number, \"auto\" or a grid object");
}

}  // namespace

std::vector<double> default_gamma_grid(TimeMode mode, double mean) {
  std::vector<double> grid;
  if (mode == TimeMode::Lattice) {
    for (int k = 1; k <= 100; ++k) grid.push_back(k / 100.0);
  } else {
    for (int k = -16; k <= 8; ++k) grid.push_back(std::exp2(k / 4.0) / mean);
  }
  return grid;
}

RunConfig parse_config(const json& j) {
  check_keys(j, "config", {"description", "model", "gamma", "mu", "epsilon", "t", "u_variant", "simulation",
                           "validation", "sweep", "numeric", "output"});
  RunConfig c;
  if (!j.contains("model")) fail("config", "missing 'model'");
  if (!j.contains("t")) fail("config", "missing 't'");
  if (j.contains("description")) text(j["description"], "description");
  c.model = parse_model(j["model"]);
  c.t = number(j["t"], "t");
  if (c.t < 0.0) fail("t", "must be nonnegative");
  if (j.contains("gamma")) c.gamma = parse_gamma(j["gamma"]);
  if (j.contains("mu")) {
    if (j["mu"].is_string()) {
      c.mu = text(j["mu"], "mu", {"stationary-feasible", "uniform", "auto"});
    } else {
      c.mu = numbers(j["mu"], "mu");
    }
  }
  if (j.contains("epsilon")) {
    c.epsilon = number(j["epsilon"], "epsilon");
    if (!(*c.epsilon > 0.0 && *c.epsilon <= 1.0)) fail("epsilon", "must lie in (0, 1]");
  }
  if (j.contains("u_variant")) c.exact_u = text(j["u_variant"], "u_variant", {"upper", "exact"}) == "exact";
  if (j.contains("simulation")) {
    const json& s = j["simulation"];
    check_keys(s, "simulation", {"replications", "seed", "threads", "bootstrap", "trajectory"});
    if (s.contains("replications")) c.simulation.replications = count_value(s["replications"], "simulation.replications");
    if (s.contains("seed")) c.simulation.seed = seed_value(s["seed"], "simulation.seed");
    if (s.contains("threads")) {
      c.simulation.threads = static_cast<unsigned>(count_value(s["threads"], "simulation.threads"));
    }
    if (s.contains("bootstrap")) c.simulation.bootstrap = count_value(s["bootstrap"], "simulation.bootstrap");
    if (s.contains("trajectory")) c.simulation.trajectory_path = text(s["trajectory"], "simulation.trajectory");
    if (c.simulation.replications < 100) fail("simulation.replications", "at least 100 replications");
  }
  if (j.contains("validation")) {
    const json& v = j["validation"];
    check_keys(v, "validation", {"conditional_n", "t_grid", "restriction_n", "epsilon", "cycles"});
    if (v.contains("conditional_n")) c.validation.conditional_n = count_value(v["conditional_n"], "validation.conditional_n");
    if (v.contains("t_grid")) c.validation.t_grid = numbers(v["t_grid"], "validation.t_grid");
    if (v.contains("restriction_n")) c.validation.restriction_n = count_value(v["restriction_n"], "validation.restriction_n");
    if (v.contains("epsilon")) c.validation.epsilon = number(v["epsilon"], "validation.epsilon");
    if (v.contains("cycles")) c.validation.cycles = count_value(v["cycles"], "validation.cycles");
    if (c.validation.conditional_n < 10000) fail("validation.conditional_n", "must be at least 10000");
    if (c.validation.restriction_n < 100) fail("validation.restriction_n", "must be at least 100");
    if (!(c.validation.epsilon > 0.0 && c.validation.epsilon <= 1.0)) fail("validation.epsilon", "must lie in (0, 1]");
    if (c.validation.cycles < 2) fail("validation.cycles", "must be at least 2");
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"parameter", "values"});
    SweepConfig sw;
    if (s.contains("parameter")) sw.parameter = text(s["parameter"], "sweep.parameter", {"gamma", "t"});
    if (!s.contains("values")) fail("sweep", "missing 'values'");
    sw.values = numbers(s["values"], "sweep.values");
    if (sw.values.empty()) fail("sweep.values", "empty");
    for (double v : sw.values) {
      if (sw.parameter == "gamma" ? !(v > 0.0) : v < 0.0) fail("sweep.values", "out of range for " + sw.parameter);
    }
    c.sweep = sw;
  }
  if (j.contains("numeric")) {
    const json& n = j["numeric"];
    check_keys(n, "numeric", {"grid_points", "tail_quantile", "tail_factor", "quad_tol"});
    if (n.contains("grid_points")) c.numeric.grid_points = count_value(n["grid_points"], "numeric.grid_points");
    if (n.contains("tail_quantile")) c.numeric.tail_quantile = number(n["tail_quantile"], "numeric.tail_quantile");
    if (n.contains("tail_factor")) c.numeric.tail_factor = positive(n["tail_factor"], "numeric.tail_factor");
    if (n.contains("quad_tol")) c.numeric.quad_tol = positive(n["quad_tol"], "numeric.quad_tol");
    if (c.numeric.grid_points < 16) fail("numeric.grid_points", "must be at least 16");
    if (!(c.numeric.tail_quantile > 0.5 && c.numeric.tail_quantile < 1.0)) {
      fail("numeric.tail_quantile", "must lie in (0.5, 1)");
    }
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, "output", {"format", "path"});
    if (o.contains("format")) c.output.format = text(o["format"], "output.format", {"json", "csv"});
    if (o.contains("path")) c.output.path = text(o["path"], "output.path");
  }
  // Descriptors, the transition matrix and the counted set are checked before any computation.
  const MrppModel m = build_model(c.model);
  counted_indices(c.model, m);
  if (const auto* mu = std::get_if<std::vector<double>>(&c.mu)) {
    if (mu->size() != m.size()) fail("mu", "needs one entry per state");
  }
  return c;
}

RunConfig parse_config_text(const std::string& s) {
  json j;
  try {
    j = json::parse(s);
  } catch (const json::parse_error& e) {
    fail("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

InterarrivalDistribution parse_distribution(const json& j, TimeMode mode) {
  const std::string where = "distribution";
  if (!j.is_object() || !j.contains("family")) fail(where, "missing 'family'");
  const std::string family = text(j["family"], where + ".family",
                                  {"exponential", "erlang", "hyperexponential", "weibull", "uniform", "geometric",
                                   "lattice_pmf", "numeric_density", "point_masses"});
  const bool lattice_family = family == "geometric" || family == "lattice_pmf";
  if (lattice_family != (mode == TimeMode::Lattice)) {
    fail(where, "family '" + family + "' does not match the " + std::string(to_string(mode)) + " mode");
  }
  auto params = [&](std::size_t lo, std::size_t hi) {
    if (!j.contains("params")) fail(where, family + " needs 'params'");
    auto p = numbers(j["params"], where + ".params");
    if (p.size() < lo || p.size() > hi) fail(where + ".params", "wrong number of parameters for " + family);
    return p;
  };
  std::optional<InterarrivalDistribution> d;
  if (family == "point_masses") {
    check_keys(j, where, {"family", "atoms"});
    if (!j.contains("atoms")) fail(where, "point_masses needs 'atoms'");
  } else if (family == "exponential") {
    check_keys(j, where, {"family", "params", "atoms"});
    d = InterarrivalDistribution::exponential(params(1, 1)[0]);
  } else if (family == "erlang") {
    check_keys(j, where, {"family", "params", "atoms"});
    const auto p = params(2, 2);
    if (p[0] != std::floor(p[0]) || p[0] < 1.0) fail(where + ".params", "Erlang shape must be a positive integer");
    d = InterarrivalDistribution::erlang(static_cast<int>(p[0]), p[1]);
  } else if (family == "hyperexponential") {
    check_keys(j, where, {"family", "params", "atoms"});
    const auto p = params(2, 1000);
    if (p.size() == 3) {
      d = InterarrivalDistribution::hyperexponential({p[0], 1.0 - p[0]}, {p[1], p[2]});
    } else {
      if (p.size() % 2 != 0) fail(where + ".params", "expected [p, rate1, rate2] or weights followed by rates");
      const auto k = static_cast<std::ptrdiff_t>(p.size() / 2);
      d = InterarrivalDistribution::hyperexponential({p.begin(), p.begin() + k}, {p.begin() + k, p.end()});
    }
  } else if (family == "weibull") {
    check_keys(j, where, {"family", "params", "atoms"});
    const auto p = params(2, 2);
    d = InterarrivalDistribution::weibull(p[0], p[1]);
  } else if (family == "uniform") {
    check_keys(j, where, {"family", "params", "atoms"});
    const auto p = params(2, 2);
    d = InterarrivalDistribution::uniform(p[0], p[1]);
  } else if (family == "geometric") {
    check_keys(j, where, {"family", "params"});
    d = InterarrivalDistribution::lattice_geometric(params(1, 1)[0]);
  } else if (family == "lattice_pmf") {
    check_keys(j, where, {"family", "params", "tail_ratio"});
    const double ratio = j.contains("tail_ratio") ? number(j["tail_ratio"], where + ".tail_ratio") : 0.0;
    d = InterarrivalDistribution::lattice_pmf(params(1, 100000), ratio);
  } else {
    check_keys(j, where, {"family", "x", "y", "tail_rate", "atoms"});
    if (!j.contains("x") || !j.contains("y")) fail(where, "numeric_density needs 'x' and 'y'");
    const double rate = j.contains("tail_rate") ? number(j["tail_rate"], where + ".tail_rate") : 0.0;
    d = InterarrivalDistribution::numeric_density(numbers(j["x"], where + ".x"), numbers(j["y"], where + ".y"), rate);
  }
  if (j.contains("atoms")) {
    const json& a = j["atoms"];
    if (!a.is_array()) fail(where + ".atoms", "expected [[location, mass], ...]");
    std::vector<Atom> atoms;
    for (const auto& pair : a) {
      const auto v = numbers(pair, where + ".atoms");
      if (v.size() != 2) fail(where + ".atoms", "each atom is [location, mass]");
      atoms.push_back({v[0], v[1]});
    }
    d = d ? d->with_atoms(std::move(atoms)) : InterarrivalDistribution::point_masses(std::move(atoms));
  }
  return *d;
}

json describe_distribution(const InterarrivalDistribution& d) {
  json j;
  if (!d.family()) {
    j["family"] = "point_masses";
  } else {
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Exponential>) {
            j = {{"family", "exponential"}, {"params", {f.rate}}};
          } else if constexpr (std::is_same_v<F, Erlang>) {
            j = {{"family", "erlang"}, {"params", {f.shape, f.rate}}};
          } else if constexpr (std::is_same_v<F, HyperExponential>) {
            std::vector<double> p = f.weights;
            p.insert(p.end(), f.rates.begin(), f.rates.end());
            j = {{"family", "hyperexponential"}, {"params", p}};
          } else if constexpr (std::is_same_v<F, Weibull>) {
            j = {{"family", "weibull"}, {"params", {f.shape, f.scale}}};
          } else if constexpr (std::is_same_v<F, Uniform>) {
            j = {{"family", "uniform"}, {"params", {f.lo, f.hi}}};
          } else if constexpr (std::is_same_v<F, LatticeGeometric>) {
            j = {{"family", "geometric"}, {"params", {f.p}}};
          } else if constexpr (std::is_same_v<F, LatticePmf>) {
            j = {{"family", "lattice_pmf"}, {"params", f.pmf}, {"tail_ratio", f.tail_ratio}};
          } else {
            j = {{"family", "numeric_density"}, {"x", f.x}, {"y", f.y}, {"tail_rate", f.tail_rate}};
          }
        },
        *d.family());
  }
  if (!d.atoms().empty()) {
    json a = json::array();
    for (const Atom& at : d.atoms()) a.push_back({at.location, at.mass});
    j["atoms"] = a;
  }
  return j;
}

MrppModel build_model(const ModelConfig& c) {
  if (c.type == "renewal") return MrppModel::renewal(parse_distribution(c.interarrival, c.mode));
  const std::size_t n = c.transition.size();
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = c.transition[i][k];
  }
  std::vector<std::optional<InterarrivalDistribution>> soj(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = c.sojourn[i];
    if (row.is_object()) {
      const auto d = parse_distribution(row, c.mode);
      for (std::size_t k = 0; k < n; ++k) {
        if (c.transition[i][k] > 0.0) soj[i * n + k] = d;
      }
    } else if (row.is_array() && row.size() == n) {
      for (std::size_t k = 0; k < n; ++k) {
        if (row[k].is_null()) {
          if (c.transition[i][k] > 0.0) fail("model.sojourn", "missing sojourn law for a transition with P > 0");
          continue;
        }
        if (c.transition[i][k] > 0.0) soj[i * n + k] = parse_distribution(row[k], c.mode);
      }
    } else {
      fail("model.sojourn", "each entry is a descriptor or a row of descriptors");
    }
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  MrppModel full(p, soj, all, c.mode, c.states);
  return MrppModel(p, std::move(soj), counted_indices(c, full), c.mode, c.states);
}

std::vector<std::size_t> counted_indices(const ModelConfig& c, const MrppModel& m) {
  std::vector<std::size_t> out;
  if (c.count.empty()) {
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back(i);
    return out;
  }
  for (const auto& name : c.count) {
    if (name.size() > 1 && name[0] == '#') {
      const auto idx = std::stoull(name.substr(1));
      if (idx >= m.size()) fail("model.count", "state index out of range");
      out.push_back(idx);
      continue;
    }
    const auto& names = m.names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail("model.count", "unknown state '" + name + "'");
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cpbound
