#include "cpbound/runner.hpp"

#include "cpbound/embedding.hpp"
#include "cpbound/error.hpp"
#include "cpbound/report_io.hpp"
#include "cpbound/validation.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

namespace cpbound {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

bool skippable(ErrorCode c) {
  return c == ErrorCode::Inapplicable || c == ErrorCode::AllInapplicable || c == ErrorCode::ZeroC0;
}

void emit(const RunConfig& config, const std::string& body, std::ostream& out) {
  if (config.output.path.empty()) {
    out << body;
    return;
  }
  std::ofstream f(config.output.path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::ConfigError, "cannot write '" + config.output.path + "'");
  f << body;
}

bool wants_csv(const RunConfig& config, const std::string& command) {
  return config.output.format.empty() ? command == "sweep" : config.output.format == "csv";
}

json header(const std::string& command, const RunConfig& config) {
  return json{{"command", command}, {"seed", config.simulation.seed}};
}

double stationary_average(const MrppModel* m, const std::vector<double>& values) {
  if (values.size() == 1 || m == nullptr) return values.front();
  const auto pi = stationary_distribution(m->transition());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += pi[i] * values[i];
  return acc;
}

json z_check(const std::string& name, double estimate, double se, double target) {
  // A degenerate statistic (zero spread) must match up to rounding.
  const bool same = std::abs(estimate - target) <= 1e-9 * std::max(1.0, std::abs(target));
  const double z = se > 0.0 ? (estimate - target) / se : (same ? 0.0 : kInf);
  return json{{"name", name}, {"estimate", estimate}, {"se", se}, {"target", target}, {"z", finite_or_null(z)},
              {"pass", std::abs(z) <= 4.0}};
}

int run_bound(const RunConfig& config, std::ostream& out) {
  const BoundRun run = bound_from_config(config);
  if (wants_csv(config, "bound")) {
    emit(config, bound_csv(run.report), out);
    return 0;
  }
  json j = header("bound", config);
  j["mu_policy"] = run.mu_policy;
  if (!run.gamma_grid.empty()) {
    json totals = json::array();
    for (double v : run.grid_totals) totals.push_back(finite_or_null(v));
    j["gamma_search"] = {{"grid", run.gamma_grid}, {"totals", totals}};
  }
  j["bound"] = to_json(run.report);
  emit(config, dump(j), out);
  return 0;
}

int run_simulate(const RunConfig& config, std::ostream& out, std::ostream& log) {
  const MrppModel full = build_model(config.model);
  const auto b = counted_indices(config.model, full);
  const auto& sc = config.simulation;
  const SimulationResult sim = empirical_distribution(full, config.t, b, sc.replications, sc.seed, sc.threads);
  log << "simulated " << sim.replications << " replications in " << sim.wall_seconds << " s\n";

  std::optional<BoundRun> run;
  std::string bound_error;
  try {
    run = bound_from_config(config);
  } catch (const Error& e) {
    if (exit_status(e.code()) != 1) throw;
    bound_error = e.what();
  }
  std::vector<double> spec;
  std::optional<TvEstimate> tv;
  if (run) {
    spec = reference_pmf(run->report.pi, sim.pmf.size());
    tv = empirical_tv(sim, spec, sc.bootstrap, sc.seed);
  }
  if (!sc.trajectory_path.empty()) {
    Rng rng(derive_seed(sc.seed, std::numeric_limits<std::uint64_t>::max()));
    const Trajectory tr = simulate(full, StationaryStart{}, config.t, rng);
    std::ofstream f(sc.trajectory_path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::ConfigError, "cannot write '" + sc.trajectory_path + "'");
    f << trajectory_csv(tr);
  }
  if (wants_csv(config, "simulate")) {
    emit(config, comparison_csv(sim, spec), out);
    return 0;
  }
  json j = header("simulate", config);
  j["simulation"] = to_json(sim);
  if (run) {
    j["bound_total"] = run->report.total;
    j["pi"] = to_json(run->report.pi);
    j["tv"] = to_json(*tv);
  } else {
    j["bound_error"] = bound_error;
  }
  json table = json::array();
  const std::size_t len = std::max(sim.pmf.size(), spec.size());
  for (std::size_t k = 0; k < len; ++k) {
    table.push_back({{"n", k},
                     {"empirical", k < sim.pmf.size() ? sim.pmf[k] : 0.0},
                     {"spec", run ? json(k < spec.size() ? spec[k] : 0.0) : json(nullptr)}});
  }
  j["table"] = table;
  emit(config, dump(j), out);
  return 0;
}

int run_validate(const RunConfig& config, std::ostream& out, std::ostream& log) {
  const BoundRun run = bound_from_config(config);
  const BoundReport& rep = run.report;
  const MrppModel full = build_model(config.model);
  const auto b = counted_indices(config.model, full);
  const auto& sc = config.simulation;
  const auto& vc = config.validation;
  bool all = true;
  json j = header("validate", config);
  j["bound"] = to_json(rep);

  const SimulationResult sim = empirical_distribution(full, config.t, b, sc.replications, sc.seed, sc.threads);
  const auto spec = reference_pmf(rep.pi, sim.pmf.size());
  const TvEstimate tv = empirical_tv(sim, spec, sc.bootstrap, sc.seed);
  // The plug-in estimate is biased upward by up to the sampling noise, which
  // dominates when the bound is near 0; the strict comparison is reported too.
  const bool strict = tv.tv <= rep.total + 3.0 * tv.se;
  const bool dominance = tv.tv <= rep.total + tv.sampling_noise + 3.0 * tv.se;
  all = all && dominance;
  j["dominance"] = {{"tv", to_json(tv)},          {"bound", rep.total},  {"replications", sim.replications},
                    {"strict_pass", strict}, {"pass", dominance}};
  log << "dominance: tv " << tv.tv << " se " << tv.se << " bound " << rep.total << '\n';

  std::optional<double> exact_tv;
  const bool integer_t = std::abs(config.t - std::round(config.t)) < 1e-9;
  if (full.mode() == TimeMode::Lattice && integer_t && config.t <= 20000) {
    const auto exact = exact_lattice_distribution(full, config.t, b);
    const auto spec_exact = reference_pmf(rep.pi, exact.size());
    exact_tv = tv_distance(exact, spec_exact);
    const bool pass = *exact_tv <= rep.total + 1e-9;
    all = all && pass;
    j["exact_dominance"] = {{"tv", *exact_tv}, {"bound", rep.total}, {"pass", pass}};
  }

  const auto ref = ReferenceMeasure::make(rep.gamma, full.mode());
  if (config.model.type == "renewal") {
    const auto d = parse_distribution(config.model.interarrival, config.model.mode);
    const auto profile = build_profile(d, ref, config.numeric);
    const auto ct = memoryless_conditional_test(profile, d, vc.t_grid, vc.conditional_n, sc.seed, config.numeric);
    all = all && ct.pass;
    j["conditional"] = to_json(ct);
  } else {
    j["conditional"] = {{"skipped", "defined for single interrenewal laws"}};
  }

  if (b.size() == full.size()) {
    double eps = vc.epsilon;
    if (full.mode() == TimeMode::Lattice) eps = std::max(eps, rep.gamma);
    const auto profiles = build_state_profiles(full, rep.mu, ref, config.numeric);
    const auto rt = restriction_equivalence_test(full, profiles, rep.mu, eps, vc.restriction_n, sc.seed, 1.0,
                                                 config.numeric);
    all = all && rt.pass;
    j["restriction"] = to_json(rt);

    const auto em = build_embedding(full, profiles, rep.mu, eps, config.numeric);
    const auto cs = cycle_statistics(*em, vc.cycles, sc.seed);
    const auto ee = expectations_at(embedded_moments_limit(full, profiles, rep.mu), eps);
    json checks = json::array();
    checks.push_back(z_check("ex", cs.ex, cs.ex_se, ee.ex));
    checks.push_back(z_check("ex2", cs.ex2, cs.ex2_se, ee.ex2));
    checks.push_back(z_check("ey", cs.ey, cs.ey_se, ee.ey));
    checks.push_back(z_check("exy", cs.exy, cs.exy_se, ee.exy));
    checks.push_back(z_check("eu", cs.eu, cs.eu_se, ee.eu_exact));
    bool pass = true;
    for (const auto& c : checks) pass = pass && c["pass"].get<bool>();
    all = all && pass;
    j["cycle_moments"] = {{"statistics", to_json(cs)}, {"epsilon", eps}, {"checks", checks}, {"pass", pass}};
  } else {
    j["restriction"] = {{"skipped", "counted subset: the embedding needs the full model"}};
    j["cycle_moments"] = {{"skipped", "counted subset: the embedding needs the full model"}};
  }
  j["pass"] = all;

  if (wants_csv(config, "validate")) {
    std::ostringstream os;
    os << "bound,empirical_tv,se,exact_tv,pass,seed\n";
    os << format_number(rep.total) << ',' << format_number(tv.tv) << ',' << format_number(tv.se) << ','
       << (exact_tv ? format_number(*exact_tv) : std::string()) << ',' << (all ? "true" : "false") << ','
       << sc.seed << '\n';
    emit(config, os.str(), out);
  } else {
    emit(config, dump(j), out);
  }
  return all ? 0 : 1;
}

int run_sweep(const RunConfig& config, std::ostream& out) {
  require(config.sweep.has_value(), ErrorCode::ConfigError, "sweep: missing 'sweep' block");
  const auto& sw = *config.sweep;
  std::optional<MrppModel> view;
  if (config.model.type == "mrpp") {
    const MrppModel full = build_model(config.model);
    const auto b = counted_indices(config.model, full);
    view = b.size() == full.size() ? full : restrict(full, b);
  }
  std::vector<SweepRow> rows;
  for (double v : sw.values) {
    SweepRow row;
    row.parameter = sw.parameter;
    row.value = v;
    row.t = sw.parameter == "t" ? v : config.t;
    row.gamma = sw.parameter == "gamma" ? v : (std::holds_alternative<double>(config.gamma) ? std::get<double>(config.gamma) : 0.0);
    try {
      const BoundRun run = sw.parameter == "gamma" ? bound_from_config(config, v) : bound_from_config(config, std::nullopt, v);
      const BoundReport& r = run.report;
      row.gamma = r.gamma;
      row.c0 = stationary_average(view ? &*view : nullptr, r.c0);
      row.c1 = stationary_average(view ? &*view : nullptr, r.c1);
      row.h1_regime = r.h1.regime;
      row.h1 = r.h1.value;
      row.first_term = r.first_term;
      row.second_term = r.second_term;
      row.total = r.total;
    } catch (const Error& e) {
      if (exit_status(e.code()) != 1) throw;
      row.status = std::string(to_string(e.code()));
      row.total = kInf;
    }
    rows.push_back(row);
  }
  if (!wants_csv(config, "sweep")) {
    json j = header("sweep", config);
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"parameter", r.parameter}, {"value", r.value},     {"gamma", r.gamma},
                     {"t", r.t},                 {"c0", r.c0},           {"c1", r.c1},
                     {"status", r.status},       {"h1_regime", r.h1_regime}, {"h1", r.h1},
                     {"first_term", r.first_term}, {"second_term", r.second_term},
                     {"total", finite_or_null(r.total)}});
    }
    j["rows"] = arr;
    emit(config, dump(j), out);
  } else {
    emit(config, sweep_csv(rows, config.simulation.seed), out);
  }
  return 0;
}

}  // namespace

int exit_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Inapplicable:
    case ErrorCode::AllInapplicable:
    case ErrorCode::ZeroC0:
    case ErrorCode::InfeasibleMu:
    case ErrorCode::SingularSystem:
      return 1;
    default:
      return 2;
  }
}

BoundRun bound_from_config(const RunConfig& config, std::optional<double> gamma_override,
                           std::optional<double> t_override) {
  const double t = t_override.value_or(config.t);
  const BoundOptions opts{config.exact_u, config.epsilon};
  const TimeMode mode = config.model.mode;
  BoundRun out;

  std::function<BoundReport(double)> eval;
  double mean = 1.0;
  std::optional<InterarrivalDistribution> law;
  std::optional<MrppModel> model;
  if (config.model.type == "renewal") {
    law = parse_distribution(config.model.interarrival, mode);
    const Moments mom = law->moments();
    mean = mom.m1;
    out.mu_policy = "single-state";
    eval = [&, mom](double g) {
      const auto profile = build_profile(*law, ReferenceMeasure::make(g, mode), config.numeric);
      return renewal_bound(profile, mom.m1, mom.m2, t, opts);
    };
  } else {
    const MrppModel full = build_model(config.model);
    const auto b = counted_indices(config.model, full);
    model = b.size() == full.size() ? full : restrict(full, b);
    mean = validate_model(*model).mean_sojourn;
    eval = [&](double g) {
      const auto ref = ReferenceMeasure::make(g, mode);
      if (const auto* policy = std::get_if<std::string>(&config.mu)) {
        MuChoice mc = choose_mu(*model, ref, *policy, t, opts, config.numeric);
        out.mu_policy = mc.policy;
        if (mc.report) return *mc.report;
        return mrpp_bound(*model, mc.profiles, mc.mu, t, opts);
      }
      const auto& mu = std::get<std::vector<double>>(config.mu);
      require(mu.size() == model->size(), ErrorCode::ConfigError, "mu: expected one entry per counted state");
      out.mu_policy = "given";
      const auto profiles = build_state_profiles(*model, mu, ref, config.numeric);
      return mrpp_bound(*model, profiles, mu, t, opts);
    };
  }

  if (gamma_override) {
    out.report = eval(*gamma_override);
    return out;
  }
  if (const double* g = std::get_if<double>(&config.gamma)) {
    out.report = eval(*g);
    return out;
  }
  out.gamma_grid = std::get<GammaAuto>(config.gamma).grid;
  if (out.gamma_grid.empty()) out.gamma_grid = default_gamma_grid(mode, mean);
  std::optional<BoundReport> best;
  std::string best_policy;
  for (double g : out.gamma_grid) {
    double total = kInf;
    const bool allowed = mode == TimeMode::Continuous || (g <= 1.0 && (!config.epsilon || g <= *config.epsilon));
    if (allowed) {
      try {
        BoundReport r = eval(g);
        total = r.total;
        if (!best || total < best->total) {
          best = std::move(r);
          best_policy = out.mu_policy;
        }
      } catch (const Error& e) {
        if (!skippable(e.code())) throw;
      }
    }
    out.grid_totals.push_back(total);
  }
  require(best.has_value(), ErrorCode::AllInapplicable, "no rate on the grid gives c0 > 0");
  out.report = std::move(*best);
  out.mu_policy = best_policy;
  return out;
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& log) {
  try {
    if (command == "bound") return run_bound(config, out);
    if (command == "simulate") return run_simulate(config, out, log);
    if (command == "validate") return run_validate(config, out, log);
    if (command == "sweep") return run_sweep(config, out);
    log << "error: unknown command '" << command << "'\n";
    return 2;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_status(e.code());
  }
}

}  // namespace cpbound
