#include "cpbound/report_io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace cpbound {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json to_json(const CompoundPoissonSpec& spec) {
  json j{{"kind", std::string(to_string(spec.kind))},
         {"norm", spec.norm},
         {"lambda", spec.lambda},
         {"theta", spec.theta}};
  if (spec.kind == CompoundPoissonSpec::Kind::Geometric) {
    j["c0"] = spec.c0;
  } else {
    j["pi"] = spec.finite;
    j["tail_bound"] = spec.tail_bound;
  }
  return j;
}

json to_json(const SteinConstant& h1) {
  json j{{"value", h1.value}, {"regime", h1.regime}, {"general", h1.general}, {"monotone_holds", h1.monotone_holds},
         {"theta_holds", h1.theta_holds}};
  j["monotone"] = h1.monotone_holds ? json(h1.monotone) : json(nullptr);
  j["theta_value"] = h1.theta_holds ? json(h1.theta_value) : json(nullptr);
  j["verified_range"] = h1.verified_range;
  return j;
}

json to_json(const EmbeddedExpectations& e) {
  return json{{"epsilon", e.epsilon},       {"ex", e.ex},           {"ex2", e.ex2},
              {"ex_factorial", e.ex_factorial}, {"ey", e.ey},     {"exy", e.exy},
              {"eu_upper", e.eu_upper},     {"eu_exact", e.eu_exact}, {"masses", e.masses},
              {"mass_total", e.mass_total}, {"mass_tail", e.mass_tail}};
}

json to_json(const BoundReport& r) {
  json j;
  j["kind"] = r.kind;
  j["mode"] = std::string(to_string(r.mode));
  j["gamma"] = r.gamma;
  j["t"] = r.t;
  j["epsilon"] = r.epsilon ? json(*r.epsilon) : json(nullptr);
  j["mu"] = r.mu;
  j["c0"] = r.c0;
  j["c1"] = r.c1;
  j["mean"] = r.mean;
  j["second_moment"] = r.second_moment;
  j["u_variant"] = r.u_variant;
  j["first_term"] = r.first_term;
  j["h1"] = to_json(r.h1);
  j["second_factor"] = r.second_factor;
  j["bracket_xy"] = r.bracket_xy;
  j["bracket_x2"] = r.bracket_x2;
  j["second_term"] = r.second_term;
  j["total"] = r.total;
  j["capped_total"] = r.capped_total;
  j["low_quality"] = r.low_quality;
  json s = json::object();
  for (const auto& [name, value] : r.summands) s[name] = value;
  j["summands"] = s;
  j["pi"] = to_json(r.pi);
  j["spectral_radius"] = r.spectral_radius;
  j["expectations"] = to_json(r.expectations);
  return j;
}

json to_json(const SimulationResult& r) {
  return json{{"replications", r.replications}, {"seed", r.seed}, {"t", r.t},       {"b", r.b},
              {"counts", r.counts},             {"pmf", r.pmf},   {"mean", r.mean}, {"mean_se", r.mean_se}};
}

json to_json(const TvEstimate& tv) {
  return json{{"tv", tv.tv}, {"se", tv.se}, {"sampling_noise", tv.sampling_noise}, {"resamples", tv.resamples}, {"seed", tv.seed}};
}

json to_json(const KsResult& ks) {
  return json{{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"n1", ks.n1}, {"n2", ks.n2}};
}

json to_json(const ConditionalTestReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    json e{{"t", c.t}, {"events", c.events}, {"p_hat", c.p_hat}, {"sigma", c.sigma}, {"z_sigma", c.z_sigma},
           {"insufficient", c.insufficient}, {"pass", c.pass}};
    if (!c.insufficient) {
      e["mean_excess"] = c.mean_excess;
      e["z_mean"] = c.z_mean;
      e["second_excess"] = c.second_excess;
      e["z_second"] = c.z_second;
    }
    checks.push_back(e);
  }
  return json{{"seed", r.seed},
              {"n", r.n},
              {"gamma", r.gamma},
              {"checks", checks},
              {"marginal_ks", to_json(r.marginal)},
              {"ks_critical", r.ks_critical},
              {"ks_pass", r.ks_pass},
              {"pass", r.pass}};
}

json to_json(const RestrictionTestReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) pairs.push_back({{"from", p.from}, {"to", p.to}, {"ks", to_json(p.ks)}, {"pass", p.pass}});
  return json{{"seed", r.seed},
              {"n", r.n},
              {"epsilon", r.epsilon},
              {"reset_multiplier", r.reset_multiplier},
              {"alpha", r.alpha},
              {"per_test_level", r.per_test_level},
              {"pairs", pairs},
              {"chi2", r.chi2},
              {"chi2_df", r.chi2_df},
              {"chi2_p_value", r.chi2_p_value},
              {"chi2_pass", r.chi2_pass},
              {"pass", r.pass}};
}

json to_json(const CycleStatistics& s) {
  return json{{"cycles", s.cycles}, {"ex", s.ex},   {"ex_se", s.ex_se},   {"ex2", s.ex2}, {"ex2_se", s.ex2_se},
              {"ey", s.ey},         {"ey_se", s.ey_se}, {"exy", s.exy}, {"exy_se", s.exy_se}, {"eu", s.eu},
              {"eu_se", s.eu_se},   {"masses", s.masses}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string bound_csv(const BoundReport& r) {
  std::ostringstream os;
  os << "name,value\n";
  auto row = [&](const std::string& name, double v) { os << name << ',' << format_number(v) << '\n'; };
  row("gamma", r.gamma);
  row("t", r.t);
  if (r.epsilon) row("epsilon", *r.epsilon);
  row("mean", r.mean);
  row("first_term", r.first_term);
  row("h1", r.h1.value);
  row("second_factor", r.second_factor);
  row("bracket_xy", r.bracket_xy);
  row("bracket_x2", r.bracket_x2);
  row("second_term", r.second_term);
  row("total", r.total);
  row("capped_total", r.capped_total);
  row("pi_norm", r.pi.norm);
  row("pi_lambda", r.pi.lambda);
  row("pi_theta", r.pi.theta);
  for (const auto& [name, v] : r.summands) row("summand_" + name, v);
  return os.str();
}

std::string comparison_csv(const SimulationResult& r, const std::vector<double>& spec_pmf) {
  std::ostringstream os;
  os << "n,empirical,spec,seed\n";
  const std::size_t len = std::max(r.pmf.size(), spec_pmf.size());
  for (std::size_t k = 0; k < len; ++k) {
    os << k << ',' << format_number(k < r.pmf.size() ? r.pmf[k] : 0.0) << ','
       << format_number(k < spec_pmf.size() ? spec_pmf[k] : 0.0) << ',' << r.seed << '\n';
  }
  return os.str();
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os << "time,state\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) os << format_number(traj.times[i]) << ',' << traj.states[i] << '\n';
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::uint64_t seed) {
  std::ostringstream os;
  os << "parameter,value,gamma,t,c0,c1,status,h1_regime,h1,first_term,second_term,total,seed\n";
  for (const auto& r : rows) {
    os << r.parameter << ',' << format_number(r.value) << ',' << format_number(r.gamma) << ',' << format_number(r.t)
       << ',' << format_number(r.c0) << ',' << format_number(r.c1) << ',' << r.status << ',' << r.h1_regime << ','
       << format_number(r.h1) << ',' << format_number(r.first_term) << ',' << format_number(r.second_term) << ','
       << format_number(r.total) << ',' << seed << '\n';
  }
  return os.str();
}

}  // namespace cpbound
