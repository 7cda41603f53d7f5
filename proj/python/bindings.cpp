#include "cpbound/bounds.hpp"
#include "cpbound/compound_poisson.hpp"
#include "cpbound/config.hpp"
#include "cpbound/distributions.hpp"
#include "cpbound/memoryless.hpp"
#include "cpbound/report_io.hpp"
#include "cpbound/runner.hpp"
#include "cpbound/validation.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace cpbound;

namespace {

TimeMode parse_mode(const std::string& mode) {
  if (mode == "continuous") return TimeMode::Continuous;
  if (mode == "lattice") return TimeMode::Lattice;
  throw Error(ErrorCode::InvalidArgument, "mode must be 'continuous' or 'lattice'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compound Poisson approximation bounds (C++ core)";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<InterarrivalDistribution>(m, "Distribution")
      .def_static("exponential", &InterarrivalDistribution::exponential, py::arg("rate"))
      .def_static("erlang", &InterarrivalDistribution::erlang, py::arg("shape"), py::arg("rate"))
      .def_static("hyperexponential", &InterarrivalDistribution::hyperexponential, py::arg("weights"),
                  py::arg("rates"))
      .def_static("weibull", &InterarrivalDistribution::weibull, py::arg("shape"), py::arg("scale"))
      .def_static("uniform", &InterarrivalDistribution::uniform, py::arg("lo"), py::arg("hi"))
      .def_static("geometric", &InterarrivalDistribution::lattice_geometric, py::arg("p"))
      .def_static("lattice_pmf", &InterarrivalDistribution::lattice_pmf, py::arg("pmf"), py::arg("tail_ratio") = 0.0)
      .def_static(
          "from_descriptor",
          [](const std::string& text, const std::string& mode) {
            return parse_distribution(nlohmann::json::parse(text), parse_mode(mode));
          },
          py::arg("descriptor_json"), py::arg("mode") = "continuous")
      .def_property_readonly("name", &InterarrivalDistribution::name)
      .def_property_readonly("lattice", [](const InterarrivalDistribution& d) { return d.mode() == TimeMode::Lattice; })
      .def("cdf", &InterarrivalDistribution::cdf)
      .def("survival", &InterarrivalDistribution::survival)
      .def("pdf", &InterarrivalDistribution::pdf_ac)
      .def("pmf", &InterarrivalDistribution::pmf)
      .def("moments", [](const InterarrivalDistribution& d) {
        const Moments mo = d.moments();
        return py::make_tuple(mo.m1, mo.m2);
      })
      .def(
          "sample",
          [](const InterarrivalDistribution& d, std::size_t n, std::uint64_t seed) {
            Rng rng(seed);
            std::vector<double> out(n);
            for (auto& x : out) x = d.sample(rng);
            return out;
          },
          py::arg("n"), py::arg("seed"));

  py::class_<MemorylessProfile>(m, "Profile")
      .def_property_readonly("gamma", &MemorylessProfile::gamma)
      .def_property_readonly("c0", &MemorylessProfile::c0)
      .def_property_readonly("c1", &MemorylessProfile::c1)
      .def_property_readonly("applicable", &MemorylessProfile::applicable)
      .def("sigma", &MemorylessProfile::sigma)
      .def("G", &MemorylessProfile::G);

  m.def(
      "build_profile",
      [](const InterarrivalDistribution& d, double gamma) {
        return build_profile(d, ReferenceMeasure::make(gamma, d.mode()));
      },
      py::arg("dist"), py::arg("gamma"));

  m.def(
      "tail_inf_f",
      [](const InterarrivalDistribution& d, double gamma, double t) {
        return tail_inf_f(d, ReferenceMeasure::make(gamma, d.mode()), t);
      },
      py::arg("dist"), py::arg("gamma"), py::arg("t"));

  m.def(
      "renewal_bound_json",
      [](const InterarrivalDistribution& d, double gamma, double t, bool exact_u, std::optional<double> epsilon) {
        const auto profile = build_profile(d, ReferenceMeasure::make(gamma, d.mode()));
        const Moments mo = d.moments();
        return to_json(renewal_bound(profile, mo.m1, mo.m2, t, {exact_u, epsilon})).dump();
      },
      py::arg("dist"), py::arg("gamma"), py::arg("t"), py::arg("exact_u") = false, py::arg("epsilon") = py::none());

  m.def(
      "bound_json", [](const std::string& config_text) { return to_json(bound_from_config(parse_config_text(config_text)).report).dump(); },
      py::arg("config_json"));

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text) {
        std::ostringstream out, log;
        int status;
        try {
          status = run_command(command, parse_config_text(config_text), out, log);
        } catch (const Error& e) {
          log << "error: " << e.what() << '\n';
          status = exit_status(e.code());
        }
        return py::make_tuple(status, out.str(), log.str());
      },
      py::arg("command"), py::arg("config_json"));

  m.def(
      "geometric_compound_pmf",
      [](double norm, double c0, std::size_t n_max) {
        CompoundPoissonSpec s = build_renewal_spec(c0, 1.0, c0 / norm);
        return pmf_vector(s, n_max);
      },
      py::arg("norm"), py::arg("c0"), py::arg("n_max"));

  m.def(
      "compound_pmf", [](std::vector<double> pi, std::size_t n_max) { return pmf_vector(build_finite_spec(std::move(pi)), n_max); },
      py::arg("pi"), py::arg("n_max"));

  m.def(
      "h1_json", [](std::vector<double> pi) { return to_json(h1_bound(build_finite_spec(std::move(pi)))).dump(); },
      py::arg("pi"));

  m.def("tv_distance", [](const std::vector<double>& p, const std::vector<double>& q) { return tv_distance(p, q); });

  m.def(
      "exact_lattice_distribution",
      [](const std::string& config_text, double t) {
        const RunConfig c = parse_config_text(config_text);
        const MrppModel model = build_model(c.model);
        return exact_lattice_distribution(model, t, counted_indices(c.model, model));
      },
      py::arg("config_json"), py::arg("t"));

  m.def(
      "empirical_distribution_json",
      [](const std::string& config_text, std::size_t reps, std::uint64_t seed) {
        const RunConfig c = parse_config_text(config_text);
        const MrppModel model = build_model(c.model);
        py::gil_scoped_release release;
        return to_json(empirical_distribution(model, c.t, counted_indices(c.model, model), reps, seed, 1)).dump();
      },
      py::arg("config_json"), py::arg("reps"), py::arg("seed"));
}
