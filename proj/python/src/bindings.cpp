#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "fepa/experiment.hpp"
#include "fepa/lumping.hpp"
#include "fepa/model.hpp"
#include "fepa/perturbation.hpp"
#include "fepa/semantics.hpp"
#include "fepa/solver.hpp"
#include "fepa/symbolic.hpp"

namespace py = pybind11;
using namespace fepa;

namespace {

Candidate candidate(const FluidSystem& sys, const std::string& text) {
  return candidate_from_json(sys, nlohmann::json::parse(text));
}

Partition blocks_of(const FluidSystem& sys, const Candidate& c) {
  return c.partition ? *c.partition : projected_partition(sys, *c.tuples);
}

LumpKind kind_of(const Candidate& c) {
  return c.partition ? LumpKind::Ordinary : LumpKind::Exact;
}

SolverConfig solver_config(double t_end, double grid, const std::string& method, double step,
                           double rel_tol, double abs_tol) {
  SolverConfig cfg;
  cfg.t_end = t_end;
  cfg.grid = grid;
  cfg.step = step;
  cfg.rel_tol = rel_tol;
  cfg.abs_tol = abs_tol;
  if (method == "rk4")
    cfg.method = Method::Rk4Fixed;
  else if (method != "rk45")
    throw std::invalid_argument("method must be rk45 or rk4");
  return cfg;
}

std::vector<std::vector<double>> rows_of(const Trajectory& t) {
  std::vector<std::vector<double>> rows;
  rows.reserve(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) rows.emplace_back(t.row(i).begin(), t.row(i).end());
  return rows;
}

Trajectory trajectory_from(const std::vector<double>& times, const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& rows) {
  Trajectory t;
  t.times = times;
  t.names = names;
  if (rows.size() != times.size()) throw std::invalid_argument("one row per time expected");
  for (const auto& r : rows) {
    if (r.size() != names.size()) throw std::invalid_argument("row width differs from names");
    t.data.insert(t.data.end(), r.begin(), r.end());
  }
  return t;
}

VerifyOptions verify_options(std::size_t samples, double tol, std::uint64_t seed) {
  VerifyOptions v;
  v.samples = samples;
  v.tol = tol;
  v.seed = seed;
  return v;
}

}  // namespace

PYBIND11_MODULE(_fepa, m) {
  m.doc() = "FEPA fluid semantics, lumping and perturbation bounds.";

  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<LumpingError>(m, "LumpingError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<FepaModel>(m, "Model")
      .def_property(
          "rho", [](const FepaModel& x) { return to_string(x.rho); },
          [](FepaModel& x, const std::string& s) { x.rho = parse_sync(s); })
      .def_property_readonly("initial", [](const FepaModel& x) { return x.initial; })
      .def("rates", &FepaModel::rates)
      .def("with_rates",
           [](const FepaModel& x, const std::vector<double>& xi) { return apply_rates(x, xi); })
      .def("diagnostics",
           [](const FepaModel& x) {
             std::vector<py::tuple> out;
             for (const auto& d : validate(x))
               out.push_back(py::make_tuple(d.severity == Severity::Error ? "error" : "warning",
                                            d.code, d.message));
             return out;
           })
      .def("text", &print_model)
      .def("__str__", &print_model);

  m.def("parse_model", &parse_model, py::arg("text"));
  m.def("spread_model",
        [](std::size_t D, double delta, const std::string& rho) {
          return spread_model(D, delta, parse_sync(rho));
        },
        py::arg("D"), py::arg("delta"), py::arg("rho") = "product");

  py::class_<FluidSystem>(m, "System")
      .def(py::init<FepaModel>(), py::arg("model"))
      .def_property_readonly("model", &FluidSystem::model)
      .def_property_readonly("state_names", &FluidSystem::state_names)
      .def_property_readonly("actions", &FluidSystem::actions)
      .def_property_readonly("atoms",
                             [](const FluidSystem& s) {
                               std::vector<std::string> out;
                               for (const auto& a : s.atoms()) out.push_back(a.graph.atom);
                               return out;
                             })
      .def("initial_state", &FluidSystem::initial_state)
      .def("derivative",
           [](const FluidSystem& s, const std::vector<double>& v) {
             if (v.size() != s.state_count())
               throw std::invalid_argument("population has the wrong length");
             return s.derivative(v);
           })
      .def("apparent_rate",
           [](const FluidSystem& s, const std::vector<double>& v, const std::string& action) {
             if (v.size() != s.state_count())
               throw std::invalid_argument("population has the wrong length");
             return s.apparent_rate(v, s.action_id(action));
           })
      .def("odes",
           [](const FluidSystem& s, bool as_json) {
             auto f = symbolic_field(s);
             return as_json ? export_json(f).dump() : export_text(f);
           },
           py::arg("as_json") = false);

  m.def("solve",
        [](const FluidSystem& sys, const std::string& partition, double t_end, double grid,
           const std::string& method, double step, double rel_tol, double abs_tol) {
          auto cfg = solver_config(t_end, grid, method, step, rel_tol, abs_tol);
          py::gil_scoped_release release;
          if (partition.empty()) return solve(sys, cfg);
          auto c = candidate(sys, partition);
          return solve(LumpedSystem(sys, blocks_of(sys, c), kind_of(c)), cfg);
        },
        py::arg("system"), py::arg("partition") = "", py::arg("t_end") = 100.0,
        py::arg("grid") = 0.2, py::arg("method") = "rk45", py::arg("step") = 1e-3,
        py::arg("rel_tol") = 1e-8, py::arg("abs_tol") = 1e-10);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("names", &Trajectory::names)
      .def("rows", &rows_of)
      .def("csv", &trajectory_csv);

  m.def("trajectory_distance",
        [](const std::vector<double>& times, const std::vector<std::string>& names,
           const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
           const std::string& norm) {
          return trajectory_distance(trajectory_from(times, names, a),
                                     trajectory_from(times, names, b), parse_norm(norm));
        },
        py::arg("times"), py::arg("names"), py::arg("a"), py::arg("b"), py::arg("norm") = "inf");

  m.def("verify",
        [](const FluidSystem& sys, const std::string& partition, std::size_t samples, double tol,
           std::uint64_t seed) {
          auto c = candidate(sys, partition);
          auto opt = verify_options(samples, tol, seed);
          auto r = c.partition ? verify_ofl(sys, *c.partition, opt)
                               : verify_efl(sys, *c.tuples, opt);
          return report_to_json(sys, r).dump();
        },
        py::arg("system"), py::arg("partition"), py::arg("samples") = 50, py::arg("tol") = 1e-9,
        py::arg("seed") = 42);

  m.def("discover",
        [](const FluidSystem& sys, const std::string& mode, bool eps) {
          std::vector<py::tuple> out;
          for (const auto& c : discover_partitions(sys, mode, eps))
            out.push_back(py::make_tuple(
                c.description, (c.partition ? partition_to_json(sys, *c.partition)
                                            : tuple_partition_to_json(sys, *c.tuples))
                                   .dump()));
          return out;
        },
        py::arg("system"), py::arg("mode"), py::arg("eps") = false);

  m.def("lumped_odes",
        [](const FluidSystem& sys, const std::string& partition) {
          auto c = candidate(sys, partition);
          LumpedSystem lumped(sys, blocks_of(sys, c), kind_of(c));
          return py::make_tuple(lumped.state_names(), export_text(lumped.symbolic()));
        },
        py::arg("system"), py::arg("partition"));

  m.def("aggregate",
        [](const FluidSystem& sys, const std::string& partition, const std::string& norm,
           double t_end) {
          auto c = candidate(sys, partition);
          const Norm n = parse_norm(norm);
          auto blocks = blocks_of(sys, c);
          auto h = homogenize(sys.model(), plan_for_partition(sys, blocks, !c.partition), n);
          SolverConfig cfg;
          cfg.t_end = t_end;
          FluidSystem reference(h.model);
          auto r = perturbation_report(sys, reference, solve(sys, cfg), t_end, n);
          nlohmann::json j = {{"epsilon", r.epsilon}, {"delta", r.delta}, {"L", r.L},
                              {"K", r.K},             {"horizon", r.horizon}};
          j["bound"] = std::isfinite(r.bound) ? nlohmann::json(r.bound) : nlohmann::json("inf");
          return py::make_tuple(h.model, j.dump());
        },
        py::arg("system"), py::arg("partition"), py::arg("norm") = "inf",
        py::arg("t_end") = 100.0);

  m.def("error_bound", py::overload_cast<double, double, double, double, double>(&error_bound),
        py::arg("epsilon"), py::arg("delta"), py::arg("K"), py::arg("L"), py::arg("t"));

  m.def("sweep",
        [](const std::vector<std::string>& semantics, const std::vector<std::size_t>& efl_sizes,
           const std::vector<std::size_t>& ofl_sizes, const std::vector<double>& deltas,
           double t_end, std::size_t jobs) {
          SweepConfig cfg;
          cfg.semantics.clear();
          for (const auto& s : semantics) cfg.semantics.push_back(parse_sync(s));
          cfg.efl_sizes = efl_sizes;
          cfg.ofl_sizes = ofl_sizes;
          if (!deltas.empty()) cfg.deltas = deltas;
          cfg.solver.t_end = t_end;
          cfg.jobs = jobs;
          std::vector<SweepRow> rows;
          {
            py::gil_scoped_release release;
            rows = run_sweep(cfg);
          }
          return py::make_tuple(sweep_csv(rows), sweep_summary(sweep_checks(rows)));
        },
        py::arg("semantics") = std::vector<std::string>{"min", "product"},
        py::arg("efl_sizes") = std::vector<std::size_t>{3, 6, 9, 12},
        py::arg("ofl_sizes") = std::vector<std::size_t>{12},
        py::arg("deltas") = std::vector<double>{}, py::arg("t_end") = 100.0,
        py::arg("jobs") = 1);
}
