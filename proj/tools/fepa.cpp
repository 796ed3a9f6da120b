// fepa: validate FEPA models, export their ODEs, verify and build fluid
// lumpings, solve, compare trajectories and run the aggregation-error sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fepa/experiment.hpp"
#include "fepa/lumping.hpp"
#include "fepa/model.hpp"
#include "fepa/perturbation.hpp"
#include "fepa/semantics.hpp"
#include "fepa/solver.hpp"
#include "fepa/symbolic.hpp"

namespace {

using namespace fepa;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kModelError = 2;
constexpr int kFail = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model;
  std::string second;
  std::string rho;
  std::string partition;
  std::string mode;
  std::string format = "text";
  std::string method = "rk45";
  std::size_t samples = 50;
  double tol = 1e-9;
  std::uint64_t seed = 42;
  double t_end = 100.0;
  double grid = 0.2;
  double step = 1e-3;
  std::string norm = "inf";
  std::size_t jobs = 1;
  std::string out;
  // experiment
  std::string semantics = "both";
  std::vector<std::size_t> efl_sizes{3, 6, 9, 12};
  std::vector<std::size_t> ofl_sizes{12};
  double delta_min = 0.0005;
  double delta_max = 0.1;
  double delta_step = 0.005;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw UsageError("cannot write " + opt.out);
  out << text;
}

FepaModel load_model(const Options& opt) {
  auto model = parse_model(read_file(opt.model));
  if (!opt.rho.empty()) model.rho = parse_sync(opt.rho);
  return model;
}

FluidSystem load_system(const Options& opt) {
  auto model = load_model(opt);
  for (const auto& d : validate(model))
    if (d.severity == Severity::Warning) std::cerr << format_diagnostic(d) << '\n';
  return FluidSystem(std::move(model));
}

SolverConfig solver_config(const Options& opt) {
  SolverConfig cfg;
  cfg.t_end = opt.t_end;
  cfg.grid = opt.grid;
  cfg.step = opt.step;
  if (opt.method == "rk4")
    cfg.method = Method::Rk4Fixed;
  else if (opt.method != "rk45")
    throw UsageError("unknown method '" + opt.method + "' (expected rk45 or rk4)");
  return cfg;
}

VerifyOptions verify_options(const Options& opt) {
  VerifyOptions v;
  v.samples = opt.samples;
  v.tol = opt.tol;
  v.seed = opt.seed;
  return v;
}

Candidate load_candidate(const FluidSystem& sys, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  try {
    return candidate_from_json(sys, j);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

bool is_discrete(const FluidSystem& sys, const Candidate& c) {
  if (c.partition) return c.partition->blocks.size() == sys.atoms().size();
  for (const auto& cls : c.tuples->classes)
    if (cls.size() > 1) return false;
  return true;
}

VerificationReport verify(const FluidSystem& sys, const Candidate& c, const Options& opt) {
  return c.partition ? verify_ofl(sys, *c.partition, verify_options(opt))
                     : verify_efl(sys, *c.tuples, verify_options(opt));
}

nlohmann::json candidate_json(const FluidSystem& sys, const Candidate& c) {
  return c.partition ? partition_to_json(sys, *c.partition)
                     : tuple_partition_to_json(sys, *c.tuples);
}

Partition block_partition(const FluidSystem& sys, const Candidate& c) {
  return c.partition ? *c.partition : projected_partition(sys, *c.tuples);
}

nlohmann::json lumped_json(const FluidSystem& sys, const Candidate& c) {
  const auto kind = c.partition ? LumpKind::Ordinary : LumpKind::Exact;
  LumpedSystem lumped(sys, block_partition(sys, c), kind);
  return {{"kind", to_string(kind)},
          {"size", lumped.size()},
          {"states", lumped.state_names()},
          {"odes", export_text(lumped.symbolic())}};
}

void check_mode(const Options& opt) {
  if (opt.mode != "efl" && opt.mode != "ofl" && opt.mode != "eps-efl" && opt.mode != "eps-ofl")
    throw UsageError("--mode must be efl, ofl, eps-efl or eps-ofl");
}

void check_partition_mode(const Candidate& c, const std::string& mode) {
  const bool tuples = mode == "efl" || mode == "eps-efl";
  if (tuples && !c.tuples)
    throw UsageError("mode " + mode + " needs a tuple partition (\"tuples\")");
  if (!tuples && !c.partition)
    throw UsageError("mode " + mode + " needs a block partition (\"blocks\")");
}

int cmd_check(const Options& opt) {
  auto model = load_model(opt);
  auto diagnostics = validate(model);
  for (const auto& d : diagnostics) std::cerr << format_diagnostic(d) << '\n';
  if (has_errors(diagnostics)) return kModelError;
  FluidSystem sys(model);
  std::ostringstream os;
  os << "ok: " << sys.atoms().size() << " atoms, " << sys.state_count() << " states, "
     << model.rate_vector.size() << " rate occurrences, semantics " << to_string(model.rho)
     << '\n';
  emit(opt, os.str());
  return kOk;
}

int cmd_odes(const Options& opt) {
  auto sys = load_system(opt);
  auto field = symbolic_field(sys);
  if (opt.format == "json")
    emit(opt, export_json(field).dump(2) + "\n");
  else if (opt.format == "text")
    emit(opt, export_text(field));
  else
    throw UsageError("--format must be text or json");
  return kOk;
}

int lump_exact(const FluidSystem& sys, const Options& opt) {
  const std::string base = opt.mode;
  std::vector<Candidate> candidates;
  if (!opt.partition.empty()) {
    candidates.push_back(load_candidate(sys, opt.partition));
    check_partition_mode(candidates.back(), base);
  } else {
    for (bool eps : {false, true})
      for (auto& c : discover_partitions(sys, base, eps)) candidates.push_back(std::move(c));
  }
  nlohmann::json tried = nlohmann::json::array();
  for (const auto& c : candidates) {
    auto report = verify(sys, c, opt);
    nlohmann::json entry = {{"description", c.description},
                            {"partition", candidate_json(sys, c)},
                            {"report", report_to_json(sys, report)}};
    const bool trivial = opt.partition.empty() && is_discrete(sys, c);
    if (report.pass && !trivial) {
      entry["lumped"] = lumped_json(sys, c);
      emit(opt, entry.dump(2) + "\n");
      return kOk;
    }
    if (!trivial) tried.push_back(std::move(entry));
  }
  nlohmann::json result = {{"verdict", "FAIL"},
                           {"mode", base},
                           {"message", opt.partition.empty()
                                           ? "no nontrivial lumpable partition found"
                                           : "the given partition is not lumpable"},
                           {"candidates", tried}};
  emit(opt, result.dump(2) + "\n");
  return kFail;
}

int lump_eps(const FluidSystem& sys, const Options& opt) {
  const std::string base = opt.mode.substr(4);
  std::optional<Candidate> chosen;
  if (!opt.partition.empty()) {
    chosen = load_candidate(sys, opt.partition);
    check_partition_mode(*chosen, opt.mode);
  } else {
    for (auto& c : discover_partitions(sys, base, true))
      if (!is_discrete(sys, c)) {
        chosen = std::move(c);
        break;
      }
    if (!chosen) {
      nlohmann::json result = {{"verdict", "FAIL"},
                               {"mode", opt.mode},
                               {"message", "no structurally compatible atoms to aggregate"}};
      emit(opt, result.dump(2) + "\n");
      return kFail;
    }
  }
  const Norm norm = parse_norm(opt.norm);
  auto blocks = block_partition(sys, *chosen);
  auto h = homogenize(sys.model(), plan_for_partition(sys, blocks, base == "efl"), norm);
  FluidSystem reference(h.model);
  auto report = verify(reference, *chosen, opt);
  auto cfg = solver_config(opt);
  auto trajectory = solve(sys, cfg);
  auto bound = perturbation_report(sys, reference, trajectory, cfg.t_end, norm);

  nlohmann::json result = {{"verdict", report.pass ? "PASS" : "FAIL"},
                           {"mode", opt.mode},
                           {"description", chosen->description},
                           {"partition", candidate_json(sys, *chosen)},
                           {"exact_report", report_to_json(sys, verify(sys, *chosen, opt))},
                           {"reference_report", report_to_json(reference, report)},
                           {"reference_model", print_model(h.model)},
                           {"norm", to_string(norm)},
                           {"epsilon", bound.epsilon},
                           {"delta", bound.delta},
                           {"L", bound.L},
                           {"K", bound.K},
                           {"horizon", bound.horizon},
                           {"bound", std::isfinite(bound.bound) ? nlohmann::json(bound.bound)
                                                                : nlohmann::json("inf")}};
  if (report.pass) result["lumped"] = lumped_json(reference, *chosen);
  emit(opt, result.dump(2) + "\n");
  return report.pass ? kOk : kFail;
}

int cmd_lump(const Options& opt) {
  check_mode(opt);
  auto sys = load_system(opt);
  return opt.mode.rfind("eps-", 0) == 0 ? lump_eps(sys, opt) : lump_exact(sys, opt);
}

int cmd_solve(const Options& opt) {
  auto sys = load_system(opt);
  auto cfg = solver_config(opt);
  if (opt.partition.empty()) {
    emit(opt, trajectory_csv(solve(sys, cfg)));
    return kOk;
  }
  auto c = load_candidate(sys, opt.partition);
  LumpedSystem lumped(sys, block_partition(sys, c),
                      c.partition ? LumpKind::Ordinary : LumpKind::Exact);
  emit(opt, trajectory_csv(solve(lumped, cfg)));
  return kOk;
}

int cmd_compare(const Options& opt) {
  const Norm norm = parse_norm(opt.norm);
  std::ostringstream os;
  os.precision(17);
  if (!opt.second.empty()) {
    auto a = parse_trajectory_csv(read_file(opt.model));
    auto b = parse_trajectory_csv(read_file(opt.second));
    os << trajectory_distance(a, b, norm) << '\n';
    emit(opt, os.str());
    return kOk;
  }
  if (opt.partition.empty())
    throw UsageError("compare needs two trajectory files or a model with --partition");
  auto sys = load_system(opt);
  auto cfg = solver_config(opt);
  auto c = load_candidate(sys, opt.partition);
  const auto kind = c.partition ? LumpKind::Ordinary : LumpKind::Exact;
  LumpedSystem lumped(sys, block_partition(sys, c), kind);
  auto full = solve(sys, cfg);
  auto small = solve(lumped, cfg);
  // Exact lumpings are compared state by state, ordinary ones on block sums.
  const double d = kind == LumpKind::Exact ? trajectory_distance(full, lumped.extend(small), norm)
                                           : trajectory_distance(lumped.reduce(full), small, norm);
  nlohmann::json result = {{"kind", to_string(kind)},
                           {"norm", to_string(norm)},
                           {"full_states", sys.state_count()},
                           {"lumped_states", lumped.size()},
                           {"distance", d}};
  emit(opt, result.dump(2) + "\n");
  return kOk;
}

int cmd_experiment(const Options& opt) {
  SweepConfig cfg;
  cfg.efl_sizes = opt.efl_sizes;
  cfg.ofl_sizes = opt.ofl_sizes;
  if (opt.semantics == "both")
    cfg.semantics = {Sync::Min, Sync::Product};
  else
    cfg.semantics = {parse_sync(opt.semantics)};
  if (!(opt.delta_step > 0.0) || !(opt.delta_min > 0.0) || opt.delta_max < opt.delta_min)
    throw UsageError("need 0 < --delta-min <= --delta-max and --delta-step > 0");
  cfg.deltas.clear();
  for (int k = 0;; ++k) {
    const double d = opt.delta_min + k * opt.delta_step;
    if (d > opt.delta_max + 1e-12) break;
    cfg.deltas.push_back(d);
  }
  for (std::size_t D : cfg.efl_sizes)
    if (D == 0) throw UsageError("D values must be at least 1");
  for (std::size_t D : cfg.ofl_sizes)
    if (D == 0) throw UsageError("D values must be at least 1");
  cfg.solver = solver_config(opt);
  cfg.norm = parse_norm(opt.norm);
  cfg.jobs = opt.jobs;
  auto rows = run_sweep(cfg);
  emit(opt, sweep_csv(rows));
  (opt.out.empty() ? std::cerr : std::cout) << sweep_summary(sweep_checks(rows));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"FEPA fluid models: ODE export, lumping and perturbation analysis"};
  app.require_subcommand(1);

  auto add_rho = [&](CLI::App* c) {
    c->add_option("--rho", opt.rho, "Override the model's synchronisation function")
        ->check(CLI::IsMember({"min", "product"}));
  };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", opt.out, "Write output to PATH"); };
  auto add_solver = [&](CLI::App* c) {
    c->add_option("--t-end", opt.t_end, "Integration horizon")->check(CLI::PositiveNumber);
    c->add_option("--grid", opt.grid, "Output grid step")->check(CLI::PositiveNumber);
    c->add_option("--method", opt.method, "rk45 (adaptive) or rk4 (fixed step)");
    c->add_option("--step", opt.step, "Step size for rk4")->check(CLI::PositiveNumber);
  };
  auto add_verify = [&](CLI::App* c) {
    c->add_option("--samples", opt.samples, "Random populations per check");
    c->add_option("--tol", opt.tol, "Relative residual tolerance")->check(CLI::PositiveNumber);
    c->add_option("--seed", opt.seed, "Sampling seed");
  };
  auto add_norm = [&](CLI::App* c) {
    c->add_option("--norm", opt.norm, "Vector norm")->check(CLI::IsMember({"inf", "1", "2"}));
  };

  auto* check = app.add_subcommand("check", "Parse and validate a model");
  check->add_option("model", opt.model, "Model file")->required();
  add_rho(check);
  add_out(check);

  auto* odes = app.add_subcommand("odes", "Print the ODE system");
  odes->add_option("model", opt.model, "Model file")->required();
  odes->add_option("--format", opt.format, "text or json");
  add_rho(odes);
  add_out(odes);

  auto* lump = app.add_subcommand("lump", "Verify or discover a fluid lumping");
  lump->add_option("model", opt.model, "Model file")->required();
  lump->add_option("--mode", opt.mode, "efl, ofl, eps-efl or eps-ofl")->required();
  lump->add_option("--partition", opt.partition, "Partition JSON file");
  add_rho(lump);
  add_verify(lump);
  add_solver(lump);
  add_norm(lump);
  add_out(lump);

  auto* solve_cmd = app.add_subcommand("solve", "Integrate a model (or its lumping) to CSV");
  solve_cmd->add_option("model", opt.model, "Model file")->required();
  solve_cmd->add_option("--partition", opt.partition, "Solve the lumped system instead");
  add_rho(solve_cmd);
  add_solver(solve_cmd);
  add_out(solve_cmd);

  auto* compare = app.add_subcommand(
      "compare", "Distance of two trajectory CSVs, or of a model and its lumping");
  compare->add_option("first", opt.model, "Trajectory CSV or model file")->required();
  compare->add_option("second", opt.second, "Second trajectory CSV");
  compare->add_option("--partition", opt.partition, "Partition JSON file");
  add_rho(compare);
  add_solver(compare);
  add_norm(compare);
  add_out(compare);

  auto* experiment = app.add_subcommand("experiment", "Aggregation-error sweep");
  experiment->add_option("--semantics", opt.semantics, "min, product or both")
      ->check(CLI::IsMember({"min", "product", "both"}));
  experiment->add_option("--rho", opt.semantics, "Alias of --semantics")
      ->check(CLI::IsMember({"min", "product", "both"}));
  experiment->add_option("--efl-D", opt.efl_sizes, "Sizes for exact lumping");
  experiment->add_option("--ofl-D", opt.ofl_sizes, "Sizes for ordinary lumping");
  experiment->add_option("--delta-min", opt.delta_min, "Smallest Delta");
  experiment->add_option("--delta-max", opt.delta_max, "Largest Delta");
  experiment->add_option("--delta-step", opt.delta_step, "Delta increment");
  experiment->add_option("--jobs", opt.jobs, "Parallel sweep points")->check(CLI::PositiveNumber);
  add_solver(experiment);
  add_norm(experiment);
  add_out(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*check) return cmd_check(opt);
    if (*odes) return cmd_odes(opt);
    if (*lump) return cmd_lump(opt);
    if (*solve_cmd) return cmd_solve(opt);
    if (*compare) return cmd_compare(opt);
    if (*experiment) return cmd_experiment(opt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kModelError;
  } catch (const LumpingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kModelError;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kModelError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
