#include "fepa/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fepa/lumping.hpp"
#include "fepa/perturbation.hpp"

namespace fepa {

FepaModel spread_model(std::size_t D, double delta, Sync rho, const SpreadParameters& params) {
  if (D == 0) throw std::invalid_argument("D must be at least 1");
  if (delta < 0.0) throw std::invalid_argument("Delta must be nonnegative");
  std::ostringstream os;
  os << "semantics = " << to_string(rho) << ";\n";
  for (std::size_t d = 1; d <= D; ++d) {
    const double r = 1.0 + static_cast<double>(d - 1) * delta;
    os << "P" << d << " = (alpha, " << format_double(r) << ").P" << d << "';\n";
    os << "P" << d << "' = (beta, " << format_double(params.s) << ").P" << d << ";\n";
  }
  os << "Q = (alpha, " << format_double(params.u) << ").Q';\n";
  os << "Q' = (gamma, " << format_double(params.w) << ").Q;\n";
  os << "system = ";
  if (D > 1) os << "(";
  for (std::size_t d = 1; d <= D; ++d) os << (d > 1 ? " <> " : "") << "P" << d;
  if (D > 1) os << ")";
  os << " <alpha> Q;\n";
  for (std::size_t d = 1; d <= D; ++d)
    os << "init P" << d << " = "
       << format_double(params.base_population +
                        static_cast<double>(d - 1) * params.population_step) << ";\n";
  os << "init Q = " << format_double(params.q_population) << ";\n";
  return parse_model(os.str());
}

std::vector<double> default_deltas() {
  std::vector<double> out;
  for (int k = 0; k < 20; ++k) out.push_back(0.0005 + 0.005 * k);
  return out;
}

SweepRow run_sweep_point(Sync rho, std::size_t D, double delta, bool efl, bool ofl,
                         const SweepConfig& cfg) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SweepRow row{rho, D, delta, 0.0, 0.0, nan, nan, nan};
  auto model = spread_model(D, delta, rho, cfg.params);
  FluidSystem sys(model);
  std::vector<std::string> ps;
  for (std::size_t d = 1; d <= D; ++d) ps.push_back("P" + std::to_string(d));
  auto p = make_partition(sys, {ps, {"Q"}});
  auto full = solve(sys, cfg.solver);

  auto exact = homogenize(model, plan_for_partition(sys, p, true), cfg.norm);
  auto ordinary = homogenize(model, plan_for_partition(sys, p, false), cfg.norm);
  const auto& reference = efl ? exact : ordinary;
  row.eps_norm = reference.report.epsilon;
  row.delta0_norm = reference.report.delta;

  if (efl) {
    LumpedSystem lumped(FluidSystem(exact.model), p, LumpKind::Exact);
    row.efl_error_pct = efl_error(full, lumped.extend(solve(lumped, cfg.solver)), model);
  }
  if (ofl) {
    LumpedSystem lumped(FluidSystem(ordinary.model), p, LumpKind::Ordinary);
    row.ofl_error_pct = ofl_error(sys, p, full, solve(lumped, cfg.solver));
  }
  row.theory_bound = perturbation_report(sys, FluidSystem(reference.model), full,
                                         cfg.solver.t_end, cfg.norm)
                         .bound;
  return row;
}

std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  struct Task {
    Sync rho;
    std::size_t D;
    double delta;
    bool efl, ofl;
  };
  std::vector<std::size_t> sizes = cfg.efl_sizes;
  sizes.insert(sizes.end(), cfg.ofl_sizes.begin(), cfg.ofl_sizes.end());
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  auto has = [](const std::vector<std::size_t>& v, std::size_t D) {
    return std::find(v.begin(), v.end(), D) != v.end();
  };
  auto deltas = cfg.deltas;
  std::sort(deltas.begin(), deltas.end());

  std::vector<Task> tasks;
  for (Sync rho : cfg.semantics)
    for (std::size_t D : sizes)
      for (double delta : deltas)
        tasks.push_back({rho, D, delta, has(cfg.efl_sizes, D), has(cfg.ofl_sizes, D)});

  std::vector<SweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const auto& t = tasks[i];
        rows[i] = run_sweep_point(t.rho, t.D, t.delta, t.efl, t.ofl, cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, tasks.size()));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

namespace {

std::string cell(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return format_double(x);
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "rho,D,delta_param,eps_norm,delta0_norm,efl_error_pct,ofl_error_pct,theory_bound\n";
  for (const auto& r : rows)
    os << to_string(r.rho) << ',' << r.D << ',' << cell(r.delta) << ',' << cell(r.eps_norm)
       << ',' << cell(r.delta0_norm) << ',' << cell(r.efl_error_pct) << ','
       << cell(r.ofl_error_pct) << ',' << cell(r.theory_bound) << '\n';
  return os.str();
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear fit needs at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

std::vector<SweepCheck> sweep_checks(const std::vector<SweepRow>& rows) {
  std::vector<SweepCheck> out;
  std::vector<std::pair<Sync, std::size_t>> series;
  for (const auto& r : rows)
    if (!std::isnan(r.efl_error_pct) &&
        std::find(series.begin(), series.end(), std::make_pair(r.rho, r.D)) == series.end())
      series.emplace_back(r.rho, r.D);

  for (const auto& [rho, D] : series) {
    std::vector<double> x, y;
    for (const auto& r : rows)
      if (r.rho == rho && r.D == D && !std::isnan(r.efl_error_pct)) {
        x.push_back(r.delta);
        y.push_back(r.efl_error_pct);
      }
    const std::string label = to_string(rho) + " D=" + std::to_string(D);
    SweepCheck mono{"exact-lumping error nondecreasing, " + label, true, ""};
    for (std::size_t i = 1; i < y.size(); ++i)
      if (y[i] < y[i - 1]) {
        mono.pass = false;
        mono.detail = "drops from " + format_double(y[i - 1]) + " to " + format_double(y[i]) +
                      " at Delta=" + format_double(x[i]);
        break;
      }
    out.push_back(mono);
    if (x.size() >= 2) {
      auto fit = linear_fit(x, y);
      out.push_back({"exact-lumping error linear fit R^2 >= 0.95, " + label, fit.r2 >= 0.95,
                     "R^2=" + format_double(fit.r2) + " slope=" + format_double(fit.slope)});
    }
  }

  auto find = [&](Sync rho, std::size_t D, double delta) -> const SweepRow* {
    for (const auto& r : rows)
      if (r.rho == rho && r.D == D && r.delta == delta) return &r;
    return nullptr;
  };

  SweepCheck better{"product error <= min error for D < 12", true, ""};
  std::size_t compared = 0;
  for (const auto& r : rows) {
    if (r.rho != Sync::Product || r.D >= 12 || std::isnan(r.efl_error_pct)) continue;
    const auto* m = find(Sync::Min, r.D, r.delta);
    if (!m || std::isnan(m->efl_error_pct)) continue;
    ++compared;
    if (r.efl_error_pct > m->efl_error_pct && better.pass) {
      better.pass = false;
      better.detail = "D=" + std::to_string(r.D) + " Delta=" + format_double(r.delta) +
                      ": product " + format_double(r.efl_error_pct) + " > min " +
                      format_double(m->efl_error_pct);
    }
  }
  if (compared > 0) {
    if (better.pass) better.detail = std::to_string(compared) + " pairs";
    out.push_back(better);
  }

  SweepCheck robust{"ordinary-lumping error < exact-lumping error and < 1% at D = 12", true, ""};
  std::size_t seen = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.D != 12 || std::isnan(r.ofl_error_pct)) continue;
    ++seen;
    worst = std::max(worst, r.ofl_error_pct);
    const bool below = !std::isnan(r.efl_error_pct) ? r.ofl_error_pct < r.efl_error_pct : true;
    if ((!below || r.ofl_error_pct >= 1.0) && robust.pass) {
      robust.pass = false;
      robust.detail = to_string(r.rho) + " Delta=" + format_double(r.delta) + ": ordinary " +
                      format_double(r.ofl_error_pct) + ", exact " + cell(r.efl_error_pct);
    }
  }
  if (seen > 0) {
    if (robust.pass) robust.detail = "max ordinary-lumping error " + format_double(worst) + "%";
    out.push_back(robust);
  }
  return out;
}

std::string sweep_summary(const std::vector<SweepCheck>& checks) {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) os << " (" << c.detail << ")";
    os << '\n';
  }
  return os.str();
}

}  // namespace fepa
