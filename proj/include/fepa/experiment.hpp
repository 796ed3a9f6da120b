#pragma once

// Aggregation-error sweep over the spread-rate family
//   P_d = (alpha, r_d).P_d', P_d' = (beta, s).P_d,
//   Q = (alpha, u).Q', Q' = (gamma, w).Q,
//   system = (P_1 <> ... <> P_D) <alpha> Q,
// with r_d = 1 + (d - 1) Delta and, by default, V_{P_d}(0) = 200 + (d - 1),
// V_Q(0) = 400.

#include <cstddef>
#include <string>
#include <vector>

#include "fepa/model.hpp"
#include "fepa/solver.hpp"

namespace fepa {

struct SpreadParameters {
  double s = 0.5;
  double u = 1.0;
  double w = 15.0;
  double base_population = 200.0;
  /// V_{P_d}(0) = base_population + (d - 1) * population_step.
  double population_step = 1.0;
  double q_population = 400.0;
};

FepaModel spread_model(std::size_t D, double delta, Sync rho,
                       const SpreadParameters& params = {});

/// 0.0005, 0.0055, ..., 0.0955.
std::vector<double> default_deltas();

struct SweepConfig {
  std::vector<std::size_t> efl_sizes{3, 6, 9, 12};
  std::vector<std::size_t> ofl_sizes{12};
  std::vector<Sync> semantics{Sync::Min, Sync::Product};
  std::vector<double> deltas = default_deltas();
  SpreadParameters params;
  SolverConfig solver;
  Norm norm = Norm::Inf;
  std::size_t jobs = 1;
};

/// Errors are percentages; NaN where the lumping was not evaluated.
struct SweepRow {
  Sync rho = Sync::Product;
  std::size_t D = 0;
  double delta = 0.0;
  double eps_norm = 0.0;
  double delta0_norm = 0.0;
  double efl_error_pct = 0.0;
  double ofl_error_pct = 0.0;
  double theory_bound = 0.0;
};

/// One sweep point. The exact lumping compares against the model with
/// averaged rates and initial populations, the ordinary one against the
/// model with averaged rates only; theory_bound is the a-priori bound of
/// the exact case over the whole horizon.
SweepRow run_sweep_point(Sync rho, std::size_t D, double delta, bool efl, bool ofl,
                         const SweepConfig& cfg);

/// Rows ordered by (rho as listed, D ascending, delta ascending), whatever
/// the number of jobs.
std::vector<SweepRow> run_sweep(const SweepConfig& cfg);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct SweepCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

/// Monotone, linear-looking exact-lumping error per (rho, D); product
/// semantics no worse than min for D below 12; ordinary lumping below exact
/// lumping and under 1% at D = 12.
std::vector<SweepCheck> sweep_checks(const std::vector<SweepRow>& rows);

std::string sweep_summary(const std::vector<SweepCheck>& checks);

}  // namespace fepa
