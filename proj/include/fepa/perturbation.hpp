#pragma once

// Homogenized reference models, perturbation magnitudes, Lipschitz
// estimates, the a-priori error bound and the empirical aggregation errors.

#include <span>
#include <string>
#include <vector>

#include "fepa/lumping.hpp"
#include "fepa/model.hpp"
#include "fepa/semantics.hpp"
#include "fepa/solver.hpp"

namespace fepa {

/// Rate occurrences (indices into the model's rate vector) set to their
/// class mean, and state names whose initial populations are set to their
/// class mean.
struct HomogenizationPlan {
  std::vector<std::vector<std::size_t>> rate_classes;
  std::vector<std::vector<std::string>> initial_classes;
};

struct PerturbationReport {
  Norm norm = Norm::Inf;
  /// ||xi - zeta||
  double epsilon = 0.0;
  /// ||V^xi(0) - V^zeta(0)||
  double delta = 0.0;
  double L = 0.0;
  double K = 0.0;
  double horizon = 0.0;
  double bound = 0.0;
};

/// Pairs rate occurrences of block members through the block bijections:
/// a transition of the first atom and its image in each member land in the
/// same class. With `average_initial`, the populations of corresponding
/// states are averaged too. Throws LumpingError when member transitions
/// cannot be paired.
HomogenizationPlan plan_for_partition(const FluidSystem& sys, const Partition& p,
                                      bool average_initial);

struct Homogenized {
  FepaModel model;
  /// epsilon and delta filled in.
  PerturbationReport report;
};

/// Replaces every class by its arithmetic mean. Throws std::invalid_argument
/// on out-of-range or overlapping classes.
Homogenized homogenize(const FepaModel& model, const HomogenizationPlan& plan,
                       Norm norm = Norm::Inf);

/// Per-state upper bounds of the invariant box: each atom's total initial
/// population.
std::vector<double> conservation_box(const FluidSystem& sys);

struct LipschitzConstants {
  double L = 0.0;
  double K = 0.0;
};

/// L bounds the state Jacobian over [0, state_upper] and K the parameter
/// Jacobian over the points of `trajectory`, both for rates anywhere in
/// [rate_lower, rate_upper], in the operator norm induced by `norm`.
/// Product semantics bounds derivatives term by term; min semantics uses
/// finite differences at box samples and trajectory points. K is inflated
/// by 10%, min-semantics L as well. Throws std::invalid_argument on
/// non-finite or negative box bounds.
LipschitzConstants lipschitz_estimate(const FluidSystem& sys,
                                      std::span<const double> state_upper,
                                      std::span<const double> rate_lower,
                                      std::span<const double> rate_upper,
                                      const Trajectory& trajectory,
                                      Norm norm = Norm::Inf);

/// (eps K / L + delta) e^{L t} - eps K / L. Throws std::invalid_argument
/// unless L > 0 and K is finite.
double error_bound(double epsilon, double delta, double K, double L, double t);
double error_bound(const PerturbationReport& r);

/// Full report comparing `original` against its homogenized `reference`
/// over [0, t]: the rate box spans both rate vectors and K is taken along
/// `original_trajectory`.
PerturbationReport perturbation_report(const FluidSystem& original,
                                       const FluidSystem& reference,
                                       const Trajectory& original_trajectory,
                                       double t, Norm norm = Norm::Inf);

/// 100 * max_t max_S |V_S(t) - V^eps_S(t)| / V_S(0) over the states with
/// positive initial population in `model`. Throws std::invalid_argument if
/// there is none.
double efl_error(const Trajectory& full, const Trajectory& perturbed,
                 const FepaModel& model);

/// 100 * max_t over lumped variables with positive initial block sum of
/// |sum_j V_{sigma_j(s)}(t) - W_s(t)| / sum_j V_{sigma_j(s)}(0).
double ofl_error(const FluidSystem& sys, const Partition& p, const Trajectory& full,
                 const Trajectory& lumped);

}  // namespace fepa
