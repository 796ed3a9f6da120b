#pragma once

// Semi-isomorphism of atoms, randomized verification of exact and ordinary
// fluid lumpability, partition construction and the lumped ODE system.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepa/semantics.hpp"
#include "fepa/solver.hpp"
#include "fepa/symbolic.hpp"

namespace fepa {

class LumpingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Map between local state indices: image[i] is the state of the target
/// atom matched with state i of the source atom.
using Bijection = std::vector<std::size_t>;

Bijection identity_bijection(std::size_t n);
Bijection inverse(const Bijection& b);
/// (second o first)(i) = second[first[i]].
Bijection compose(const Bijection& first, const Bijection& second);

/// Aggregated rates: sum of rates over transitions per (source, target,
/// action), with actions indexed by the given list.
class RateTensor {
 public:
  RateTensor(const DerivationGraph& g, const std::vector<std::string>& actions);
  std::size_t size() const { return n_; }
  std::size_t action_count() const { return na_; }
  double at(std::size_t a, std::size_t i, std::size_t j) const {
    return data_[(a * n_ + i) * n_ + j];
  }

 private:
  std::size_t n_ = 0;
  std::size_t na_ = 0;
  std::vector<double> data_;
};

/// Largest |difference| of aggregated rates under the bijection.
double bijection_deviation(const DerivationGraph& p, const DerivationGraph& q,
                           const Bijection& sigma);

/// A semi-isomorphism ds(p) -> ds(q), if one exists. Rates are compared with
/// relative tolerance `tol`.
std::optional<Bijection> semi_isomorphism(const DerivationGraph& p,
                                          const DerivationGraph& q,
                                          double tol = 1e-12);

struct EpsMatch {
  Bijection sigma;
  double epsilon = 0.0;
};

/// Bijection minimising the largest aggregated-rate deviation. Absent when
/// the state counts differ. With `preserve_support`, only bijections that
/// map transitions onto transitions (and non-transitions onto
/// non-transitions) are admitted.
std::optional<EpsMatch> eps_semi_isomorphism(const DerivationGraph& p,
                                             const DerivationGraph& q,
                                             bool preserve_support = false);

/// Blocks of atoms; sigma[j] maps ds(atoms[0]) to ds(atoms[j]) and sigma[0]
/// is the identity.
struct Block {
  std::vector<std::string> atoms;
  std::vector<Bijection> sigma;
};

struct Partition {
  std::vector<Block> blocks;
};

/// Ordered tuples of atoms. Tuples listed in the same class are claimed
/// label equivalent; sigma[t][k] maps ds of the k-th atom of the first tuple
/// of t's class to ds of tuples[t][k].
struct TuplePartition {
  std::vector<std::vector<std::string>> tuples;
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::vector<Bijection>> sigma;
};

/// Bijection from `from` to `to` for partition building: a semi-isomorphism
/// when one exists, otherwise the minimal-deviation bijection. Throws
/// LumpingError if the state counts differ.
Bijection match_atoms(const FluidSystem& sys, const std::string& from,
                      const std::string& to);

/// Every atom of the system in exactly one block.
Partition discrete_partition(const FluidSystem& sys);
/// Blocks from atom names, with bijections from match_atoms.
Partition make_partition(const FluidSystem& sys,
                         const std::vector<std::vector<std::string>>& blocks);
/// Tuples and classes; bijections from match_atoms.
TuplePartition make_tuple_partition(const FluidSystem& sys,
                                    std::vector<std::vector<std::string>> tuples,
                                    std::vector<std::vector<std::size_t>> classes);
/// Throws std::invalid_argument unless the partition covers every atom once
/// with well-formed bijections.
void check_partition(const FluidSystem& sys, const Partition& p);
void check_tuple_partition(const FluidSystem& sys, const TuplePartition& tp);

struct VerifyOptions {
  std::size_t samples = 50;
  /// Residual |lhs - rhs| / max(1, |lhs|, |rhs|) allowed.
  double tol = 1e-9;
  std::uint64_t seed = 42;
  /// Upper end of the sampling box; 0 means 2 * max initial population + 1.
  double vmax = 0.0;
};

struct Witness {
  /// "i", "ii", "iii" for ordinary lumpability, "a" to "d" for label
  /// equivalence.
  std::string condition;
  std::string action;
  std::string state;
  /// For label equivalence: the two tuple indices compared.
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<double> v;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct VerificationReport {
  bool pass = true;
  std::string mode;  // "ofl" or "efl"
  std::size_t samples = 0;
  double tol = 0.0;
  double worst_residual = 0.0;
  std::optional<Witness> witness;
  std::vector<std::string> warnings;
};

double residual(double lhs, double rhs);

/// V^sigma of the ordinary lumpability conditions: block sums on the first
/// atom of each block, zero elsewhere.
std::vector<double> ordinary_projection(const FluidSystem& sys, const Partition& p,
                                        std::span<const double> v);
/// V^sigma of label equivalence: populations of tuples i and j swapped.
std::vector<double> tuple_swap(const FluidSystem& sys, const TuplePartition& tp,
                               std::size_t i, std::size_t j,
                               std::span<const double> v);
/// Bijections between the k-th atoms of tuples i and j of one class.
std::vector<Bijection> tuple_bijections(const TuplePartition& tp, std::size_t i,
                                        std::size_t j);

/// Population samples used by the verifiers.
std::vector<std::vector<double>> verification_samples(const FluidSystem& sys,
                                                      const VerifyOptions& opt);

VerificationReport verify_ofl(const FluidSystem& sys, const Partition& p,
                              const VerifyOptions& opt = {});
VerificationReport verify_efl(const FluidSystem& sys, const TuplePartition& tp,
                              const VerifyOptions& opt = {});

/// Atoms at the same position of related tuples form a block.
Partition projected_partition(const FluidSystem& sys, const TuplePartition& tp);

/// Transitive closure of the union of the projected relations. Throws
/// LumpingError on ill-posed models.
Partition merge_partitions(const FluidSystem& sys,
                           const std::vector<TuplePartition>& parts);

enum class LumpKind {
  /// Block sums; the lumped field is evaluated at the zero extension.
  Ordinary,
  /// Identical block members; the lumped field is evaluated at the copy
  /// extension.
  Exact
};

std::string to_string(LumpKind kind);

/// Lumped ODE system over the states of each block's first atom.
class LumpedSystem {
 public:
  LumpedSystem(FluidSystem system, Partition partition, LumpKind kind);

  const FluidSystem& system() const { return system_; }
  const Partition& partition() const { return partition_; }
  LumpKind kind() const { return kind_; }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& state_names() const { return names_; }
  /// Lumped variable of each full state.
  std::size_t lumped_index(std::size_t state) const { return lumped_of_[state]; }

  /// Full population from lumped variables (zero or copy extension).
  std::vector<double> extend(std::span<const double> w) const;
  /// Lumped variables from a full population: block sums (Ordinary) or
  /// block averages (Exact).
  std::vector<double> reduce(std::span<const double> v) const;
  std::vector<double> initial_state() const;

  void derivative(std::span<const double> w, std::span<double> out) const;
  std::vector<double> derivative(std::span<const double> w) const;

  /// Applies reduce / extend to every row.
  Trajectory reduce(const Trajectory& full) const;
  Trajectory extend(const Trajectory& lumped) const;

  /// Lumped right-hand sides; variables are printed as W[state].
  SymbolicField symbolic() const;

 private:
  FluidSystem system_;
  Partition partition_;
  LumpKind kind_;
  std::vector<std::string> names_;
  std::vector<std::size_t> rep_state_;
  std::vector<std::size_t> lumped_of_;
  std::vector<double> weight_;  // 1 / block size
};

Trajectory solve(const FluidSystem& sys, const SolverConfig& cfg);
Trajectory solve(const LumpedSystem& sys, const SolverConfig& cfg);

/// Semi-isomorphism classes (or, with `eps`, support-preserving
/// bijection classes) of the system's atoms, in leaf order with the
/// lexicographically smallest name first in each class.
std::vector<std::vector<std::string>> atom_classes(const FluidSystem& sys,
                                                   bool eps = false);

struct Candidate {
  std::optional<Partition> partition;
  std::optional<TuplePartition> tuples;
  std::string description;
};

/// Candidate partitions for the given mode ("ofl" or "efl"), coarsest
/// first. With `eps`, atoms are grouped up to rate deviations.
std::vector<Candidate> discover_partitions(const FluidSystem& sys,
                                           const std::string& mode,
                                           bool eps = false);

nlohmann::json partition_to_json(const FluidSystem& sys, const Partition& p);
nlohmann::json tuple_partition_to_json(const FluidSystem& sys,
                                       const TuplePartition& tp);
/// Reads {"blocks": [[...], ...]} or {"tuples": [[...]], "classes": [[...]]}
/// with optional "sigma": {atom: [[from_state, to_state], ...]}.
Candidate candidate_from_json(const FluidSystem& sys, const nlohmann::json& j);
nlohmann::json report_to_json(const FluidSystem& sys, const VerificationReport& r);

}  // namespace fepa
