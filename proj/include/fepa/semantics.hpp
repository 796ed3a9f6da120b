#pragma once

// Fluid semantics: derivation graphs of atoms, apparent and component rates,
// jump probabilities and the ODE vector field, for both synchronisation
// functions.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fepa/model.hpp"

namespace fepa {

struct GraphTransition {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string action;
  double rate = 0.0;
  /// Number of distinct derivations with this (source, action, rate, target).
  std::size_t multiplicity = 1;
  /// Rate-vector slot of each derivation (size == multiplicity).
  std::vector<std::size_t> slots;
};

/// States and labelled transition multiset reachable from one atom.
struct DerivationGraph {
  std::string atom;
  /// State 0 is the atom itself; the rest in order of first discovery.
  std::vector<TermPtr> terms;
  std::vector<std::string> names;
  std::vector<GraphTransition> transitions;

  std::size_t size() const { return names.size(); }
  /// Sorted distinct action labels occurring on transitions.
  std::vector<std::string> actions() const;
  /// r_alpha of state `state`, summing rate * multiplicity.
  double apparent_rate(std::size_t state, const std::string& action) const;
};

/// Builds dg(atom). Throws ModelError on unguarded recursion.
DerivationGraph derivation_graph(const std::string& atom, const FepaModel& model);

/// r_alpha(term) by the sum rule, unfolding constants.
double atom_apparent_rate(const Term& term, const std::string& action,
                          const FepaModel& model);

/// Canonical state key of a derivative term.
std::string state_key(const Term& term);

using ActionId = std::size_t;

/// Compiled model: global state indexing over all atoms, the composition
/// tree, and precomputed per-state rate tables. Immutable; all evaluation
/// methods are reentrant.
class FluidSystem {
 public:
  /// Throws ModelError if validate() reports errors.
  explicit FluidSystem(FepaModel model);

  struct Atom {
    DerivationGraph graph;
    /// Global index of local state 0.
    std::size_t offset = 0;
    std::size_t leaf_node = 0;
  };

  struct Node {
    int left = -1;
    int right = -1;
    int parent = -1;
    int atom = -1;
    std::vector<bool> sync;  // indexed by ActionId
    bool is_leaf() const { return atom >= 0; }
  };

  const FepaModel& model() const { return model_; }
  Sync rho() const { return model_.rho; }

  std::size_t state_count() const { return names_.size(); }
  const std::vector<std::string>& state_names() const { return names_; }
  std::size_t state_index(const std::string& name) const;
  /// Atom owning a global state.
  std::size_t atom_of(std::size_t state) const { return state_atom_[state]; }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t atom_index(const std::string& name) const;
  std::size_t global_state(std::size_t atom, std::size_t local) const {
    return atoms_[atom].offset + local;
  }

  const std::vector<std::string>& actions() const { return actions_; }
  ActionId action_id(const std::string& name) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t root() const { return nodes_.size() - 1; }

  std::vector<double> initial_state() const;

  /// r_alpha(P) for a global state.
  double state_apparent_rate(std::size_t state, ActionId a) const;
  /// p_alpha(P, P'); zero when r_alpha(P) == 0.
  double jump_probability(std::size_t from, std::size_t to, ActionId a) const;

  /// r_alpha(M, V) for every tree node (indexed as nodes()).
  std::vector<double> node_apparent_rates(std::span<const double> v,
                                          ActionId a) const;
  double apparent_rate(std::span<const double> v, ActionId a) const;
  /// R_alpha(M, V, P') for every global state P'.
  std::vector<double> component_rates(std::span<const double> v,
                                      ActionId a) const;
  /// sum_{P'} p_alpha(P', P) R_alpha(M, V, P') for every global state P.
  std::vector<double> inflow(std::span<const double> v, ActionId a) const;

  /// dV/dt = F(V).
  void derivative(std::span<const double> v, std::span<double> out) const;
  std::vector<double> derivative(std::span<const double> v) const;

  /// Recompiles with the rate vector replaced.
  FluidSystem with_rates(std::span<const double> xi) const;

  struct Outgoing {
    std::size_t target;
    double weight;  // rate of this single derivation
    std::size_t slot;
  };

  /// Per (state, action) outgoing derivations; one entry per derivation.
  const std::vector<Outgoing>& outgoing(std::size_t state, ActionId a) const {
    return outgoing_[state * actions_.size() + a];
  }

 private:
  void scales(ActionId a, std::span<const double> apparent,
              std::span<double> out) const;

  FepaModel model_;
  std::vector<Atom> atoms_;
  std::vector<std::string> names_;
  std::vector<std::size_t> state_atom_;
  std::vector<std::string> actions_;
  std::vector<Node> nodes_;
  std::vector<double> rate_table_;  // [state * |A| + a]
  std::vector<std::vector<Outgoing>> outgoing_;
  /// Per action, the atoms (by index) having a state with positive rate.
  std::vector<std::vector<std::size_t>> active_atoms_;
};

}  // namespace fepa
