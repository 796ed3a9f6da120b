#include "fepa/semantics.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>

namespace fepa {

namespace {

struct Derivation {
  std::string action;
  double rate;
  std::size_t slot;
  TermPtr target;
};

// Applies the prefix, choice and constant rules. `unfolding` holds constants
// entered since the last prefix; revisiting one means unguarded recursion.
void derive(const TermPtr& term, const FepaModel& model,
            std::vector<std::string>& unfolding, std::vector<Derivation>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Prefix>) {
          out.push_back({n.action, n.rate, n.slot, n.next});
        } else if constexpr (std::is_same_v<T, Choice>) {
          derive(n.left, model, unfolding, out);
          derive(n.right, model, unfolding, out);
        } else {
          if (std::find(unfolding.begin(), unfolding.end(), n.name) !=
              unfolding.end())
            throw ModelError("unguarded recursion through " + n.name, n.pos);
          const AtomDefinition* def = model.find(n.name);
          if (!def) throw ModelError("undefined constant " + n.name, n.pos);
          unfolding.push_back(n.name);
          derive(def->body, model, unfolding, out);
          unfolding.pop_back();
        }
      },
      term->node());
}

std::vector<Derivation> derive(const TermPtr& term, const FepaModel& model) {
  std::vector<std::string> unfolding;
  std::vector<Derivation> out;
  derive(term, model, unfolding, out);
  return out;
}

}  // namespace

std::string state_key(const Term& term) { return print_term(term); }

std::vector<std::string> DerivationGraph::actions() const {
  std::set<std::string> s;
  for (const auto& t : transitions) s.insert(t.action);
  return {s.begin(), s.end()};
}

double DerivationGraph::apparent_rate(std::size_t state,
                                      const std::string& action) const {
  double sum = 0.0;
  for (const auto& t : transitions)
    if (t.source == state && t.action == action)
      sum += t.rate * static_cast<double>(t.multiplicity);
  return sum;
}

DerivationGraph derivation_graph(const std::string& atom, const FepaModel& model) {
  if (!model.find(atom)) throw ModelError("undefined atom " + atom);
  DerivationGraph g;
  g.atom = atom;
  std::map<std::string, std::size_t> index;
  std::deque<std::size_t> queue;
  auto intern = [&](const TermPtr& term) {
    std::string key = state_key(*term);
    auto [it, fresh] = index.emplace(key, g.names.size());
    if (fresh) {
      g.names.push_back(key);
      g.terms.push_back(term);
      queue.push_back(it->second);
    }
    return it->second;
  };
  intern(make_constant(atom));
  while (!queue.empty()) {
    std::size_t src = queue.front();
    queue.pop_front();
    std::vector<Derivation> ds = derive(g.terms[src], model);
    std::size_t first = g.transitions.size();
    for (const auto& d : ds) {
      std::size_t dst = intern(d.target);
      auto it = std::find_if(
          g.transitions.begin() + static_cast<std::ptrdiff_t>(first),
          g.transitions.end(), [&](const GraphTransition& t) {
            return t.target == dst && t.action == d.action && t.rate == d.rate;
          });
      if (it != g.transitions.end()) {
        ++it->multiplicity;
        it->slots.push_back(d.slot);
      } else {
        g.transitions.push_back({src, dst, d.action, d.rate, 1, {d.slot}});
      }
    }
  }
  return g;
}

double atom_apparent_rate(const Term& term, const std::string& action,
                          const FepaModel& model) {
  // Shares the derivation walk so that unguarded terms are reported.
  auto ptr = std::shared_ptr<const Term>(std::shared_ptr<const Term>{}, &term);
  double sum = 0.0;
  for (const auto& d : derive(ptr, model))
    if (d.action == action) sum += d.rate;
  return sum;
}

FluidSystem::FluidSystem(FepaModel model) : model_(std::move(model)) {
  auto diagnostics = validate(model_);
  for (const auto& d : diagnostics)
    if (d.severity == Severity::Error) throw ModelError(d.message, d.pos);

  std::set<std::string> action_set;
  for (const auto& atom : leaf_atoms(*model_.system)) {
    Atom a;
    a.graph = derivation_graph(atom, model_);
    a.offset = names_.size();
    for (const auto& n : a.graph.names) {
      names_.push_back(n);
      state_atom_.push_back(atoms_.size());
    }
    for (const auto& t : a.graph.transitions) action_set.insert(t.action);
    atoms_.push_back(std::move(a));
  }

  // Post-order flattening of the composition tree; the root comes last.
  std::vector<std::pair<const Composition*, std::set<std::string>>> pending;
  std::size_t next_atom = 0;
  std::function<int(const Composition&)> flatten = [&](const Composition& c) -> int {
    Node node;
    if (std::get_if<Leaf>(&c.node())) {
      node.atom = static_cast<int>(next_atom++);
      nodes_.push_back(node);
      int id = static_cast<int>(nodes_.size() - 1);
      atoms_[static_cast<std::size_t>(node.atom)].leaf_node =
          static_cast<std::size_t>(id);
      return id;
    }
    const auto& par = std::get<Par>(c.node());
    for (const auto& s : par.sync) action_set.insert(s);
    int l = flatten(*par.left);
    int r = flatten(*par.right);
    node.left = l;
    node.right = r;
    nodes_.push_back(node);
    int id = static_cast<int>(nodes_.size() - 1);
    nodes_[static_cast<std::size_t>(l)].parent = id;
    nodes_[static_cast<std::size_t>(r)].parent = id;
    pending.emplace_back(&c, par.sync);
    return id;
  };
  flatten(*model_.system);

  actions_.assign(action_set.begin(), action_set.end());
  std::size_t pi = 0;
  for (auto& node : nodes_) {
    node.sync.assign(actions_.size(), false);
    if (node.is_leaf()) continue;
    for (const auto& s : pending[pi].second) node.sync[action_id(s)] = true;
    ++pi;
  }

  const std::size_t na = actions_.size();
  rate_table_.assign(names_.size() * na, 0.0);
  outgoing_.assign(names_.size() * na, {});
  active_atoms_.assign(na, {});
  for (std::size_t ai = 0; ai < atoms_.size(); ++ai) {
    const auto& atom = atoms_[ai];
    for (const auto& t : atom.graph.transitions) {
      std::size_t src = atom.offset + t.source;
      std::size_t a = action_id(t.action);
      for (std::size_t slot : t.slots) {
        rate_table_[src * na + a] += t.rate;
        outgoing_[src * na + a].push_back({atom.offset + t.target, t.rate, slot});
      }
      auto& act = active_atoms_[a];
      if (std::find(act.begin(), act.end(), ai) == act.end()) act.push_back(ai);
    }
  }
}

std::size_t FluidSystem::state_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown state " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t FluidSystem::atom_index(const std::string& name) const {
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_[i].graph.atom == name) return i;
  throw std::out_of_range("unknown atom " + name);
}

ActionId FluidSystem::action_id(const std::string& name) const {
  auto it = std::lower_bound(actions_.begin(), actions_.end(), name);
  if (it == actions_.end() || *it != name)
    throw std::out_of_range("unknown action " + name);
  return static_cast<ActionId>(it - actions_.begin());
}

std::vector<double> FluidSystem::initial_state() const {
  std::vector<double> v(names_.size(), 0.0);
  for (const auto& [name, value] : model_.initial) v[state_index(name)] = value;
  return v;
}

double FluidSystem::state_apparent_rate(std::size_t state, ActionId a) const {
  return rate_table_[state * actions_.size() + a];
}

double FluidSystem::jump_probability(std::size_t from, std::size_t to,
                                     ActionId a) const {
  double total = state_apparent_rate(from, a);
  if (total <= 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& o : outgoing(from, a))
    if (o.target == to) sum += o.weight;
  return sum / total;
}

std::vector<double> FluidSystem::node_apparent_rates(std::span<const double> v,
                                                     ActionId a) const {
  const std::size_t na = actions_.size();
  std::vector<double> out(nodes_.size(), 0.0);
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const Node& node = nodes_[n];
    if (node.is_leaf()) {
      const Atom& atom = atoms_[static_cast<std::size_t>(node.atom)];
      double sum = 0.0;
      for (std::size_t s = 0; s < atom.graph.size(); ++s) {
        std::size_t g = atom.offset + s;
        sum += v[g] * rate_table_[g * na + a];
      }
      out[n] = sum;
      continue;
    }
    double l = out[static_cast<std::size_t>(node.left)];
    double r = out[static_cast<std::size_t>(node.right)];
    if (!node.sync[a])
      out[n] = l + r;
    else if (model_.rho == Sync::Min)
      out[n] = std::min(l, r);
    else
      out[n] = l * r;
  }
  return out;
}

double FluidSystem::apparent_rate(std::span<const double> v, ActionId a) const {
  return node_apparent_rates(v, a)[root()];
}

// scale[n] is R_alpha(M, V, P') / R_alpha(node n, V, P') for any P' below n.
// Under product semantics R_i / r_i * (r_0 r_1) reduces to R_i * r_other,
// which also makes the 0/0 case vanish without a guard.
void FluidSystem::scales(ActionId a,
                         std::span<const double> apparent,
                         std::span<double> out) const {
  out[root()] = 1.0;
  for (std::size_t k = nodes_.size() - 1; k-- > 0;) {
    const Node& node = nodes_[k];
    const std::size_t p = static_cast<std::size_t>(node.parent);
    const Node& parent = nodes_[p];
    double factor = 1.0;
    if (parent.sync[a]) {
      std::size_t sibling = static_cast<std::size_t>(
          parent.left == static_cast<int>(k) ? parent.right : parent.left);
      if (model_.rho == Sync::Product) {
        factor = apparent[sibling];
      } else {
        factor = apparent[k] > 0.0 ? std::min(apparent[k], apparent[sibling]) /
                                         apparent[k]
                                   : 0.0;
      }
    }
    out[k] = out[p] * factor;
  }
}

std::vector<double> FluidSystem::component_rates(std::span<const double> v,
                                                 ActionId a) const {
  std::vector<double> apparent = node_apparent_rates(v, a);
  std::vector<double> scale(nodes_.size());
  scales(a, apparent, scale);
  std::vector<double> out(names_.size(), 0.0);
  const std::size_t na = actions_.size();
  for (const auto& atom : atoms_) {
    double s = scale[atom.leaf_node];
    for (std::size_t i = 0; i < atom.graph.size(); ++i) {
      std::size_t g = atom.offset + i;
      out[g] = v[g] * rate_table_[g * na + a] * s;
    }
  }
  return out;
}

std::vector<double> FluidSystem::inflow(std::span<const double> v,
                                        ActionId a) const {
  std::vector<double> rates = component_rates(v, a);
  std::vector<double> out(names_.size(), 0.0);
  for (std::size_t g = 0; g < names_.size(); ++g) {
    double total = state_apparent_rate(g, a);
    if (total <= 0.0) continue;
    for (const auto& o : outgoing(g, a))
      out[o.target] += o.weight / total * rates[g];
  }
  return out;
}

void FluidSystem::derivative(std::span<const double> v,
                             std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t na = actions_.size();
  std::vector<double> apparent;
  std::vector<double> scale(nodes_.size());
  for (ActionId a = 0; a < na; ++a) {
    if (active_atoms_[a].empty()) continue;
    apparent = node_apparent_rates(v, a);
    scales(a, apparent, scale);
    for (std::size_t ai : active_atoms_[a]) {
      const Atom& atom = atoms_[ai];
      double s = scale[atom.leaf_node];
      if (s == 0.0) continue;
      for (std::size_t i = 0; i < atom.graph.size(); ++i) {
        std::size_t g = atom.offset + i;
        double r = rate_table_[g * na + a];
        if (r <= 0.0) continue;
        double vs = v[g] * s;
        out[g] -= vs * r;
        // p_alpha(P, P') R_alpha(P) = weight * V_P * scale
        for (const auto& o : outgoing_[g * na + a]) out[o.target] += vs * o.weight;
      }
    }
  }
}

std::vector<double> FluidSystem::derivative(std::span<const double> v) const {
  std::vector<double> out(names_.size());
  derivative(v, out);
  return out;
}

FluidSystem FluidSystem::with_rates(std::span<const double> xi) const {
  return FluidSystem(apply_rates(model_, xi));
}

}  // namespace fepa
