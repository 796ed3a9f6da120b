#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "fepa/model.hpp"
#include "fepa/semantics.hpp"

namespace fepa {

TermPtr make_prefix(std::string action, double rate, TermPtr next,
                    SourcePos pos) {
  return std::make_shared<const Term>(
      Prefix{std::move(action), rate, std::move(next), pos, 0});
}

TermPtr make_choice(TermPtr left, TermPtr right) {
  return std::make_shared<const Term>(Choice{std::move(left), std::move(right)});
}

TermPtr make_constant(std::string name, SourcePos pos) {
  return std::make_shared<const Term>(Constant{std::move(name), pos});
}

CompositionPtr make_leaf(std::string atom, SourcePos pos) {
  return std::make_shared<const Composition>(Leaf{std::move(atom), pos});
}

CompositionPtr make_par(CompositionPtr left, CompositionPtr right,
                        std::set<std::string> sync) {
  return std::make_shared<const Composition>(
      Par{std::move(left), std::move(right), std::move(sync)});
}

bool same_structure(const Term& a, const Term& b) {
  if (a.node().index() != b.node().index()) return false;
  if (const auto* pa = std::get_if<Prefix>(&a.node())) {
    const auto& pb = std::get<Prefix>(b.node());
    return pa->action == pb.action && pa->rate == pb.rate &&
           same_structure(*pa->next, *pb.next);
  }
  if (const auto* ca = std::get_if<Choice>(&a.node())) {
    const auto& cb = std::get<Choice>(b.node());
    return same_structure(*ca->left, *cb.left) &&
           same_structure(*ca->right, *cb.right);
  }
  return std::get<Constant>(a.node()).name == std::get<Constant>(b.node()).name;
}

namespace {

void collect_leaves(const Composition& tree, std::vector<std::string>& out) {
  if (const auto* leaf = std::get_if<Leaf>(&tree.node())) {
    out.push_back(leaf->atom);
    return;
  }
  const auto& par = std::get<Par>(tree.node());
  collect_leaves(*par.left, out);
  collect_leaves(*par.right, out);
}

bool same_tree(const Composition& a, const Composition& b) {
  if (a.node().index() != b.node().index()) return false;
  if (const auto* la = std::get_if<Leaf>(&a.node()))
    return la->atom == std::get<Leaf>(b.node()).atom;
  const auto& pa = std::get<Par>(a.node());
  const auto& pb = std::get<Par>(b.node());
  return pa.sync == pb.sync && same_tree(*pa.left, *pb.left) &&
         same_tree(*pa.right, *pb.right);
}

using PrefixMap = std::function<Prefix(const Prefix&)>;

TermPtr map_prefixes(const TermPtr& term, const PrefixMap& fn) {
  return std::visit(
      [&](const auto& n) -> TermPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Prefix>) {
          Prefix p = fn(n);
          p.next = map_prefixes(n.next, fn);  // after fn: pre-order
          return std::make_shared<const Term>(std::move(p));
        } else if constexpr (std::is_same_v<T, Choice>) {
          TermPtr left = map_prefixes(n.left, fn);
          return make_choice(std::move(left), map_prefixes(n.right, fn));
        } else {
          return term;
        }
      },
      term->node());
}

}  // namespace

std::vector<std::string> leaf_atoms(const Composition& tree) {
  std::vector<std::string> out;
  collect_leaves(tree, out);
  return out;
}

std::string to_string(Sync rho) { return rho == Sync::Min ? "min" : "product"; }

Sync parse_sync(const std::string& text) {
  if (text == "min") return Sync::Min;
  if (text == "product") return Sync::Product;
  throw std::invalid_argument("unknown synchronisation function '" + text + "'");
}

const AtomDefinition* FepaModel::find(const std::string& name) const {
  for (const auto& def : definitions)
    if (def.name == name) return &def;
  return nullptr;
}

std::vector<double> FepaModel::rates() const {
  std::vector<double> out;
  out.reserve(rate_vector.size());
  for (const auto& occ : rate_vector) out.push_back(occ.value);
  return out;
}

void assign_rate_slots(FepaModel& model) {
  std::vector<std::size_t> order(model.definitions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.definitions[a].name < model.definitions[b].name;
  });
  model.rate_vector.clear();
  for (std::size_t idx : order) {
    auto& def = model.definitions[idx];
    // Pre-order, left to right: source order for parsed text.
    def.body = map_prefixes(def.body, [&](const Prefix& p) {
      Prefix q = p;
      q.slot = model.rate_vector.size();
      model.rate_vector.push_back({def.name, p.pos, p.action, p.rate});
      return q;
    });
  }
}

FepaModel apply_rates(const FepaModel& model, std::span<const double> xi) {
  if (xi.size() != model.rate_vector.size())
    throw std::invalid_argument("rate vector has " + std::to_string(xi.size()) +
                                " entries, model has " +
                                std::to_string(model.rate_vector.size()));
  for (double x : xi)
    if (!(x > 0.0))
      throw std::invalid_argument("rates must be positive, got " +
                                  format_double(x));
  FepaModel out = model;
  for (auto& def : out.definitions) {
    def.body = map_prefixes(def.body, [&](const Prefix& p) {
      Prefix q = p;
      q.rate = xi[p.slot];
      return q;
    });
  }
  for (std::size_t i = 0; i < xi.size(); ++i) out.rate_vector[i].value = xi[i];
  return out;
}

bool same_model(const FepaModel& a, const FepaModel& b) {
  if (a.rho != b.rho || a.initial != b.initial ||
      a.definitions.size() != b.definitions.size())
    return false;
  for (std::size_t i = 0; i < a.definitions.size(); ++i) {
    if (a.definitions[i].name != b.definitions[i].name ||
        !same_structure(*a.definitions[i].body, *b.definitions[i].body))
      return false;
  }
  return same_tree(*a.system, *b.system);
}

FepaModel compose_models(const FepaModel& left, const FepaModel& right,
                         std::set<std::string> sync) {
  FepaModel out;
  out.rho = left.rho;
  out.definitions = left.definitions;
  for (const auto& def : right.definitions) {
    if (left.find(def.name))
      throw ModelError("definition " + def.name + " occurs in both operands");
    out.definitions.push_back(def);
  }
  out.system = make_par(left.system, right.system, std::move(sync));
  out.initial = left.initial;
  out.initial.insert(right.initial.begin(), right.initial.end());
  assign_rate_slots(out);
  return out;
}

namespace {

// Whether some population makes r_alpha(tree, V) positive.
bool can_perform(const Composition& tree, const std::string& action,
                 const std::map<std::string, DerivationGraph>& graphs) {
  if (const auto* leaf = std::get_if<Leaf>(&tree.node())) {
    auto it = graphs.find(leaf->atom);
    if (it == graphs.end()) return false;
    for (const auto& t : it->second.transitions)
      if (t.action == action) return true;
    return false;
  }
  const auto& par = std::get<Par>(tree.node());
  bool l = can_perform(*par.left, action, graphs);
  bool r = can_perform(*par.right, action, graphs);
  return par.sync.count(action) ? (l && r) : (l || r);
}

void check_well_posed(const Composition& tree,
                      const std::map<std::string, DerivationGraph>& graphs,
                      std::vector<Diagnostic>& out) {
  const auto* par = std::get_if<Par>(&tree.node());
  if (!par) return;
  for (const auto& action : par->sync) {
    const Composition* sides[2] = {par->left.get(), par->right.get()};
    for (const Composition* side : sides) {
      if (!can_perform(*side, action, graphs)) {
        out.push_back({Severity::Warning, "ill-posed",
                       "operand '" + print_composition(*side) +
                           "' never performs synchronised action '" + action +
                           "' in '" + print_composition(tree) + "'",
                       {}});
      }
    }
  }
  check_well_posed(*par->left, graphs, out);
  check_well_posed(*par->right, graphs, out);
}

}  // namespace

std::vector<Diagnostic> validate(const FepaModel& model) {
  std::vector<Diagnostic> out;
  std::set<std::string> unguarded;
  for (const auto& def : model.definitions) {
    try {
      (void)atom_apparent_rate(*make_constant(def.name), "", model);
    } catch (const ModelError& e) {
      unguarded.insert(def.name);
      out.push_back({Severity::Error, "unguarded-recursion",
                     "definition " + def.name + ": " + e.what(), def.pos});
    }
  }

  std::map<std::string, DerivationGraph> graphs;
  std::map<std::string, std::string> owner;  // state key -> atom
  std::set<std::string> seen_leaves;
  for (const auto& atom : leaf_atoms(*model.system)) {
    if (!seen_leaves.insert(atom).second) {
      out.push_back({Severity::Error, "derivative-set-overlap",
                     "atom " + atom + " occurs more than once in the system",
                     model.find(atom) ? model.find(atom)->pos : SourcePos{}});
      continue;
    }
    DerivationGraph g;
    try {
      g = derivation_graph(atom, model);
    } catch (const ModelError&) {
      continue;  // already reported as unguarded
    }
    for (const auto& name : g.names) {
      auto [it, fresh] = owner.emplace(name, atom);
      if (!fresh) {
        out.push_back({Severity::Error, "derivative-set-overlap",
                       "derivative " + name + " is shared by atoms " +
                           it->second + " and " + atom,
                       model.find(atom) ? model.find(atom)->pos : SourcePos{}});
      }
    }
    graphs.emplace(atom, std::move(g));
  }

  for (const auto& [state, value] : model.initial) {
    if (!owner.count(state))
      out.push_back({Severity::Error, "unknown-init-state",
                     "init names " + state +
                         ", which is not a derivative of any atom in the system",
                     {}});
    if (value < 0.0)
      out.push_back({Severity::Error, "negative-population",
                     "negative initial population for " + state, {}});
  }

  check_well_posed(*model.system, graphs, out);
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string format_diagnostic(const Diagnostic& d) {
  std::ostringstream os;
  os << (d.severity == Severity::Error ? "error" : "warning");
  if (d.pos.line > 0) os << " at " << d.pos.line << ':' << d.pos.column;
  os << " [" << d.code << "]: " << d.message;
  return os.str();
}

}  // namespace fepa
