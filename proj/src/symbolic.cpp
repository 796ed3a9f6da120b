#include "fepa/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fepa {

Monomial Monomial::variable(std::uint32_t var) { return Monomial{{{var, 1}}}; }

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial out;
  auto a = factors.begin();
  auto b = other.factors.begin();
  while (a != factors.end() || b != other.factors.end()) {
    if (b == other.factors.end() || (a != factors.end() && a->first < b->first)) {
      out.factors.push_back(*a++);
    } else if (a == factors.end() || b->first < a->first) {
      out.factors.push_back(*b++);
    } else {
      out.factors.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  return out;
}

std::uint32_t Monomial::degree(std::uint32_t var) const {
  for (const auto& [v, p] : factors)
    if (v == var) return p;
  return 0;
}

Polynomial Polynomial::constant(double c) {
  Polynomial p;
  p.add_term(Monomial{}, c);
  return p;
}

Polynomial Polynomial::variable(std::uint32_t var) {
  Polynomial p;
  p.add_term(Monomial::variable(var), 1.0);
  return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (c == 0.0) return;
  auto [it, fresh] = terms_.emplace(m, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Polynomial out;
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : other.terms_) out.add_term(ma * mb, ca * cb);
  return out;
}

Polynomial Polynomial::scaled(double c) const {
  Polynomial out;
  for (const auto& [m, k] : terms_) out.add_term(m, k * c);
  return out;
}

double Polynomial::evaluate(std::span<const double> values) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (const auto& [v, p] : m.factors) t *= std::pow(values[v], p);
    sum += t;
  }
  return sum;
}

Polynomial Polynomial::derivative(std::uint32_t var) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    std::uint32_t d = m.degree(var);
    if (d == 0) continue;
    Monomial reduced;
    for (const auto& [v, p] : m.factors) {
      if (v != var)
        reduced.factors.emplace_back(v, p);
      else if (p > 1)
        reduced.factors.emplace_back(v, p - 1);
    }
    out.add_term(reduced, c * d);
  }
  return out;
}

Polynomial Polynomial::substitute(std::uint32_t first,
                                  std::span<const double> values) const {
  Polynomial out;
  const auto last = first + static_cast<std::uint32_t>(values.size());
  for (const auto& [m, c] : terms_) {
    double k = c;
    Monomial rest;
    for (const auto& [v, p] : m.factors) {
      if (v >= first && v < last)
        k *= std::pow(values[v - first], p);
      else
        rest.factors.emplace_back(v, p);
    }
    out.add_term(rest, k);
  }
  return out;
}

Polynomial Polynomial::remap(std::span<const std::int64_t> map) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    Monomial rest;
    bool zero = false;
    for (const auto& [v, p] : m.factors) {
      if (v >= map.size()) throw std::out_of_range("polynomial variable outside remap");
      if (map[v] < 0) {
        zero = true;
        break;
      }
      for (std::uint32_t k = 0; k < p; ++k)
        rest = rest * Monomial::variable(static_cast<std::uint32_t>(map[v]));
    }
    if (!zero) out.add_term(rest, c);
  }
  return out;
}

double Polynomial::absolute_bound(std::span<const double> values) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = std::abs(c);
    for (const auto& [v, p] : m.factors) t *= std::pow(std::abs(values[v]), p);
    sum += t;
  }
  return sum;
}

ExprPtr expr_constant(double c) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Constant;
  e->value = c;
  return e;
}

ExprPtr expr_variable(std::size_t var) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Variable;
  e->var = var;
  return e;
}

namespace {

bool is_constant(const ExprPtr& e, double value) {
  return e->kind == Expr::Kind::Constant && e->value == value;
}

}  // namespace

ExprPtr expr_sum(std::vector<ExprPtr> args) {
  std::vector<ExprPtr> flat;
  for (auto& a : args) {
    if (a->kind == Expr::Kind::Sum)
      flat.insert(flat.end(), a->args.begin(), a->args.end());
    else if (!is_constant(a, 0.0))
      flat.push_back(std::move(a));
  }
  if (flat.empty()) return expr_constant(0.0);
  if (flat.size() == 1) return flat.front();
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Sum;
  e->args = std::move(flat);
  return e;
}

ExprPtr expr_product(std::vector<ExprPtr> args) {
  double k = 1.0;
  std::vector<ExprPtr> flat;
  for (auto& a : args) {
    if (a->kind == Expr::Kind::Constant) {
      k *= a->value;
    } else if (a->kind == Expr::Kind::Product) {
      for (const auto& b : a->args) {
        if (b->kind == Expr::Kind::Constant)
          k *= b->value;
        else
          flat.push_back(b);
      }
    } else {
      flat.push_back(std::move(a));
    }
  }
  if (k == 0.0) return expr_constant(0.0);
  if (flat.empty()) return expr_constant(k);
  if (k != 1.0) flat.insert(flat.begin(), expr_constant(k));
  if (flat.size() == 1) return flat.front();
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Product;
  e->args = std::move(flat);
  return e;
}

ExprPtr expr_min(ExprPtr a, ExprPtr b) {
  if (is_constant(a, 0.0) || is_constant(b, 0.0)) return expr_constant(0.0);
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Min;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr expr_ratio(ExprPtr num, ExprPtr den) {
  if (is_constant(num, 0.0) || is_constant(den, 0.0)) return expr_constant(0.0);
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Ratio;
  e->args = {std::move(num), std::move(den)};
  return e;
}

double evaluate(const Expr& e, std::span<const double> v) {
  switch (e.kind) {
    case Expr::Kind::Constant: return e.value;
    case Expr::Kind::Variable: return v[e.var];
    case Expr::Kind::Sum: {
      double s = 0.0;
      for (const auto& a : e.args) s += evaluate(*a, v);
      return s;
    }
    case Expr::Kind::Product: {
      double p = 1.0;
      for (const auto& a : e.args) p *= evaluate(*a, v);
      return p;
    }
    case Expr::Kind::Min:
      return std::min(evaluate(*e.args[0], v), evaluate(*e.args[1], v));
    case Expr::Kind::Ratio: {
      double den = evaluate(*e.args[1], v);
      return den == 0.0 ? 0.0 : evaluate(*e.args[0], v) / den;
    }
  }
  return 0.0;
}

ExprPtr remap(const ExprPtr& e, std::span<const std::int64_t> map) {
  switch (e->kind) {
    case Expr::Kind::Constant: return e;
    case Expr::Kind::Variable:
      if (e->var >= map.size()) throw std::out_of_range("expression variable outside remap");
      return map[e->var] < 0 ? expr_constant(0.0)
                             : expr_variable(static_cast<std::size_t>(map[e->var]));
    default: break;
  }
  std::vector<ExprPtr> args;
  for (const auto& a : e->args) args.push_back(remap(a, map));
  switch (e->kind) {
    case Expr::Kind::Sum: return expr_sum(std::move(args));
    case Expr::Kind::Product: return expr_product(std::move(args));
    case Expr::Kind::Min: return expr_min(args[0], args[1]);
    default: return expr_ratio(args[0], args[1]);
  }
}

namespace {

std::string var_name(std::size_t var, const std::vector<std::string>& names,
                     const std::string& symbol) {
  if (var < names.size()) return symbol + "[" + names[var] + "]";
  return "x[" + std::to_string(var - names.size()) + "]";
}

void print_expr(std::ostringstream& os, const Expr& e,
                const std::vector<std::string>& names, const std::string& symbol,
                bool wrap_sum) {
  switch (e.kind) {
    case Expr::Kind::Constant: os << format_double(e.value); break;
    case Expr::Kind::Variable: os << var_name(e.var, names, symbol); break;
    case Expr::Kind::Sum: {
      if (wrap_sum) os << '(';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << " + ";
        print_expr(os, *e.args[i], names, symbol, false);
      }
      if (wrap_sum) os << ')';
      break;
    }
    case Expr::Kind::Product: {
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << '*';
        print_expr(os, *e.args[i], names, symbol, true);
      }
      break;
    }
    case Expr::Kind::Min:
      os << "min(";
      print_expr(os, *e.args[0], names, symbol, false);
      os << ", ";
      print_expr(os, *e.args[1], names, symbol, false);
      os << ')';
      break;
    case Expr::Kind::Ratio:
      os << '(';
      print_expr(os, *e.args[0], names, symbol, true);
      os << ")/(";
      print_expr(os, *e.args[1], names, symbol, false);
      os << ')';
      break;
  }
}

}  // namespace

std::string to_string(const Expr& e, const std::vector<std::string>& names,
                      const std::string& symbol) {
  std::ostringstream os;
  print_expr(os, e, names, symbol, false);
  return os.str();
}

nlohmann::json to_json(const Expr& e, const std::vector<std::string>& names) {
  using nlohmann::json;
  auto children = [&] {
    json arr = json::array();
    for (const auto& a : e.args) arr.push_back(to_json(*a, names));
    return arr;
  };
  switch (e.kind) {
    case Expr::Kind::Constant: return {{"op", "const"}, {"value", e.value}};
    case Expr::Kind::Variable:
      return e.var < names.size()
                 ? json{{"op", "var"}, {"state", names[e.var]}}
                 : json{{"op", "rate"}, {"index", e.var - names.size()}};
    case Expr::Kind::Sum: return {{"op", "sum"}, {"args", children()}};
    case Expr::Kind::Product: return {{"op", "product"}, {"args", children()}};
    case Expr::Kind::Min: return {{"op", "min"}, {"args", children()}};
    case Expr::Kind::Ratio: return {{"op", "ratio"}, {"args", children()}};
  }
  return nullptr;
}

std::string to_string(const Polynomial& p, const std::vector<std::string>& names,
                      const std::string& symbol) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    double mag = c;
    if (first) {
      if (c < 0) {
        os << '-';
        mag = -c;
      }
    } else {
      os << (c < 0 ? " - " : " + ");
      mag = std::abs(c);
    }
    first = false;
    os << format_double(mag);
    for (const auto& [v, pow] : m.factors) {
      os << '*' << var_name(v, names, symbol);
      if (pow > 1) os << '^' << pow;
    }
  }
  return os.str();
}

namespace {

// Symbolic apparent rates per tree node, as polynomials in states and rate
// variables.
std::vector<Polynomial> parametric_apparent(const FluidSystem& sys, ActionId a) {
  const auto n = static_cast<std::uint32_t>(sys.state_count());
  std::vector<Polynomial> out(sys.nodes().size());
  for (std::size_t k = 0; k < sys.nodes().size(); ++k) {
    const auto& node = sys.nodes()[k];
    if (node.is_leaf()) {
      const auto& atom = sys.atoms()[static_cast<std::size_t>(node.atom)];
      for (std::size_t i = 0; i < atom.graph.size(); ++i) {
        std::size_t g = atom.offset + i;
        for (const auto& o : sys.outgoing(g, a))
          out[k] += Polynomial::variable(static_cast<std::uint32_t>(g)) *
                    Polynomial::variable(n + static_cast<std::uint32_t>(o.slot));
      }
      continue;
    }
    const auto& l = out[static_cast<std::size_t>(node.left)];
    const auto& r = out[static_cast<std::size_t>(node.right)];
    if (node.sync[a]) {
      out[k] = l * r;
    } else {
      out[k] = l;
      out[k] += r;
    }
  }
  return out;
}

std::vector<ExprPtr> expr_apparent(const FluidSystem& sys, ActionId a) {
  std::vector<ExprPtr> out(sys.nodes().size());
  for (std::size_t k = 0; k < sys.nodes().size(); ++k) {
    const auto& node = sys.nodes()[k];
    if (node.is_leaf()) {
      const auto& atom = sys.atoms()[static_cast<std::size_t>(node.atom)];
      std::vector<ExprPtr> terms;
      for (std::size_t i = 0; i < atom.graph.size(); ++i) {
        std::size_t g = atom.offset + i;
        double r = sys.state_apparent_rate(g, a);
        if (r > 0.0) terms.push_back(expr_product({expr_constant(r), expr_variable(g)}));
      }
      out[k] = expr_sum(std::move(terms));
      continue;
    }
    const auto& l = out[static_cast<std::size_t>(node.left)];
    const auto& r = out[static_cast<std::size_t>(node.right)];
    if (!node.sync[a])
      out[k] = expr_sum({l, r});
    else if (sys.rho() == Sync::Min)
      out[k] = expr_min(l, r);
    else
      out[k] = expr_product({l, r});
  }
  return out;
}

}  // namespace

ExprPtr symbolic_apparent_rate(const FluidSystem& system, ActionId a) {
  return expr_apparent(system, a).back();
}

SymbolicField symbolic_field(const FluidSystem& sys) {
  SymbolicField field;
  field.rho = sys.rho();
  field.states = sys.state_names();
  field.rate_count = sys.model().rate_vector.size();
  const std::size_t n = sys.state_count();
  const auto& nodes = sys.nodes();

  if (sys.rho() == Sync::Product) {
    field.parametric.assign(n, Polynomial{});
    for (ActionId a = 0; a < sys.actions().size(); ++a) {
      auto apparent = parametric_apparent(sys, a);
      std::vector<Polynomial> scale(nodes.size());
      scale[sys.root()] = Polynomial::constant(1.0);
      for (std::size_t k = nodes.size() - 1; k-- > 0;) {
        const auto& parent = nodes[static_cast<std::size_t>(nodes[k].parent)];
        const auto& up = scale[static_cast<std::size_t>(nodes[k].parent)];
        if (parent.sync[a]) {
          auto sibling = static_cast<std::size_t>(
              parent.left == static_cast<int>(k) ? parent.right : parent.left);
          scale[k] = up * apparent[sibling];
        } else {
          scale[k] = up;
        }
      }
      for (const auto& atom : sys.atoms()) {
        const Polynomial& s = scale[atom.leaf_node];
        if (s.is_zero()) continue;
        for (std::size_t i = 0; i < atom.graph.size(); ++i) {
          std::size_t g = atom.offset + i;
          for (const auto& o : sys.outgoing(g, a)) {
            Polynomial flow =
                Polynomial::variable(static_cast<std::uint32_t>(g)) *
                Polynomial::variable(static_cast<std::uint32_t>(n + o.slot)) * s;
            field.parametric[o.target] += flow;
            field.parametric[g] -= flow;
          }
        }
      }
    }
    auto rates = sys.model().rates();
    for (const auto& p : field.parametric)
      field.polynomials.push_back(p.substitute(static_cast<std::uint32_t>(n), rates));
    return field;
  }

  // Min semantics. Coefficients of V_src * scale(action, atom) per target.
  std::vector<std::map<std::pair<std::size_t, ActionId>, double>> coeff(n);
  std::vector<std::vector<ExprPtr>> leaf_scale(sys.actions().size());
  for (ActionId a = 0; a < sys.actions().size(); ++a) {
    auto apparent = expr_apparent(sys, a);
    std::vector<ExprPtr> scale(nodes.size());
    scale[sys.root()] = expr_constant(1.0);
    for (std::size_t k = nodes.size() - 1; k-- > 0;) {
      const auto& parent = nodes[static_cast<std::size_t>(nodes[k].parent)];
      const auto& up = scale[static_cast<std::size_t>(nodes[k].parent)];
      if (parent.sync[a]) {
        auto sibling = static_cast<std::size_t>(
            parent.left == static_cast<int>(k) ? parent.right : parent.left);
        scale[k] = expr_product(
            {up, expr_ratio(expr_min(apparent[k], apparent[sibling]), apparent[k])});
      } else {
        scale[k] = up;
      }
    }
    leaf_scale[a] = std::move(scale);
    for (const auto& atom : sys.atoms()) {
      for (std::size_t i = 0; i < atom.graph.size(); ++i) {
        std::size_t g = atom.offset + i;
        for (const auto& o : sys.outgoing(g, a)) {
          coeff[o.target][{g, a}] += o.weight;
          coeff[g][{g, a}] -= o.weight;
        }
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<ExprPtr> terms;
    for (const auto& [key, c] : coeff[p]) {
      if (c == 0.0) continue;
      const auto& [g, a] = key;
      const auto& atom = sys.atoms()[sys.atom_of(g)];
      terms.push_back(expr_product(
          {expr_constant(c), expr_variable(g), leaf_scale[a][atom.leaf_node]}));
    }
    field.expressions.push_back(expr_sum(std::move(terms)));
  }
  return field;
}

std::string export_text(const SymbolicField& field) {
  std::ostringstream os;
  for (std::size_t i = 0; i < field.states.size(); ++i) {
    os << "d/dt " << field.symbol << '[' << field.states[i] << "] = ";
    if (field.rho == Sync::Product)
      os << to_string(field.polynomials[i], field.states, field.symbol);
    else
      os << to_string(*field.expressions[i], field.states, field.symbol);
    os << '\n';
  }
  return os.str();
}

nlohmann::json export_json(const SymbolicField& field) {
  using nlohmann::json;
  json eqs = json::array();
  for (std::size_t i = 0; i < field.states.size(); ++i) {
    json eq = {{"state", field.states[i]}};
    if (field.rho == Sync::Product) {
      json terms = json::array();
      for (const auto& [m, c] : field.polynomials[i].terms()) {
        json factors = json::array();
        for (const auto& [v, p] : m.factors)
          factors.push_back({{"state", field.states[v]}, {"power", p}});
        terms.push_back({{"coefficient", c}, {"factors", factors}});
      }
      eq["form"] = "polynomial";
      eq["terms"] = terms;
      eq["text"] = to_string(field.polynomials[i], field.states, field.symbol);
    } else {
      eq["form"] = "expression";
      eq["expression"] = to_json(*field.expressions[i], field.states);
      eq["text"] = to_string(*field.expressions[i], field.states, field.symbol);
    }
    eqs.push_back(eq);
  }
  return {{"semantics", to_string(field.rho)},
          {"symbol", field.symbol},
          {"states", field.states},
          {"equations", eqs}};
}

}  // namespace fepa
