#pragma once

// Symbolic form of the vector field: multivariate polynomials for product
// semantics and expression trees (with min and guarded ratios) for min
// semantics. Used for the `odes` export and Lipschitz bounds.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fepa/semantics.hpp"

namespace fepa {

/// Product of variables with positive integer powers, sorted by variable.
struct Monomial {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> factors;

  static Monomial variable(std::uint32_t var);
  Monomial operator*(const Monomial& other) const;
  std::uint32_t degree(std::uint32_t var) const;
  auto operator<=>(const Monomial&) const = default;
};

class Polynomial {
 public:
  Polynomial() = default;
  static Polynomial constant(double c);
  static Polynomial variable(std::uint32_t var);

  const std::map<Monomial, double>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial operator*(const Polynomial& other) const;
  Polynomial scaled(double c) const;

  double evaluate(std::span<const double> values) const;
  /// d/d(var).
  Polynomial derivative(std::uint32_t var) const;
  /// Replaces variables [first, first + values.size()) by constants.
  Polynomial substitute(std::uint32_t first, std::span<const double> values) const;
  /// Renames variable v to map[v]; map[v] < 0 substitutes zero. Every
  /// variable must be below map.size().
  Polynomial remap(std::span<const std::int64_t> map) const;
  /// Sum over terms of |coefficient| * monomial evaluated at `values`; an
  /// upper bound of |p| on the box [0, values] when all variables are >= 0.
  double absolute_bound(std::span<const double> values) const;

 private:
  void add_term(const Monomial& m, double c);
  std::map<Monomial, double> terms_;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Expression tree over state variables. Ratio evaluates to 0 when the
/// denominator is 0.
struct Expr {
  enum class Kind { Constant, Variable, Sum, Product, Min, Ratio };
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::size_t var = 0;
  std::vector<ExprPtr> args;
};

ExprPtr expr_constant(double c);
ExprPtr expr_variable(std::size_t var);
/// Flattens nested sums and drops zero constants.
ExprPtr expr_sum(std::vector<ExprPtr> args);
/// Flattens nested products and folds constants.
ExprPtr expr_product(std::vector<ExprPtr> args);
ExprPtr expr_min(ExprPtr a, ExprPtr b);
ExprPtr expr_ratio(ExprPtr num, ExprPtr den);

double evaluate(const Expr& e, std::span<const double> v);
/// Variable renaming as in Polynomial::remap.
ExprPtr remap(const ExprPtr& e, std::span<const std::int64_t> map);
std::string to_string(const Expr& e, const std::vector<std::string>& names,
                      const std::string& symbol = "V");
nlohmann::json to_json(const Expr& e, const std::vector<std::string>& names);

/// Per-state symbolic right-hand sides of dV/dt = F(V).
struct SymbolicField {
  Sync rho = Sync::Product;
  /// Variable symbol used in exports, e.g. V[P] or W[P].
  std::string symbol = "V";
  std::vector<std::string> states;
  std::size_t rate_count = 0;
  /// Product semantics: F_P as a polynomial in the states (variables
  /// 0..n-1) and rate occurrences (variables n..n+m-1).
  std::vector<Polynomial> parametric;
  /// Product semantics: F_P with the model's rates substituted.
  std::vector<Polynomial> polynomials;
  /// Min semantics: F_P as an expression tree with numeric rates.
  std::vector<ExprPtr> expressions;
};

SymbolicField symbolic_field(const FluidSystem& system);

/// r_alpha(M, V) at the root as an expression tree.
ExprPtr symbolic_apparent_rate(const FluidSystem& system, ActionId a);

/// Canonical polynomial text, e.g. "-1*V[P]*V[Q] + 0.5*V[P']".
std::string to_string(const Polynomial& p, const std::vector<std::string>& names,
                      const std::string& symbol = "V");

/// One line per state: "d/dt V[state] = <expression>".
std::string export_text(const SymbolicField& field);
nlohmann::json export_json(const SymbolicField& field);

}  // namespace fepa
