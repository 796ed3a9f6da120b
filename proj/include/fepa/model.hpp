#pragma once

// Abstract syntax of FEPA models: sequential fluid atoms, the parallel
// composition tree, initial populations and the rate-occurrence vector.

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fepa {

struct SourcePos {
  int line = 0;
  int column = 0;
};

/// Raised for syntax errors and structurally invalid models.
class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& what, SourcePos pos = {});
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

class Term;
using TermPtr = std::shared_ptr<const Term>;

struct Prefix {
  std::string action;
  double rate = 0.0;
  TermPtr next;
  SourcePos pos;
  /// Index of this occurrence in the model's rate vector.
  std::size_t slot = 0;
};

struct Choice {
  TermPtr left;
  TermPtr right;
};

struct Constant {
  std::string name;
  SourcePos pos;
};

class Term {
 public:
  using Node = std::variant<Prefix, Choice, Constant>;

  explicit Term(Node node) : node_(std::move(node)) {}
  const Node& node() const { return node_; }

 private:
  Node node_;
};

TermPtr make_prefix(std::string action, double rate, TermPtr next,
                    SourcePos pos = {});
TermPtr make_choice(TermPtr left, TermPtr right);
TermPtr make_constant(std::string name, SourcePos pos = {});

/// Structural equality ignoring source positions and rate slots.
bool same_structure(const Term& a, const Term& b);

struct AtomDefinition {
  std::string name;
  TermPtr body;
  SourcePos pos;
};

class Composition;
using CompositionPtr = std::shared_ptr<const Composition>;

struct Leaf {
  std::string atom;
  SourcePos pos;
};

struct Par {
  CompositionPtr left;
  CompositionPtr right;
  std::set<std::string> sync;
};

class Composition {
 public:
  using Node = std::variant<Leaf, Par>;

  explicit Composition(Node node) : node_(std::move(node)) {}
  const Node& node() const { return node_; }

 private:
  Node node_;
};

CompositionPtr make_leaf(std::string atom, SourcePos pos = {});
CompositionPtr make_par(CompositionPtr left, CompositionPtr right,
                        std::set<std::string> sync);

/// Leaf atom names in left-to-right order.
std::vector<std::string> leaf_atoms(const Composition& tree);

/// Synchronisation function combining apparent rates of cooperating operands.
enum class Sync { Min, Product };

std::string to_string(Sync rho);
Sync parse_sync(const std::string& text);

/// One syntactic rate occurrence; the ordered list of these is the
/// perturbation space of the model.
struct RateOccurrence {
  std::string definition;
  SourcePos pos;
  std::string action;
  double value = 0.0;
};

struct FepaModel {
  std::vector<AtomDefinition> definitions;
  CompositionPtr system;
  Sync rho = Sync::Product;
  /// Initial populations by state name; absent states start at zero.
  std::map<std::string, double> initial;
  std::vector<RateOccurrence> rate_vector;

  const AtomDefinition* find(const std::string& name) const;
  std::vector<double> rates() const;
};

/// Parses the textual model format. Throws ModelError with a source position.
FepaModel parse_model(const std::string& text);

/// Prints a model in the textual format accepted by parse_model.
std::string print_model(const FepaModel& model);
std::string print_term(const Term& term);
std::string print_composition(const Composition& tree);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Renumbers rate slots by (definition name, source position) and rebuilds
/// model.rate_vector. Called by the parser; needed after manual construction.
void assign_rate_slots(FepaModel& model);

/// Returns the model with every rate occurrence replaced by xi[slot].
FepaModel apply_rates(const FepaModel& model, std::span<const double> xi);

/// Structural equality of two models, ignoring source positions.
bool same_model(const FepaModel& a, const FepaModel& b);

/// Parallel composition of two models with disjoint definitions. Uses the
/// synchronisation function of the left model.
FepaModel compose_models(const FepaModel& left, const FepaModel& right,
                         std::set<std::string> sync);

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  SourcePos pos;
};

/// Static checks: derivative-set overlap, unguarded recursion, unknown
/// initial states, negative populations (errors) and ill-posed
/// synchronisation (warning).
std::vector<Diagnostic> validate(const FepaModel& model);

bool has_errors(const std::vector<Diagnostic>& diagnostics);
std::string format_diagnostic(const Diagnostic& d);

}  // namespace fepa
