#include "fepa/model.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace fepa {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

namespace {

void print_term_into(std::ostringstream& os, const Term& term, bool in_prefix);

void print_choice_operand(std::ostringstream& os, const Term& term,
                          bool right) {
  // Choice parses left-associatively, so a Choice on the right needs parens.
  bool paren = right && std::holds_alternative<Choice>(term.node());
  if (paren) os << '(';
  print_term_into(os, term, false);
  if (paren) os << ')';
}

void print_term_into(std::ostringstream& os, const Term& term, bool in_prefix) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Prefix>) {
          os << '(' << n.action << ", " << format_double(n.rate) << ").";
          print_term_into(os, *n.next, true);
        } else if constexpr (std::is_same_v<T, Choice>) {
          if (in_prefix) os << '(';
          print_choice_operand(os, *n.left, false);
          os << " + ";
          print_choice_operand(os, *n.right, true);
          if (in_prefix) os << ')';
        } else {
          os << n.name;
        }
      },
      term.node());
}

void print_tree_into(std::ostringstream& os, const Composition& tree,
                     bool right) {
  if (const auto* leaf = std::get_if<Leaf>(&tree.node())) {
    os << leaf->atom;
    return;
  }
  const auto& par = std::get<Par>(tree.node());
  if (right) os << '(';
  print_tree_into(os, *par.left, false);
  os << " <";
  bool first = true;
  for (const auto& a : par.sync) {
    if (!first) os << ", ";
    os << a;
    first = false;
  }
  os << "> ";
  print_tree_into(os, *par.right, true);
  if (right) os << ')';
}

}  // namespace

std::string print_term(const Term& term) {
  std::ostringstream os;
  print_term_into(os, term, false);
  return os.str();
}

std::string print_composition(const Composition& tree) {
  std::ostringstream os;
  print_tree_into(os, tree, false);
  return os.str();
}

std::string print_model(const FepaModel& model) {
  std::ostringstream os;
  os << "semantics = " << to_string(model.rho) << ";\n";
  for (const auto& def : model.definitions)
    os << def.name << " = " << print_term(*def.body) << ";\n";
  os << "system = " << print_composition(*model.system) << ";\n";
  for (const auto& [state, value] : model.initial)
    os << "init " << state << " = " << format_double(value) << ";\n";
  return os.str();
}

}  // namespace fepa
