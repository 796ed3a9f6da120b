#include "fepa/model.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace fepa {

namespace {

enum class Tok {
  Ident,
  Number,
  LParen,
  RParen,
  Comma,
  Dot,
  Plus,
  Equals,
  Semicolon,
  Less,
  Greater,
  End
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourcePos pos;
};

std::string describe(Tok kind) {
  switch (kind) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Dot: return "'.'";
    case Tok::Plus: return "'+'";
    case Tok::Equals: return "'='";
    case Tok::Semicolon: return "';'";
    case Tok::Less: return "'<'";
    case Tok::Greater: return "'>'";
    case Tok::End: return "end of input";
  }
  return "?";
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = {line_, column_};
      if (at_end()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Ident;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                             peek() == '_'))
          t.text += advance();
        while (!at_end() && peek() == '\'') t.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
                 (c == '.' && next_is_digit())) {
        t.kind = Tok::Number;
        t.text = lex_number();
      } else {
        advance();
        switch (c) {
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          case '.': t.kind = Tok::Dot; break;
          case '+': t.kind = Tok::Plus; break;
          case '=': t.kind = Tok::Equals; break;
          case ';': t.kind = Tok::Semicolon; break;
          case '<': t.kind = Tok::Less; break;
          case '>': t.kind = Tok::Greater; break;
          default:
            throw ModelError(std::string("unexpected character '") + c + "'",
                             t.pos);
        }
        t.text = std::string(1, c);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return i_ >= text_.size(); }
  char peek() const { return text_[i_]; }
  bool next_is_digit() const {
    return i_ + 1 < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[i_ + 1]));
  }
  char advance() {
    char c = text_[i_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    return c;
  }
  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  std::string lex_number() {
    std::string s;
    if (peek() == '-') s += advance();
    auto digits = [&] {
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek())))
        s += advance();
    };
    digits();
    // A '.' is part of the number only when a digit follows; otherwise it is
    // the prefix dot.
    if (!at_end() && peek() == '.' && next_is_digit()) {
      s += advance();
      digits();
    }
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      std::size_t save = i_;
      int sl = line_, sc = column_;
      std::string exp(1, advance());
      if (!at_end() && (peek() == '+' || peek() == '-')) exp += advance();
      if (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
        s += exp;
        digits();
      } else {
        i_ = save;
        line_ = sl;
        column_ = sc;
      }
    }
    return s;
  }

  const std::string& text_;
  std::size_t i_ = 0;
  int line_ = 1;
  int column_ = 1;
};

const std::set<std::string> kKeywords = {"system", "init", "semantics"};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  FepaModel run() {
    FepaModel model;
    bool have_semantics = false;
    std::set<std::string> init_seen;
    while (peek().kind != Tok::End) {
      const Token& head = expect(Tok::Ident);
      if (head.text == "system") {
        expect(Tok::Equals);
        if (model.system)
          throw ModelError("duplicate system declaration", head.pos);
        model.system = composition();
        expect(Tok::Semicolon);
      } else if (head.text == "init") {
        const Token& name = expect(Tok::Ident);
        expect(Tok::Equals);
        const Token& num = expect(Tok::Number);
        double value = to_double(num);
        if (value < 0.0)
          throw ModelError("negative initial population for " + name.text,
                           num.pos);
        if (!init_seen.insert(name.text).second)
          throw ModelError("duplicate init for " + name.text, name.pos);
        model.initial[name.text] = value;
        expect(Tok::Semicolon);
      } else if (head.text == "semantics") {
        expect(Tok::Equals);
        const Token& kind = expect(Tok::Ident);
        if (kind.text != "min" && kind.text != "product")
          throw ModelError("semantics must be 'min' or 'product'", kind.pos);
        if (have_semantics)
          throw ModelError("duplicate semantics declaration", head.pos);
        have_semantics = true;
        model.rho = kind.text == "min" ? Sync::Min : Sync::Product;
        expect(Tok::Semicolon);
      } else {
        expect(Tok::Equals);
        if (model.find(head.text))
          throw ModelError("duplicate definition of " + head.text, head.pos);
        AtomDefinition def{head.text, sequential(), head.pos};
        expect(Tok::Semicolon);
        model.definitions.push_back(std::move(def));
      }
    }
    if (!model.system)
      throw ModelError("missing 'system = ...;' declaration", peek().pos);
    check_references(model);
    assign_rate_slots(model);
    return model;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t j = std::min(i_ + ahead, toks_.size() - 1);
    return toks_[j];
  }
  const Token& expect(Tok kind) {
    const Token& t = peek();
    if (t.kind != kind) {
      std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
      throw ModelError("expected " + describe(kind) + ", found " + found, t.pos);
    }
    ++i_;
    return t;
  }
  static double to_double(const Token& t) {
    double value = 0.0;
    auto [ptr, ec] =
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      throw ModelError("malformed number '" + t.text + "'", t.pos);
    return value;
  }
  void reject_keyword(const Token& t) const {
    if (kKeywords.count(t.text))
      throw ModelError("'" + t.text + "' is a reserved word", t.pos);
  }

  TermPtr sequential() {
    TermPtr left = primary();
    while (peek().kind == Tok::Plus) {
      ++i_;
      left = make_choice(left, primary());
    }
    return left;
  }

  TermPtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen && peek(1).kind == Tok::Ident &&
        peek(2).kind == Tok::Comma) {
      ++i_;
      const Token& action = expect(Tok::Ident);
      expect(Tok::Comma);
      const Token& num = expect(Tok::Number);
      double rate = to_double(num);
      if (!(rate > 0.0))
        throw ModelError("rate must be positive, got " + num.text, num.pos);
      expect(Tok::RParen);
      expect(Tok::Dot);
      return make_prefix(action.text, rate, primary(), t.pos);
    }
    if (t.kind == Tok::LParen) {
      ++i_;
      TermPtr inner = sequential();
      expect(Tok::RParen);
      return inner;
    }
    const Token& name = expect(Tok::Ident);
    reject_keyword(name);
    return make_constant(name.text, name.pos);
  }

  CompositionPtr composition() {
    CompositionPtr left = composition_primary();
    while (peek().kind == Tok::Less) {
      ++i_;
      std::set<std::string> sync;
      if (peek().kind != Tok::Greater) {
        sync.insert(expect(Tok::Ident).text);
        while (peek().kind == Tok::Comma) {
          ++i_;
          sync.insert(expect(Tok::Ident).text);
        }
      }
      expect(Tok::Greater);
      left = make_par(left, composition_primary(), std::move(sync));
    }
    return left;
  }

  CompositionPtr composition_primary() {
    if (peek().kind == Tok::LParen) {
      ++i_;
      CompositionPtr inner = composition();
      expect(Tok::RParen);
      return inner;
    }
    const Token& name = expect(Tok::Ident);
    reject_keyword(name);
    return make_leaf(name.text, name.pos);
  }

  static void check_term(const FepaModel& model, const Term& term) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Prefix>) {
            check_term(model, *n.next);
          } else if constexpr (std::is_same_v<T, Choice>) {
            check_term(model, *n.left);
            check_term(model, *n.right);
          } else {
            if (!model.find(n.name))
              throw ModelError("undefined constant " + n.name, n.pos);
          }
        },
        term.node());
  }

  static void check_tree(const FepaModel& model, const Composition& tree) {
    if (const auto* leaf = std::get_if<Leaf>(&tree.node())) {
      if (!model.find(leaf->atom))
        throw ModelError("undefined atom " + leaf->atom + " in system",
                         leaf->pos);
      return;
    }
    const auto& par = std::get<Par>(tree.node());
    check_tree(model, *par.left);
    check_tree(model, *par.right);
  }

  static void check_references(const FepaModel& model) {
    for (const auto& def : model.definitions) check_term(model, *def.body);
    check_tree(model, *model.system);
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

}  // namespace

ModelError::ModelError(const std::string& what, SourcePos pos)
    : std::runtime_error(pos.line > 0 ? std::to_string(pos.line) + ":" +
                                            std::to_string(pos.column) + ": " +
                                            what
                                      : what),
      pos_(pos) {}

FepaModel parse_model(const std::string& text) {
  Lexer lexer(text);
  Parser parser(lexer.run());
  return parser.run();
}

}  // namespace fepa
