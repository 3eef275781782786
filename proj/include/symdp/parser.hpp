/// @file  parser.hpp
/// @brief Reader/writer for the s-expression model format. Decision trees in
///        the input reduce to canonical diagrams as they are built, and
///        emitted text re-parses to ref-equal diagrams.
///
/// Format (whitespace-insensitive, `;` starts a line comment):
///
///   (variables x y ...)
///   (action NAME
///     (x <tree>)          ; probability that x is true afterwards
///     ...)
///   (reward <tree>)
///   (discount 0.9)
///
///   <tree> := (VAR (true <tree>) (false <tree>)) | (REAL)
///
/// Probability leaves must lie in [0, 1]. Variables an action does not
/// mention keep their value. Primed names are never written; a transition
/// header names the base variable it redistributes.

#pragma once

#include <symdp/add.hpp>
#include <symdp/mdp.hpp>

#include <cctype>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace symdp {

/// Byte range of a token or production within the input text.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

class ParseError : public Error {
public:
  ParseError(const std::string& message, SourceSpan span, std::string_view text)
      : Error(decorate(message, span, text)), span_(span) {}
  SourceSpan span() const { return span_; }

private:
  static std::string decorate(const std::string& message, SourceSpan span,
                              std::string_view text) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < span.begin && i < text.size(); ++i) {
      if (text[i] == '\n') { ++line; col = 1; } else ++col;
    }
    return "parse error at line " + std::to_string(line) + ", column " +
           std::to_string(col) + " (bytes " + std::to_string(span.begin) + ".." +
           std::to_string(span.end) + "): " + message;
  }
  SourceSpan span_;
};

namespace parser_detail {

struct Token {
  enum Kind { LParen, RParen, Atom, End } kind;
  std::string_view text;
  SourceSpan span;
};

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= text_.size()) return {Token::End, {}, {text_.size(), text_.size()}};
    std::size_t start = pos_;
    char c = text_[pos_];
    if (c == '(') { ++pos_; return {Token::LParen, text_.substr(start, 1), {start, pos_}}; }
    if (c == ')') { ++pos_; return {Token::RParen, text_.substr(start, 1), {start, pos_}}; }
    while (pos_ < text_.size()) {
      char a = text_[pos_];
      if (a == '(' || a == ')' || a == ';' || std::isspace(static_cast<unsigned char>(a)))
        break;
      ++pos_;
    }
    return {Token::Atom, text_.substr(start, pos_ - start), {start, pos_}};
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

} // namespace parser_detail

class MdpReader {
public:
  MdpReader(DiagramStore& store, std::string_view text)
      : store_(store), text_(text), lexer_(text) { advance(); }

  MdpSpec parse() {
    MdpSpec spec;
    parse_variables(spec);
    while (peek_head_is("action")) parse_action(spec);
    if (spec.actions.empty())
      fail("expected at least one (action ...) block", cur_.span);
    parse_reward(spec);
    parse_discount(spec);
    if (cur_.kind != parser_detail::Token::End)
      fail("trailing content after (discount ...)", cur_.span);
    fill_persistence(spec);
    return spec;
  }

private:
  using Token = parser_detail::Token;

  [[noreturn]] void fail(const std::string& message, SourceSpan span) const {
    throw ParseError(message, span, text_);
  }

  void advance() { cur_ = lexer_.next(); }

  Token expect(Token::Kind kind, const char* what) {
    if (cur_.kind != kind) fail(std::string("expected ") + what, cur_.span);
    Token t = cur_;
    advance();
    return t;
  }

  Token expect_atom(const char* what) { return expect(Token::Atom, what); }

  void expect_keyword(const char* word) {
    Token t = expect_atom(word);
    if (t.text != word) fail(std::string("expected '") + word + "'", t.span);
  }

  /// True when the upcoming form is "(" word ...; consumes nothing.
  bool peek_head_is(std::string_view word) {
    if (cur_.kind != Token::LParen) return false;
    parser_detail::Lexer probe = lexer_; // cheap copy, scans one token ahead
    Token head = probe.next();
    return head.kind == Token::Atom && head.text == word;
  }

  static bool looks_numeric(std::string_view s) {
    return !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) ||
                          s[0] == '-' || s[0] == '+' || s[0] == '.');
  }

  double parse_real(Token t) {
    double value = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
      fail("malformed number '" + std::string(t.text) + "'", t.span);
    return value;
  }

  VarId lookup_var(Token t) {
    if (auto v = store_.find_variable(t.text)) return *v;
    fail("unknown variable '" + std::string(t.text) + "'", t.span);
  }

  void parse_variables(MdpSpec& spec) {
    expect(Token::LParen, "'('");
    expect_keyword("variables");
    std::vector<Token> names;
    while (cur_.kind == Token::Atom) { names.push_back(cur_); advance(); }
    if (names.empty()) fail("expected at least one variable name", cur_.span);
    expect(Token::RParen, "')'");

    if (store_.variable_count() == 0) {
      for (const Token& t : names) {
        if (looks_numeric(t.text)) fail("variable name may not start like a number", t.span);
        for (const char* reserved : {"true", "false", "variables", "action", "reward", "discount"})
          if (t.text == reserved)
            fail("'" + std::string(t.text) + "' is reserved and cannot name a variable", t.span);
        if (store_.find_variable(t.text))
          fail("duplicate variable '" + std::string(t.text) + "'", t.span);
        spec.variables.push_back(store_.add_variable(std::string(t.text)));
      }
    } else {
      // Re-parsing into a populated store: the declaration must match the
      // existing registry exactly so refs stay comparable.
      if (store_.variable_count() != names.size())
        fail("variable list does not match the store's registry", names.front().span);
      for (std::size_t i = 0; i < names.size(); ++i) {
        auto v = store_.find_variable(names[i].text);
        if (!v || v->base() != i)
          fail("variable '" + std::string(names[i].text) +
               "' does not match the store's registry order", names[i].span);
        spec.variables.push_back(*v);
      }
    }
  }

  /// tree := (VAR (true tree) (false tree)) | (REAL)
  DiagramRef parse_tree(bool probability) {
    expect(Token::LParen, "'(' opening a tree");
    Token head = expect_atom("a variable name or a number");
    if (looks_numeric(head.text)) {
      double value = parse_real(head);
      if (probability && !(value >= 0.0 && value <= 1.0))
        fail("probability " + std::string(head.text) + " outside [0, 1]", head.span);
      expect(Token::RParen, "')' closing a leaf");
      return store_.terminal(value);
    }
    VarId var = lookup_var(head);
    expect(Token::LParen, "'(' opening the true branch");
    expect_keyword("true");
    DiagramRef then_branch = parse_tree(probability);
    expect(Token::RParen, "')' closing the true branch");
    expect(Token::LParen, "'(' opening the false branch");
    expect_keyword("false");
    DiagramRef else_branch = parse_tree(probability);
    expect(Token::RParen, "')' closing the false branch");
    expect(Token::RParen, "')' closing the tree");
    return store_.ite(var, then_branch, else_branch);
  }

  void parse_action(MdpSpec& spec) {
    expect(Token::LParen, "'('");
    expect_keyword("action");
    Token name = expect_atom("an action name");
    if (spec.actions.count(std::string(name.text)))
      fail("duplicate action '" + std::string(name.text) + "'", name.span);
    ActionSpec action;
    while (cur_.kind == Token::LParen) {
      // each entry: (VAR tree)
      advance();
      Token var_tok = expect_atom("a variable name");
      if (looks_numeric(var_tok.text)) fail("expected a variable name", var_tok.span);
      VarId var = lookup_var(var_tok);
      if (action.cpts.count(var.base()))
        fail("duplicate transition entry for variable '" + std::string(var_tok.text) + "'",
             var_tok.span);
      action.cpts[var.base()] = parse_tree(/*probability=*/true);
      expect(Token::RParen, "')' closing the transition entry");
    }
    if (action.cpts.empty())
      fail("action '" + std::string(name.text) + "' has no transition entries", name.span);
    expect(Token::RParen, "')' closing the action");
    spec.actions.emplace(std::string(name.text), std::move(action));
  }

  void parse_reward(MdpSpec& spec) {
    expect(Token::LParen, "'('");
    expect_keyword("reward");
    spec.reward = parse_tree(/*probability=*/false);
    expect(Token::RParen, "')' closing the reward");
  }

  void parse_discount(MdpSpec& spec) {
    expect(Token::LParen, "'('");
    expect_keyword("discount");
    Token value = expect_atom("a number");
    if (!looks_numeric(value.text)) fail("expected a number", value.span);
    double d = parse_real(value);
    if (!(d >= 0.0 && d < 1.0))
      fail("discount " + std::string(value.text) + " outside [0, 1)", value.span);
    spec.discount = d;
    expect(Token::RParen, "')' closing the discount");
  }

  void fill_persistence(MdpSpec& spec) {
    for (auto& [name, action] : spec.actions)
      for (VarId var : spec.variables)
        if (!action.cpts.count(var.base()))
          action.cpts[var.base()] = persistence_cpt(store_, var);
  }

  DiagramStore& store_;
  std::string_view text_;
  parser_detail::Lexer lexer_;
  Token cur_{};
};

inline MdpSpec parse_mdp(DiagramStore& store, std::string_view text) {
  return MdpReader(store, text).parse();
}

namespace parser_detail {

inline void write_tree(const DiagramStore& s, DiagramRef f, std::string& out) {
  if (s.is_terminal(f)) {
    out += '(';
    out += format_double(s.terminal_value(f));
    out += ')';
    return;
  }
  out += '(';
  out += s.name(s.node_var(f));
  out += " (true ";
  write_tree(s, s.then_child(f), out);
  out += ") (false ";
  write_tree(s, s.else_child(f), out);
  out += "))";
}

} // namespace parser_detail

/// Deterministic text form; parsing it in the same store yields ref-equal
/// diagrams (numbers are written in shortest exact round-trip form).
inline std::string emit_mdp(const DiagramStore& s, const MdpSpec& spec) {
  std::string out = "(variables";
  for (VarId v : spec.variables) { out += ' '; out += s.name(v); }
  out += ")\n";
  for (const auto& [name, action] : spec.actions) {
    out += "(action " + name + "\n";
    for (const auto& [base, cpt] : action.cpts) {
      out += "  (" + s.name(VarId::unprimed(base)) + " ";
      parser_detail::write_tree(s, cpt, out);
      out += ")\n";
    }
    out += ")\n";
  }
  out += "(reward ";
  parser_detail::write_tree(s, spec.reward, out);
  out += ")\n(discount " + format_double(spec.discount) + ")\n";
  return out;
}

} // namespace symdp
