#include "ltn/parser.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "ltn/error.hpp"

namespace ltn {

bool is_reserved_word(std::string_view word) {
  return word == "forall" || word == "exists" || word == "not" || word == "and" ||
         word == "or" || word == "const" || word == "func" || word == "pred" ||
         word == "signature";
}

namespace {

enum class Tok { Ident, Int, LParen, RParen, Comma, Arrow, Slash, Colon, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End:
      return "end of input";
    case Tok::Ident:
    case Tok::Int:
      return "'" + t.text + "'";
    default:
      return "'" + t.text + "'";
  }
}

std::vector<Token> tokenize(std::string_view text, std::size_t base) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '#') break;
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(c) || c == '_') {
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        ++i;
      out.push_back({Tok::Ident, std::string(text.substr(start, i - start)), base + start});
      continue;
    }
    if (std::isdigit(c)) {
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({Tok::Int, std::string(text.substr(start, i - start)), base + start});
      continue;
    }
    switch (c) {
      case '(':
        out.push_back({Tok::LParen, "(", base + i++});
        continue;
      case ')':
        out.push_back({Tok::RParen, ")", base + i++});
        continue;
      case ',':
        out.push_back({Tok::Comma, ",", base + i++});
        continue;
      case '/':
        out.push_back({Tok::Slash, "/", base + i++});
        continue;
      case ':':
        out.push_back({Tok::Colon, ":", base + i++});
        continue;
      case '-':
        if (i + 1 < text.size() && text[i + 1] == '>') {
          out.push_back({Tok::Arrow, "->", base + i});
          i += 2;
          continue;
        }
        break;
      default:
        break;
    }
    throw SyntaxError(base + i, "a token", "'" + std::string(1, text[i]) + "'");
  }
  out.push_back({Tok::End, "", base + text.size()});
  return out;
}

class FormulaParser {
 public:
  FormulaParser(std::vector<Token> toks, const Signature& sig, ParseOptions opts)
      : toks_(std::move(toks)), sig_(sig), opts_(opts) {}

  Formula parse_all() {
    Formula f = implication();
    expect(Tok::End, "end of input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool at_keyword(std::string_view kw) const {
    return peek().kind == Tok::Ident && peek().text == kw;
  }
  Token next() { return toks_[pos_++]; }
  Token expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) throw SyntaxError(peek().pos, what, describe(peek()));
    return next();
  }

  Formula implication() {
    Formula lhs = disjunction();
    if (peek().kind == Tok::Arrow) {
      next();
      Formula rhs = implication();
      return Formula::implication(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula disjunction() {
    Formula f = conjunction();
    while (at_keyword("or")) {
      next();
      f = Formula::disjunction(std::move(f), conjunction());
    }
    return f;
  }

  Formula conjunction() {
    Formula f = unary();
    while (at_keyword("and")) {
      next();
      f = Formula::conjunction(std::move(f), unary());
    }
    return f;
  }

  Formula unary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      next();
      Formula f = implication();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (t.kind != Tok::Ident) throw SyntaxError(t.pos, "a formula", describe(t));
    if (t.text == "not") {
      next();
      return Formula::negation(unary());
    }
    if (t.text == "forall" || t.text == "exists") return quantified();
    if (is_reserved_word(t.text)) throw SyntaxError(t.pos, "a formula", describe(t));
    return atom();
  }

  Formula quantified() {
    bool universal = next().text == "forall";
    std::vector<std::string> vars;
    while (peek().kind == Tok::Ident) {
      const Token& v = peek();
      if (is_reserved_word(v.text)) throw SyntaxError(v.pos, "a variable name", describe(v));
      if (sig_.has_symbol(v.text))
        throw SyntaxError(v.pos, "a variable name", "declared symbol " + describe(v));
      vars.push_back(next().text);
    }
    if (vars.empty()) throw SyntaxError(peek().pos, "a variable name", describe(peek()));
    expect(Tok::LParen, "'('");
    for (const auto& v : vars) bound_.push_back(v);
    Formula body = implication();
    bound_.resize(bound_.size() - vars.size());
    expect(Tok::RParen, "')'");
    return universal ? Formula::forall(vars, std::move(body))
                     : Formula::exists(vars, std::move(body));
  }

  Formula atom() {
    Token name = next();
    auto it = sig_.predicates.find(name.text);
    if (it == sig_.predicates.end()) {
      if (sig_.has_symbol(name.text))
        throw UnknownSymbol("'" + name.text + "' at position " + std::to_string(name.pos) +
                            " is not a predicate");
      throw UnknownSymbol("predicate '" + name.text + "' at position " +
                          std::to_string(name.pos));
    }
    std::vector<Term> args = arguments();
    if (args.size() != static_cast<std::size_t>(it->second))
      throw ArityMismatch("predicate '" + name.text + "' at position " +
                          std::to_string(name.pos) + ": expected " + std::to_string(it->second) +
                          ", got " + std::to_string(args.size()));
    return Formula::atom(name.text, std::move(args));
  }

  std::vector<Term> arguments() {
    expect(Tok::LParen, "'('");
    std::vector<Term> args;
    args.push_back(term());
    while (peek().kind == Tok::Comma) {
      next();
      args.push_back(term());
    }
    expect(Tok::RParen, "',' or ')'");
    return args;
  }

  bool is_bound(const std::string& name) const {
    for (auto it = bound_.rbegin(); it != bound_.rend(); ++it)
      if (*it == name) return true;
    return false;
  }

  Term term() {
    const Token& t = peek();
    if (t.kind != Tok::Ident || is_reserved_word(t.text))
      throw SyntaxError(t.pos, "a term", describe(t));
    Token name = next();
    if (peek().kind == Tok::LParen) {
      auto it = sig_.functions.find(name.text);
      if (it == sig_.functions.end())
        throw UnknownSymbol("function '" + name.text + "' at position " +
                            std::to_string(name.pos));
      std::vector<Term> args = arguments();
      if (args.size() != static_cast<std::size_t>(it->second))
        throw ArityMismatch("function '" + name.text + "' at position " +
                            std::to_string(name.pos) + ": expected " +
                            std::to_string(it->second) + ", got " + std::to_string(args.size()));
      return Term::function(name.text, std::move(args));
    }
    if (is_bound(name.text)) return Term::variable(name.text);
    if (sig_.is_constant(name.text)) return Term::constant(name.text);
    if (sig_.has_symbol(name.text))
      throw ArityMismatch("'" + name.text + "' at position " + std::to_string(name.pos) +
                          " is not a term without arguments");
    if (opts_.allow_free_variables) return Term::variable(name.text);
    throw UnknownSymbol("'" + name.text + "' at position " + std::to_string(name.pos) +
                        " is neither a bound variable nor a declared constant");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Signature& sig_;
  ParseOptions opts_;
  std::vector<std::string> bound_;
};

Formula parse_at(std::string_view text, std::size_t base, const Signature& sig,
                 ParseOptions opts) {
  FormulaParser p(tokenize(text, base), sig, opts);
  return p.parse_all();
}

// Parses `NAME '/' INT {',' NAME '/' INT}` or `NAME {',' NAME}`.
void parse_declaration(const std::vector<Token>& toks, Signature& sig) {
  const std::string& keyword = toks[0].text;
  bool with_arity = keyword != "const";
  std::size_t i = 1;
  for (;;) {
    const Token& name = toks[i];
    if (name.kind != Tok::Ident || is_reserved_word(name.text))
      throw SyntaxError(name.pos, "a symbol name", describe(name));
    ++i;
    if (with_arity) {
      if (toks[i].kind != Tok::Slash) throw SyntaxError(toks[i].pos, "'/'", describe(toks[i]));
      ++i;
      if (toks[i].kind != Tok::Int) throw SyntaxError(toks[i].pos, "an arity", describe(toks[i]));
      int arity = std::stoi(toks[i].text);
      ++i;
      if (keyword == "func")
        sig.add_function(name.text, arity);
      else
        sig.add_predicate(name.text, arity);
    } else {
      sig.add_constant(name.text);
    }
    if (toks[i].kind == Tok::End) return;
    if (toks[i].kind != Tok::Comma) throw SyntaxError(toks[i].pos, "',' or end of line",
                                                      describe(toks[i]));
    ++i;
  }
}

}  // namespace

Formula parse_formula(std::string_view text, const Signature& sig, ParseOptions opts) {
  return parse_at(text, 0, sig, opts);
}

KnowledgeBase parse_kb(std::string_view text, ParseOptions opts) {
  KnowledgeBase kb;
  struct Line {
    std::string_view text;
    std::size_t offset;
  };
  std::vector<Line> formula_lines;
  bool in_preamble = true;
  std::size_t offset = 0;
  while (offset <= text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(offset, end - offset);
    auto toks = tokenize(line, offset);
    if (toks.size() > 1) {
      const Token& first = toks[0];
      if (first.kind == Tok::Ident && first.text == "signature") {
        if (!in_preamble || toks.size() != 3 || toks[1].kind != Tok::Colon)
          throw SyntaxError(first.pos, "a formula", describe(first));
      } else if (first.kind == Tok::Ident &&
                 (first.text == "const" || first.text == "func" || first.text == "pred")) {
        if (!in_preamble)
          throw SyntaxError(first.pos, "a formula (declarations must precede formulas)",
                            describe(first));
        parse_declaration(toks, kb.signature);
      } else {
        in_preamble = false;
        formula_lines.push_back({line, offset});
      }
    }
    if (end == text.size()) break;
    offset = end + 1;
  }
  kb.signature.check();
  // Declarations may follow their first use in the preamble order, so formulas
  // are parsed once the whole signature is known.
  for (const auto& l : formula_lines)
    kb.formulas.push_back(parse_at(l.text, l.offset, kb.signature, opts));
  return kb;
}

KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open knowledge base '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kb(ss.str());
}

std::string print_kb(const KnowledgeBase& kb) {
  std::string out = "signature:\n";
  if (!kb.signature.constants.empty()) {
    out += "const ";
    bool first = true;
    for (const auto& c : kb.signature.constants) {
      out += (first ? "" : ", ") + c;
      first = false;
    }
    out += "\n";
  }
  auto decls = [&](const char* keyword, const std::map<std::string, int>& syms) {
    if (syms.empty()) return;
    out += keyword;
    out += " ";
    bool first = true;
    for (const auto& [name, arity] : syms) {
      out += (first ? "" : ", ") + name + "/" + std::to_string(arity);
      first = false;
    }
    out += "\n";
  };
  decls("func", kb.signature.functions);
  decls("pred", kb.signature.predicates);
  for (const auto& f : kb.formulas) out += to_string(f) + "\n";
  return out;
}

}  // namespace ltn
