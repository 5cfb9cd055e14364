#include "flowforge/parse.hpp"

#include <cctype>
#include <sstream>

namespace flowforge {

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  End, Num, Ident, LParen, RParen, Comma, Colon, Bar,
  Plus, Minus, Star, Hash, Caret, Le, Eq, Arrow, And, Or, Not,
  Forall, Exists, Top, Bot, Prec, Preceq, Omega
};

struct Lexer {
  const std::string* text_ptr;
  std::size_t pos = 0;
  Tok tok = Tok::End;
  std::string ident;
  std::uint64_t number = 0;
  std::size_t tok_pos = 0;

  const std::string& text() const { return *text_ptr; }

  explicit Lexer(const std::string& t) : text_ptr(&t) { advance(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_pos); }

  bool match(const std::string& s) {
    if (text().compare(pos, s.size(), s) == 0) { pos += s.size(); return true; }
    return false;
  }

  void advance() {
    while (pos < text().size() && std::isspace(static_cast<unsigned char>(text()[pos]))) ++pos;
    tok_pos = pos;
    if (pos >= text().size()) { tok = Tok::End; return; }
    // Unicode aliases first (multibyte sequences).
    if (match("∀")) { tok = Tok::Forall; return; }   // forall sign
    if (match("∃")) { tok = Tok::Exists; return; }   // exists sign
    if (match("∧")) { tok = Tok::And; return; }      // wedge
    if (match("∨")) { tok = Tok::Or; return; }       // vee
    if (match("→")) { tok = Tok::Arrow; return; }    // right arrow
    if (match("¬")) { tok = Tok::Not; return; }      // negation sign
    if (match("≤")) { tok = Tok::Le; return; }       // less-or-equal sign
    if (match("⊤")) { tok = Tok::Top; return; }      // down tack
    if (match("⊥")) { tok = Tok::Bot; return; }      // up tack
    if (match("≺")) { tok = Tok::Prec; return; }     // precedes
    if (match("⪯")) { tok = Tok::Preceq; return; }   // precedes-or-equal
    if (match("ω")) { tok = Tok::Omega; return; }    // omega
    if (match("∸")) { tok = Tok::Minus; return; }    // dot minus
    if (match("·") || match("⋅")) { tok = Tok::Star; return; }  // dots
    char c = text()[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::uint64_t v = 0;
      while (pos < text().size() && std::isdigit(static_cast<unsigned char>(text()[pos]))) {
        std::uint64_t d = static_cast<std::uint64_t>(text()[pos] - '0');
        if (v > (UINT64_MAX - d) / 10) fail("numeral too large");
        v = v * 10 + d;
        ++pos;
      }
      tok = Tok::Num;
      number = v;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (pos < text().size()) {
        char d = text()[pos];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '\'') {
          s += d;
          ++pos;
        } else break;
      }
      if (s == "forall") tok = Tok::Forall;
      else if (s == "exists") tok = Tok::Exists;
      else if (s == "top") tok = Tok::Top;
      else if (s == "bot") tok = Tok::Bot;
      else if (s == "prec") tok = Tok::Prec;
      else if (s == "preceq") tok = Tok::Preceq;
      else if (s == "w") tok = Tok::Omega;
      else { tok = Tok::Ident; ident = std::move(s); }
      return;
    }
    ++pos;
    switch (c) {
      case '(': tok = Tok::LParen; return;
      case ')': tok = Tok::RParen; return;
      case ',': tok = Tok::Comma; return;
      case ':': tok = Tok::Colon; return;
      case '|': tok = Tok::Bar; return;
      case '+': tok = Tok::Plus; return;
      case '*': tok = Tok::Star; return;
      case '#': tok = Tok::Hash; return;
      case '^': tok = Tok::Caret; return;
      case '=': tok = Tok::Eq; return;
      case '~': tok = Tok::Not; return;
      case '<':
        if (pos < text().size() && text()[pos] == '=') { ++pos; tok = Tok::Le; return; }
        fail("expected '<='");
      case '-':
        if (pos < text().size() && text()[pos] == '>') { ++pos; tok = Tok::Arrow; return; }
        tok = Tok::Minus;
        return;
      case '/':
        if (pos < text().size() && text()[pos] == '\\') { ++pos; tok = Tok::And; return; }
        fail("expected '/\\'");
      case '\\':
        if (pos < text().size() && text()[pos] == '/') { ++pos; tok = Tok::Or; return; }
        fail("expected '\\/'");
      default: fail(std::string("unexpected character '") + c + "'");
    }
  }

  void expect(Tok t, const std::string& what) {
    if (tok != t) fail("expected " + what);
    advance();
  }
};

// ---------------------------------------------------------------------------
// Parser; produces raw terms with nat operator names, resolved to ordinal
// operators afterwards.

struct Parser {
  Lexer lex;
  const ParseOpts& opts;

  Parser(const std::string& text, const ParseOpts& o) : lex(text), opts(o) {}

  // Constant ordinal expression, used for w^(...) exponents.
  Ordinal const_ord_expr() {
    Ordinal acc = const_ord_term();
    while (lex.tok == Tok::Plus) {
      lex.advance();
      acc = acc + const_ord_term();
    }
    return acc;
  }

  Ordinal const_ord_term() {
    if (lex.tok == Tok::Num) {
      std::uint64_t n = lex.number;
      lex.advance();
      return Ordinal::finite(n);
    }
    if (lex.tok == Tok::Omega) {
      lex.advance();
      Ordinal exp = Ordinal::finite(1);
      if (lex.tok == Tok::Caret) {
        lex.advance();
        lex.expect(Tok::LParen, "'('");
        exp = const_ord_expr();
        lex.expect(Tok::RParen, "')'");
      }
      std::uint64_t coeff = 1;
      if (lex.tok == Tok::Star) {
        lex.advance();
        if (lex.tok != Tok::Num) lex.fail("expected a coefficient");
        coeff = lex.number;
        lex.advance();
      }
      return Ordinal::power(exp, coeff);
    }
    lex.fail("expected a constant ordinal");
  }

  Term call_args(const std::string& op, std::size_t n) {
    lex.expect(Tok::LParen, "'('");
    std::vector<Term> args;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) lex.expect(Tok::Comma, "','");
      args.push_back(term());
    }
    lex.expect(Tok::RParen, "')'");
    if (op == "min") return t_min(args[0], args[1]);
    if (op == "sel") return t_sel(args[0], args[1], args[2]);
    return Term::app(op, std::move(args));
  }

  Term primary() {
    switch (lex.tok) {
      case Tok::Num: {
        std::uint64_t v = lex.number;
        lex.advance();
        return Term::num(v);
      }
      case Tok::Omega: {
        Ordinal o = const_ord_term();
        return Term::ordnum(o);
      }
      case Tok::Bar: {
        lex.advance();
        Term t = term();
        lex.expect(Tok::Bar, "'|'");
        return t_len(t);
      }
      case Tok::LParen: {
        lex.advance();
        Term t = term();
        lex.expect(Tok::RParen, "')'");
        return t;
      }
      case Tok::Ident: {
        std::string name = lex.ident;
        lex.advance();
        if (lex.tok == Tok::LParen) {
          if (name == "div" || name == "mod" || name == "min") return call_args(name, 2);
          if (name == "sel") return call_args(name, 3);
          if (name == "fin" || name == "len") return call_args(name, 1);
          if (name == "smash") return call_args(name, 2);
          if (opts.ops.count(name)) {
            // Declared extension operator: arity read from the argument list.
            lex.advance();
            std::vector<Term> args;
            if (lex.tok != Tok::RParen) {
              args.push_back(term());
              while (lex.tok == Tok::Comma) {
                lex.advance();
                args.push_back(term());
              }
            }
            lex.expect(Tok::RParen, "')'");
            return Term::app(name, std::move(args));
          }
          // Otherwise the '(' is not ours: e.g. a quantifier bound followed
          // by the parenthesized body.  Fall through to the variable case.
        }
        Sort s = opts.ord_vars.count(name) ? Sort::Ord : Sort::Nat;
        return Term::var(name, s);
      }
      default: lex.fail("expected a term");
    }
  }

  Term mul_level() {
    Term t = primary();
    while (lex.tok == Tok::Star) {
      lex.advance();
      t = Term::app("*", {t, primary()});
    }
    return t;
  }

  Term smash_level() {
    Term t = mul_level();
    while (lex.tok == Tok::Hash) {
      lex.advance();
      t = Term::app("smash", {t, mul_level()});
    }
    return t;
  }

  Term term() {
    Term t = smash_level();
    for (;;) {
      if (lex.tok == Tok::Plus) {
        lex.advance();
        t = Term::app("+", {t, smash_level()});
      } else if (lex.tok == Tok::Minus) {
        lex.advance();
        t = Term::app("-", {t, smash_level()});
      } else break;
    }
    return t;
  }

  Formula imp_level(std::set<std::string>& ords);

  Formula atom_or_paren(std::set<std::string>& ords) {
    switch (lex.tok) {
      case Tok::Top: lex.advance(); return Formula::top();
      case Tok::Bot: lex.advance(); return Formula::bot();
      case Tok::Not: {
        lex.advance();
        return Formula::lnot(atom_or_paren(ords));
      }
      case Tok::Forall: case Tok::Exists: {
        bool is_all = lex.tok == Tok::Forall;
        lex.advance();
        if (lex.tok != Tok::Ident) lex.fail("expected a bound variable");
        std::string v = lex.ident;
        lex.advance();
        if (lex.tok == Tok::Le) {
          lex.advance();
          Term b = term();
          lex.expect(Tok::LParen, "'('");
          bool was = ords.count(v) > 0;
          ords.erase(v);
          Formula body = imp_level(ords);
          if (was) ords.insert(v);
          lex.expect(Tok::RParen, "')'");
          return is_all ? Formula::all_le(v, b, body) : Formula::ex_le(v, b, body);
        }
        if (lex.tok == Tok::Prec) {
          lex.advance();
          Term b = term();
          lex.expect(Tok::LParen, "'('");
          bool was = ords.count(v) > 0;
          ords.insert(v);
          Formula body = imp_level(ords);
          if (!was) ords.erase(v);
          lex.expect(Tok::RParen, "')'");
          return is_all ? Formula::all_prec(v, b, body) : Formula::ex_prec(v, b, body);
        }
        Sort s = Sort::Nat;
        if (lex.tok == Tok::Colon) {
          lex.advance();
          if (lex.tok != Tok::Ident) lex.fail("expected 'nat' or 'ord'");
          if (lex.ident == "ord") s = Sort::Ord;
          else if (lex.ident != "nat") lex.fail("expected 'nat' or 'ord'");
          lex.advance();
        }
        lex.expect(Tok::LParen, "'('");
        bool was = ords.count(v) > 0;
        if (s == Sort::Ord) ords.insert(v);
        else ords.erase(v);
        Formula body = imp_level(ords);
        if (was) ords.insert(v);
        else ords.erase(v);
        lex.expect(Tok::RParen, "')'");
        return is_all ? Formula::all(v, s, body) : Formula::ex(v, s, body);
      }
      case Tok::LParen: {
        // Could be a parenthesized formula or the left term of an atom.
        // Parse as a term first when possible by saving lexer state.
        Lexer saved = lex;
        try {
          Term l = term();
          return finish_atom(l);
        } catch (const ParseError&) {
          lex = saved;
        }
        lex.advance();
        Formula f = imp_level(ords);
        lex.expect(Tok::RParen, "')'");
        return f;
      }
      default: {
        Term l = term();
        return finish_atom(l);
      }
    }
  }

  Formula finish_atom(const Term& l) {
    switch (lex.tok) {
      case Tok::Le: {
        lex.advance();
        return Formula::atom(Formula::Cmp::Le, l, term());
      }
      case Tok::Eq: {
        lex.advance();
        return Formula::atom(Formula::Cmp::Eq, l, term());
      }
      case Tok::Prec: {
        lex.advance();
        return Formula::atom(Formula::Cmp::OrdLess, l, term());
      }
      case Tok::Preceq: {
        lex.advance();
        return Formula::atom(Formula::Cmp::OrdLeq, l, term());
      }
      default: lex.fail("expected a comparison");
    }
  }

  Formula and_level(std::set<std::string>& ords) {
    Formula f = atom_or_paren(ords);
    while (lex.tok == Tok::And) {
      lex.advance();
      f = Formula::land(f, atom_or_paren(ords));
    }
    return f;
  }

  Formula or_level(std::set<std::string>& ords) {
    Formula f = and_level(ords);
    while (lex.tok == Tok::Or) {
      lex.advance();
      f = Formula::lor(f, and_level(ords));
    }
    return f;
  }
};

Formula Parser::imp_level(std::set<std::string>& ords) {
  Formula f = or_level(ords);
  if (lex.tok == Tok::Arrow) {
    lex.advance();
    return Formula::imp(f, imp_level(ords));  // right associative
  }
  return f;
}

// ---------------------------------------------------------------------------
// Sort resolution: rewrite nat-spelled operators applied to ordinal-sorted
// arguments into their ordinal counterparts; coerce numerals.

enum class RSort { Nat, Ord, Either };

RSort rsort(const Term& t, const std::set<std::string>& ords) {
  switch (t.kind()) {
    case Term::Kind::Num: return RSort::Either;
    case Term::Kind::OrdNum: return RSort::Ord;
    case Term::Kind::Var:
      return t.var_sort() == Sort::Ord || ords.count(t.var_name()) ? RSort::Ord : RSort::Nat;
    case Term::Kind::App: {
      const std::string& op = t.op();
      if (op == "o+" || op == "o*" || op == "o-" || op == "odiv" || op == "omod" || op == "fin")
        return RSort::Ord;
      if (op == "len" || op == "smash") return RSort::Nat;
      if (op == "+" || op == "*" || op == "-" || op == "div" || op == "mod") {
        RSort a = rsort(t.args()[0], ords), b = rsort(t.args()[1], ords);
        if (a == RSort::Ord || b == RSort::Ord) return RSort::Ord;
        if (a == RSort::Either && b == RSort::Either) return RSort::Either;
        return RSort::Nat;
      }
      return RSort::Nat;  // extension ops are nat-sorted
    }
  }
  return RSort::Nat;
}

Term coerce(const Term& t, RSort want, const std::set<std::string>& ords);

Term resolve_term(const Term& t, const std::set<std::string>& ords) {
  if (t.kind() != Term::Kind::App) return t;
  const std::string& op = t.op();
  if (op == "+" || op == "*" || op == "-" || op == "div" || op == "mod") {
    RSort a = rsort(t.args()[0], ords), b = rsort(t.args()[1], ords);
    bool ord = a == RSort::Ord || b == RSort::Ord;
    Term l = coerce(t.args()[0], ord ? RSort::Ord : RSort::Nat, ords);
    Term r = coerce(t.args()[1], ord ? RSort::Ord : RSort::Nat, ords);
    std::string name = op;
    if (ord) {
      if (op == "+") name = "o+";
      else if (op == "*") name = "o*";
      else if (op == "-") name = "o-";
      else if (op == "div") name = "odiv";
      else name = "omod";
    } else if (op == "mod") {
      throw SyntaxError("mod is available for ordinal terms only");
    }
    return Term::app(name, {l, r});
  }
  std::vector<Term> args;
  for (const auto& a : t.args()) args.push_back(coerce(a, RSort::Nat, ords));
  if (op == "fin" || op == "odiv" || op == "omod" || op == "o+" || op == "o*" || op == "o-") {
    // Already-ordinal spellings keep their (ordinal) arguments.
    args.clear();
    for (const auto& a : t.args())
      args.push_back(coerce(a, op == "fin" ? RSort::Nat : RSort::Ord, ords));
  }
  return Term::app(op, std::move(args));
}

Term coerce(const Term& t, RSort want, const std::set<std::string>& ords) {
  if (want == RSort::Ord) {
    if (t.kind() == Term::Kind::Num) return Term::ordnum(Ordinal::finite(t.num_value()));
    if (t.kind() == Term::Kind::App) {
      const std::string& op = t.op();
      if (op == "+" || op == "*" || op == "-" || op == "div" || op == "mod") {
        Term l = coerce(t.args()[0], RSort::Ord, ords);
        Term r = coerce(t.args()[1], RSort::Ord, ords);
        std::string name = op == "+" ? "o+" : op == "*" ? "o*" : op == "-" ? "o-"
                         : op == "div" ? "odiv" : "omod";
        return Term::app(name, {l, r});
      }
    }
    Term r = resolve_term(t, ords);
    if (rsort(r, ords) != RSort::Ord) {
      std::string what = r.kind() == Term::Kind::Var ? "variable '" + r.var_name() + "'"
                                                     : "a nat-sorted term";
      throw SyntaxError(what + " used in ordinal position; declare the variable "
                        "ordinal or embed it with fin(...)");
    }
    return r;
  }
  Term r = resolve_term(t, ords);
  if (rsort(r, ords) == RSort::Ord)
    throw SyntaxError("ordinal term used where a nat term is required");
  return r;
}

Formula resolve_formula(const Formula& f, std::set<std::string> ords) {
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: return f;
    case Formula::Kind::Atom: {
      RSort a = rsort(f.lhs(), ords), b = rsort(f.rhs(), ords);
      bool ord = a == RSort::Ord || b == RSort::Ord ||
                 f.cmp() == Formula::Cmp::OrdLess || f.cmp() == Formula::Cmp::OrdLeq ||
                 f.cmp() == Formula::Cmp::OrdEq;
      Term l = coerce(f.lhs(), ord ? RSort::Ord : RSort::Nat, ords);
      Term r = coerce(f.rhs(), ord ? RSort::Ord : RSort::Nat, ords);
      Formula::Cmp c = f.cmp();
      if (ord) {
        if (c == Formula::Cmp::Le) c = Formula::Cmp::OrdLeq;
        else if (c == Formula::Cmp::Eq) c = Formula::Cmp::OrdEq;
      }
      return Formula::atom(c, l, r);
    }
    case Formula::Kind::Not: return Formula::lnot(resolve_formula(f.child(0), ords));
    case Formula::Kind::And:
      return Formula::land(resolve_formula(f.child(0), ords), resolve_formula(f.child(1), ords));
    case Formula::Kind::Or:
      return Formula::lor(resolve_formula(f.child(0), ords), resolve_formula(f.child(1), ords));
    case Formula::Kind::Imp:
      return Formula::imp(resolve_formula(f.child(0), ords), resolve_formula(f.child(1), ords));
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      bool bound_ord = f.qsort() == Sort::Ord;
      Term b = coerce(f.qbound(), bound_ord ? RSort::Ord : RSort::Nat, ords);
      auto inner = ords;
      if (bound_ord) inner.insert(f.qvar());
      else inner.erase(f.qvar());
      Formula body = resolve_formula(f.body(), std::move(inner));
      if (f.kind() == Formula::Kind::AllB)
        return bound_ord ? Formula::all_prec(f.qvar(), b, body)
                         : Formula::all_le(f.qvar(), b, body);
      return bound_ord ? Formula::ex_prec(f.qvar(), b, body)
                       : Formula::ex_le(f.qvar(), b, body);
    }
    case Formula::Kind::All: case Formula::Kind::Ex: {
      auto inner = ords;
      if (f.qsort() == Sort::Ord) inner.insert(f.qvar());
      else inner.erase(f.qvar());
      Formula body = resolve_formula(f.body(), std::move(inner));
      return f.kind() == Formula::Kind::All ? Formula::all(f.qvar(), f.qsort(), body)
                                            : Formula::ex(f.qvar(), f.qsort(), body);
    }
  }
  return f;
}

// Rewrites variable sorts to match the ordinal-variable environment.
Term apply_var_sorts(const Term& t, const std::set<std::string>& ords) {
  switch (t.kind()) {
    case Term::Kind::Var: {
      Sort s = ords.count(t.var_name()) ? Sort::Ord : Sort::Nat;
      return s == t.var_sort() ? t : Term::var(t.var_name(), s);
    }
    case Term::Kind::App: {
      std::vector<Term> args;
      for (const auto& a : t.args()) args.push_back(apply_var_sorts(a, ords));
      return Term::app(t.op(), std::move(args));
    }
    default: return t;
  }
}

Formula apply_var_sorts(const Formula& f, std::set<std::string> ords) {
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: return f;
    case Formula::Kind::Atom:
      return Formula::atom(f.cmp(), apply_var_sorts(f.lhs(), ords),
                           apply_var_sorts(f.rhs(), ords));
    case Formula::Kind::Not: return Formula::lnot(apply_var_sorts(f.child(0), ords));
    case Formula::Kind::And:
      return Formula::land(apply_var_sorts(f.child(0), ords),
                           apply_var_sorts(f.child(1), ords));
    case Formula::Kind::Or:
      return Formula::lor(apply_var_sorts(f.child(0), ords),
                          apply_var_sorts(f.child(1), ords));
    case Formula::Kind::Imp:
      return Formula::imp(apply_var_sorts(f.child(0), ords),
                          apply_var_sorts(f.child(1), ords));
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      Term b = apply_var_sorts(f.qbound(), ords);
      auto inner = ords;
      if (f.qsort() == Sort::Ord) inner.insert(f.qvar());
      else inner.erase(f.qvar());
      Formula body = apply_var_sorts(f.body(), std::move(inner));
      if (f.kind() == Formula::Kind::AllB)
        return f.qsort() == Sort::Ord ? Formula::all_prec(f.qvar(), b, body)
                                      : Formula::all_le(f.qvar(), b, body);
      return f.qsort() == Sort::Ord ? Formula::ex_prec(f.qvar(), b, body)
                                    : Formula::ex_le(f.qvar(), b, body);
    }
    case Formula::Kind::All: case Formula::Kind::Ex: {
      auto inner = ords;
      if (f.qsort() == Sort::Ord) inner.insert(f.qvar());
      else inner.erase(f.qvar());
      Formula body = apply_var_sorts(f.body(), std::move(inner));
      return f.kind() == Formula::Kind::All ? Formula::all(f.qvar(), f.qsort(), body)
                                            : Formula::ex(f.qvar(), f.qsort(), body);
    }
  }
  return f;
}

}  // namespace

Term parse_term(const std::string& text, const ParseOpts& opts) {
  Parser p(text, opts);
  Term t = p.term();
  if (p.lex.tok != Tok::End) p.lex.fail("trailing input after term");
  // A lone term keeps its inferred sort; numerals stay nat.
  RSort want = rsort(t, opts.ord_vars) == RSort::Ord ? RSort::Ord : RSort::Nat;
  return apply_var_sorts(coerce(t, want, opts.ord_vars), opts.ord_vars);
}

Formula parse_formula(const std::string& text, const ParseOpts& opts) {
  Parser p(text, opts);
  std::set<std::string> ords = opts.ord_vars;
  Formula f = p.imp_level(ords);
  if (p.lex.tok != Tok::End) p.lex.fail("trailing input after formula");
  f = resolve_formula(f, opts.ord_vars);
  return apply_var_sorts(f, opts.ord_vars);
}

// ---------------------------------------------------------------------------
// Printer

namespace {

// Term precedence levels: 0 additive, 1 smash, 2 multiplicative, 3 primary.
int term_level(const Term& t) {
  // Multi-part ordinal constants render with " + " and parse back additively.
  if (t.kind() == Term::Kind::OrdNum) return t.ord_value().parts().size() > 1 ? 0 : 3;
  if (t.kind() != Term::Kind::App) return 3;
  const std::string& op = t.op();
  if (op == "+" || op == "-" || op == "o+" || op == "o-") return 0;
  if (op == "smash") return 1;
  if (op == "*" || op == "o*") return 2;
  return 3;  // call syntax
}

void print_term_rec(std::ostringstream& os, const Term& t, int min_level) {
  int lvl = term_level(t);
  bool paren = lvl < min_level;
  if (paren) os << "(";
  switch (t.kind()) {
    case Term::Kind::Num: os << t.num_value(); break;
    case Term::Kind::OrdNum: os << t.ord_value().to_string(); break;
    case Term::Kind::Var: os << t.var_name(); break;
    case Term::Kind::App: {
      const std::string& op = t.op();
      const auto& args = t.args();
      auto infix = [&](const char* sym, int level) {
        print_term_rec(os, args[0], level);
        os << " " << sym << " ";
        print_term_rec(os, args[1], level + 1);
      };
      if (op == "+" || op == "o+") infix("+", 0);
      else if (op == "-" || op == "o-") infix("-", 0);
      else if (op == "*" || op == "o*") infix("*", 2);
      else if (op == "smash") infix("#", 1);
      else if (op == "len") {
        os << "|";
        print_term_rec(os, args[0], 0);
        os << "|";
      } else if (op == "div" || op == "odiv") {
        os << "div(";
        print_term_rec(os, args[0], 0);
        os << ", ";
        print_term_rec(os, args[1], 0);
        os << ")";
      } else if (op == "omod") {
        os << "mod(";
        print_term_rec(os, args[0], 0);
        os << ", ";
        print_term_rec(os, args[1], 0);
        os << ")";
      } else {
        os << op << "(";
        for (std::size_t i = 0; i < args.size(); ++i) {
          if (i) os << ", ";
          print_term_rec(os, args[i], 0);
        }
        os << ")";
      }
      break;
    }
  }
  if (paren) os << ")";
}

// Formula precedence levels: 0 ->, 1 \/, 2 /\, 3 unary/atomic.
int formula_level(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Imp: return 0;
    case Formula::Kind::Or: return 1;
    case Formula::Kind::And: return 2;
    default: return 3;
  }
}

void print_formula_rec(std::ostringstream& os, const Formula& f, int min_level) {
  int lvl = formula_level(f);
  bool paren = lvl < min_level;
  if (paren) os << "(";
  switch (f.kind()) {
    case Formula::Kind::Top: os << "top"; break;
    case Formula::Kind::Bot: os << "bot"; break;
    case Formula::Kind::Atom: {
      print_term_rec(os, f.lhs(), 0);
      switch (f.cmp()) {
        case Formula::Cmp::Le: case Formula::Cmp::OrdLeq:
          os << (f.cmp() == Formula::Cmp::Le ? " <= " : " preceq ");
          break;
        case Formula::Cmp::Eq: case Formula::Cmp::OrdEq: os << " = "; break;
        case Formula::Cmp::OrdLess: os << " prec "; break;
      }
      print_term_rec(os, f.rhs(), 0);
      break;
    }
    case Formula::Kind::Not:
      os << "~";
      print_formula_rec(os, f.child(0), 3);
      break;
    case Formula::Kind::And:
      print_formula_rec(os, f.child(0), 2);
      os << " /\\ ";
      print_formula_rec(os, f.child(1), 3);
      break;
    case Formula::Kind::Or:
      print_formula_rec(os, f.child(0), 1);
      os << " \\/ ";
      print_formula_rec(os, f.child(1), 2);
      break;
    case Formula::Kind::Imp:
      print_formula_rec(os, f.child(0), 1);
      os << " -> ";
      print_formula_rec(os, f.child(1), 0);
      break;
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      os << (f.kind() == Formula::Kind::AllB ? "forall " : "exists ");
      os << f.qvar();
      os << (f.qsort() == Sort::Nat ? " <= " : " prec ");
      print_term_rec(os, f.qbound(), 0);
      os << " (";
      print_formula_rec(os, f.body(), 0);
      os << ")";
      break;
    }
    case Formula::Kind::All: case Formula::Kind::Ex: {
      os << (f.kind() == Formula::Kind::All ? "forall " : "exists ");
      os << f.qvar();
      if (f.qsort() == Sort::Ord) os << " : ord";
      os << " (";
      print_formula_rec(os, f.body(), 0);
      os << ")";
      break;
    }
  }
  if (paren) os << ")";
}

}  // namespace

std::string print_term(const Term& t) {
  std::ostringstream os;
  print_term_rec(os, t, 0);
  return os.str();
}

std::string print_formula(const Formula& f) {
  std::ostringstream os;
  print_formula_rec(os, f, 0);
  return os.str();
}

}  // namespace flowforge
