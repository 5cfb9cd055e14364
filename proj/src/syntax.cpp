#include "flowforge/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <climits>

namespace flowforge {

// ---------------------------------------------------------------------------
// Term nodes

struct Term::Node {
  Kind kind;
  std::string name;        // Var, App
  Sort sort = Sort::Nat;   // Var
  std::uint64_t value = 0; // Num
  Ordinal ord;             // OrdNum
  std::vector<Term> args;  // App
};

Term Term::var(std::string name, Sort sort) {
  if (name.empty()) throw SyntaxError("variable name must be nonempty");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->name = std::move(name);
  n->sort = sort;
  Term t;
  t.node_ = std::move(n);
  return t;
}

Term Term::num(std::uint64_t value) {
  if (value == 0) return Term{};
  auto n = std::make_shared<Node>();
  n->kind = Kind::Num;
  n->value = value;
  Term t;
  t.node_ = n;
  return t;
}

Term Term::ordnum(Ordinal value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::OrdNum;
  n->ord = std::move(value);
  Term t;
  t.node_ = n;
  return t;
}

Term Term::app(std::string op, std::vector<Term> args) {
  if (op.empty()) throw SyntaxError("operator name must be nonempty");
  auto n = std::make_shared<Node>();
  n->kind = Kind::App;
  n->name = std::move(op);
  n->args = std::move(args);
  Term t;
  t.node_ = n;
  return t;
}

Term::Kind Term::kind() const { return node_ ? node_->kind : Kind::Num; }

const std::string& Term::var_name() const {
  if (kind() != Kind::Var) throw SyntaxError("not a variable");
  return node_->name;
}

Sort Term::var_sort() const {
  if (kind() != Kind::Var) throw SyntaxError("not a variable");
  return node_->sort;
}

std::uint64_t Term::num_value() const {
  if (kind() != Kind::Num) throw SyntaxError("not a numeral");
  return node_ ? node_->value : 0;
}

const Ordinal& Term::ord_value() const {
  if (kind() != Kind::OrdNum) throw SyntaxError("not an ordinal constant");
  return node_->ord;
}

const std::string& Term::op() const {
  if (kind() != Kind::App) throw SyntaxError("not an application");
  return node_->name;
}

const std::vector<Term>& Term::args() const {
  if (kind() != Kind::App) throw SyntaxError("not an application");
  return node_->args;
}

bool Term::operator==(const Term& o) const {
  if (node_ == o.node_) return true;
  if (kind() != o.kind()) return false;
  switch (kind()) {
    case Kind::Var: return node_->name == o.node_->name && node_->sort == o.node_->sort;
    case Kind::Num: return num_value() == o.num_value();
    case Kind::OrdNum: return Ordinal::compare(node_->ord, o.node_->ord) == 0;
    case Kind::App:
      if (node_->name != o.node_->name) return false;
      if (node_->args.size() != o.node_->args.size()) return false;
      for (std::size_t i = 0; i < node_->args.size(); ++i)
        if (!(node_->args[i] == o.node_->args[i])) return false;
      return true;
  }
  return false;
}

std::size_t Term::size() const {
  if (kind() != Kind::App) return 1;
  std::size_t s = 1;
  for (const auto& a : node_->args) s += a.size();
  return s;
}

bool is_builtin_op(const std::string& op) {
  static const std::set<std::string> ops = {"+", "*", "-", "div", "len", "smash",
                                            "o+", "o*", "o-", "odiv", "omod", "fin"};
  return ops.count(op) > 0;
}

Term operator+(const Term& a, const Term& b) { return Term::app("+", {a, b}); }
Term operator*(const Term& a, const Term& b) { return Term::app("*", {a, b}); }
Term monus(const Term& a, const Term& b) { return Term::app("-", {a, b}); }
Term quot(const Term& a, const Term& b) { return Term::app("div", {a, b}); }
Term t_len(const Term& a) { return Term::app("len", {a}); }
Term t_smash(const Term& a, const Term& b) { return Term::app("smash", {a, b}); }
Term t_min(const Term& a, const Term& b) { return monus(a, monus(a, b)); }

Term t_sel(const Term& flag01, const Term& then_t, const Term& else_t) {
  return flag01 * then_t + monus(Term::num(1), flag01) * else_t;
}

// ---------------------------------------------------------------------------
// Formula nodes

struct Formula::Node {
  Kind kind;
  Cmp cmp = Cmp::Le;
  Term lhs, rhs;           // Atom
  std::vector<Formula> ch; // Not: 1; And/Or/Imp: 2; quantifiers: body at 0
  std::string qvar;
  Sort qsort = Sort::Nat;
  Term qbound;             // AllB/ExB
};

Formula::Formula() : node_(nullptr) {}

Formula Formula::atom(Cmp cmp, Term lhs, Term rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Atom;
  n->cmp = cmp;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Formula{std::move(n)};
}

Formula Formula::top() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Top;
  return Formula{std::move(n)};
}

Formula Formula::bot() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Bot;
  return Formula{std::move(n)};
}

Formula Formula::lnot(Formula a) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Not;
  n->ch = {std::move(a)};
  return Formula{std::move(n)};
}

Formula Formula::land(Formula a, Formula b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::And;
  n->ch = {std::move(a), std::move(b)};
  return Formula{std::move(n)};
}
Formula Formula::lor(Formula a, Formula b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Or;
  n->ch = {std::move(a), std::move(b)};
  return Formula{std::move(n)};
}
Formula Formula::imp(Formula a, Formula b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Imp;
  n->ch = {std::move(a), std::move(b)};
  return Formula{std::move(n)};
}

Formula Formula::all_le(std::string var, Term bound, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::AllB;
  n->qvar = std::move(var);
  n->qsort = Sort::Nat;
  n->qbound = std::move(bound);
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}
Formula Formula::ex_le(std::string var, Term bound, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::ExB;
  n->qvar = std::move(var);
  n->qsort = Sort::Nat;
  n->qbound = std::move(bound);
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}
Formula Formula::all_prec(std::string var, Term bound, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::AllB;
  n->qvar = std::move(var);
  n->qsort = Sort::Ord;
  n->qbound = std::move(bound);
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}
Formula Formula::ex_prec(std::string var, Term bound, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::ExB;
  n->qvar = std::move(var);
  n->qsort = Sort::Ord;
  n->qbound = std::move(bound);
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}
Formula Formula::all(std::string var, Sort sort, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::All;
  n->qvar = std::move(var);
  n->qsort = sort;
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}
Formula Formula::ex(std::string var, Sort sort, Formula body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Ex;
  n->qvar = std::move(var);
  n->qsort = sort;
  n->ch = {std::move(body)};
  return Formula{std::move(n)};
}

Formula::Kind Formula::kind() const { return node_ ? node_->kind : Kind::Top; }

Formula::Cmp Formula::cmp() const {
  if (kind() != Kind::Atom) throw SyntaxError("not an atom");
  return node_->cmp;
}
const Term& Formula::lhs() const {
  if (kind() != Kind::Atom) throw SyntaxError("not an atom");
  return node_->lhs;
}
const Term& Formula::rhs() const {
  if (kind() != Kind::Atom) throw SyntaxError("not an atom");
  return node_->rhs;
}
const Formula& Formula::child(std::size_t i) const {
  if (!node_ || node_->ch.size() <= i) throw SyntaxError("no such child");
  return node_->ch[i];
}
const std::string& Formula::qvar() const {
  switch (kind()) {
    case Kind::AllB: case Kind::ExB: case Kind::All: case Kind::Ex: return node_->qvar;
    default: throw SyntaxError("not a quantifier");
  }
}
Sort Formula::qsort() const {
  switch (kind()) {
    case Kind::AllB: case Kind::ExB: case Kind::All: case Kind::Ex: return node_->qsort;
    default: throw SyntaxError("not a quantifier");
  }
}
const Term& Formula::qbound() const {
  switch (kind()) {
    case Kind::AllB: case Kind::ExB: return node_->qbound;
    default: throw SyntaxError("not a bounded quantifier");
  }
}
const Formula& Formula::body() const {
  switch (kind()) {
    case Kind::AllB: case Kind::ExB: case Kind::All: case Kind::Ex: return node_->ch[0];
    default: throw SyntaxError("not a quantifier");
  }
}

bool Formula::operator==(const Formula& o) const {
  if (node_ == o.node_) return true;
  if (kind() != o.kind()) return false;
  switch (kind()) {
    case Kind::Top: case Kind::Bot: return true;
    case Kind::Atom:
      return node_->cmp == o.node_->cmp && node_->lhs == o.node_->lhs &&
             node_->rhs == o.node_->rhs;
    case Kind::Not: return node_->ch[0] == o.node_->ch[0];
    case Kind::And: case Kind::Or: case Kind::Imp:
      return node_->ch[0] == o.node_->ch[0] && node_->ch[1] == o.node_->ch[1];
    case Kind::AllB: case Kind::ExB:
      return node_->qvar == o.node_->qvar && node_->qsort == o.node_->qsort &&
             node_->qbound == o.node_->qbound && node_->ch[0] == o.node_->ch[0];
    case Kind::All: case Kind::Ex:
      return node_->qvar == o.node_->qvar && node_->qsort == o.node_->qsort &&
             node_->ch[0] == o.node_->ch[0];
  }
  return false;
}

std::size_t Formula::size() const {
  switch (kind()) {
    case Kind::Top: case Kind::Bot: return 1;
    case Kind::Atom: return 1 + node_->lhs.size() + node_->rhs.size();
    default: {
      std::size_t s = 1;
      for (const auto& c : node_->ch) s += c.size();
      if (kind() == Kind::AllB || kind() == Kind::ExB) s += node_->qbound.size();
      return s;
    }
  }
}

bool Formula::is_open() const {
  switch (kind()) {
    case Kind::Top: case Kind::Bot: case Kind::Atom: return true;
    case Kind::Not: return node_->ch[0].is_open();
    case Kind::And: case Kind::Or: case Kind::Imp:
      return node_->ch[0].is_open() && node_->ch[1].is_open();
    default: return false;
  }
}

Formula conj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return Formula::top();
  Formula acc = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) acc = Formula::land(acc, fs[i]);
  return acc;
}

Formula disj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return Formula::bot();
  Formula acc = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) acc = Formula::lor(acc, fs[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Free variables

static void collect_free(const Term& t, std::set<VarRef>& out) {
  switch (t.kind()) {
    case Term::Kind::Var: out.insert({t.var_name(), t.var_sort()}); break;
    case Term::Kind::App:
      for (const auto& a : t.args()) collect_free(a, out);
      break;
    default: break;
  }
}

static void collect_free(const Formula& f, std::set<std::string> bound, std::set<VarRef>& out) {
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: return;
    case Formula::Kind::Atom: {
      std::set<VarRef> here;
      collect_free(f.lhs(), here);
      collect_free(f.rhs(), here);
      for (auto& v : here)
        if (!bound.count(v.name)) out.insert(v);
      return;
    }
    case Formula::Kind::Not:
      collect_free(f.child(0), bound, out);
      return;
    case Formula::Kind::And: case Formula::Kind::Or: case Formula::Kind::Imp:
      collect_free(f.child(0), bound, out);
      collect_free(f.child(1), bound, out);
      return;
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      std::set<VarRef> b;
      collect_free(f.qbound(), b);
      for (auto& v : b)
        if (!bound.count(v.name)) out.insert(v);
      bound.insert(f.qvar());
      collect_free(f.body(), std::move(bound), out);
      return;
    }
    case Formula::Kind::All: case Formula::Kind::Ex:
      bound.insert(f.qvar());
      collect_free(f.body(), std::move(bound), out);
      return;
  }
}

std::set<VarRef> free_vars(const Term& t) {
  std::set<VarRef> out;
  collect_free(t, out);
  return out;
}

std::set<VarRef> free_vars(const Formula& f) {
  std::set<VarRef> out;
  collect_free(f, {}, out);
  return out;
}

static void collect_bound(const Formula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case Formula::Kind::Not: collect_bound(f.child(0), out); return;
    case Formula::Kind::And: case Formula::Kind::Or: case Formula::Kind::Imp:
      collect_bound(f.child(0), out);
      collect_bound(f.child(1), out);
      return;
    case Formula::Kind::AllB: case Formula::Kind::ExB:
    case Formula::Kind::All: case Formula::Kind::Ex:
      out.insert(f.qvar());
      collect_bound(f.body(), out);
      return;
    default: return;
  }
}

std::set<std::string> bound_vars(const Formula& f) {
  std::set<std::string> out;
  collect_bound(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Substitution

Term substitute(const Term& t, const std::map<std::string, Term>& sub) {
  switch (t.kind()) {
    case Term::Kind::Var: {
      auto it = sub.find(t.var_name());
      return it == sub.end() ? t : it->second;
    }
    case Term::Kind::App: {
      std::vector<Term> args;
      args.reserve(t.args().size());
      bool changed = false;
      for (const auto& a : t.args()) {
        args.push_back(substitute(a, sub));
        changed = changed || !(args.back() == a);
      }
      return changed ? Term::app(t.op(), std::move(args)) : t;
    }
    default: return t;
  }
}

Formula substitute(const Formula& f, const std::map<std::string, Term>& sub) {
  if (sub.empty()) return f;
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: return f;
    case Formula::Kind::Atom:
      return Formula::atom(f.cmp(), substitute(f.lhs(), sub), substitute(f.rhs(), sub));
    case Formula::Kind::Not: return Formula::lnot(substitute(f.child(0), sub));
    case Formula::Kind::And:
      return Formula::land(substitute(f.child(0), sub), substitute(f.child(1), sub));
    case Formula::Kind::Or:
      return Formula::lor(substitute(f.child(0), sub), substitute(f.child(1), sub));
    case Formula::Kind::Imp:
      return Formula::imp(substitute(f.child(0), sub), substitute(f.child(1), sub));
    case Formula::Kind::AllB: case Formula::Kind::ExB:
    case Formula::Kind::All: case Formula::Kind::Ex: {
      const bool bounded =
          f.kind() == Formula::Kind::AllB || f.kind() == Formula::Kind::ExB;
      Term bnd = bounded ? substitute(f.qbound(), sub) : Term{};
      auto inner = sub;
      inner.erase(f.qvar());
      // Capture check: rename the binder if any replacement mentions it.
      std::string v = f.qvar();
      Formula body = f.body();
      std::set<std::string> clash;
      for (const auto& [from, to] : inner) {
        for (const auto& fv : free_vars(to)) clash.insert(fv.name);
      }
      if (clash.count(v)) {
        std::set<std::string> avoid = clash;
        for (const auto& fv : free_vars(body)) avoid.insert(fv.name);
        for (const auto& [from, to] : inner) avoid.insert(from);
        std::string v2 = fresh_name(v, avoid);
        body = substitute(body, v, Term::var(v2, f.qsort()));
        v = v2;
      }
      body = substitute(body, inner);
      switch (f.kind()) {
        case Formula::Kind::AllB:
          return f.qsort() == Sort::Nat ? Formula::all_le(v, bnd, body)
                                        : Formula::all_prec(v, bnd, body);
        case Formula::Kind::ExB:
          return f.qsort() == Sort::Nat ? Formula::ex_le(v, bnd, body)
                                        : Formula::ex_prec(v, bnd, body);
        case Formula::Kind::All: return Formula::all(v, f.qsort(), body);
        default: return Formula::ex(v, f.qsort(), body);
      }
    }
  }
  return f;
}

Term substitute(const Term& t, const std::string& var, const Term& repl) {
  return substitute(t, std::map<std::string, Term>{{var, repl}});
}
Formula substitute(const Formula& f, const std::string& var, const Term& repl) {
  return substitute(f, std::map<std::string, Term>{{var, repl}});
}

std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
  if (!avoid.count(base)) return base;
  for (unsigned i = 2;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!avoid.count(cand)) return cand;
  }
}

std::string base_name(const std::string& name) {
  std::string s = name;
  for (;;) {
    if (!s.empty() && s.back() == '\'') {
      s.pop_back();
      continue;
    }
    auto pos = s.rfind('_');
    if (pos != std::string::npos && pos > 0 && pos + 1 < s.size()) {
      bool digits = true;
      for (std::size_t i = pos + 1; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
      if (digits) {
        s = s.substr(0, pos);
        continue;
      }
    }
    return s;
  }
}

Formula freshen_bound(const Formula& f, std::set<std::string>& avoid) {
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: case Formula::Kind::Atom:
      return f;
    case Formula::Kind::Not: return Formula::lnot(freshen_bound(f.child(0), avoid));
    case Formula::Kind::And:
      return Formula::land(freshen_bound(f.child(0), avoid), freshen_bound(f.child(1), avoid));
    case Formula::Kind::Or:
      return Formula::lor(freshen_bound(f.child(0), avoid), freshen_bound(f.child(1), avoid));
    case Formula::Kind::Imp:
      return Formula::imp(freshen_bound(f.child(0), avoid), freshen_bound(f.child(1), avoid));
    default: {
      std::string v = f.qvar();
      Formula body = f.body();
      std::string v2 = fresh_name(v, avoid);
      avoid.insert(v2);
      if (v2 != v) body = substitute(body, v, Term::var(v2, f.qsort()));
      body = freshen_bound(body, avoid);
      switch (f.kind()) {
        case Formula::Kind::AllB:
          return f.qsort() == Sort::Nat ? Formula::all_le(v2, f.qbound(), body)
                                        : Formula::all_prec(v2, f.qbound(), body);
        case Formula::Kind::ExB:
          return f.qsort() == Sort::Nat ? Formula::ex_le(v2, f.qbound(), body)
                                        : Formula::ex_prec(v2, f.qbound(), body);
        case Formula::Kind::All: return Formula::all(v2, f.qsort(), body);
        default: return Formula::ex(v2, f.qsort(), body);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Signature

Signature::Signature() = default;

const Signature& Signature::standard() {
  static Signature sig;
  return sig;
}

void Signature::register_op(const std::string& name, OpInfo info) {
  if (is_builtin_op(name)) throw SyntaxError("cannot redefine built-in operator " + name);
  if (info.arg_sorts.empty()) info.arg_sorts.assign(info.arity, Sort::Nat);
  if (info.arg_sorts.size() != info.arity)
    throw SyntaxError("operator " + name + ": arity/sort mismatch");
  extra_[name] = std::move(info);
}

const Signature::OpInfo* Signature::find(const std::string& name) const {
  auto it = extra_.find(name);
  return it == extra_.end() ? nullptr : &it->second;
}

bool Signature::knows(const std::string& name) const {
  return is_builtin_op(name) || extra_.count(name) > 0;
}

Sort Signature::sort_of(const Term& t) const {
  switch (t.kind()) {
    case Term::Kind::Var: return t.var_sort();
    case Term::Kind::Num: return Sort::Nat;
    case Term::Kind::OrdNum: return Sort::Ord;
    case Term::Kind::App: {
      const std::string& op = t.op();
      const auto& args = t.args();
      auto want = [&](std::size_t n, Sort s, Sort result) {
        if (args.size() != n)
          throw SyntaxError("operator " + op + " expects " + std::to_string(n) + " arguments");
        for (const auto& a : args)
          if (sort_of(a) != s) throw SyntaxError("operator " + op + ": argument sort mismatch");
        return result;
      };
      if (op == "+" || op == "*" || op == "-" || op == "div" || op == "smash")
        return want(2, Sort::Nat, Sort::Nat);
      if (op == "len") return want(1, Sort::Nat, Sort::Nat);
      if (op == "o+" || op == "o*" || op == "o-" || op == "odiv" || op == "omod")
        return want(2, Sort::Ord, Sort::Ord);
      if (op == "fin") return want(1, Sort::Nat, Sort::Ord);
      const OpInfo* info = find(op);
      if (!info) throw SyntaxError("unknown operator " + op);
      if (args.size() != info->arity)
        throw SyntaxError("operator " + op + ": wrong arity");
      for (std::size_t i = 0; i < args.size(); ++i)
        if (sort_of(args[i]) != info->arg_sorts[i])
          throw SyntaxError("operator " + op + ": argument sort mismatch");
      return info->result;
    }
  }
  throw SyntaxError("bad term");
}

void Signature::check_formula(const Formula& f) const {
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: return;
    case Formula::Kind::Atom: {
      Sort l = sort_of(f.lhs()), r = sort_of(f.rhs());
      bool ord_cmp = f.cmp() == Formula::Cmp::OrdLess || f.cmp() == Formula::Cmp::OrdLeq ||
                     f.cmp() == Formula::Cmp::OrdEq;
      Sort want = ord_cmp ? Sort::Ord : Sort::Nat;
      if (l != want || r != want) throw SyntaxError("atom compares terms of the wrong sort");
      return;
    }
    case Formula::Kind::Not: check_formula(f.child(0)); return;
    case Formula::Kind::And: case Formula::Kind::Or: case Formula::Kind::Imp:
      check_formula(f.child(0));
      check_formula(f.child(1));
      return;
    case Formula::Kind::AllB: case Formula::Kind::ExB:
      if (sort_of(f.qbound()) != f.qsort())
        throw SyntaxError("quantifier bound has the wrong sort");
      check_formula(f.body());
      return;
    case Formula::Kind::All: case Formula::Kind::Ex:
      check_formula(f.body());
      return;
  }
}

// ---------------------------------------------------------------------------
// Classification

bool Levels::classifiable() const { return sigma < INT_MAX && pi < INT_MAX; }

std::string FormulaClass::to_string() const {
  switch (kind) {
    case Kind::Open: return "open";
    case Kind::Sigma: return "sigma" + std::to_string(level);
    case Kind::Pi: return "pi" + std::to_string(level);
  }
  return "?";
}

bool FormulaClass::admits(int least_sigma, int least_pi) const {
  switch (kind) {
    case Kind::Open: return least_sigma == 0 && least_pi == 0;
    case Kind::Sigma: return least_sigma <= level;
    case Kind::Pi: return least_pi <= level;
  }
  return false;
}

Levels least_levels(const Formula& f) {
  constexpr int inf = INT_MAX;
  auto cap_max = [](int a, int b) { return std::max(a, b); };
  switch (f.kind()) {
    case Formula::Kind::Top: case Formula::Kind::Bot: case Formula::Kind::Atom:
      return {0, 0};
    case Formula::Kind::Not: {
      Levels c = least_levels(f.child(0));
      return {c.pi, c.sigma};
    }
    case Formula::Kind::And: case Formula::Kind::Or: {
      Levels a = least_levels(f.child(0)), b = least_levels(f.child(1));
      return {cap_max(a.sigma, b.sigma), cap_max(a.pi, b.pi)};
    }
    case Formula::Kind::Imp: {
      Levels a = least_levels(f.child(0)), b = least_levels(f.child(1));
      return {cap_max(a.pi, b.sigma), cap_max(a.sigma, b.pi)};
    }
    case Formula::Kind::ExB: {
      if (f.qsort() == Sort::Ord) return {inf, inf};
      Levels c = least_levels(f.body());
      if (!c.classifiable()) return {inf, inf};
      int sig = std::max(1, c.sigma);
      return {sig, sig + 1};
    }
    case Formula::Kind::AllB: {
      if (f.qsort() == Sort::Ord) return {inf, inf};
      Levels c = least_levels(f.body());
      if (!c.classifiable()) return {inf, inf};
      int pi = std::max(1, c.pi);
      return {pi + 1, pi};
    }
    case Formula::Kind::All: case Formula::Kind::Ex:
      return {inf, inf};
  }
  return {inf, inf};
}

FormulaClass classify(const Formula& f) {
  Levels l = least_levels(f);
  if (!l.classifiable())
    throw SyntaxError("formula lies outside the bounded hierarchy");
  if (l.sigma == 0 && l.pi == 0) return FormulaClass::open();
  if (l.pi <= l.sigma) return FormulaClass::pi(l.pi);
  return FormulaClass::sigma(l.sigma);
}

bool is_universal_formula(const Formula& f) {
  // Tracks polarity: an existential in positive position (or universal under
  // negation) disqualifies.
  struct Walk {
    bool ok = true;
    void go(const Formula& g, bool pos) {
      if (!ok) return;
      switch (g.kind()) {
        case Formula::Kind::Top: case Formula::Kind::Bot: case Formula::Kind::Atom:
          return;
        case Formula::Kind::Not: go(g.child(0), !pos); return;
        case Formula::Kind::And: case Formula::Kind::Or:
          go(g.child(0), pos);
          go(g.child(1), pos);
          return;
        case Formula::Kind::Imp:
          go(g.child(0), !pos);
          go(g.child(1), pos);
          return;
        case Formula::Kind::AllB: case Formula::Kind::All:
          if (!pos) { ok = false; return; }
          go(g.body(), pos);
          return;
        case Formula::Kind::ExB: case Formula::Kind::Ex:
          if (pos) { ok = false; return; }
          go(g.body(), pos);
          return;
      }
    }
  } w;
  w.go(f, true);
  return w.ok;
}

// ---------------------------------------------------------------------------
// Characteristic terms

Term char_term(const Formula& f) {
  const Term one = Term::num(1);
  switch (f.kind()) {
    case Formula::Kind::Top: return one;
    case Formula::Kind::Bot: return Term::num(0);
    case Formula::Kind::Atom:
      switch (f.cmp()) {
        case Formula::Cmp::Le: return monus(one, monus(f.lhs(), f.rhs()));
        case Formula::Cmp::Eq: {
          Term le = monus(one, monus(f.lhs(), f.rhs()));
          Term ge = monus(one, monus(f.rhs(), f.lhs()));
          return le * ge;
        }
        default:
          throw SyntaxError("characteristic terms exist only for nat atoms");
      }
    case Formula::Kind::Not: return monus(one, char_term(f.child(0)));
    case Formula::Kind::And: return char_term(f.child(0)) * char_term(f.child(1));
    case Formula::Kind::Or: {
      Term s = char_term(f.child(0)) + char_term(f.child(1));
      return monus(one, monus(one, s));
    }
    case Formula::Kind::Imp:
      return char_term(Formula::lor(Formula::lnot(f.child(0)), f.child(1)));
    default:
      throw SyntaxError("characteristic terms exist only for open formulas");
  }
}

// ---------------------------------------------------------------------------
// Majorizers and ideals

std::optional<Term> monotone_majorizer(const Term& t, const Signature& sig) {
  switch (t.kind()) {
    case Term::Kind::Var: case Term::Kind::Num: return t;
    case Term::Kind::OrdNum: return std::nullopt;
    case Term::Kind::App: {
      const std::string& op = t.op();
      // Truncated subtraction and division are bounded by their left argument
      // and are not monotone in the right; drop the right argument entirely.
      if (op == "-" || op == "div") return monotone_majorizer(t.args()[0], sig);
      bool homomorphic = op == "+" || op == "*" || op == "len" || op == "smash";
      if (!homomorphic) {
        const auto* info = sig.find(op);
        if (!info || !info->monotone || info->result != Sort::Nat) return std::nullopt;
        homomorphic = true;
      }
      std::vector<Term> args;
      for (const auto& a : t.args()) {
        auto m = monotone_majorizer(a, sig);
        if (!m) return std::nullopt;
        args.push_back(*m);
      }
      return Term::app(op, std::move(args));
    }
  }
  return std::nullopt;
}

TermIdeal TermIdeal::all() { TermIdeal i; i.preset_ = Preset::All; return i; }
TermIdeal TermIdeal::closed() { TermIdeal i; i.preset_ = Preset::Closed; return i; }
TermIdeal TermIdeal::poly_len() { TermIdeal i; i.preset_ = Preset::PolyLen; return i; }
TermIdeal TermIdeal::iter_len(unsigned m) {
  TermIdeal i;
  i.preset_ = Preset::IterLen;
  i.m_ = m;
  return i;
}

std::string TermIdeal::name() const {
  switch (preset_) {
    case Preset::All: return "all";
    case Preset::Closed: return "closed";
    case Preset::PolyLen: return "polylen";
    case Preset::IterLen: return "iterlen:" + std::to_string(m_);
  }
  return "?";
}

TermIdeal TermIdeal::by_name(const std::string& name) {
  if (name == "all") return all();
  if (name == "closed") return closed();
  if (name == "polylen") return poly_len();
  if (name.rfind("iterlen:", 0) == 0) {
    unsigned m = static_cast<unsigned>(std::stoul(name.substr(8)));
    return iter_len(m);
  }
  throw SyntaxError("unknown term ideal: " + name);
}

namespace {

// True if every variable occurrence sits under a length operator, so the
// term's value is polynomial in the lengths of its variables.
bool poly_in_lengths(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Var: return false;
    case Term::Kind::Num: return true;
    case Term::Kind::OrdNum: return false;
    case Term::Kind::App: {
      const std::string& op = t.op();
      if (op == "len") return true;  // |s| is polynomial in lengths for any s
      if (op == "smash") return false;
      if (op == "+" || op == "*") {
        return poly_in_lengths(t.args()[0]) && poly_in_lengths(t.args()[1]);
      }
      if (op == "-" || op == "div") return poly_in_lengths(t.args()[0]);
      return false;
    }
  }
  return false;
}

constexpr int kDepthInf = 1 << 20;

// Minimum nesting of length operators above any variable occurrence; smash
// consumes one level (|a#b| is a product of lengths, not a length of lengths).
int min_len_depth(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Var: return 0;
    case Term::Kind::Num: return kDepthInf;
    case Term::Kind::OrdNum: return 0;
    case Term::Kind::App: {
      const std::string& op = t.op();
      if (op == "len") {
        int d = min_len_depth(t.args()[0]);
        return d >= kDepthInf ? kDepthInf : d + 1;
      }
      int d = kDepthInf;
      for (const auto& a : t.args()) d = std::min(d, min_len_depth(a));
      if (op == "smash") d = d - 1;
      return d;
    }
  }
  return 0;
}

}  // namespace

TermIdeal::Membership TermIdeal::in_ideal(const Term& t, const Signature& sig) const {
  auto maj = monotone_majorizer(t, sig);
  switch (preset_) {
    case Preset::All:
      return {true, maj};
    case Preset::Closed: {
      bool closed = free_vars(t).empty();
      return {closed, closed ? std::optional<Term>(t) : maj};
    }
    case Preset::PolyLen: {
      if (!maj) return {false, std::nullopt};
      return {poly_in_lengths(*maj), maj};
    }
    case Preset::IterLen: {
      if (!maj) return {false, std::nullopt};
      return {min_len_depth(*maj) >= static_cast<int>(m_), maj};
    }
  }
  return {false, std::nullopt};
}

}  // namespace flowforge
