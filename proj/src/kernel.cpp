#include "flowforge/kernel.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <sstream>

#include "flowforge/parse.hpp"

namespace flowforge {

namespace {

const std::array<std::pair<Rule, const char*>, 28> kTags{{
    {Rule::Ax, "ax"}, {Rule::BotL, "botl"}, {Rule::NonLogAx, "axiom"},
    {Rule::WeakL, "wl"}, {Rule::WeakR, "wr"}, {Rule::ContrL, "cl"},
    {Rule::ContrR, "cr"}, {Rule::ExchL, "exl"}, {Rule::ExchR, "exr"},
    {Rule::Cut, "cut"}, {Rule::AndL, "andl"}, {Rule::AndR, "andr"},
    {Rule::OrL, "orl"}, {Rule::OrR, "orr"}, {Rule::ImpL, "impl"},
    {Rule::ImpR, "impr"}, {Rule::NotL, "notl"}, {Rule::NotR, "notr"},
    {Rule::ForallL, "foralll"}, {Rule::ForallR, "forallr"},
    {Rule::ExistsL, "existsl"}, {Rule::ExistsR, "existsr"},
    {Rule::BForallL, "balll"}, {Rule::BForallR, "ballr"},
    {Rule::BExistsL, "bexl"}, {Rule::BExistsR, "bexr"},
    {Rule::Ind, "ind"}, {Rule::IndAlpha, "inda"},
}};

void need(bool ok, const std::string& msg) {
  if (!ok) throw ProofError(msg);
}

std::vector<Formula> drop_last(std::vector<Formula> v) {
  v.pop_back();
  return v;
}

std::set<VarRef> seq_free(const Sequent& s) {
  std::set<VarRef> out;
  for (const auto& f : s.left)
    for (const auto& v : free_vars(f)) out.insert(v);
  for (const auto& f : s.right)
    for (const auto& v : free_vars(f)) out.insert(v);
  return out;
}

bool name_free_in(const Sequent& s, const std::string& name) {
  for (const auto& v : seq_free(s))
    if (v.name == name) return true;
  return false;
}

struct Ctx {
  const TheorySpec* theory;
  const Cap* cap;
  bool ti = false;
  bool trust_axioms = false;
  std::map<std::string, int>* counts = nullptr;
  std::vector<std::string>* notes = nullptr;
  std::function<void(const Sequent&)> on_sequent;
};

std::size_t rule_arity(Rule r) {
  switch (r) {
    case Rule::Ax: case Rule::BotL: case Rule::NonLogAx: return 0;
    case Rule::Cut: case Rule::AndR: case Rule::OrL: case Rule::ImpL: return 2;
    default: return 1;
  }
}

// The strict-inequality guard of a bounded quantifier instance: s <= t for
// nat binders, s prec t for ordinal ones.
Formula bound_guard(const Formula& q, const Term& at) {
  return q.qsort() == Sort::Nat ? Formula::le(at, q.qbound())
                                : Formula::atom(Formula::Cmp::OrdLess, at, q.qbound());
}

Sequent derive(const ProofNode& n, Ctx& ctx) {
  if (ctx.counts) (*ctx.counts)[rule_tag(n.rule)]++;
  need(n.premises.size() == rule_arity(n.rule),
       rule_tag(n.rule) + ": expected " + std::to_string(rule_arity(n.rule)) +
           " premises, got " + std::to_string(n.premises.size()));
  const Signature& sig = ctx.theory->sig;
  auto prem = [&](std::size_t i) { return derive(*n.premises[i], ctx); };
  auto finish = [&](Sequent s) {
    if (ctx.on_sequent) ctx.on_sequent(s);
    return s;
  };

  switch (n.rule) {
    case Rule::Ax:
      sig.check_formula(n.formula);
      return finish({{n.formula}, {n.formula}});
    case Rule::BotL:
      return finish({{Formula::bot()}, {}});
    case Rule::NonLogAx: {
      sig.check_formula(n.formula);
      for (const auto& ax : ctx.theory->axioms)
        if (ax == n.formula) return finish({{}, {n.formula}});
      need(ctx.theory->axioms_at_cap,
           "axiom is not in the theory's list: " + print_formula(n.formula));
      if (!ctx.trust_axioms) {
        DecideOpts opts;
        opts.allow_unbounded = ctx.ti;
        Verdict v = check_implication(Formula::top(), n.formula, *ctx.cap, sig,
                                      nullptr, 1, opts);
        if (v.refuted())
          throw ProofError("axiom refuted at cap: " + print_formula(n.formula) +
                           " at " + v.counterexample->to_string());
        if (!v.verified())
          throw ProofError("axiom not confirmed within budget: " +
                           print_formula(n.formula));
        if (ctx.notes)
          ctx.notes->push_back("axiom accepted by enumeration: " +
                               print_formula(n.formula));
      }
      return finish({{}, {n.formula}});
    }

    case Rule::WeakL: {
      sig.check_formula(n.formula);
      Sequent s = prem(0);
      s.left.push_back(n.formula);
      return finish(std::move(s));
    }
    case Rule::WeakR: {
      sig.check_formula(n.formula);
      Sequent s = prem(0);
      s.right.push_back(n.formula);
      return finish(std::move(s));
    }
    case Rule::ContrL: {
      Sequent s = prem(0);
      need(s.left.size() >= 2 && s.left.back() == s.left[s.left.size() - 2],
           "cl: the last two antecedent formulas must coincide");
      s.left.pop_back();
      return finish(std::move(s));
    }
    case Rule::ContrR: {
      Sequent s = prem(0);
      need(s.right.size() >= 2 && s.right.back() == s.right[s.right.size() - 2],
           "cr: the last two succedent formulas must coincide");
      s.right.pop_back();
      return finish(std::move(s));
    }
    case Rule::ExchL: {
      Sequent s = prem(0);
      need(n.index + 1 < s.left.size(), "exl: position out of range");
      std::swap(s.left[n.index], s.left[n.index + 1]);
      return finish(std::move(s));
    }
    case Rule::ExchR: {
      Sequent s = prem(0);
      need(n.index + 1 < s.right.size(), "exr: position out of range");
      std::swap(s.right[n.index], s.right[n.index + 1]);
      return finish(std::move(s));
    }
    case Rule::Cut: {
      Sequent a = prem(0), b = prem(1);
      const Formula& A = n.formula;
      need(!a.right.empty() && a.right.back() == A,
           "cut: first premise must end with the cut formula on the right");
      need(!b.left.empty() && b.left.back() == A,
           "cut: second premise must end with the cut formula on the left");
      Sequent out{a.left, drop_last(a.right)};
      need(drop_last(b.left) == out.left && b.right == out.right,
           "cut: premise contexts differ");
      return finish(std::move(out));
    }

    case Rule::AndL: {
      Sequent s = prem(0);
      need(s.left.size() >= 2, "andl: premise needs two antecedent formulas");
      Formula b = s.left.back();
      s.left.pop_back();
      Formula a = s.left.back();
      s.left.back() = Formula::land(a, b);
      return finish(std::move(s));
    }
    case Rule::AndR: {
      Sequent a = prem(0), b = prem(1);
      need(!a.right.empty() && !b.right.empty(), "andr: premises need succedents");
      Formula fa = a.right.back(), fb = b.right.back();
      need(a.left == b.left && drop_last(a.right) == drop_last(b.right),
           "andr: premise contexts differ");
      Sequent out{a.left, drop_last(a.right)};
      out.right.push_back(Formula::land(fa, fb));
      return finish(std::move(out));
    }
    case Rule::OrL: {
      Sequent a = prem(0), b = prem(1);
      need(!a.left.empty() && !b.left.empty(), "orl: premises need antecedents");
      Formula fa = a.left.back(), fb = b.left.back();
      need(drop_last(a.left) == drop_last(b.left) && a.right == b.right,
           "orl: premise contexts differ");
      Sequent out{drop_last(a.left), a.right};
      out.left.push_back(Formula::lor(fa, fb));
      return finish(std::move(out));
    }
    case Rule::OrR: {
      need(n.formula.kind() == Formula::Kind::Or, "orr: principal formula must be a disjunction");
      Sequent s = prem(0);
      need(!s.right.empty(), "orr: premise needs a succedent");
      const Formula& got = s.right.back();
      need(got == n.formula.child(0) || got == n.formula.child(1),
           "orr: premise must end with one of the disjuncts");
      s.right.back() = n.formula;
      return finish(std::move(s));
    }
    case Rule::ImpL: {
      Sequent a = prem(0), b = prem(1);
      need(!a.right.empty() && !b.left.empty(), "impl: premise shapes");
      Formula fa = a.right.back(), fb = b.left.back();
      need(a.left == drop_last(b.left) && drop_last(a.right) == b.right,
           "impl: premise contexts differ");
      Sequent out{a.left, drop_last(a.right)};
      out.left.push_back(Formula::imp(fa, fb));
      return finish(std::move(out));
    }
    case Rule::ImpR: {
      Sequent s = prem(0);
      need(!s.left.empty() && !s.right.empty(), "impr: premise shape");
      Formula a = s.left.back(), b = s.right.back();
      s.left.pop_back();
      s.right.back() = Formula::imp(a, b);
      return finish(std::move(s));
    }
    case Rule::NotL: {
      Sequent s = prem(0);
      need(!s.right.empty(), "notl: premise needs a succedent");
      Formula a = s.right.back();
      s.right.pop_back();
      s.left.push_back(Formula::lnot(a));
      return finish(std::move(s));
    }
    case Rule::NotR: {
      Sequent s = prem(0);
      need(!s.left.empty(), "notr: premise needs an antecedent");
      Formula a = s.left.back();
      s.left.pop_back();
      s.right.push_back(Formula::lnot(a));
      return finish(std::move(s));
    }

    case Rule::ForallL: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::All, "foralll: principal formula must be universal");
      need(sig.sort_of(n.term) == F.qsort(), "foralll: instantiation term has the wrong sort");
      Formula inst = substitute(F.body(), F.qvar(), n.term);
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == inst,
           "foralll: premise must end with the instance " + print_formula(inst));
      s.left.back() = F;
      return finish(std::move(s));
    }
    case Rule::ForallR: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::All, "forallr: principal formula must be universal");
      Formula inst = substitute(F.body(), F.qvar(), Term::var(n.var, F.qsort()));
      Sequent s = prem(0);
      need(!s.right.empty() && s.right.back() == inst,
           "forallr: premise must end with the instance " + print_formula(inst));
      s.right.back() = F;
      need(!name_free_in(s, n.var), "forallr: eigenvariable " + n.var +
                                        " occurs free in the conclusion");
      return finish(std::move(s));
    }
    case Rule::ExistsL: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::Ex, "existsl: principal formula must be existential");
      Formula inst = substitute(F.body(), F.qvar(), Term::var(n.var, F.qsort()));
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == inst,
           "existsl: premise must end with the instance " + print_formula(inst));
      s.left.back() = F;
      need(!name_free_in(s, n.var), "existsl: eigenvariable " + n.var +
                                        " occurs free in the conclusion");
      return finish(std::move(s));
    }
    case Rule::ExistsR: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::Ex, "existsr: principal formula must be existential");
      need(sig.sort_of(n.term) == F.qsort(), "existsr: instantiation term has the wrong sort");
      Formula inst = substitute(F.body(), F.qvar(), n.term);
      Sequent s = prem(0);
      need(!s.right.empty() && s.right.back() == inst,
           "existsr: premise must end with the instance " + print_formula(inst));
      s.right.back() = F;
      return finish(std::move(s));
    }

    case Rule::BForallL: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::AllB, "balll: principal formula must be bounded universal");
      need(sig.sort_of(n.term) == F.qsort(), "balll: instantiation term has the wrong sort");
      Formula inst = substitute(F.body(), F.qvar(), n.term);
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == inst,
           "balll: premise must end with the instance " + print_formula(inst));
      s.left.back() = bound_guard(F, n.term);
      s.left.push_back(F);
      return finish(std::move(s));
    }
    case Rule::BForallR: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::AllB, "ballr: principal formula must be bounded universal");
      Term y = Term::var(n.var, F.qsort());
      Formula inst = substitute(F.body(), F.qvar(), y);
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == bound_guard(F, y),
           "ballr: premise must end with the bound guard on the left");
      need(!s.right.empty() && s.right.back() == inst,
           "ballr: premise must end with the instance " + print_formula(inst));
      s.left.pop_back();
      s.right.back() = F;
      need(!name_free_in(s, n.var), "ballr: eigenvariable " + n.var +
                                        " occurs free in the conclusion");
      return finish(std::move(s));
    }
    case Rule::BExistsL: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::ExB, "bexl: principal formula must be bounded existential");
      Term y = Term::var(n.var, F.qsort());
      Formula inst = substitute(F.body(), F.qvar(), y);
      Sequent s = prem(0);
      need(s.left.size() >= 2 && s.left.back() == inst,
           "bexl: premise must end with the instance " + print_formula(inst));
      need(s.left[s.left.size() - 2] == bound_guard(F, y),
           "bexl: premise needs the bound guard before the instance");
      s.left.pop_back();
      s.left.back() = F;
      need(!name_free_in(s, n.var), "bexl: eigenvariable " + n.var +
                                        " occurs free in the conclusion");
      return finish(std::move(s));
    }
    case Rule::BExistsR: {
      const Formula& F = n.formula;
      need(F.kind() == Formula::Kind::ExB, "bexr: principal formula must be bounded existential");
      need(sig.sort_of(n.term) == F.qsort(), "bexr: instantiation term has the wrong sort");
      Formula inst = substitute(F.body(), F.qvar(), n.term);
      Sequent s = prem(0);
      need(!s.right.empty() && s.right.back() == inst,
           "bexr: premise must end with the instance " + print_formula(inst));
      s.right.back() = F;
      s.left.push_back(bound_guard(F, n.term));
      return finish(std::move(s));
    }

    case Rule::Ind: {
      const Formula& A = n.formula;
      sig.check_formula(A);
      need(sig.sort_of(n.term) == Sort::Nat, "ind: the bound must be nat-sorted");
      Formula succ = substitute(A, n.var, Term::var(n.var) + Term::num(1));
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == A,
           "ind: premise must end with the template on the left");
      need(!s.right.empty() && s.right.back() == succ,
           "ind: premise must end with the successor instance on the right");
      Sequent out{drop_last(s.left), drop_last(s.right)};
      need(!name_free_in(out, n.var), "ind: induction variable " + n.var +
                                          " occurs free in the context");
      for (const auto& v : free_vars(n.term))
        need(v.name != n.var, "ind: induction variable occurs in the bound");
      if (ctx.theory->ind_class) {
        Levels lv = least_levels(A);
        need(lv.classifiable() &&
                 ctx.theory->ind_class->admits(lv.sigma, lv.pi),
             "ind: template outside the theory's induction class " +
                 ctx.theory->ind_class->to_string());
      }
      auto mem = ctx.theory->ideal.in_ideal(n.term, sig);
      need(mem.member, "ind: bound " + print_term(n.term) +
                           " outside the theory's term ideal " + ctx.theory->ideal.name());
      out.left.push_back(substitute(A, n.var, Term::num(0)));
      out.right.push_back(substitute(A, n.var, n.term));
      return finish(std::move(out));
    }
    case Rule::IndAlpha: {
      need(ctx.ti, "inda: transfinite induction requires the TI checker");
      const Formula& A = n.formula;
      sig.check_formula(A);
      need(sig.sort_of(n.term) == Sort::Ord, "inda: the stage term must be ordinal-sorted");
      need(is_universal_formula(A), "inda: the template must be universal");
      Term beta = Term::var(n.var, Sort::Ord);
      Formula ih = Formula::all_prec(n.var2, beta, substitute(A, n.var, Term::var(n.var2, Sort::Ord)));
      Sequent s = prem(0);
      need(!s.left.empty() && s.left.back() == ih,
           "inda: premise must end with the history hypothesis " + print_formula(ih));
      need(!s.right.empty() && s.right.back() == A,
           "inda: premise must end with the template on the right");
      Sequent out{drop_last(s.left), drop_last(s.right)};
      need(!name_free_in(out, n.var), "inda: stage variable " + n.var +
                                          " occurs free in the context");
      for (const auto& v : free_vars(n.term))
        need(v.name != n.var, "inda: stage variable occurs in the final stage term");
      out.right.push_back(substitute(A, n.var, n.term));
      return finish(std::move(out));
    }
  }
  throw ProofError("unknown rule");
}

CheckResult run_check(const Proof& p, const TheorySpec& theory, const Cap& cap, bool ti) {
  need(p != nullptr, "empty proof");
  CheckResult res;
  Ctx ctx;
  ctx.theory = &theory;
  ctx.cap = &cap;
  ctx.ti = ti;
  ctx.counts = &res.rule_counts;
  ctx.notes = &res.notes;
  res.conclusion = derive(*p, ctx);
  return res;
}

}  // namespace

const std::string& rule_tag(Rule r) {
  static const std::map<Rule, std::string> table = [] {
    std::map<Rule, std::string> m;
    for (const auto& [rule, tag] : kTags) m[rule] = tag;
    return m;
  }();
  return table.at(r);
}

std::string Sequent::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < left.size(); ++i)
    os << (i ? ", " : "") << print_formula(left[i]);
  os << " => ";
  for (std::size_t i = 0; i < right.size(); ++i)
    os << (i ? ", " : "") << print_formula(right[i]);
  return os.str();
}

CheckResult check_proof(const Proof& p, const TheorySpec& theory, const Cap& cap) {
  return run_check(p, theory, cap, false);
}

CheckResult check_ti_proof(const Proof& p, const TheorySpec& theory, const Cap& cap) {
  return run_check(p, theory, cap, true);
}

bool check_class_restricted(const Proof& p, const TheorySpec& theory, FormulaClass cls) {
  need(p != nullptr, "empty proof");
  bool ok = true;
  Ctx ctx;
  ctx.theory = &theory;
  Cap cap;
  ctx.cap = &cap;
  ctx.ti = true;           // shape-only scan: accept both calculi
  ctx.trust_axioms = true; // no semantic checks here
  ctx.on_sequent = [&](const Sequent& s) {
    auto scan = [&](const Formula& f) {
      Levels lv = least_levels(f);
      if (!lv.classifiable() || !cls.admits(lv.sigma, lv.pi)) ok = false;
    };
    for (const auto& f : s.left) scan(f);
    for (const auto& f : s.right) scan(f);
  };
  derive(*p, ctx);
  return ok;
}

// ---------------------------------------------------------------------------
// Proof files

namespace {

struct SExpr {
  bool atom = false;
  bool quoted = false;
  std::string text;
  std::vector<SExpr> items;
};

struct SReader {
  const std::string& s;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size()) {
      if (std::isspace(static_cast<unsigned char>(s[pos]))) { ++pos; continue; }
      if (s[pos] == ';') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
  }
  bool done() { skip(); return pos >= s.size(); }
  SExpr next() {
    skip();
    if (pos >= s.size()) throw ProofError("unexpected end of proof file");
    if (s[pos] == '(') {
      ++pos;
      SExpr e;
      for (skip(); pos < s.size() && s[pos] != ')'; skip()) e.items.push_back(next());
      if (pos >= s.size()) throw ProofError("missing ')' in proof file");
      ++pos;
      return e;
    }
    if (s[pos] == ')') throw ProofError("unexpected ')' in proof file");
    SExpr e;
    e.atom = true;
    if (s[pos] == '"') {
      e.quoted = true;
      ++pos;
      while (pos < s.size() && s[pos] != '"') {
        if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
        e.text += s[pos++];
      }
      if (pos >= s.size()) throw ProofError("unterminated string in proof file");
      ++pos;
      return e;
    }
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
           s[pos] != '(' && s[pos] != ')' && s[pos] != ';')
      e.text += s[pos++];
    return e;
  }
};

struct ProofBuilder {
  ParseOpts popts;
  std::map<std::string, Formula> lets;

  Rule tag_rule(const std::string& tag) const {
    for (const auto& [rule, t] : kTags)
      if (tag == t) return rule;
    throw ProofError("unknown rule tag '" + tag + "'");
  }

  Formula formula_arg(const SExpr& e) const {
    need(e.atom, "expected a formula (name or quoted string)");
    if (!e.quoted) {
      auto it = lets.find(e.text);
      need(it != lets.end(), "unknown formula name '" + e.text + "'");
      return it->second;
    }
    return parse_formula(e.text, popts);
  }
  Term term_arg(const SExpr& e) const {
    need(e.atom, "expected a term");
    return parse_term(e.text, popts);
  }
  std::string name_arg(const SExpr& e) const {
    need(e.atom && !e.quoted, "expected a name");
    return e.text;
  }
  std::size_t index_arg(const SExpr& e) const {
    need(e.atom && !e.quoted, "expected an index");
    for (char c : e.text)
      need(std::isdigit(static_cast<unsigned char>(c)), "expected an index");
    return std::stoul(e.text);
  }

  Proof build(const SExpr& e) const {
    need(!e.atom && !e.items.empty() && e.items[0].atom && !e.items[0].quoted,
         "expected a rule application");
    auto node = std::make_shared<ProofNode>();
    node->rule = tag_rule(e.items[0].text);
    std::size_t i = 1;
    auto rest_premises = [&] {
      for (; i < e.items.size(); ++i) node->premises.push_back(build(e.items[i]));
    };
    switch (node->rule) {
      case Rule::Ax: case Rule::NonLogAx: case Rule::WeakL: case Rule::WeakR:
      case Rule::Cut: case Rule::OrR:
        need(i < e.items.size(), "rule needs a formula payload");
        node->formula = formula_arg(e.items[i++]);
        break;
      case Rule::ExchL: case Rule::ExchR:
        need(i < e.items.size(), "exchange needs an index");
        node->index = index_arg(e.items[i++]);
        break;
      case Rule::ForallL: case Rule::ExistsR: case Rule::BForallL: case Rule::BExistsR:
        need(i + 1 < e.items.size(), "rule needs a formula and a term");
        node->formula = formula_arg(e.items[i++]);
        node->term = term_arg(e.items[i++]);
        break;
      case Rule::ForallR: case Rule::ExistsL: case Rule::BForallR: case Rule::BExistsL:
        need(i + 1 < e.items.size(), "rule needs a formula and a variable");
        node->formula = formula_arg(e.items[i++]);
        node->var = name_arg(e.items[i++]);
        break;
      case Rule::Ind:
        need(i + 2 < e.items.size(), "ind needs a template, a variable and a bound");
        node->formula = formula_arg(e.items[i++]);
        node->var = name_arg(e.items[i++]);
        node->term = term_arg(e.items[i++]);
        break;
      case Rule::IndAlpha:
        need(i + 3 < e.items.size(),
             "inda needs a template, two variables and a stage term");
        node->formula = formula_arg(e.items[i++]);
        node->var = name_arg(e.items[i++]);
        node->var2 = name_arg(e.items[i++]);
        node->term = term_arg(e.items[i++]);
        break;
      default:
        break;
    }
    rest_premises();
    return node;
  }
};

void collect_ops_and_ords(const Proof& p, std::set<std::string>& ords,
                          std::set<std::string>& ops) {
  std::function<void(const Term&)> scan_t = [&](const Term& t) {
    if (t.kind() == Term::Kind::Var && t.var_sort() == Sort::Ord) ords.insert(t.var_name());
    if (t.kind() == Term::Kind::App) {
      if (!is_builtin_op(t.op())) ops.insert(t.op());
      for (const auto& a : t.args()) scan_t(a);
    }
  };
  std::function<void(const Formula&)> scan_f = [&](const Formula& f) {
    switch (f.kind()) {
      case Formula::Kind::Atom: scan_t(f.lhs()); scan_t(f.rhs()); break;
      case Formula::Kind::Not: scan_f(f.child(0)); break;
      case Formula::Kind::And: case Formula::Kind::Or: case Formula::Kind::Imp:
        scan_f(f.child(0)); scan_f(f.child(1)); break;
      case Formula::Kind::AllB: case Formula::Kind::ExB:
        scan_t(f.qbound()); scan_f(f.body()); break;
      case Formula::Kind::All: case Formula::Kind::Ex: scan_f(f.body()); break;
      default: break;
    }
  };
  std::function<void(const ProofNode&)> walk = [&](const ProofNode& n) {
    scan_f(n.formula);
    scan_t(n.term);
    for (const auto& q : n.premises) walk(*q);
  };
  walk(*p);
}

void print_node(std::ostringstream& os, const ProofNode& n, int depth) {
  std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  os << pad << "(" << rule_tag(n.rule);
  auto fml = [&] { os << " \"" << print_formula(n.formula) << "\""; };
  auto trm = [&] { os << " \"" << print_term(n.term) << "\""; };
  switch (n.rule) {
    case Rule::Ax: case Rule::NonLogAx: case Rule::WeakL: case Rule::WeakR:
    case Rule::Cut: case Rule::OrR: fml(); break;
    case Rule::ExchL: case Rule::ExchR: os << " " << n.index; break;
    case Rule::ForallL: case Rule::ExistsR: case Rule::BForallL: case Rule::BExistsR:
      fml(); trm(); break;
    case Rule::ForallR: case Rule::ExistsL: case Rule::BForallR: case Rule::BExistsL:
      fml(); os << " " << n.var; break;
    case Rule::Ind: fml(); os << " " << n.var; trm(); break;
    case Rule::IndAlpha: fml(); os << " " << n.var << " " << n.var2; trm(); break;
    default: break;
  }
  for (const auto& p : n.premises) {
    os << "\n";
    print_node(os, *p, depth + 1);
  }
  os << ")";
}

}  // namespace

Proof parse_proof(const std::string& text) {
  SReader reader{text};
  ProofBuilder builder;
  Proof proof;
  while (!reader.done()) {
    SExpr e = reader.next();
    need(!e.atom, "top-level forms must be lists");
    need(!e.items.empty() && e.items[0].atom, "malformed top-level form");
    const std::string& head = e.items[0].text;
    if (head == "ordvars") {
      for (std::size_t i = 1; i < e.items.size(); ++i)
        builder.popts.ord_vars.insert(builder.name_arg(e.items[i]));
    } else if (head == "ops") {
      for (std::size_t i = 1; i < e.items.size(); ++i)
        builder.popts.ops.insert(builder.name_arg(e.items[i]));
    } else if (head == "let") {
      need(e.items.size() == 3, "let needs a name and a formula");
      builder.lets.insert_or_assign(builder.name_arg(e.items[1]),
                                    builder.formula_arg(e.items[2]));
    } else {
      proof = builder.build(e);
    }
  }
  need(proof != nullptr, "proof file contains no proof");
  return proof;
}

std::string print_proof(const Proof& p) {
  need(p != nullptr, "empty proof");
  std::set<std::string> ords, ops;
  collect_ops_and_ords(p, ords, ops);
  std::ostringstream os;
  if (!ords.empty()) {
    os << "(ordvars";
    for (const auto& v : ords) os << " " << v;
    os << ")\n";
  }
  if (!ops.empty()) {
    os << "(ops";
    for (const auto& v : ops) os << " " << v;
    os << ")\n";
  }
  print_node(os, *p, 0);
  os << "\n";
  return os.str();
}

}  // namespace flowforge
