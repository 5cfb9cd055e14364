#include "flowforge/strict.hpp"

namespace flowforge {

// ---------------------------------------------------------------------------
// Negation normal form

namespace {

Formula negate_atom(const Formula& a) {
  switch (a.cmp()) {
    case Formula::Cmp::Le: {  // not(l <= r)  ==  r+1 <= l
      Term r = a.rhs();
      if (r.kind() == Term::Kind::Num && r.num_value() < UINT64_MAX)
        return Formula::le(Term::num(r.num_value() + 1), a.lhs());
      return Formula::le(r + Term::num(1), a.lhs());
    }
    case Formula::Cmp::OrdLess:  // not(l prec r)  ==  r preceq l
      return Formula::atom(Formula::Cmp::OrdLeq, a.rhs(), a.lhs());
    case Formula::Cmp::OrdLeq:
      return Formula::atom(Formula::Cmp::OrdLess, a.rhs(), a.lhs());
    default:  // negated equalities stay negated atoms
      return Formula::lnot(a);
  }
}

Formula nnf_rec(const Formula& f, bool neg) {
  switch (f.kind()) {
    case Formula::Kind::Top: return neg ? Formula::bot() : Formula::top();
    case Formula::Kind::Bot: return neg ? Formula::top() : Formula::bot();
    case Formula::Kind::Atom: return neg ? negate_atom(f) : f;
    case Formula::Kind::Not: return nnf_rec(f.child(0), !neg);
    case Formula::Kind::And: {
      Formula a = nnf_rec(f.child(0), neg), b = nnf_rec(f.child(1), neg);
      return neg ? Formula::lor(a, b) : Formula::land(a, b);
    }
    case Formula::Kind::Or: {
      Formula a = nnf_rec(f.child(0), neg), b = nnf_rec(f.child(1), neg);
      return neg ? Formula::land(a, b) : Formula::lor(a, b);
    }
    case Formula::Kind::Imp: {
      Formula a = nnf_rec(f.child(0), !neg), b = nnf_rec(f.child(1), neg);
      return neg ? Formula::land(a, b) : Formula::lor(a, b);
    }
    case Formula::Kind::AllB: {
      Formula body = nnf_rec(f.body(), neg);
      if (f.qsort() == Sort::Nat)
        return neg ? Formula::ex_le(f.qvar(), f.qbound(), body)
                   : Formula::all_le(f.qvar(), f.qbound(), body);
      return neg ? Formula::ex_prec(f.qvar(), f.qbound(), body)
                 : Formula::all_prec(f.qvar(), f.qbound(), body);
    }
    case Formula::Kind::ExB: {
      Formula body = nnf_rec(f.body(), neg);
      if (f.qsort() == Sort::Nat)
        return neg ? Formula::all_le(f.qvar(), f.qbound(), body)
                   : Formula::ex_le(f.qvar(), f.qbound(), body);
      return neg ? Formula::all_prec(f.qvar(), f.qbound(), body)
                 : Formula::ex_prec(f.qvar(), f.qbound(), body);
    }
    case Formula::Kind::All: {
      Formula body = nnf_rec(f.body(), neg);
      return neg ? Formula::ex(f.qvar(), f.qsort(), body)
                 : Formula::all(f.qvar(), f.qsort(), body);
    }
    case Formula::Kind::Ex: {
      Formula body = nnf_rec(f.body(), neg);
      return neg ? Formula::all(f.qvar(), f.qsort(), body)
                 : Formula::ex(f.qvar(), f.qsort(), body);
    }
  }
  return f;
}

}  // namespace

Formula nnf(const Formula& f) { return nnf_rec(f, false); }

// ---------------------------------------------------------------------------
// Strictification

namespace {

struct HoistCtx {
  const Signature* sig;
  std::set<std::string> used;                // all names claimed so far
  std::map<std::string, Term> flat_bounds;   // block var -> ambient-only bound
};

// Extracts every bounded nat quantifier of the wanted polarity reachable
// through /\, \/ and same-polarity binders; returns the remaining tree with
// the binders stripped and guards inserted where a bound had to be flattened.
Formula hoist(const Formula& g, bool want_universal, StrictBlock& block, HoistCtx& ctx) {
  switch (g.kind()) {
    case Formula::Kind::And: {
      // Explicit sequencing: argument evaluation order would be unspecified.
      Formula a = hoist(g.child(0), want_universal, block, ctx);
      Formula b = hoist(g.child(1), want_universal, block, ctx);
      return Formula::land(a, b);
    }
    case Formula::Kind::Or: {
      Formula a = hoist(g.child(0), want_universal, block, ctx);
      Formula b = hoist(g.child(1), want_universal, block, ctx);
      return Formula::lor(a, b);
    }
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      if (g.qsort() == Sort::Ord)
        throw SyntaxError("ordinal quantifiers have no strict form");
      const bool is_all = g.kind() == Formula::Kind::AllB;
      if (is_all != want_universal) return g;  // waits for the next round

      Term bound = g.qbound();
      bool depends = false;
      for (const auto& v : free_vars(bound))
        if (ctx.flat_bounds.count(v.name)) depends = true;

      Term flat = bound;
      if (depends) {
        auto maj = monotone_majorizer(bound, *ctx.sig);
        if (!maj)
          throw SyntaxError("dependent quantifier bound has no monotone majorizer: " +
                            std::string("cannot flatten"));
        flat = substitute(*maj, ctx.flat_bounds);
      }

      std::string name = fresh_name(g.qvar(), ctx.used);
      ctx.used.insert(name);
      Formula body = g.body();
      if (name != g.qvar()) body = substitute(body, g.qvar(), Term::var(name));

      block.vars.push_back(name);
      block.bases.push_back(g.qvar());
      block.bounds.push_back(flat);
      ctx.flat_bounds[name] = flat;

      Formula inner = hoist(body, want_universal, block, ctx);
      if (depends) {
        // Keep the original constraint; stays in negation normal form.
        Formula in_range = Formula::le(Term::var(name), bound);
        Formula out_of_range = Formula::le(bound + Term::num(1), Term::var(name));
        inner = is_all ? Formula::lor(out_of_range, inner) : Formula::land(in_range, inner);
      }
      return inner;
    }
    case Formula::Kind::All: case Formula::Kind::Ex:
      throw SyntaxError("unbounded quantifiers have no strict form");
    default:
      return g;
  }
}

}  // namespace

StrictForm to_strict(const Formula& f, FormulaClass cls, const Signature& sig) {
  Levels lv = least_levels(f);
  if (!lv.classifiable())
    throw SyntaxError("formula has no bounded-hierarchy classification");
  if (!cls.admits(lv.sigma, lv.pi))
    throw SyntaxError("formula does not fit " + cls.to_string());

  StrictForm out;
  out.cls = cls;
  Formula cur = nnf(f);

  if (cls.kind == FormulaClass::Kind::Open) {
    if (!cur.is_open()) throw SyntaxError("formula is not open");
    out.matrix = cur;
    return out;
  }

  HoistCtx ctx;
  ctx.sig = &sig;
  for (const auto& v : free_vars(f)) ctx.used.insert(v.name);

  for (int r = 0; r < cls.level; ++r) {
    bool universal = (cls.kind == FormulaClass::Kind::Pi) == (r % 2 == 0);
    StrictBlock block;
    block.universal = universal;
    cur = hoist(cur, universal, block, ctx);
    if (block.vars.empty()) {
      std::string dummy = fresh_name("_d" + std::to_string(r), ctx.used);
      ctx.used.insert(dummy);
      block.vars.push_back(dummy);
      block.bases.push_back("_d" + std::to_string(r));
      block.bounds.push_back(Term::num(0));
    }
    out.blocks.push_back(std::move(block));
  }
  if (!cur.is_open())
    throw SyntaxError("residual quantifiers after " + std::to_string(cls.level) +
                      " rounds; formula does not fit " + cls.to_string());
  out.matrix = cur;
  return out;
}

Formula StrictForm::to_formula() const {
  Formula f = matrix;
  for (std::size_t i = blocks.size(); i-- > 0;) {
    const StrictBlock& b = blocks[i];
    for (std::size_t j = b.vars.size(); j-- > 0;) {
      f = b.universal ? Formula::all_le(b.vars[j], b.bounds[j], f)
                      : Formula::ex_le(b.vars[j], b.bounds[j], f);
    }
  }
  return f;
}

std::set<std::string> StrictForm::block_var_names() const {
  std::set<std::string> out;
  for (const auto& b : blocks)
    for (const auto& v : b.vars) out.insert(v);
  return out;
}

StrictForm subst_strict(const StrictForm& s, const std::map<std::string, Term>& sub) {
  for (const auto& b : s.blocks)
    for (const auto& v : b.vars)
      if (sub.count(v)) throw SyntaxError("substitution collides with block variable " + v);
  StrictForm out = s;
  for (auto& b : out.blocks)
    for (auto& t : b.bounds) t = substitute(t, sub);
  out.matrix = substitute(out.matrix, sub);
  return out;
}

StrictForm subst_strict(const StrictForm& s, const std::string& var, const Term& repl) {
  return subst_strict(s, std::map<std::string, Term>{{var, repl}});
}

Term StrictPair::to_pair_names(const Term& t) const {
  std::map<std::string, Term> sub;
  for (const auto& [from, to] : src_rename) sub.emplace(from, Term::var(to));
  return substitute(t, sub);
}

StrictPair make_strict_pair(const Formula& src, const Formula& tgt, FormulaClass cls,
                            const Signature& sig) {
  StrictPair pair;
  pair.src = to_strict(src, cls, sig);
  pair.tgt = to_strict(tgt, cls, sig);

  std::set<std::string> taken = pair.tgt.block_var_names();
  for (const auto& v : free_vars(src)) taken.insert(v.name);
  for (const auto& v : free_vars(tgt)) taken.insert(v.name);

  std::map<std::string, Term> sub;
  for (auto& b : pair.src.blocks) {
    for (auto& v : b.vars) {
      if (!taken.count(v)) continue;
      std::string renamed = v;
      do renamed += "'"; while (taken.count(renamed) || pair.src.block_var_names().count(renamed));
      pair.src_rename[v] = renamed;
      sub[v] = Term::var(renamed);
      taken.insert(renamed);
      v = renamed;
    }
  }
  if (!sub.empty()) {
    for (auto& b : pair.src.blocks)
      for (auto& t : b.bounds) t = substitute(t, sub);
    pair.src.matrix = substitute(pair.src.matrix, sub);
  }
  return pair;
}

}  // namespace flowforge
