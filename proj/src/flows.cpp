#include "flowforge/flows.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "flow_detail.hpp"
#include "flowforge/parse.hpp"

namespace flowforge {
namespace detail {

const VarInfo& PairView::info(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw FlowError("unknown pair variable: " + name);
  return it->second;
}

bool is_dummy(const std::string& name) {
  return name.rfind("_d", 0) == 0;
}

PairView view_of(const StrictPair& pair) {
  PairView v;
  if (pair.src.blocks.size() != pair.tgt.blocks.size())
    throw FlowError("reduction pair with unequal round counts");
  v.rounds = pair.src.blocks.size();
  std::map<std::string, std::string> inv;  // primed -> post-strict
  for (const auto& [orig, primed] : pair.src_rename) inv[primed] = orig;
  for (int side = 0; side < 2; ++side) {
    bool is_src = side == 0;
    const StrictForm& form = is_src ? pair.src : pair.tgt;
    for (std::size_t r = 0; r < form.blocks.size(); ++r) {
      const StrictBlock& b = form.blocks[r];
      for (std::size_t i = 0; i < b.vars.size(); ++i) {
        VarInfo info;
        info.src = is_src;
        info.round = r;
        info.pos = i;
        info.bound = b.bounds[i];
        info.universal = b.universal;
        info.output = b.universal == is_src;  // universal round: source answers
        auto it = inv.find(b.vars[i]);
        info.base = is_src && it != inv.end() ? it->second : b.vars[i];
        if (!v.vars.emplace(b.vars[i], info).second)
          throw FlowError("pair namespace collision on " + b.vars[i]);
        v.unprime[b.vars[i]] = info.base;
      }
    }
  }
  v.universal.resize(v.rounds);
  v.outputs.resize(v.rounds);
  for (std::size_t r = 0; r < v.rounds; ++r) {
    bool uni = pair.src.blocks[r].universal;
    v.universal[r] = uni;
    const StrictForm& out = uni ? pair.src : pair.tgt;
    v.outputs[r] = out.blocks[r].vars;
  }
  return v;
}

std::string pair_name(const StrictPair& pair, const std::string& base, bool src) {
  if (!src) return base;
  auto it = pair.src_rename.find(base);
  return it == pair.src_rename.end() ? base : it->second;
}

std::map<std::string, Term> index_witness(const PairView& v, const WitnessList& w) {
  if (w.size() != v.rounds)
    throw FlowError("witness has " + std::to_string(w.size()) + " rounds, pair has " +
                    std::to_string(v.rounds));
  std::map<std::string, Term> idx;
  for (std::size_t r = 0; r < v.rounds; ++r) {
    if (w[r].size() != v.outputs[r].size())
      throw FlowError("witness round " + std::to_string(r) + " has " +
                      std::to_string(w[r].size()) + " terms, expected " +
                      std::to_string(v.outputs[r].size()));
    for (std::size_t i = 0; i < w[r].size(); ++i) idx[v.outputs[r][i]] = w[r][i];
  }
  return idx;
}

WitnessList build_witness(const PairView& v, const OutputBuilder& build) {
  WitnessList w(v.rounds);
  for (std::size_t r = 0; r < v.rounds; ++r) {
    w[r].reserve(v.outputs[r].size());
    for (const std::string& name : v.outputs[r]) w[r].push_back(build(name, v.info(name)));
  }
  return w;
}

Term clamp_for(const PairView& v, const VarInfo& out, Term t) {
  if (t == Term{} || t == Term::num(0)) return Term::num(0);
  if (t.kind() == Term::Kind::Var && v.has(t.var_name()) &&
      v.info(t.var_name()).bound == out.bound)
    return t;
  // already t_min(x, bound)?
  if (t.kind() == Term::Kind::App && t.op() == "-" && t.args().size() == 2) {
    const Term& inner = t.args()[1];
    if (inner.kind() == Term::Kind::App && inner.op() == "-" && inner.args().size() == 2 &&
        inner.args()[0] == t.args()[0] && inner.args()[1] == out.bound)
      return t;
  }
  return t_min(t, out.bound);
}

FlowPairs pairs_of(const DetFlow& f, const Signature& sig) {
  FlowPairs P;
  P.h = to_strict(f.interp, f.cls, sig);
  P.self = make_self_pair(P.h);
  Formula h0 = substitute(f.interp, f.counter, Term::num(0));
  Formula hT = substitute(f.interp, f.counter, f.length);
  P.e_fwd = make_strict_pair(f.start, h0, f.cls, sig);
  P.e_bwd = make_strict_pair(h0, f.start, f.cls, sig);
  P.g_fwd = make_strict_pair(hT, f.end, f.cls, sig);
  P.g_bwd = make_strict_pair(f.end, hT, f.cls, sig);
  return P;
}

Term retarget(const Term& t, const std::map<std::string, Term>& m) {
  return substitute(t, m);
}

WitnessList identity_witness(const StrictPair& toP, const std::set<std::string>& live) {
  PairView tov = view_of(toP);
  return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
    std::string base = tov.unprime.at(n);
    if (is_dummy(base) || !live.count(base)) return Term::num(0);
    if (info.src) {
      if (tov.has(base) && !tov.info(base).src)
        return clamp_for(tov, info, Term::var(base));
      return Term::num(0);
    }
    std::string sname = pair_name(toP, base, true);
    if (tov.has(sname) && tov.info(sname).src)
      return clamp_for(tov, info, Term::var(sname));
    return Term::num(0);
  });
}

std::map<std::string, Term> shared_name_map(const StrictPair& from, const StrictPair& to,
                                            bool swap) {
  PairView fv = view_of(from);
  PairView tv = view_of(to);
  std::map<std::string, Term> m;
  for (const auto& [name, info] : fv.vars) {
    bool side = swap ? !info.src : info.src;
    std::string cand = pair_name(to, info.base, side);
    if (tv.has(cand) && tv.info(cand).src == side) m[name] = Term::var(cand);
  }
  return m;
}

namespace {

bool alpha_eq_rec(const Formula& a, const Formula& b, std::map<std::string, std::string>& ab,
                  std::map<std::string, std::string>& ba);

Term alpha_map(const Term& t, const std::map<std::string, std::string>& m) {
  std::map<std::string, Term> sub;
  for (const auto& [k, v] : m) sub[k] = Term::var(v, Sort::Nat);
  return substitute(t, sub);
}

bool alpha_eq_rec(const Formula& a, const Formula& b, std::map<std::string, std::string>& ab,
                  std::map<std::string, std::string>& ba) {
  using K = Formula::Kind;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case K::Top:
    case K::Bot:
      return true;
    case K::Atom:
      return a.cmp() == b.cmp() && alpha_map(a.lhs(), ab) == b.lhs() &&
             alpha_map(a.rhs(), ab) == b.rhs();
    case K::Not:
      return alpha_eq_rec(a.child(), b.child(), ab, ba);
    case K::And:
    case K::Or:
    case K::Imp:
      return alpha_eq_rec(a.child(0), b.child(0), ab, ba) &&
             alpha_eq_rec(a.child(1), b.child(1), ab, ba);
    case K::AllB:
    case K::ExB: {
      if (a.qsort() != b.qsort()) return false;
      if (alpha_map(a.qbound(), ab) != b.qbound()) return false;
      auto oldab = ab.find(a.qvar()) == ab.end()
                       ? std::optional<std::string>{}
                       : std::optional<std::string>{ab[a.qvar()]};
      auto oldba = ba.find(b.qvar()) == ba.end()
                       ? std::optional<std::string>{}
                       : std::optional<std::string>{ba[b.qvar()]};
      ab[a.qvar()] = b.qvar();
      ba[b.qvar()] = a.qvar();
      bool ok = alpha_eq_rec(a.body(), b.body(), ab, ba);
      // also require the backward map to agree (rules out two-to-one renames)
      ok = ok && ba[b.qvar()] == a.qvar();
      if (oldab) ab[a.qvar()] = *oldab; else ab.erase(a.qvar());
      if (oldba) ba[b.qvar()] = *oldba; else ba.erase(b.qvar());
      return ok;
    }
    case K::All:
    case K::Ex: {
      if (a.qsort() != b.qsort()) return false;
      auto oldab = ab.count(a.qvar()) ? std::optional<std::string>{ab[a.qvar()]}
                                      : std::optional<std::string>{};
      auto oldba = ba.count(b.qvar()) ? std::optional<std::string>{ba[b.qvar()]}
                                      : std::optional<std::string>{};
      ab[a.qvar()] = b.qvar();
      ba[b.qvar()] = a.qvar();
      bool ok = alpha_eq_rec(a.body(), b.body(), ab, ba);
      if (oldab) ab[a.qvar()] = *oldab; else ab.erase(a.qvar());
      if (oldba) ba[b.qvar()] = *oldba; else ba.erase(b.qvar());
      return ok;
    }
  }
  return false;
}

}  // namespace

bool alpha_eq(const Formula& a, const Formula& b) {
  std::map<std::string, std::string> ab, ba;
  return alpha_eq_rec(a, b, ab, ba);
}

std::map<std::string, std::string> zip_names(const StrictForm& from, const StrictForm& to) {
  if (from.blocks.size() != to.blocks.size())
    throw FlowError("zip_names: round count mismatch");
  std::map<std::string, std::string> m;
  for (std::size_t r = 0; r < from.blocks.size(); ++r) {
    const auto& fb = from.blocks[r];
    const auto& tb = to.blocks[r];
    if (fb.universal != tb.universal || fb.vars.size() != tb.vars.size())
      throw FlowError("zip_names: block shape mismatch at round " + std::to_string(r));
    for (std::size_t i = 0; i < fb.vars.size(); ++i) m[fb.vars[i]] = tb.vars[i];
  }
  return m;
}

std::set<std::string> flow_names(const DetFlow& f) {
  std::set<std::string> names;
  for (const Formula* g : {&f.start, &f.end, &f.interp}) {
    for (const auto& v : free_vars(*g)) names.insert(v.name);
    for (const auto& n : bound_vars(*g)) names.insert(n);
  }
  for (const auto& v : free_vars(f.length)) names.insert(v.name);
  names.insert(f.counter);
  return names;
}

namespace {

// Positional variable map between two pairs of isomorphic shape.
std::map<std::string, Term> positional_map(const StrictPair& from, const StrictPair& to) {
  std::map<std::string, Term> m;
  for (int side = 0; side < 2; ++side) {
    const StrictForm& ff = side == 0 ? from.src : from.tgt;
    const StrictForm& tf = side == 0 ? to.src : to.tgt;
    if (ff.blocks.size() != tf.blocks.size())
      throw FlowError("renamed flow changed its strict shape");
    for (std::size_t r = 0; r < ff.blocks.size(); ++r) {
      if (ff.blocks[r].vars.size() != tf.blocks[r].vars.size())
        throw FlowError("renamed flow changed a block size");
      for (std::size_t i = 0; i < ff.blocks[r].vars.size(); ++i)
        m[ff.blocks[r].vars[i]] = Term::var(tf.blocks[r].vars[i]);
    }
  }
  return m;
}

WitnessList map_witness(const WitnessList& w, const std::map<std::string, Term>& m) {
  WitnessList out = w;
  for (auto& round : out)
    for (auto& t : round) t = substitute(t, m);
  return out;
}

}  // namespace

DetFlow rename_flow(const DetFlow& f, std::set<std::string>& avoid, const Signature& sig) {
  for (const auto& v : free_vars(f.start)) avoid.insert(v.name);
  for (const auto& v : free_vars(f.end)) avoid.insert(v.name);
  for (const auto& v : free_vars(f.interp)) avoid.insert(v.name);
  for (const auto& v : free_vars(f.length)) avoid.insert(v.name);
  avoid.insert(f.counter);

  DetFlow g = f;
  g.start = freshen_bound(f.start, avoid);
  g.end = freshen_bound(f.end, avoid);
  g.interp = freshen_bound(f.interp, avoid);
  if (g.start == f.start && g.end == f.end && g.interp == f.interp) return f;

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);
  g.e_fwd = map_witness(f.e_fwd, positional_map(Pf.e_fwd, Pg.e_fwd));
  g.e_bwd = map_witness(f.e_bwd, positional_map(Pf.e_bwd, Pg.e_bwd));
  g.g_fwd = map_witness(f.g_fwd, positional_map(Pf.g_fwd, Pg.g_fwd));
  g.g_bwd = map_witness(f.g_bwd, positional_map(Pf.g_bwd, Pg.g_bwd));
  g.step = map_witness(f.step, positional_map(Pf.self, Pg.self));
  return g;
}

}  // namespace detail

using namespace detail;

// ---------------------------------------------------------------------------
// Records

Formula DetFlow::at(const Term& c) const { return substitute(interp, counter, c); }
Formula NdFlow::at(const Term& c) const { return substitute(interp, counter, c); }

NdFlow forget(const DetFlow& f) {
  return NdFlow{f.cls, f.counter, f.length, f.start, f.end, f.interp};
}

// ---------------------------------------------------------------------------
// Verification

namespace {

void check_counter_hygiene(const std::string& counter, const Formula& start,
                           const Formula& end, const Formula& interp, const Term& length) {
  for (const auto& v : free_vars(start))
    if (v.name == counter) throw FlowError("counter appears free in the start formula");
  for (const auto& v : free_vars(end))
    if (v.name == counter) throw FlowError("counter appears free in the end formula");
  for (const auto& v : free_vars(length))
    if (v.name == counter) throw FlowError("counter appears free in the length");
  if (bound_vars(interp).count(counter))
    throw FlowError("counter is bound inside the interpolant");
}

// Ambient variables of the flow (free variables except the counter), minus
// anything pinned by `fixed`.
std::vector<VarRef> ambient_vars(const DetFlow& f, const Env* fixed) {
  std::set<VarRef> s;
  for (const Formula* g : {&f.start, &f.end, &f.interp})
    for (const auto& v : free_vars(*g)) s.insert(v);
  for (const auto& v : free_vars(f.length)) s.insert(v);
  std::vector<VarRef> out;
  for (const auto& v : s) {
    if (v.name == f.counter) continue;
    if (fixed && fixed->has(v.name)) continue;
    out.push_back(v);
  }
  return out;
}

StrictPair step_pair_at(const FlowPairs& P, const std::string& counter, std::uint64_t c) {
  StrictPair sp;
  sp.src = subst_strict(P.self.src, counter, Term::num(c));
  sp.tgt = subst_strict(P.self.tgt, counter, Term::num(c + 1));
  sp.src_rename = P.self.src_rename;
  return sp;
}

WitnessList step_witness_at(const WitnessList& w, const std::string& counter,
                            std::uint64_t c) {
  WitnessList out = w;
  for (auto& round : out)
    for (auto& t : round) t = substitute(t, counter, Term::num(c));
  return out;
}

Verdict tagged(Verdict v, const std::string& where) {
  if (!v.verified()) v.note = where + (v.note.empty() ? "" : ": " + v.note);
  return v;
}

constexpr std::uint64_t kMaxSteps = 1 << 17;

// Ground-fold an open matrix: atoms whose variables are all pinned by `env`
// evaluate to Top/Bot, connectives fold constants away.  Semantics are
// preserved for every environment extending `env`.
Formula fold_matrix(const Formula& f, const Env& env, const Cap& cap, const Signature& sig,
                    Budget& bud) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Top:
    case K::Bot:
      return f;
    case K::Atom: {
      for (const auto& vr : free_vars(f))
        if (!env.has(vr.name)) return f;
      try {
        return decide(f, env, cap, sig, bud) ? Formula::top() : Formula::bot();
      } catch (const std::exception&) {
        return f;
      }
    }
    case K::Not: {
      Formula c = fold_matrix(f.child(), env, cap, sig, bud);
      if (c.kind() == K::Top) return Formula::bot();
      if (c.kind() == K::Bot) return Formula::top();
      return Formula::lnot(c);
    }
    case K::And: {
      Formula l = fold_matrix(f.child(0), env, cap, sig, bud);
      Formula r = fold_matrix(f.child(1), env, cap, sig, bud);
      if (l.kind() == K::Bot || r.kind() == K::Bot) return Formula::bot();
      if (l.kind() == K::Top) return r;
      if (r.kind() == K::Top) return l;
      return Formula::land(l, r);
    }
    case K::Or: {
      Formula l = fold_matrix(f.child(0), env, cap, sig, bud);
      Formula r = fold_matrix(f.child(1), env, cap, sig, bud);
      if (l.kind() == K::Top || r.kind() == K::Top) return Formula::top();
      if (l.kind() == K::Bot) return r;
      if (r.kind() == K::Bot) return l;
      return Formula::lor(l, r);
    }
    case K::Imp: {
      Formula l = fold_matrix(f.child(0), env, cap, sig, bud);
      Formula r = fold_matrix(f.child(1), env, cap, sig, bud);
      if (l.kind() == K::Bot || r.kind() == K::Top) return Formula::top();
      if (l.kind() == K::Top) return r;
      return Formula::imp(l, r);
    }
    default:
      return f;  // quantifiers do not occur in strict matrices
  }
}

// Constant-fold a term under the pinned environment: pinned variables become
// numerals, closed applications evaluate, and the 0/1 identities of +, *, -
// collapse dead selector branches.  Sound pointwise for every environment
// extending `env` because all term operations are total.
Term fold_term(const Term& t, const Env& env, const Signature& sig, Budget& bud) {
  switch (t.kind()) {
    case Term::Kind::Num:
    case Term::Kind::OrdNum:
      return t;
    case Term::Kind::Var: {
      if (!env.has(t.var_name())) return t;
      try {
        if (t.var_sort() == Sort::Nat) return Term::num(eval_term(t, env, sig, bud));
        return Term::ordnum(eval_ord(t, env, sig, bud));
      } catch (const std::exception&) {
        return t;
      }
    }
    case Term::Kind::App: {
      std::vector<Term> as;
      bool closed = true;
      for (const auto& a : t.args()) {
        as.push_back(fold_term(a, env, sig, bud));
        Term::Kind k = as.back().kind();
        closed = closed && (k == Term::Kind::Num || k == Term::Kind::OrdNum);
      }
      Term r = Term::app(t.op(), as);
      if (closed) {
        try {
          Value val = eval_value(r, Env{}, sig, bud);
          if (std::holds_alternative<std::uint64_t>(val))
            return Term::num(std::get<std::uint64_t>(val));
          return Term::ordnum(std::get<Ordinal>(val));
        } catch (const std::exception&) {
          return r;
        }
      }
      auto is_num = [](const Term& x, std::uint64_t n) {
        return x.kind() == Term::Kind::Num && x.num_value() == n;
      };
      if (as.size() == 2) {
        if (t.op() == "+") {
          if (is_num(as[0], 0)) return as[1];
          if (is_num(as[1], 0)) return as[0];
        } else if (t.op() == "*") {
          if (is_num(as[0], 0) || is_num(as[1], 0)) return Term::num(0);
          if (is_num(as[0], 1)) return as[1];
          if (is_num(as[1], 1)) return as[0];
        } else if (t.op() == "-") {
          if (is_num(as[1], 0)) return as[0];
          if (is_num(as[0], 0)) return Term::num(0);
        }
      }
      return r;
    }
  }
  return t;
}

// Shrink a pair check to its live variables.  After folding matrices, bounds
// and witness terms under the pinned environment, a variable is live when a
// folded matrix mentions it or a live variable's bound or witness term reaches
// it.  Outputs whose witness term is not syntactically range-safe stay live so
// their bound condition is still checked in full.  Dead inputs are removed
// outright (substituted by 0), dead outputs get the zero witness; the verdict
// is unchanged while the enumeration space collapses from all pair variables
// to the live ones and nested selector chains collapse to their taken branch.
void reduce_pair_check(StrictPair& sp, WitnessList& w, const Env* fixed, const Cap& cap,
                       const Signature& sig) {
  Env ground = fixed ? *fixed : Env{};
  Budget bud(std::max<std::uint64_t>(cap.budget, 1'000'000));
  try {
    sp.src.matrix = fold_matrix(sp.src.matrix, ground, cap, sig, bud);
    sp.tgt.matrix = fold_matrix(sp.tgt.matrix, ground, cap, sig, bud);
    for (int side = 0; side < 2; ++side) {
      StrictForm& form = side == 0 ? sp.src : sp.tgt;
      for (auto& blk : form.blocks)
        for (auto& b : blk.bounds) b = fold_term(b, ground, sig, bud);
    }
    for (auto& row : w)
      for (auto& t : row) t = fold_term(t, ground, sig, bud);
  } catch (const BudgetExhausted&) {
    return;  // folding is an optimisation; fall back to the full check
  }

  PairView v = view_of(sp);
  auto widx = index_witness(v, w);

  std::set<std::string> live;
  for (const auto& vr : free_vars(sp.src.matrix))
    if (v.has(vr.name)) live.insert(vr.name);
  for (const auto& vr : free_vars(sp.tgt.matrix))
    if (v.has(vr.name)) live.insert(vr.name);
  bool grew = true;
  while (grew) {
    grew = false;
    std::set<std::string> add;
    for (const auto& n : live) {
      const VarInfo& info = v.info(n);
      for (const auto& vr : free_vars(info.bound))
        if (v.has(vr.name) && !live.count(vr.name)) add.insert(vr.name);
      if (info.output) {
        auto it = widx.find(n);
        if (it != widx.end())
          for (const auto& vr : free_vars(it->second))
            if (v.has(vr.name) && !live.count(vr.name)) add.insert(vr.name);
      }
    }
    auto range_safe = [&](const VarInfo& info, const Term& t) {
      if (t.kind() == Term::Kind::Num && info.bound.kind() == Term::Kind::Num)
        return t.num_value() <= info.bound.num_value();
      return clamp_for(v, info, t) == t;
    };
    for (const auto& [n, info] : v.vars) {
      if (!info.output || live.count(n)) continue;
      auto it = widx.find(n);
      if (it != widx.end() && !range_safe(info, it->second)) add.insert(n);
    }
    if (!add.empty()) {
      live.insert(add.begin(), add.end());
      grew = true;
    }
  }

  std::map<std::string, Term> zero;
  for (const auto& [n, info] : v.vars)
    if (!info.output && !live.count(n)) zero[n] = Term();
  for (int side = 0; side < 2; ++side) {
    StrictForm& form = side == 0 ? sp.src : sp.tgt;
    for (auto& blk : form.blocks) {
      std::size_t keep = 0;
      for (std::size_t i = 0; i < blk.vars.size(); ++i) {
        if (zero.count(blk.vars[i])) continue;
        blk.vars[keep] = blk.vars[i];
        blk.bounds[keep] = blk.bounds[i];
        ++keep;
      }
      blk.vars.resize(keep);
      blk.bounds.resize(keep);
    }
  }
  if (!zero.empty()) {
    for (int side = 0; side < 2; ++side) {
      StrictForm& form = side == 0 ? sp.src : sp.tgt;
      form.matrix = substitute(form.matrix, zero);
      for (auto& blk : form.blocks)
        for (auto& b : blk.bounds) b = fold_term(substitute(b, zero), ground, sig, bud);
    }
    for (auto& row : w)
      for (auto& t : row) t = fold_term(substitute(t, zero), ground, sig, bud);
  }
  for (std::size_t r = 0; r < v.rounds && r < w.size(); ++r)
    for (std::size_t i = 0; i < v.outputs[r].size() && i < w[r].size(); ++i)
      if (!live.count(v.outputs[r][i])) w[r][i] = Term::num(0);
}

Verdict checked_pair(const StrictPair& sp, const WitnessList& w, const Cap& cap,
                     const Signature& sig, const Env* fixed, unsigned workers) {
  StrictPair rp = sp;
  WitnessList rw = w;
  reduce_pair_check(rp, rw, fixed, cap, sig);
  return check_det_pair(rp, rw, cap, sig, fixed, workers);
}

}  // namespace

Verdict verify_flow(const DetFlow& f, const Cap& cap, const Signature& sig,
                    const Env* fixed, unsigned workers) {
  check_counter_hygiene(f.counter, f.start, f.end, f.interp, f.length);
  sig.check_formula(f.start);
  sig.check_formula(f.end);
  sig.check_formula(f.interp);

  FlowPairs P = pairs_of(f, sig);
  Verdict v;
  v = tagged(checked_pair(P.e_fwd, f.e_fwd, cap, sig, fixed, workers),
             "initial equivalence (forward)");
  if (!v.verified()) return v;
  v = tagged(checked_pair(P.e_bwd, f.e_bwd, cap, sig, fixed, workers),
             "initial equivalence (backward)");
  if (!v.verified()) return v;
  v = tagged(checked_pair(P.g_fwd, f.g_fwd, cap, sig, fixed, workers),
             "final equivalence (forward)");
  if (!v.verified()) return v;
  v = tagged(checked_pair(P.g_bwd, f.g_bwd, cap, sig, fixed, workers),
             "final equivalence (backward)");
  if (!v.verified()) return v;

  // Steps: one sweep per index when the length is determined, otherwise one
  // sweep per ambient environment.
  std::vector<VarRef> amb = ambient_vars(f, fixed);
  bool closed_len = true;
  for (const auto& vr : free_vars(f.length))
    if (vr.name != f.counter && (!fixed || !fixed->has(vr.name))) closed_len = false;

  auto run_steps = [&](const Env* pin, const std::string& where) -> Verdict {
    Env e0 = pin ? *pin : Env{};
    Budget bud(cap.budget);
    std::uint64_t T = 0;
    try {
      T = eval_term(f.length, e0, sig, bud);
    } catch (const BudgetExhausted&) {
      return Verdict::out_of_budget("flow length evaluation" + where);
    }
    if (T > kMaxSteps)
      return Verdict::out_of_budget("flow length " + std::to_string(T) +
                                    " exceeds the step-check limit" + where);
    for (std::uint64_t c = 0; c < T; ++c) {
      StrictPair sp = step_pair_at(P, f.counter, c);
      WitnessList w = step_witness_at(f.step, f.counter, c);
      Verdict sv = checked_pair(sp, w, cap, sig, pin, workers);
      if (!sv.verified()) return tagged(sv, "step " + std::to_string(c) + where);
    }
    return Verdict::ok();
  };

  if (closed_len) return run_steps(fixed, "");

  // Odometer over the unpinned ambient variables.
  std::vector<std::size_t> idx(amb.size(), 0);
  std::vector<std::size_t> lim(amb.size());
  for (std::size_t i = 0; i < amb.size(); ++i) {
    if (amb[i].sort == Sort::Ord) {
      lim[i] = cap.ord_sample.size();
      if (lim[i] == 0) return Verdict::ok();  // vacuous: no ordinal sample
    } else {
      lim[i] = static_cast<std::size_t>(cap.domain) + 1;
    }
  }
  while (true) {
    Env rho = fixed ? *fixed : Env{};
    for (std::size_t i = 0; i < amb.size(); ++i) {
      if (amb[i].sort == Sort::Ord)
        rho.set(amb[i].name, cap.ord_sample[idx[i]]);
      else
        rho.set(amb[i].name, static_cast<std::uint64_t>(idx[i]));
    }
    Verdict sv = run_steps(&rho, " at " + rho.to_string());
    if (!sv.verified()) return sv;
    std::size_t i = 0;
    for (; i < amb.size(); ++i) {
      if (++idx[i] < lim[i]) break;
      idx[i] = 0;
    }
    if (i == amb.size()) break;
    if (amb.empty()) break;
  }
  return Verdict::ok();
}

Verdict verify_flow(const NdFlow& f, const Cap& cap, const Signature& sig,
                    const Env* fixed, unsigned workers) {
  check_counter_hygiene(f.counter, f.start, f.end, f.interp, f.length);
  sig.check_formula(f.start);
  sig.check_formula(f.end);
  sig.check_formula(f.interp);

  Formula h0 = substitute(f.interp, f.counter, Term::num(0));
  Formula hT = substitute(f.interp, f.counter, f.length);
  Verdict v = tagged(check_implication(f.start, h0, cap, sig, fixed, workers),
                     "initial implication");
  if (!v.verified()) return v;
  v = tagged(check_implication(hT, f.end, cap, sig, fixed, workers), "final implication");
  if (!v.verified()) return v;

  DetFlow shell{f.cls, f.counter, f.length, f.start, f.end, f.interp, {}, {}, {}, {}, {}};
  std::vector<VarRef> amb = ambient_vars(shell, fixed);
  bool closed_len = true;
  for (const auto& vr : free_vars(f.length))
    if (vr.name != f.counter && (!fixed || !fixed->has(vr.name))) closed_len = false;

  auto run_steps = [&](const Env* pin, const std::string& where) -> Verdict {
    Env e0 = pin ? *pin : Env{};
    Budget bud(cap.budget);
    std::uint64_t T = 0;
    try {
      T = eval_term(f.length, e0, sig, bud);
    } catch (const BudgetExhausted&) {
      return Verdict::out_of_budget("flow length evaluation" + where);
    }
    if (T > kMaxSteps)
      return Verdict::out_of_budget("flow length " + std::to_string(T) +
                                    " exceeds the step-check limit" + where);
    for (std::uint64_t c = 0; c < T; ++c) {
      Formula hc = substitute(f.interp, f.counter, Term::num(c));
      Formula hc1 = substitute(f.interp, f.counter, Term::num(c + 1));
      Verdict sv = check_implication(hc, hc1, cap, sig, pin, workers);
      if (!sv.verified()) return tagged(sv, "step " + std::to_string(c) + where);
    }
    return Verdict::ok();
  };

  if (closed_len) return run_steps(fixed, "");

  std::vector<std::size_t> idx(amb.size(), 0);
  std::vector<std::size_t> lim(amb.size());
  for (std::size_t i = 0; i < amb.size(); ++i) {
    if (amb[i].sort == Sort::Ord) {
      lim[i] = cap.ord_sample.size();
      if (lim[i] == 0) return Verdict::ok();
    } else {
      lim[i] = static_cast<std::size_t>(cap.domain) + 1;
    }
  }
  while (true) {
    Env rho = fixed ? *fixed : Env{};
    for (std::size_t i = 0; i < amb.size(); ++i) {
      if (amb[i].sort == Sort::Ord)
        rho.set(amb[i].name, cap.ord_sample[idx[i]]);
      else
        rho.set(amb[i].name, static_cast<std::uint64_t>(idx[i]));
    }
    Verdict sv = run_steps(&rho, " at " + rho.to_string());
    if (!sv.verified()) return sv;
    std::size_t i = 0;
    for (; i < amb.size(); ++i) {
      if (++idx[i] < lim[i]) break;
      idx[i] = 0;
    }
    if (i == amb.size() || amb.empty()) break;
  }
  return Verdict::ok();
}

// ---------------------------------------------------------------------------
// Running

namespace {

// Residual of a strict form after fixing its first block to `values`.
Formula strict_residual(const StrictForm& s, const std::vector<std::uint64_t>& values) {
  Formula res = s.matrix;
  for (std::size_t r = s.blocks.size(); r-- > 1;) {
    const StrictBlock& b = s.blocks[r];
    for (std::size_t i = b.vars.size(); i-- > 0;) {
      res = b.universal ? Formula::all_le(b.vars[i], b.bounds[i], res)
                        : Formula::ex_le(b.vars[i], b.bounds[i], res);
    }
  }
  if (!s.blocks.empty()) {
    std::map<std::string, Term> sub;
    for (std::size_t i = 0; i < s.blocks[0].vars.size(); ++i)
      sub[s.blocks[0].vars[i]] = Term::num(values[i]);
    res = substitute(res, sub);
  }
  return res;
}

}  // namespace

RunResult run_flow(const DetFlow& f, const Env& input, const std::vector<std::uint64_t>& given,
                   const Cap& cap, const Signature& sig) {
  FlowPairs P = pairs_of(f, sig);
  Budget bud(cap.budget);
  RunResult r;
  std::uint64_t T = eval_term(f.length, input, sig, bud);

  auto first_block = [](const StrictForm& s) -> std::vector<std::string> {
    return s.blocks.empty() ? std::vector<std::string>{} : s.blocks[0].vars;
  };
  auto eval_row = [&](const WitnessList& w, const std::vector<std::string>& outs,
                      const Env& env) {
    std::vector<std::uint64_t> vals;
    if (w.empty()) return vals;
    if (w[0].size() != outs.size()) throw FlowError("run_flow: malformed witness row");
    vals.reserve(outs.size());
    for (const Term& t : w[0]) vals.push_back(eval_term(t, env, sig, bud));
    return vals;
  };

  bool backward = f.cls.kind == FormulaClass::Kind::Pi;
  if (!backward) {
    // Forward witness transport.
    const auto src0 = first_block(P.e_fwd.src);
    if (given.size() != src0.size())
      throw FlowError("run_flow: expected " + std::to_string(src0.size()) +
                      " input values for the start formula's first block");
    Env env = input;
    for (std::size_t i = 0; i < src0.size(); ++i) env.set(src0[i], given[i]);
    std::vector<std::uint64_t> h = eval_row(f.e_fwd, first_block(P.e_fwd.tgt), env);
    r.trace.push_back(h);
    const auto selfsrc0 = first_block(P.self.src);
    const auto selftgt0 = first_block(P.self.tgt);
    for (std::uint64_t c = 0; c < T; ++c) {
      Env env2 = input;
      env2.set(f.counter, c);
      for (std::size_t i = 0; i < selfsrc0.size(); ++i) env2.set(selfsrc0[i], h[i]);
      h = eval_row(f.step, selftgt0, env2);
      r.trace.push_back(h);
    }
    Env env3 = input;
    const auto gsrc0 = first_block(P.g_fwd.src);
    for (std::size_t i = 0; i < gsrc0.size(); ++i) env3.set(gsrc0[i], h[i]);
    r.values = eval_row(f.g_fwd, first_block(P.g_fwd.tgt), env3);
    StrictForm send = P.g_fwd.tgt;
    for (const std::string& n : first_block(send)) r.vars.push_back(n);
    // Validate: bounds, then the residual decides true.
    bool ok = true;
    std::string why;
    if (!send.blocks.empty()) {
      for (std::size_t i = 0; i < send.blocks[0].vars.size(); ++i) {
        std::uint64_t bv = eval_term(send.blocks[0].bounds[i], input, sig, bud);
        if (r.values[i] > bv) {
          ok = false;
          why = "transported witness exceeds the bound of " + send.blocks[0].vars[i];
          break;
        }
      }
    }
    if (ok) {
      Formula res = strict_residual(send, r.values);
      ok = decide(res, input, cap, sig, bud);
      if (!ok) why = "transported witness does not satisfy the end formula";
    }
    r.validated = ok;
    r.note = ok ? "witness transported forward" : why;
  } else {
    // Backward falsifier transport.
    const auto tgt0 = first_block(P.g_fwd.tgt);
    if (given.size() != tgt0.size())
      throw FlowError("run_flow: expected " + std::to_string(tgt0.size()) +
                      " falsifier values for the end formula's first block");
    Env env = input;
    for (std::size_t i = 0; i < tgt0.size(); ++i) env.set(tgt0[i], given[i]);
    std::vector<std::uint64_t> h = eval_row(f.g_fwd, first_block(P.g_fwd.src), env);
    std::vector<std::vector<std::uint64_t>> rev;
    rev.push_back(h);
    const auto selfsrc0 = first_block(P.self.src);
    const auto selftgt0 = first_block(P.self.tgt);
    for (std::uint64_t c = T; c-- > 0;) {
      Env env2 = input;
      env2.set(f.counter, c);
      for (std::size_t i = 0; i < selftgt0.size(); ++i) env2.set(selftgt0[i], h[i]);
      h = eval_row(f.step, selfsrc0, env2);
      rev.push_back(h);
    }
    Env env3 = input;
    const auto etgt0 = first_block(P.e_fwd.tgt);
    for (std::size_t i = 0; i < etgt0.size(); ++i) env3.set(etgt0[i], h[i]);
    r.values = eval_row(f.e_fwd, first_block(P.e_fwd.src), env3);
    PairView ev = view_of(P.e_fwd);
    for (const std::string& n : first_block(P.e_fwd.src)) r.vars.push_back(ev.unprime.at(n));
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) r.trace.push_back(*it);
    StrictForm sstart = to_strict(f.start, f.cls, sig);
    bool ok = true;
    std::string why;
    if (!sstart.blocks.empty()) {
      for (std::size_t i = 0; i < sstart.blocks[0].vars.size(); ++i) {
        std::uint64_t bv = eval_term(sstart.blocks[0].bounds[i], input, sig, bud);
        if (r.values[i] > bv) {
          ok = false;
          why = "transported falsifier exceeds the bound of " + sstart.blocks[0].vars[i];
          break;
        }
      }
    }
    if (ok) {
      Formula res = strict_residual(sstart, r.values);
      ok = !decide(res, input, cap, sig, bud);
      if (!ok) why = "transported falsifier does not refute the start formula";
    }
    r.validated = ok;
    r.note = ok ? "falsifier transported backward" : why;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Basic constructors

namespace {

FormulaClass fit_class(FormulaClass::Kind kind, int at_least,
                       std::initializer_list<const Formula*> fs) {
  bool all_open = true;
  for (const Formula* f : fs) {
    Levels l = least_levels(*f);
    if (!l.classifiable()) throw FlowError("formula with unbounded quantifiers in a flow");
    all_open = all_open && l.sigma == 0 && l.pi == 0;
  }
  if (kind == FormulaClass::Kind::Open) {
    if (all_open && at_least == 0) return FormulaClass::open();
    kind = FormulaClass::Kind::Sigma;
  }
  for (int k = std::max(at_least, 1); k < at_least + 64; ++k) {
    FormulaClass c = kind == FormulaClass::Kind::Sigma ? FormulaClass::sigma(k)
                                                       : FormulaClass::pi(k);
    bool ok = true;
    for (const Formula* f : fs) {
      Levels l = least_levels(*f);
      ok = ok && c.admits(l.sigma, l.pi);
    }
    if (ok) return c;
  }
  throw FlowError("no class fits the construction");
}

std::string pick_counter(const std::set<std::string>& taken) {
  return fresh_name("u", taken);
}

}  // namespace

DetFlow constant_flow(const Formula& a, FormulaClass cls, const Signature& sig) {
  std::set<std::string> avoid;
  for (const auto& v : free_vars(a)) avoid.insert(v.name);
  Formula a2 = freshen_bound(a, avoid);
  DetFlow f;
  f.cls = cls;
  f.counter = pick_counter(avoid);
  f.length = Term::num(0);
  f.start = a2;
  f.end = a2;
  f.interp = a2;
  FlowPairs P = pairs_of(f, sig);
  f.e_fwd = synth_witness(P.e_fwd);
  f.e_bwd = synth_witness(P.e_bwd);
  f.g_fwd = synth_witness(P.g_fwd);
  f.g_bwd = synth_witness(P.g_bwd);
  f.step = synth_witness(P.self);
  return f;
}

namespace {

DetFlow step_flow_impl(const Formula& a, const Formula& b, FormulaClass cls,
                       const WitnessList* raw, const std::map<std::string, Term>* overrides,
                       const Signature& sig) {
  std::set<std::string> avoid;
  for (const auto& v : free_vars(a)) avoid.insert(v.name);
  for (const auto& v : free_vars(b)) avoid.insert(v.name);
  Formula a2 = freshen_bound(a, avoid);
  Formula b2 = freshen_bound(b, avoid);
  std::string u = pick_counter(avoid);

  DetFlow f;
  f.cls = cls;
  f.counter = u;
  f.length = Term::num(1);
  f.start = a2;
  f.end = b2;
  f.interp = Formula::land(Formula::imp(Formula::eq(Term::var(u), Term::num(0)), a2),
                           Formula::imp(Formula::le(Term::num(1), Term::var(u)), b2));

  StrictPair core = make_strict_pair(a2, b2, cls, sig);
  WitnessList coreW;
  if (raw) {
    coreW = *raw;
  } else {
    coreW = synth_witness(core, overrides ? *overrides : std::map<std::string, Term>{});
  }
  PairView corev = view_of(core);
  auto coreidx = index_witness(corev, coreW);

  // The A and B pieces keep their strict names inside the interpolant, so the
  // endpoint equivalences are piece identities (the other piece is dead under
  // its counter guard).
  std::set<std::string> asrc, btgt;  // core-pair names per side
  for (const auto& blk : core.src.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) asrc.insert(n);
  for (const auto& blk : core.tgt.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) btgt.insert(n);

  FlowPairs P = pairs_of(f, sig);
  f.e_fwd = identity_witness(P.e_fwd, asrc);
  f.e_bwd = identity_witness(P.e_bwd, asrc);
  f.g_fwd = identity_witness(P.g_fwd, btgt);
  f.g_bwd = identity_witness(P.g_bwd, btgt);

  // core namespace -> self namespace
  std::map<std::string, Term> m;
  for (const std::string& n : asrc) {
    std::string base = corev.unprime.at(n);
    m[n] = Term::var(pair_name(P.self, base, true));
  }
  for (const std::string& n : btgt) m[n] = Term::var(n);

  PairView selfv = view_of(P.self);
  f.step = build_witness(selfv, [&](const std::string& n, const VarInfo& info) -> Term {
    std::string base = selfv.unprime.at(n);
    if (is_dummy(base)) return Term::num(0);
    if (info.src) {  // universal rounds: answer the A piece's challenges
      std::string cn = pair_name(core, base, true);
      if (asrc.count(cn)) {
        auto it = coreidx.find(cn);
        if (it != coreidx.end()) return clamp_for(selfv, info, retarget(it->second, m));
      }
      return Term::num(0);
    }
    if (btgt.count(base)) {  // existential rounds: produce the B piece's witnesses
      auto it = coreidx.find(base);
      if (it != coreidx.end()) return clamp_for(selfv, info, retarget(it->second, m));
    }
    return Term::num(0);
  });
  return f;
}

}  // namespace

DetFlow step_flow(const Formula& a, const Formula& b, FormulaClass cls,
                  const std::map<std::string, Term>& overrides, const Signature& sig) {
  return step_flow_impl(a, b, cls, nullptr, &overrides, sig);
}

DetFlow step_flow_core(const Formula& a, const Formula& b, FormulaClass cls,
                       const WitnessList& core, const Signature& sig) {
  return step_flow_impl(a, b, cls, &core, nullptr, sig);
}

namespace detail {

DetFlow ident_step(const Formula& a, const Formula& b, FormulaClass cls,
                   const std::map<std::string, std::string>& tgt_to_src,
                   const Signature& sig) {
  StrictPair core = make_strict_pair(a, b, cls, sig);
  PairView corev = view_of(core);
  std::map<std::string, std::string> src_to_tgt;
  for (const auto& [t, s] : tgt_to_src) src_to_tgt[s] = t;
  WitnessList w = build_witness(corev, [&](const std::string& n, const VarInfo& info) -> Term {
    std::string base = corev.unprime.at(n);
    if (is_dummy(base)) return Term::num(0);
    if (info.src) {
      // Challenge the source variable with its target partner's value.
      std::string tbase = src_to_tgt.count(base) ? src_to_tgt.at(base) : base;
      if (corev.has(tbase) && !corev.info(tbase).src)
        return clamp_for(corev, info, Term::var(tbase));
      return Term::num(0);
    }
    std::string sbase = tgt_to_src.count(base) ? tgt_to_src.at(base) : base;
    std::string sname = pair_name(core, sbase, true);
    if (corev.has(sname) && corev.info(sname).src)
      return clamp_for(corev, info, Term::var(sname));
    return Term::num(0);
  });
  return step_flow_core(a, b, cls, w, sig);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conjunction / disjunction application

namespace {

DetFlow apply_side(const DetFlow& fin, const Formula& c, bool conj, const Signature& sig) {
  // Hygiene: the attached formula must not capture or collide with the flow.
  std::set<std::string> avoid;
  for (const auto& v : free_vars(c)) avoid.insert(v.name);
  DetFlow f = rename_flow(fin, avoid, sig);
  for (const auto& n : flow_names(f)) avoid.insert(n);
  Formula c2 = freshen_bound(c, avoid);

  auto join = [&](const Formula& x) {
    return conj ? Formula::land(x, c2) : Formula::lor(x, c2);
  };
  DetFlow g;
  g.counter = f.counter;
  g.length = f.length;
  g.start = join(f.start);
  g.end = join(f.end);
  g.interp = join(f.interp);
  g.cls = fit_class(f.cls.kind, f.cls.level, {&g.start, &g.end, &g.interp});

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);

  auto transport = [&](const StrictPair& fromP, const WitnessList& fromW,
                       const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    std::map<std::string, Term> m = shared_name_map(fromP, toP, false);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      // Part carried over from the underlying flow?
      std::string fname = pair_name(fromP, base, info.src);
      if (fromv.has(fname) && fromv.info(fname).src == info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) return clamp_for(tov, info, retarget(it->second, m));
        // Input on the from-pair side: identity handled below.
      }
      // Attached-formula part (present on both sides): identity.
      if (info.src) {
        if (tov.has(base) && !tov.info(base).src)
          return clamp_for(tov, info, Term::var(base));
        return Term::num(0);
      }
      std::string sname = pair_name(toP, base, true);
      if (tov.has(sname) && tov.info(sname).src)
        return clamp_for(tov, info, Term::var(sname));
      return Term::num(0);
    });
  };

  g.e_fwd = transport(Pf.e_fwd, f.e_fwd, Pg.e_fwd);
  g.e_bwd = transport(Pf.e_bwd, f.e_bwd, Pg.e_bwd);
  g.g_fwd = transport(Pf.g_fwd, f.g_fwd, Pg.g_fwd);
  g.g_bwd = transport(Pf.g_bwd, f.g_bwd, Pg.g_bwd);
  g.step = transport(Pf.self, f.step, Pg.self);
  return g;
}

}  // namespace

DetFlow conj_apply(const DetFlow& f, const Formula& c, const Signature& sig) {
  return apply_side(f, c, true, sig);
}

DetFlow disj_apply(const DetFlow& f, const Formula& c, const Signature& sig) {
  return apply_side(f, c, false, sig);
}

NdFlow conj_apply(const NdFlow& f, const Formula& c) {
  NdFlow g = f;
  g.start = Formula::land(f.start, c);
  g.end = Formula::land(f.end, c);
  g.interp = Formula::land(f.interp, c);
  g.cls = fit_class(f.cls.kind, f.cls.level, {&g.start, &g.end, &g.interp});
  return g;
}

NdFlow disj_apply(const NdFlow& f, const Formula& c) {
  NdFlow g = f;
  g.start = Formula::lor(f.start, c);
  g.end = Formula::lor(f.end, c);
  g.interp = Formula::lor(f.interp, c);
  g.cls = fit_class(f.cls.kind, f.cls.level, {&g.start, &g.end, &g.interp});
  return g;
}

// ---------------------------------------------------------------------------
// Weak gluing

DetFlow weak_glue(const DetFlow& f1in, const DetFlow& f2in, const Signature& sig) {
  if (f1in.cls != f2in.cls)
    throw FlowError("weak_glue: flows have different classes (" + f1in.cls.to_string() +
                    " vs " + f2in.cls.to_string() + "); coarsen first");
  std::set<std::string> avoid;
  for (const auto& n : flow_names(f1in)) avoid.insert(n);
  for (const auto& n : flow_names(f2in)) avoid.insert(n);
  DetFlow f1 = rename_flow(f1in, avoid, sig);
  for (const auto& n : flow_names(f1)) avoid.insert(n);
  DetFlow f2 = rename_flow(f2in, avoid, sig);
  for (const auto& n : flow_names(f2)) avoid.insert(n);

  if (!alpha_eq(f1.end, f2.start))
    throw FlowError("weak_glue: the first flow's end and the second flow's start differ");

  std::string u = pick_counter(avoid);
  avoid.insert(u);
  Term t1 = f1.length, t2 = f2.length;
  Term tu = Term::var(u);

  // Middle piece: a binder-fresh copy of the shared endpoint.
  Formula M = freshen_bound(f1.end, avoid);

  Formula H1u = substitute(f1.interp, f1.counter, tu);
  Formula H2u = substitute(f2.interp, f2.counter, monus(tu, t1 + Term::num(2)));

  DetFlow g;
  g.cls = f1.cls;
  g.counter = u;
  g.length = t1 + t2 + Term::num(2);
  g.start = f1.start;
  g.end = f2.end;
  g.interp = Formula::land(
      Formula::land(Formula::imp(Formula::le(tu, t1), H1u),
                    Formula::imp(Formula::eq(tu, t1 + Term::num(1)), M)),
      Formula::imp(Formula::le(t1 + Term::num(2), tu), H2u));

  FlowPairs P1 = pairs_of(f1, sig);
  FlowPairs P2 = pairs_of(f2, sig);
  FlowPairs Pg = pairs_of(g, sig);

  // Simple transports for the endpoint equivalences (dead pieces get zeros).
  auto transport = [&](const StrictPair& fromP, const WitnessList& fromW,
                       const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    std::map<std::string, Term> m = shared_name_map(fromP, toP, false);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      std::string fname = pair_name(fromP, base, info.src);
      if (fromv.has(fname) && fromv.info(fname).src == info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) return clamp_for(tov, info, retarget(it->second, m));
      }
      return Term::num(0);
    });
  };
  g.e_fwd = transport(P1.e_fwd, f1.e_fwd, Pg.e_fwd);
  g.e_bwd = transport(P1.e_bwd, f1.e_bwd, Pg.e_bwd);
  g.g_fwd = transport(P2.g_fwd, f2.g_fwd, Pg.g_fwd);
  g.g_bwd = transport(P2.g_bwd, f2.g_bwd, Pg.g_bwd);

  // Step: dispatch on the segment of u.
  PairView selfv = view_of(Pg.self);

  StrictForm sM = to_strict(M, g.cls, sig);
  std::set<std::string> h1names, h2names, mnames;
  for (const auto& blk : P1.h.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) h1names.insert(n);
  for (const auto& blk : P2.h.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) h2names.insert(n);
  for (const auto& blk : sM.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) mnames.insert(n);

  // f1 step: substitute its counter, rename into the glued self pair.
  PairView s1v = view_of(P1.self);
  auto s1idx = index_witness(s1v, f1.step);
  std::map<std::string, Term> m1 = shared_name_map(P1.self, Pg.self, false);
  // f1 g_fwd: source side feeds the H1 piece, target side the M piece
  // (positionally the strict form of f1.end).
  PairView g1v = view_of(P1.g_fwd);
  auto g1idx = index_witness(g1v, f1.g_fwd);
  std::map<std::string, std::string> zipEM = zip_names(P1.g_fwd.tgt, sM);
  std::map<std::string, std::string> invZipEM;
  for (const auto& [e, mn] : zipEM) invZipEM[mn] = e;
  std::map<std::string, Term> mg1;
  for (const auto& [name, info] : g1v.vars) {
    if (info.src) {
      mg1[name] = Term::var(pair_name(Pg.self, info.base, true));
    } else {
      auto it = zipEM.find(name);
      if (it != zipEM.end()) mg1[name] = Term::var(it->second);
    }
  }
  // f2 e_fwd: source side is the M piece (positional partner of f2.start),
  // target side the H2 piece.
  PairView e2v = view_of(P2.e_fwd);
  auto e2idx = index_witness(e2v, f2.e_fwd);
  std::map<std::string, std::string> zipSM = zip_names(P2.e_fwd.src, sM);
  std::map<std::string, std::string> invZipSM;
  for (const auto& [s, mn] : zipSM) invZipSM[mn] = s;
  std::map<std::string, Term> me2;
  for (const auto& [name, info] : e2v.vars) {
    if (info.src) {
      auto it = zipSM.find(name);
      if (it != zipSM.end())
        me2[name] = Term::var(pair_name(Pg.self, it->second, true));
    } else {
      me2[name] = Term::var(name);
    }
  }
  // f2 step.
  PairView s2v = view_of(P2.self);
  auto s2idx = index_witness(s2v, f2.step);
  std::map<std::string, Term> m2 = shared_name_map(P2.self, Pg.self, false);
  Term inner2 = monus(tu, t1 + Term::num(2));

  Term chiA = char_term(Formula::le(tu + Term::num(1), t1));
  Term chiB = char_term(Formula::eq(tu, t1));
  Term chiC = char_term(Formula::eq(tu, t1 + Term::num(1)));

  g.step = build_witness(selfv, [&](const std::string& n, const VarInfo& info) -> Term {
    std::string base = selfv.unprime.at(n);
    if (is_dummy(base)) return Term::num(0);
    Term zero = Term::num(0);
    Term ta = zero, tb = zero, tc = zero, td = zero;
    if (h1names.count(base)) {
      std::string s1name = pair_name(P1.self, base, info.src);
      if (auto it = s1idx.find(s1name); it != s1idx.end())
        ta = retarget(substitute(it->second, f1.counter, tu), m1);
      if (info.src) {
        std::string gname = pair_name(P1.g_fwd, base, true);
        if (auto it = g1idx.find(gname); it != g1idx.end())
          tb = retarget(it->second, mg1);
      }
    } else if (mnames.count(base)) {
      if (!info.src) {
        // target role in case b (f1's final equivalence lands on M)
        auto eb = invZipEM.find(base);
        if (eb != invZipEM.end())
          if (auto it = g1idx.find(eb->second); it != g1idx.end())
            tb = retarget(it->second, mg1);
      } else {
        // source role in case c (f2's initial equivalence reads M)
        auto sb = invZipSM.find(base);
        if (sb != invZipSM.end()) {
          std::string sname = pair_name(P2.e_fwd, sb->second, true);
          if (auto it = e2idx.find(sname); it != e2idx.end())
            tc = retarget(it->second, me2);
        }
      }
    } else if (h2names.count(base)) {
      if (!info.src) {
        if (auto it = e2idx.find(base); it != e2idx.end()) tc = retarget(it->second, me2);
      }
      std::string s2name = pair_name(P2.self, base, info.src);
      if (auto it = s2idx.find(s2name); it != s2idx.end())
        td = retarget(substitute(it->second, f2.counter, inner2), m2);
    }
    Term out = t_sel(chiA, ta, t_sel(chiB, tb, t_sel(chiC, tc, td)));
    return clamp_for(selfv, info, out);
  });
  return g;
}

DetFlow weak_glue(std::vector<DetFlow> chain, const Signature& sig) {
  if (chain.empty()) throw FlowError("weak_glue: empty chain");
  DetFlow acc = std::move(chain.front());
  for (std::size_t i = 1; i < chain.size(); ++i) acc = weak_glue(acc, chain[i], sig);
  return acc;
}

NdFlow weak_glue(const NdFlow& f1, const NdFlow& f2) {
  if (f1.cls != f2.cls) throw FlowError("weak_glue: flows have different classes");
  if (!alpha_eq(f1.end, f2.start))
    throw FlowError("weak_glue: the first flow's end and the second flow's start differ");
  std::set<std::string> avoid;
  std::string u = fresh_name("u", avoid);
  Term tu = Term::var(u);
  Term t1 = f1.length;
  NdFlow g;
  g.cls = f1.cls;
  g.counter = u;
  g.length = f1.length + f2.length + Term::num(2);
  g.start = f1.start;
  g.end = f2.end;
  g.interp = Formula::land(
      Formula::land(
          Formula::imp(Formula::le(tu, t1), substitute(f1.interp, f1.counter, tu)),
          Formula::imp(Formula::eq(tu, t1 + Term::num(1)), f1.end)),
      Formula::imp(Formula::le(t1 + Term::num(2), tu),
                   substitute(f2.interp, f2.counter, monus(tu, t1 + Term::num(2)))));
  return g;
}

// ---------------------------------------------------------------------------
// Bounded quantifier lifts

namespace {

DetFlow lift_impl(const DetFlow& fin, const std::string& z, const Term& t, bool universal,
                  const Signature& sig) {
  std::set<std::string> avoid;
  avoid.insert(z);
  for (const auto& v : free_vars(t)) avoid.insert(v.name);
  DetFlow f = rename_flow(fin, avoid, sig);
  if (f.counter == z || free_vars(t).count(VarRef{f.counter, Sort::Nat})) {
    // The counter must stay independent of the family parameter and range.
    std::set<std::string> taken = flow_names(f);
    taken.insert(z);
    for (const auto& v : free_vars(t)) taken.insert(v.name);
    std::string c2 = fresh_name("u", taken);
    DetFlow f2 = f;
    f2.counter = c2;
    f2.interp = substitute(f.interp, f.counter, Term::var(c2));
    for (auto& round : f2.step)
      for (auto& tm : round) tm = substitute(tm, f.counter, Term::var(c2));
    f = f2;
  }

  Term len = f.length;
  bool len_uses_z = free_vars(len).count(VarRef{z, Sort::Nat}) != 0;
  Term L = len;
  if (len_uses_z) {
    auto mm = monotone_majorizer(len, sig);
    if (!mm)
      throw FlowError("lift: the family length has no monotone majorizer");
    L = substitute(*mm, z, t);
  }

  auto wrap = [&](const Formula& x) {
    return universal ? Formula::all_le(z, t, x) : Formula::ex_le(z, t, x);
  };
  Term cvar = Term::var(f.counter);
  DetFlow g;
  g.counter = f.counter;
  g.length = L;
  g.start = wrap(f.start);
  g.end = wrap(f.end);
  g.interp = wrap(substitute(f.interp, f.counter, t_min(cvar, len)));
  g.cls = fit_class(f.cls.kind, f.cls.level, {&g.start, &g.end, &g.interp});

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);

  // Round legality: every transported reference must not move later than the
  // output it feeds.  (The universal prefix shifts existential-topped pieces
  // two rounds down but universal-topped pieces not at all.)
  auto check_legal = [&](const StrictPair& fromP, const WitnessList& fromW,
                         const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    for (const auto& [name, info] : fromv.vars) {
      if (!info.output) continue;
      auto it = idx.find(name);
      if (it == idx.end()) continue;
      std::string toname = pair_name(toP, fromv.unprime.at(name), info.src);
      if (!tov.has(toname)) continue;
      std::size_t out_round = tov.info(toname).round;
      for (const auto& v : free_vars(it->second)) {
        if (!fromv.has(v.name)) continue;
        const VarInfo& ref = fromv.info(v.name);
        std::string toref = pair_name(toP, fromv.unprime.at(v.name), ref.src);
        if (!tov.has(toref)) continue;
        const VarInfo& refinfo = tov.info(toref);
        bool legal = refinfo.round < tov.info(toname).round ||
                     (refinfo.round == tov.info(toname).round && !refinfo.output);
        (void)out_round;
        if (!legal)
          throw FlowError("lift: witness term for " + name + " references " + v.name +
                          ", which moves to a later round under the quantifier prefix");
      }
    }
  };
  check_legal(Pf.e_fwd, f.e_fwd, Pg.e_fwd);
  check_legal(Pf.e_bwd, f.e_bwd, Pg.e_bwd);
  check_legal(Pf.g_fwd, f.g_fwd, Pg.g_fwd);
  check_legal(Pf.g_bwd, f.g_bwd, Pg.g_bwd);
  check_legal(Pf.self, f.step, Pg.self);

  auto transport = [&](const StrictPair& fromP, const WitnessList& fromW,
                       const StrictPair& toP, bool step_mode) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    std::map<std::string, Term> m = shared_name_map(fromP, toP, false);
    Term chi = char_term(Formula::le(cvar + Term::num(1), len));
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      if (base == z) {
        // The lifted variable answers itself across the pair.
        if (info.src) {
          if (tov.has(z) && !tov.info(z).src) return Term::var(z);
          return Term::num(0);
        }
        std::string sname = pair_name(toP, z, true);
        if (tov.has(sname) && tov.info(sname).src) return Term::var(sname);
        return Term::num(0);
      }
      std::string fname = pair_name(fromP, base, info.src);
      if (fromv.has(fname) && fromv.info(fname).src == info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) {
          Term carried = retarget(it->second, m);
          if (!step_mode) return clamp_for(tov, info, carried);
          // Threads past their own length idle on their final formula.
          Term ident;
          if (info.src) {
            ident = tov.has(base) && !tov.info(base).src ? Term::var(base) : Term::num(0);
          } else {
            std::string sname = pair_name(toP, base, true);
            ident = tov.has(sname) && tov.info(sname).src ? Term::var(sname) : Term::num(0);
          }
          return clamp_for(tov, info, t_sel(chi, carried, ident));
        }
      }
      return Term::num(0);
    });
  };

  g.e_fwd = transport(Pf.e_fwd, f.e_fwd, Pg.e_fwd, false);
  g.e_bwd = transport(Pf.e_bwd, f.e_bwd, Pg.e_bwd, false);
  g.g_fwd = transport(Pf.g_fwd, f.g_fwd, Pg.g_fwd, false);
  g.g_bwd = transport(Pf.g_bwd, f.g_bwd, Pg.g_bwd, false);
  g.step = transport(Pf.self, f.step, Pg.self, true);
  return g;
}

}  // namespace

DetFlow all_lift(const DetFlow& f, const std::string& var, const Term& bound,
                 const Signature& sig) {
  return lift_impl(f, var, bound, true, sig);
}

DetFlow ex_lift(const DetFlow& f, const std::string& var, const Term& bound,
                const Signature& sig) {
  return lift_impl(f, var, bound, false, sig);
}

// ---------------------------------------------------------------------------
// Ambient substitution, coarsening, dual

DetFlow flow_subst(const DetFlow& fin, const std::string& var, const Term& repl,
                   const Signature& sig) {
  std::set<std::string> avoid;
  avoid.insert(var);
  for (const auto& v : free_vars(repl)) avoid.insert(v.name);
  DetFlow f = rename_flow(fin, avoid, sig);
  if (f.counter == var) throw FlowError("flow_subst: cannot substitute the counter");
  DetFlow g = f;
  g.start = substitute(f.start, var, repl);
  g.end = substitute(f.end, var, repl);
  g.interp = substitute(f.interp, var, repl);
  g.length = substitute(f.length, var, repl);
  auto subst_list = [&](WitnessList w) {
    for (auto& round : w)
      for (auto& t : round) t = substitute(t, var, repl);
    return w;
  };
  g.e_fwd = subst_list(f.e_fwd);
  g.e_bwd = subst_list(f.e_bwd);
  g.g_fwd = subst_list(f.g_fwd);
  g.g_bwd = subst_list(f.g_bwd);
  g.step = subst_list(f.step);
  return g;
}

DetFlow coarsen(const DetFlow& f, FormulaClass cls, const Signature& sig) {
  if (f.cls == cls) return f;
  // Same-kind level raises keep every variable's round; cross-kind raises by at
  // least one level prepend a dummy round, shifting every variable uniformly.
  // Either way relative round order is preserved, so witnesses stay legal.
  bool ok = f.cls.kind == FormulaClass::Kind::Open ||
            (f.cls.kind == cls.kind && cls.level >= f.cls.level) ||
            (f.cls.kind != cls.kind && cls.level >= f.cls.level + 1);
  if (!ok || cls.kind == FormulaClass::Kind::Open)
    throw FlowError("coarsen: cannot move " + f.cls.to_string() + " to " + cls.to_string());
  DetFlow g = f;
  g.cls = cls;
  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);
  auto lift = [&](const StrictPair& fromP, const WitnessList& fromW, const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      std::string fname = pair_name(fromP, base, info.src);
      if (fromv.has(fname)) {
        auto it = idx.find(fname);
        if (it != idx.end()) return it->second;
      }
      return Term::num(0);
    });
  };
  g.e_fwd = lift(Pf.e_fwd, f.e_fwd, Pg.e_fwd);
  g.e_bwd = lift(Pf.e_bwd, f.e_bwd, Pg.e_bwd);
  g.g_fwd = lift(Pf.g_fwd, f.g_fwd, Pg.g_fwd);
  g.g_bwd = lift(Pf.g_bwd, f.g_bwd, Pg.g_bwd);
  g.step = lift(Pf.self, f.step, Pg.self);
  return g;
}

DetFlow dual_flow(const DetFlow& fin, const Signature& sig) {
  std::set<std::string> avoid;
  DetFlow f = rename_flow(fin, avoid, sig);  // binder hygiene for the transports
  DetFlow d;
  switch (f.cls.kind) {
    case FormulaClass::Kind::Open: d.cls = FormulaClass::open(); break;
    case FormulaClass::Kind::Sigma: d.cls = FormulaClass::pi(f.cls.level); break;
    case FormulaClass::Kind::Pi: d.cls = FormulaClass::sigma(f.cls.level); break;
  }
  d.counter = f.counter;
  d.length = f.length;
  d.start = nnf(Formula::lnot(f.end));
  d.end = nnf(Formula::lnot(f.start));
  Term cvar = Term::var(f.counter);
  d.interp = substitute(nnf(Formula::lnot(f.interp)), f.counter, monus(f.length, cvar));

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pd = pairs_of(d, sig);

  // Witness transport: source and target swap roles; each transported term's
  // variable references move to the opposite side of the dual pair.
  auto transport = [&](const StrictPair& fromP, const WitnessList& fromW,
                       const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    std::map<std::string, Term> m = shared_name_map(fromP, toP, true);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      std::string fname = pair_name(fromP, base, !info.src);
      if (fromv.has(fname) && fromv.info(fname).src == !info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) return clamp_for(tov, info, retarget(it->second, m));
      }
      return Term::num(0);
    });
  };

  d.e_fwd = transport(Pf.g_fwd, f.g_fwd, Pd.e_fwd);
  d.e_bwd = transport(Pf.g_bwd, f.g_bwd, Pd.e_bwd);
  d.g_fwd = transport(Pf.e_fwd, f.e_fwd, Pd.g_fwd);
  d.g_bwd = transport(Pf.e_bwd, f.e_bwd, Pd.g_bwd);

  // Steps reverse: the dual step at u replays the original step at L-1-u.
  {
    PairView fromv = view_of(Pf.self);
    PairView tov = view_of(Pd.self);
    auto idx = index_witness(fromv, f.step);
    std::map<std::string, Term> m = shared_name_map(Pf.self, Pd.self, true);
    Term flipped = monus(f.length, cvar + Term::num(1));
    d.step = build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      std::string fname = pair_name(Pf.self, base, !info.src);
      if (fromv.has(fname) && fromv.info(fname).src == !info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) {
          Term t = substitute(it->second, f.counter, flipped);
          return clamp_for(tov, info, retarget(t, m));
        }
      }
      return Term::num(0);
    });
  }
  return d;
}

// ---------------------------------------------------------------------------
// Guarded application

namespace detail {

DetFlow guarded_apply(const DetFlow& fin, const Formula& guard, const Formula& carried,
                      const Signature& sig) {
  if (!guard.is_open()) throw FlowError("guarded_apply needs an open guard");
  std::set<std::string> avoid;
  for (const auto& v : free_vars(guard)) avoid.insert(v.name);
  for (const auto& v : free_vars(carried)) avoid.insert(v.name);
  for (const auto& n : bound_vars(carried)) avoid.insert(n);
  DetFlow f = rename_flow(fin, avoid, sig);
  for (const auto& n : flow_names(f)) avoid.insert(n);
  Formula c2 = freshen_bound(carried, avoid);

  auto wrap = [&](const Formula& x) {
    return Formula::land(c2, Formula::imp(guard, x));
  };
  DetFlow g;
  g.counter = f.counter;
  g.length = f.length;
  g.start = wrap(f.start);
  g.end = wrap(f.end);
  g.interp = wrap(f.interp);
  g.cls = fit_class(f.cls.kind, f.cls.level, {&g.start, &g.end, &g.interp});

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);

  auto transport = [&](const StrictPair& fromP, const WitnessList& fromW,
                       const StrictPair& toP) {
    PairView fromv = view_of(fromP);
    PairView tov = view_of(toP);
    auto idx = index_witness(fromv, fromW);
    std::map<std::string, Term> m = shared_name_map(fromP, toP, false);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      std::string fname = pair_name(fromP, base, info.src);
      if (fromv.has(fname) && fromv.info(fname).src == info.src) {
        auto it = idx.find(fname);
        if (it != idx.end()) return clamp_for(tov, info, retarget(it->second, m));
      }
      // Carried part: identity.
      if (info.src) {
        if (tov.has(base) && !tov.info(base).src)
          return clamp_for(tov, info, Term::var(base));
        return Term::num(0);
      }
      std::string sname = pair_name(toP, base, true);
      if (tov.has(sname) && tov.info(sname).src)
        return clamp_for(tov, info, Term::var(sname));
      return Term::num(0);
    });
  };
  g.e_fwd = transport(Pf.e_fwd, f.e_fwd, Pg.e_fwd);
  g.e_bwd = transport(Pf.e_bwd, f.e_bwd, Pg.e_bwd);
  g.g_fwd = transport(Pf.g_fwd, f.g_fwd, Pg.g_fwd);
  g.g_bwd = transport(Pf.g_bwd, f.g_bwd, Pg.g_bwd);
  g.step = transport(Pf.self, f.step, Pg.self);
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strong gluing

DetFlow strong_glue(const DetFlow& famin, const std::string& param, const Term& count,
                    const Signature& sig) {
  std::set<std::string> avoid;
  avoid.insert(param);
  for (const auto& v : free_vars(count)) avoid.insert(v.name);
  DetFlow f = rename_flow(famin, avoid, sig);
  for (const auto& n : flow_names(f)) avoid.insert(n);

  Term y1 = Term::var(param) + Term::num(1);
  if (!alpha_eq(f.end, substitute(f.start, param, y1)))
    throw FlowError("strong_glue: family end is not the start at the next stage");

  // Counter independent of the parameter.
  if (f.counter == param) throw FlowError("strong_glue: counter equals the parameter");
  std::string u = pick_counter(avoid);
  avoid.insert(u);
  Term tu = Term::var(u);

  Term len = f.length;
  bool len_uses_y = free_vars(len).count(VarRef{param, Sort::Nat}) != 0;
  Term Lm = len;
  if (len_uses_y) {
    auto mm = monotone_majorizer(len, sig);
    if (!mm) throw FlowError("strong_glue: family length has no monotone majorizer");
    Lm = substitute(*mm, param, count);
  }
  // Segment width Lm + 2: slot 0 anchors the stage formula, slots 1..Lm+1 the
  // family interpolant capped at its own length.
  Term width_minus1 = Lm + Term::num(1);           // quot divides by this + 1
  Term yterm = quot(tu, width_minus1);             // floor(u / (Lm + 2))
  Term rterm = monus(tu, yterm * (Lm + Term::num(2)));

  // Fresh copy of the stage formula for the anchor piece.
  Formula A = freshen_bound(f.start, avoid);

  Formula Hpiece = substitute(f.interp, f.counter, t_min(monus(rterm, Term::num(1)), len));
  Hpiece = substitute(Hpiece, param, yterm);
  Formula Apiece = substitute(A, param, yterm);

  DetFlow g;
  g.cls = f.cls;
  g.counter = u;
  g.length = count * (Lm + Term::num(2));
  g.start = substitute(f.start, param, Term::num(0));
  g.end = substitute(f.start, param, count);
  g.interp = Formula::land(Formula::imp(Formula::le(Term::num(1), rterm), Hpiece),
                           Formula::imp(Formula::eq(rterm, Term::num(0)), Apiece));

  FlowPairs Pf = pairs_of(f, sig);
  FlowPairs Pg = pairs_of(g, sig);
  StrictForm sA = to_strict(A, g.cls, sig);
  StrictForm sStart = to_strict(f.start, g.cls, sig);
  std::map<std::string, std::string> zipStartA = zip_names(sStart, sA);
  std::map<std::string, std::string> invZipStartA;
  for (const auto& [s, a] : zipStartA) invZipStartA[a] = s;
  StrictForm sEnd = to_strict(f.end, g.cls, sig);
  std::map<std::string, std::string> zipEndStart = zip_names(sEnd, sStart);
  std::map<std::string, std::string> aToEnd;  // anchor name -> f.end strict name
  for (const auto& [e, s] : zipEndStart) aToEnd[zipStartA.at(s)] = e;

  std::set<std::string> hnames, anames;
  for (const auto& blk : Pf.h.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) hnames.insert(n);
  for (const auto& blk : sA.blocks)
    for (const auto& n : blk.vars)
      if (!is_dummy(n)) anames.insert(n);

  // Endpoint equivalences: identity between the outer stage formula and the
  // anchor piece (the H piece is dead at segment slot 0).
  auto endpoint = [&](const StrictPair& toP) {
    PairView tov = view_of(toP);
    return build_witness(tov, [&](const std::string& n, const VarInfo& info) -> Term {
      std::string base = tov.unprime.at(n);
      if (is_dummy(base)) return Term::num(0);
      // Partner name on the other side: stage variables meet their anchor copies.
      std::string partner;
      if (auto it = invZipStartA.find(base); it != invZipStartA.end())
        partner = it->second;
      else if (auto it2 = zipStartA.find(base); it2 != zipStartA.end())
        partner = it2->second;
      if (partner.empty()) return Term::num(0);
      if (info.src) {
        if (tov.has(partner) && !tov.info(partner).src)
          return clamp_for(tov, info, Term::var(partner));
        return Term::num(0);
      }
      std::string sname = pair_name(toP, partner, true);
      if (tov.has(sname) && tov.info(sname).src)
        return clamp_for(tov, info, Term::var(sname));
      return Term::num(0);
    });
  };
  g.e_fwd = endpoint(Pg.e_fwd);
  g.e_bwd = endpoint(Pg.e_bwd);
  g.g_fwd = endpoint(Pg.g_fwd);
  g.g_bwd = endpoint(Pg.g_bwd);

  // Step: dispatch on the segment slot r(u).
  PairView selfv = view_of(Pg.self);

  PairView e1v = view_of(Pf.e_fwd);
  auto e1idx = index_witness(e1v, f.e_fwd);
  std::map<std::string, Term> me;  // f.e_fwd names -> glued self names
  for (const auto& [name, info] : e1v.vars) {
    if (info.src) {
      auto it = zipStartA.find(e1v.unprime.at(name));
      if (it != zipStartA.end())
        me[name] = Term::var(pair_name(Pg.self, it->second, true));
    } else {
      me[name] = Term::var(name);
    }
  }
  PairView s1v = view_of(Pf.self);
  auto s1idx = index_witness(s1v, f.step);
  std::map<std::string, Term> ms = shared_name_map(Pf.self, Pg.self, false);
  PairView g1v = view_of(Pf.g_fwd);
  auto g1idx = index_witness(g1v, f.g_fwd);
  std::map<std::string, Term> mg;
  for (const auto& [name, info] : g1v.vars) {
    if (info.src) {
      mg[name] = Term::var(pair_name(Pg.self, info.base, true));
    } else {
      auto zi = zipEndStart.find(name);
      if (zi != zipEndStart.end()) {
        auto ai = zipStartA.find(zi->second);
        if (ai != zipStartA.end()) mg[name] = Term::var(ai->second);
      }
    }
  }

  Term chi0 = char_term(Formula::eq(rterm, Term::num(0)));
  Term leny = substitute(len, param, yterm);
  Term chiStep = char_term(Formula::land(Formula::le(Term::num(1), rterm),
                                         Formula::le(rterm, leny)));
  Term chiHand = char_term(Formula::eq(rterm, Lm + Term::num(1)));
  Term inner = monus(rterm, Term::num(1));

  g.step = build_witness(selfv, [&](const std::string& n, const VarInfo& info) -> Term {
    std::string base = selfv.unprime.at(n);
    if (is_dummy(base)) return Term::num(0);
    Term zero = Term::num(0);
    Term t0 = zero, tb = zero, tc = zero, td = zero;
    if (anames.count(base)) {
      if (info.src) {
        // case r = 0: the anchor feeds the family's initial equivalence
        auto oi = invZipStartA.find(base);
        if (oi != invZipStartA.end()) {
          std::string ename = pair_name(Pf.e_fwd, oi->second, true);
          if (auto it = e1idx.find(ename); it != e1idx.end()) {
            Term tt = substitute(it->second, param, yterm);
            t0 = retarget(tt, me);
          }
        }
      } else {
        // case r = Lm+1: the handover produces the next anchor
        auto ei = aToEnd.find(base);
        if (ei != aToEnd.end()) {
          if (auto it = g1idx.find(ei->second); it != g1idx.end()) {
            Term tt = substitute(it->second, param, yterm);
            td = retarget(tt, mg);
          }
        }
      }
    } else if (hnames.count(base)) {
      if (!info.src) {
        std::string ebase = base;
        if (auto it = e1idx.find(ebase); it != e1idx.end()) {
          Term tt = substitute(it->second, param, yterm);
          t0 = retarget(tt, me);
        }
      }
      std::string sname = pair_name(Pf.self, base, info.src);
      if (auto it = s1idx.find(sname); it != s1idx.end()) {
        Term tt = substitute(it->second, f.counter, inner);
        tt = substitute(tt, param, yterm);
        tb = retarget(tt, ms);
      }
      // idle case: identity on the same-name partner
      if (info.src) {
        if (selfv.has(base) && !selfv.info(base).src) tc = Term::var(base);
      } else {
        std::string pn = pair_name(Pg.self, base, true);
        if (selfv.has(pn) && selfv.info(pn).src) tc = Term::var(pn);
      }
      if (info.src) {
        std::string gname = pair_name(Pf.g_fwd, base, true);
        if (auto it = g1idx.find(gname); it != g1idx.end()) {
          Term tt = substitute(it->second, param, yterm);
          td = retarget(tt, mg);
        }
      }
    }
    Term out = t_sel(chi0, t0, t_sel(chiStep, tb, t_sel(chiHand, td, tc)));
    return clamp_for(selfv, info, out);
  });
  return g;
}

NdFlow strong_glue(const NdFlow& fam, const std::string& param, const Term& count,
                   const Signature& sig) {
  if (!alpha_eq(fam.end, substitute(fam.start, param, Term::var(param) + Term::num(1))))
    throw FlowError("strong_glue: family end is not the start at the next stage");
  std::set<std::string> avoid;
  for (const Formula* g : {&fam.start, &fam.end, &fam.interp}) {
    for (const auto& v : free_vars(*g)) avoid.insert(v.name);
    for (const auto& n : bound_vars(*g)) avoid.insert(n);
  }
  avoid.insert(fam.counter);
  avoid.insert(param);
  std::string u = fresh_name("u", avoid);
  Term tu = Term::var(u);
  Term len = fam.length;
  Term Lm = len;
  if (free_vars(len).count(VarRef{param, Sort::Nat})) {
    auto mm = monotone_majorizer(len, sig);
    if (!mm) throw FlowError("strong_glue: family length has no monotone majorizer");
    Lm = substitute(*mm, param, count);
  }
  Term yterm = quot(tu, Lm + Term::num(1));
  Term rterm = monus(tu, yterm * (Lm + Term::num(2)));
  Formula Hpiece =
      substitute(substitute(fam.interp, fam.counter,
                            t_min(monus(rterm, Term::num(1)), len)),
                 param, yterm);
  Formula Apiece = substitute(fam.start, param, yterm);
  NdFlow g;
  g.cls = fam.cls;
  g.counter = u;
  g.length = count * (Lm + Term::num(2));
  g.start = substitute(fam.start, param, Term::num(0));
  g.end = substitute(fam.start, param, count);
  g.interp = Formula::land(Formula::imp(Formula::le(Term::num(1), rterm), Hpiece),
                           Formula::imp(Formula::eq(rterm, Term::num(0)), Apiece));
  return g;
}

// ---------------------------------------------------------------------------
// Flow files

namespace {

struct Sexp {
  std::string atom;  // empty means list
  std::vector<Sexp> items;
  bool is_list() const { return atom.empty(); }
};

struct SexpParser {
  const std::string& text;
  std::size_t pos = 0;
  explicit SexpParser(const std::string& t) : text(t) {}

  void skip() {
    while (pos < text.size()) {
      if (std::isspace(static_cast<unsigned char>(text[pos]))) { ++pos; continue; }
      if (text[pos] == ';') {
        while (pos < text.size() && text[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
  }
  bool done() { skip(); return pos >= text.size(); }
  Sexp parse() {
    skip();
    if (pos >= text.size()) throw FlowError("flow file: unexpected end of input");
    if (text[pos] == '(') {
      ++pos;
      Sexp s;
      s.atom.clear();
      while (true) {
        skip();
        if (pos >= text.size()) throw FlowError("flow file: missing ')'");
        if (text[pos] == ')') { ++pos; break; }
        s.items.push_back(parse());
      }
      if (s.items.empty()) s.items.push_back(Sexp{"()", {}});  // keep non-atom shape
      if (!s.items.empty() && s.items.back().atom == "()" && s.items.size() == 1)
        s.items.clear();
      return s;
    }
    if (text[pos] == '"') {
      ++pos;
      std::string out;
      while (pos < text.size() && text[pos] != '"') {
        if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
        out.push_back(text[pos++]);
      }
      if (pos >= text.size()) throw FlowError("flow file: unterminated string");
      ++pos;
      Sexp s;
      s.atom = "\"" + out;  // marker for string atoms
      return s;
    }
    std::string out;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')' && text[pos] != ';')
      out.push_back(text[pos++]);
    Sexp s;
    s.atom = out;
    return s;
  }
};

std::string unstring(const Sexp& s, const std::string& what) {
  if (s.is_list() || s.atom.empty())
    throw FlowError("flow file: expected " + what);
  if (s.atom[0] == '"') return s.atom.substr(1);
  return s.atom;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void print_list(std::ostringstream& os, const char* tag, const WitnessList& w) {
  os << "  (" << tag;
  for (const auto& round : w) {
    os << "\n    (round";
    for (const Term& t : round) os << ' ' << quote(print_term(t));
    os << ')';
  }
  os << ")\n";
}

FormulaClass parse_class(const std::string& s) {
  if (s == "open") return FormulaClass::open();
  if (s.rfind("sigma", 0) == 0) return FormulaClass::sigma(std::stoi(s.substr(5)));
  if (s.rfind("pi", 0) == 0) return FormulaClass::pi(std::stoi(s.substr(2)));
  throw FlowError("flow file: unknown class " + s);
}

}  // namespace

std::string print_flow(const DetFlow& f) {
  std::ostringstream os;
  os << "(flow\n";
  os << "  (class " << quote(f.cls.to_string()) << ")\n";
  os << "  (counter " << f.counter << ")\n";
  os << "  (length " << quote(print_term(f.length)) << ")\n";
  os << "  (start " << quote(print_formula(f.start)) << ")\n";
  os << "  (end " << quote(print_formula(f.end)) << ")\n";
  os << "  (interp " << quote(print_formula(f.interp)) << ")\n";
  print_list(os, "efwd", f.e_fwd);
  print_list(os, "ebwd", f.e_bwd);
  print_list(os, "gfwd", f.g_fwd);
  print_list(os, "gbwd", f.g_bwd);
  print_list(os, "step", f.step);
  os << ")\n";
  return os.str();
}

DetFlow parse_flow(const std::string& text) {
  SexpParser p(text);
  Sexp top = p.parse();
  if (top.is_list() == false || top.items.empty() || top.items[0].atom != "flow")
    throw FlowError("flow file: expected (flow ...)");
  DetFlow f;
  ParseOpts opts;
  // First pass: pick up ops/ordvars so formulas parse.
  for (std::size_t i = 1; i < top.items.size(); ++i) {
    const Sexp& e = top.items[i];
    if (e.is_list() && !e.items.empty() && e.items[0].atom == "ops") {
      for (std::size_t j = 1; j < e.items.size(); ++j) opts.ops.insert(e.items[j].atom);
    }
    if (e.is_list() && !e.items.empty() && e.items[0].atom == "ordvars") {
      for (std::size_t j = 1; j < e.items.size(); ++j) opts.ord_vars.insert(e.items[j].atom);
    }
  }
  auto parse_rounds = [&](const Sexp& e) {
    WitnessList w;
    for (std::size_t j = 1; j < e.items.size(); ++j) {
      const Sexp& r = e.items[j];
      if (!r.is_list() || r.items.empty() || r.items[0].atom != "round")
        throw FlowError("flow file: expected (round ...) entries");
      std::vector<Term> round;
      for (std::size_t k = 1; k < r.items.size(); ++k)
        round.push_back(parse_term(unstring(r.items[k], "term"), opts));
      w.push_back(std::move(round));
    }
    return w;
  };
  bool saw_class = false, saw_counter = false, saw_length = false;
  bool saw_start = false, saw_end = false, saw_interp = false;
  for (std::size_t i = 1; i < top.items.size(); ++i) {
    const Sexp& e = top.items[i];
    if (!e.is_list() || e.items.empty()) throw FlowError("flow file: stray entry");
    const std::string& tag = e.items[0].atom;
    if (tag == "ops" || tag == "ordvars") continue;
    if (tag == "class") { f.cls = parse_class(unstring(e.items.at(1), "class")); saw_class = true; }
    else if (tag == "counter") { f.counter = unstring(e.items.at(1), "counter"); saw_counter = true; }
    else if (tag == "length") { f.length = parse_term(unstring(e.items.at(1), "length"), opts); saw_length = true; }
    else if (tag == "start") { f.start = parse_formula(unstring(e.items.at(1), "start"), opts); saw_start = true; }
    else if (tag == "end") { f.end = parse_formula(unstring(e.items.at(1), "end"), opts); saw_end = true; }
    else if (tag == "interp") { f.interp = parse_formula(unstring(e.items.at(1), "interp"), opts); saw_interp = true; }
    else if (tag == "efwd") f.e_fwd = parse_rounds(e);
    else if (tag == "ebwd") f.e_bwd = parse_rounds(e);
    else if (tag == "gfwd") f.g_fwd = parse_rounds(e);
    else if (tag == "gbwd") f.g_bwd = parse_rounds(e);
    else if (tag == "step") f.step = parse_rounds(e);
    else throw FlowError("flow file: unknown entry " + tag);
  }
  if (!saw_class || !saw_counter || !saw_length || !saw_start || !saw_end || !saw_interp)
    throw FlowError("flow file: missing a required entry");
  return f;
}

}  // namespace flowforge
