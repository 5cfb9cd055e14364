#include "flowforge/reductions.hpp"

#include <algorithm>

namespace flowforge {

namespace {

std::set<std::string> ambient_names(const StrictForm& s) {
  std::set<std::string> out;
  for (const auto& v : free_vars(s.matrix)) out.insert(v.name);
  for (const auto& b : s.blocks)
    for (const auto& t : b.bounds)
      for (const auto& v : free_vars(t)) out.insert(v.name);
  for (const auto& v : s.block_var_names()) out.erase(v);
  return out;
}

Formula in_range_of(const std::vector<std::string>& vars, const std::vector<Term>& bounds,
                    const std::map<std::string, Term>& sigma) {
  std::vector<Formula> parts;
  for (std::size_t i = 0; i < vars.size(); ++i)
    parts.push_back(Formula::le(Term::var(vars[i]), substitute(bounds[i], sigma)));
  return conj_all(parts);
}

Formula out_range_of(const std::vector<Term>& terms, const std::vector<Term>& bounds,
                     const std::map<std::string, Term>& sigma) {
  std::vector<Formula> parts;
  for (std::size_t i = 0; i < terms.size(); ++i)
    parts.push_back(Formula::le(terms[i], substitute(bounds[i], sigma)));
  return conj_all(parts);
}

}  // namespace

StrictPair make_self_pair(const StrictForm& form) {
  StrictPair pair;
  pair.src = form;
  pair.tgt = form;
  std::set<std::string> taken = form.block_var_names();
  for (const auto& n : ambient_names(form)) taken.insert(n);

  std::map<std::string, Term> ren;
  for (auto& b : pair.src.blocks) {
    for (auto& v : b.vars) {
      std::string nv = v;
      do nv += "'"; while (taken.count(nv));
      taken.insert(nv);
      pair.src_rename[v] = nv;
      ren[v] = Term::var(nv);
      v = nv;
    }
  }
  for (auto& b : pair.src.blocks)
    for (auto& t : b.bounds) t = substitute(t, ren);
  pair.src.matrix = substitute(pair.src.matrix, ren);
  return pair;
}

Verdict check_det_pair(const StrictPair& pair, const WitnessList& witness,
                       const Cap& cap, const Signature& sig,
                       const Env* fixed, unsigned workers) {
  const std::size_t rounds = pair.src.blocks.size();
  if (pair.tgt.blocks.size() != rounds)
    throw SyntaxError("reduction pair has mismatched block counts");
  if (witness.size() != rounds)
    throw SyntaxError("witness has " + std::to_string(witness.size()) +
                      " rounds, pair has " + std::to_string(rounds));

  // Block variables become usable one round at a time; references to anything
  // still pending are malformed rather than silently enumerated.
  std::set<std::string> pending = pair.src.block_var_names();
  for (const auto& v : pair.tgt.block_var_names()) pending.insert(v);

  std::map<std::string, Term> sigma;      // resolved output variables
  std::vector<Formula> accum_in;          // challenges/replies in range so far
  struct Wrap { bool imp; Formula guard; };
  std::vector<Wrap> src_wrap, tgt_wrap;

  for (std::size_t r = 0; r < rounds; ++r) {
    const StrictBlock& sb = pair.src.blocks[r];
    const StrictBlock& tb = pair.tgt.blocks[r];
    if (sb.universal != tb.universal)
      throw SyntaxError("round " + std::to_string(r) + " polarity mismatch");
    const bool uni = sb.universal;

    const auto& in_vars = uni ? tb.vars : sb.vars;
    const auto& in_bounds = uni ? tb.bounds : sb.bounds;
    const auto& out_vars = uni ? sb.vars : tb.vars;
    const auto& out_bounds = uni ? sb.bounds : tb.bounds;
    if (witness[r].size() != out_vars.size())
      throw SyntaxError("round " + std::to_string(r) + " expects " +
                        std::to_string(out_vars.size()) + " witness terms, got " +
                        std::to_string(witness[r].size()));

    for (const auto& v : in_vars) pending.erase(v);

    std::vector<Term> eff;
    for (const auto& t : witness[r]) {
      Term e = substitute(t, sigma);
      for (const auto& v : free_vars(e))
        if (pending.count(v.name))
          throw SyntaxError("round " + std::to_string(r) + " witness references '" +
                            v.name + "' before it is available");
      eff.push_back(std::move(e));
    }

    Formula in_range = in_range_of(in_vars, in_bounds, sigma);
    Formula out_range = out_range_of(eff, out_bounds, sigma);
    accum_in.push_back(in_range);

    Verdict bc = check_implication(conj_all(accum_in), out_range, cap, sig,
                                   fixed, workers);
    if (!bc.verified()) {
      bc.note = "round " + std::to_string(r) + " bound condition" +
                (bc.note.empty() ? "" : ": " + bc.note);
      return bc;
    }

    // Universal rounds guard with an implication (the reduction commits to a
    // challenge), existential rounds with a conjunction (the witness is
    // carried along).
    src_wrap.push_back({uni, uni ? out_range : in_range});
    tgt_wrap.push_back({uni, uni ? in_range : out_range});

    for (std::size_t i = 0; i < out_vars.size(); ++i) sigma[out_vars[i]] = eff[i];
  }

  Formula lhs = substitute(pair.src.matrix, sigma);
  Formula rhs = substitute(pair.tgt.matrix, sigma);
  for (std::size_t r = rounds; r-- > 0;) {
    lhs = src_wrap[r].imp ? Formula::imp(src_wrap[r].guard, lhs)
                          : Formula::land(src_wrap[r].guard, lhs);
    rhs = tgt_wrap[r].imp ? Formula::imp(tgt_wrap[r].guard, rhs)
                          : Formula::land(tgt_wrap[r].guard, rhs);
  }
  Verdict mc = check_implication(lhs, rhs, cap, sig, fixed, workers);
  if (!mc.verified())
    mc.note = "matrix condition" + (mc.note.empty() ? "" : ": " + mc.note);
  return mc;
}

Verdict check_det(const DetReduction& red, const Cap& cap, const Signature& sig,
                  unsigned workers) {
  StrictPair pair = make_strict_pair(red.source, red.target, red.cls, sig);
  return check_det_pair(pair, red.witness, cap, sig, nullptr, workers);
}

Verdict check_nd(const Formula& source, const Formula& target, const Cap& cap,
                 const Signature& sig, unsigned workers) {
  return check_implication(source, target, cap, sig, nullptr, workers);
}

WitnessList synth_witness(const StrictPair& pair,
                          const std::map<std::string, Term>& overrides) {
  std::set<std::string> used_overrides;
  WitnessList out;
  for (std::size_t r = 0; r < pair.src.blocks.size(); ++r) {
    const StrictBlock& sb = pair.src.blocks[r];
    const StrictBlock& tb = pair.tgt.blocks[r];
    const bool uni = sb.universal;
    const StrictBlock& outb = uni ? sb : tb;
    const StrictBlock& inb = uni ? tb : sb;

    std::vector<Term> terms;
    for (std::size_t i = 0; i < outb.vars.size(); ++i) {
      const std::string base = base_name(outb.vars[i]);
      Term raw = Term::num(0);
      auto it = overrides.find(base);
      if (it != overrides.end()) {
        raw = it->second;
        used_overrides.insert(base);
      } else if (i < inb.vars.size() && base_name(inb.vars[i]) == base) {
        raw = Term::var(inb.vars[i]);  // positional match wins among duplicates
      } else {
        for (const auto& v : inb.vars) {
          if (base_name(v) == base) {
            raw = Term::var(v);
            break;
          }
        }
      }
      terms.push_back(t_min(raw, outb.bounds[i]));
    }
    out.push_back(std::move(terms));
  }
  for (const auto& [k, t] : overrides)
    if (!used_overrides.count(k))
      throw SyntaxError("witness override '" + k + "' matches no output variable");
  return out;
}

DetReduction det_compose(const DetReduction& ab, const DetReduction& bc,
                         const Signature& sig) {
  if (!(ab.target == bc.source))
    throw SyntaxError("composition endpoints differ");
  if (!(ab.cls == bc.cls)) throw SyntaxError("composition classes differ");

  StrictPair p1 = make_strict_pair(ab.source, ab.target, ab.cls, sig);
  StrictPair p2 = make_strict_pair(bc.source, bc.target, bc.cls, sig);
  StrictPair pc = make_strict_pair(ab.source, bc.target, ab.cls, sig);
  const std::size_t rounds = p1.src.blocks.size();

  // Positional renames: first pair's source names into the composite's, and
  // the second pair's (primed) middle names into the first pair's target's.
  std::map<std::string, Term> m1, mid;
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto& a1 = p1.src.blocks[r].vars;
    const auto& ac = pc.src.blocks[r].vars;
    for (std::size_t i = 0; i < a1.size(); ++i) m1[a1[i]] = Term::var(ac[i]);
    const auto& b2 = p2.src.blocks[r].vars;
    const auto& b1 = p1.tgt.blocks[r].vars;
    if (b2.size() != b1.size())
      throw SyntaxError("middle form disagrees between the two reductions");
    for (std::size_t i = 0; i < b2.size(); ++i) mid[b2[i]] = Term::var(b1[i]);
  }

  std::map<std::string, Term> yElim;  // first pair's target names -> terms
  WitnessList out(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    const bool uni = p1.src.blocks[r].universal;
    const auto& bmid = p1.tgt.blocks[r].vars;
    if (uni) {
      // Middle challenges come from the second reduction, then the first
      // reduction's terms answer through them.
      for (std::size_t i = 0; i < bmid.size(); ++i) {
        Term t = substitute(bc.witness[r][i], mid);
        yElim[bmid[i]] = substitute(t, yElim);
      }
      std::map<std::string, Term> sub = yElim;
      sub.insert(m1.begin(), m1.end());
      for (const auto& t : ab.witness[r]) out[r].push_back(substitute(t, sub));
    } else {
      // Middle replies come from the first reduction, then the second
      // reduction's terms forward them.
      std::map<std::string, Term> sub = yElim;
      sub.insert(m1.begin(), m1.end());
      for (std::size_t i = 0; i < bmid.size(); ++i)
        yElim[bmid[i]] = substitute(ab.witness[r][i], sub);
      for (const auto& t : bc.witness[r]) {
        Term s = substitute(t, mid);
        out[r].push_back(substitute(s, yElim));
      }
    }
  }
  return {ab.source, bc.target, ab.cls, std::move(out)};
}

}  // namespace flowforge
