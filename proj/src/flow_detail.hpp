#pragma once

// Internal helpers shared by the flow sources.  Everything here manipulates
// the resolved namespace of a strict pair: which variable sits on which side,
// in which round, under which bound.  Witness lists are built by walking a
// pair's outputs and asking a builder for each term; transports between pairs
// substitute variable maps into stored terms.  Not part of the public API.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowforge/flows.hpp"
#include "flowforge/reductions.hpp"
#include "flowforge/strict.hpp"

namespace flowforge::detail {

struct VarInfo {
  bool src = false;
  std::size_t round = 0;
  std::size_t pos = 0;      // index within this side's block
  std::string base;         // name before pair priming (post-strict)
  Term bound;
  bool universal = false;   // polarity of the round
  bool output = false;      // this side supplies the term in this round
};

struct PairView {
  std::size_t rounds = 0;
  std::map<std::string, VarInfo> vars;
  std::vector<bool> universal;                    // per round
  std::vector<std::vector<std::string>> outputs;  // per round, in block order
  std::map<std::string, std::string> unprime;     // pair name -> post-strict name

  bool has(const std::string& name) const { return vars.count(name) != 0; }
  const VarInfo& info(const std::string& name) const;
};

PairView view_of(const StrictPair& pair);

// Pair name of the post-strict name `base` on the requested side.
std::string pair_name(const StrictPair& pair, const std::string& base, bool src);

// Output name -> term; validates the witness shape against the view.
std::map<std::string, Term> index_witness(const PairView& v, const WitnessList& w);

using OutputBuilder = std::function<Term(const std::string& name, const VarInfo& info)>;
WitnessList build_witness(const PairView& v, const OutputBuilder& build);

// t_min(t, bound) unless t is syntactically bound-safe (0, or a pair variable
// with the same bound).
Term clamp_for(const PairView& v, const VarInfo& out, Term t);

bool is_dummy(const std::string& name);  // "_d<round>" padding variables

// The five reduction pairs of a deterministic flow.  The self pair keeps the
// counter symbolic; step checks substitute it per index.
struct FlowPairs {
  StrictForm h;
  StrictPair self;
  StrictPair e_fwd, e_bwd, g_fwd, g_bwd;
};
FlowPairs pairs_of(const DetFlow& f, const Signature& sig);

// Variable-to-term map application (plain substitution).
Term retarget(const Term& t, const std::map<std::string, Term>& m);

// Identity witness restricted to the `live` post-strict names: each live
// output mirrors its cross-side partner of the same name, everything else is
// zero.  Used when one side's formula reappears verbatim inside the other.
WitnessList identity_witness(const StrictPair& toP, const std::set<std::string>& live);

// Name map from one pair's namespace into another for the variables shared by
// post-strict name: same-side unless `swap` (then src maps to tgt and back).
// Missing names are skipped; callers layer piece-specific entries on top.
std::map<std::string, Term> shared_name_map(const StrictPair& from, const StrictPair& to,
                                            bool swap);

// Alpha-equality of formulas (bound names ignored).
bool alpha_eq(const Formula& a, const Formula& b);

// Positional name correspondence between the blocks of two alpha-equal strict
// forms (from-name -> to-name); throws FlowError on shape mismatch.
std::map<std::string, std::string> zip_names(const StrictForm& from, const StrictForm& to);

// All names occurring in the flow's formulas (free and bound) plus counter
// and length variables; seed for freshness sets.
std::set<std::string> flow_names(const DetFlow& f);

// Rebinds every binder in the flow to names fresh against `avoid` and
// realigns all witness lists; the result verifies iff the input does.
DetFlow rename_flow(const DetFlow& f, std::set<std::string>& avoid, const Signature& sig);

// C ∧ (g → X) ▷ C ∧ (g → Y) for an open guard g: carried part idles, the
// inner flow runs under the guard (its terms are harmless when g fails).
DetFlow guarded_apply(const DetFlow& f, const Formula& guard, const Formula& carried,
                      const Signature& sig);

// One-step flow between alpha-equal rearrangements: every output is the
// identity on its positional partner under `name_map` (to-name -> from-name
// analog on the other side); used for reorderings and endpoint massages.
DetFlow ident_step(const Formula& a, const Formula& b, FormulaClass cls,
                   const std::map<std::string, std::string>& tgt_to_src,
                   const Signature& sig);

}  // namespace flowforge::detail
