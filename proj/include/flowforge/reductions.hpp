#pragma once

// Deterministic reductions between strict forms.  A reduction from A to B at
// a common class plays the two quantifier games against each other round by
// round: in a universal round the supplied terms compute A's challenge from
// B's, in an existential round B's witness from A's.  Checking enumerates all
// inputs at the cap: every round's bound condition, then one open implication
// between the fully substituted matrices.

#include <map>
#include <vector>

#include "flowforge/semantics.hpp"
#include "flowforge/strict.hpp"

namespace flowforge {

// witness[r] holds one term per output variable of round r, in block order:
// source variables when round r is universal, target variables when
// existential.  Terms are written against the pair namespace (primed source
// binders, plain target binders) and may reference any input variable of the
// same or an earlier round plus ambient free variables.
using WitnessList = std::vector<std::vector<Term>>;

struct DetReduction {
  Formula source;
  Formula target;
  FormulaClass cls;
  WitnessList witness;
};

// Pairs a strict form against itself with every source binder primed; the
// step reductions of a flow are checked against such pairs so that stored
// terms keep their meaning for every counter value.
StrictPair make_self_pair(const StrictForm& form);

// Core checker over an explicit pair.  `fixed` pins ambient variables (used
// when a flow is verified for one concrete input).  Thrown SyntaxError means
// the reduction is malformed (wrong shape, unavailable variable); a Verdict
// reports the semantic outcome.
Verdict check_det_pair(const StrictPair& pair, const WitnessList& witness,
                       const Cap& cap, const Signature& sig,
                       const Env* fixed = nullptr, unsigned workers = 1);

Verdict check_det(const DetReduction& red, const Cap& cap, const Signature& sig,
                  unsigned workers = 1);

// Nondeterministic reduction: plain truth transfer between the two formulas,
// with no uniformity requirement.
Verdict check_nd(const Formula& source, const Formula& target, const Cap& cap,
                 const Signature& sig, unsigned workers = 1);

// Fills a witness list for the pair: an explicit override for the output's
// base name wins, otherwise an input variable of the same round with the same
// base name is forwarded, otherwise zero.  Every output is clamped to its
// bound, so bound conditions can only fail by evaluation overflow.
// Unused overrides raise SyntaxError (they indicate a misspelled name).
WitnessList synth_witness(const StrictPair& pair,
                          const std::map<std::string, Term>& overrides = {});

// Composes A |> B and B |> C into A |> C by eliminating the middle form's
// variables: universal rounds substitute the second reduction's challenge
// terms, existential rounds the first one's witness terms.
DetReduction det_compose(const DetReduction& ab, const DetReduction& bc,
                         const Signature& sig);

}  // namespace flowforge
