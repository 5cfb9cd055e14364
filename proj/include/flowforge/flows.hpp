#pragma once

// Computational flows: length-indexed interpolant families H(u, x⃗) with
// verified reductions start ≤ H(0), H(u) ≤ H(u+1) for u < t, H(t) ≤ end.
// A deterministic flow carries explicit witness-term lists for every
// reduction and transports witnesses (Sigma kind, forward) or falsifiers
// (Pi kind, backward); a non-deterministic flow only asserts the pointwise
// implications.  On top of the records sit the combinator calculus
// (conjunction/disjunction application, weak and strong gluing, lifts,
// characteristic-function, contraction and negation flows), the extractor
// that compiles checked sequent proofs into flows, and the converse emitter
// that turns a flow back into an induction proof.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/kernel.hpp"
#include "flowforge/reductions.hpp"

namespace flowforge {

struct FlowError : std::runtime_error {
  explicit FlowError(const std::string& what) : std::runtime_error(what) {}
};

// All strict forms of one flow are taken at the single view class `cls`;
// witness terms are written against the corresponding reduction pairs
// (plain target names, primed source names).  The counter is a nat variable
// free in `interp` (and in the step terms) and bound nowhere.
struct DetFlow {
  FormulaClass cls;
  std::string counter;
  Term length;
  Formula start, end, interp;
  WitnessList e_fwd, e_bwd;  // start ≤ H(0) and H(0) ≤ start
  WitnessList g_fwd, g_bwd;  // H(length) ≤ end and end ≤ H(length)
  WitnessList step;          // H(u) ≤ H(u+1), counter free in the terms

  Formula at(const Term& c) const;  // interp[counter := c]
};

struct NdFlow {
  FormulaClass cls;
  std::string counter;
  Term length;
  Formula start, end, interp;

  Formula at(const Term& c) const;
};

NdFlow forget(const DetFlow& f);  // drop the witnesses

// Checks endpoint equivalences and every step.  When the length depends on
// free variables the steps are checked once per input environment (or only
// at `fixed` when given); otherwise each check is a single global sweep.
Verdict verify_flow(const DetFlow& f, const Cap& cap, const Signature& sig,
                    const Env* fixed = nullptr, unsigned workers = 1);
Verdict verify_flow(const NdFlow& f, const Cap& cap, const Signature& sig,
                    const Env* fixed = nullptr, unsigned workers = 1);

struct RunResult {
  std::vector<std::string> vars;        // first-block variables of the result side
  std::vector<std::uint64_t> values;    // transported values for those variables
  std::vector<std::vector<std::uint64_t>> trace;  // H-block values, one row per index
  bool validated = false;               // result decided against the endpoint
  std::string note;
};

// Pi kind: pulls a falsifier of `end` (values for its leading universal
// block) back to a falsifier of `start`, evaluating the witness terms from
// u = t down to 0.  Sigma kind: pushes a witness of `start` forward.
RunResult run_flow(const DetFlow& f, const Env& input,
                   const std::vector<std::uint64_t>& given, const Cap& cap,
                   const Signature& sig);

// --------------------------------------------------------------------------
// Construction

// A ▷ A with t = 0 and identity equivalences.
DetFlow constant_flow(const Formula& a, FormulaClass cls, const Signature& sig);

// One-step flow A ▷ B.  The witness for the core reduction A ≤ B is
// synthesized with `overrides` (keyed by base names of the core pair's
// output variables) or supplied verbatim via the _core variant, whose terms
// are written against make_strict_pair(A, B, cls).
DetFlow step_flow(const Formula& a, const Formula& b, FormulaClass cls,
                  const std::map<std::string, Term>& overrides,
                  const Signature& sig);
DetFlow step_flow_core(const Formula& a, const Formula& b, FormulaClass cls,
                       const WitnessList& core, const Signature& sig);

DetFlow conj_apply(const DetFlow& f, const Formula& c, const Signature& sig);
DetFlow disj_apply(const DetFlow& f, const Formula& c, const Signature& sig);

// Concatenation with the three-piece interpolant (f1 up to t1, the middle
// formula at t1+1, f2 shifted to start at t1+2); endpoints must be
// alpha-equal and the view classes must coincide.
DetFlow weak_glue(const DetFlow& f1, const DetFlow& f2, const Signature& sig);
DetFlow weak_glue(std::vector<DetFlow> chain, const Signature& sig);

// From a family A(y) ▷ A(y+1) (parameter y free, end == start[y := y+1]
// up to alpha) to A(0) ▷ A(count): segments padded to a common majorized
// length and concatenated.
DetFlow strong_glue(const DetFlow& family, const std::string& param,
                    const Term& count, const Signature& sig);

// View lift.  Same-kind level increases append dummy rounds; kind flips with
// a strict level increase prepend one, shifting every variable uniformly; Open
// lifts to any kind.  Same-level kind flips are rejected (the classes are
// incomparable) and nothing lowers back to Open.
DetFlow coarsen(const DetFlow& f, FormulaClass cls, const Signature& sig);

// The dual flow ¬B ▷ ¬A at the dual view: interpolants negated and reversed,
// witness terms reused with source/target roles swapped.
DetFlow dual_flow(const DetFlow& f, const Signature& sig);

// ∀y≤p X ▷ ∀y≤p Y (resp. ∃) from X ▷ Y with y free; the lifted length is a
// monotone majorization of the family length at y := p and threads that
// finish early idle on their final formula.
DetFlow all_lift(const DetFlow& f, const std::string& var, const Term& bound,
                 const Signature& sig);
DetFlow ex_lift(const DetFlow& f, const std::string& var, const Term& bound,
                const Signature& sig);

// Ambient substitution (var must not be bound anywhere in the flow).
DetFlow flow_subst(const DetFlow& f, const std::string& var, const Term& repl,
                   const Signature& sig);

NdFlow conj_apply(const NdFlow& f, const Formula& c);
NdFlow disj_apply(const NdFlow& f, const Formula& c);
NdFlow weak_glue(const NdFlow& f1, const NdFlow& f2);
NdFlow strong_glue(const NdFlow& family, const std::string& param,
                   const Term& count, const Signature& sig);

// --------------------------------------------------------------------------
// Characteristic functions, negation and contraction

// ⊤ ▷ ∃i≤1 [(i=1 → A⁺) ∧ (i=0 → A⁻)] where A⁺/A⁻ are fresh copies of
// A/¬A; the final witness i computes the truth value of A.
DetFlow char_flow(const Formula& a, const Signature& sig);

DetFlow em_flow(const Formula& a, const Signature& sig);      // ⊤ ▷ A ∨ ¬A
DetFlow contra_flow(const Formula& a, const Signature& sig);  // A ∧ ¬A ▷ ⊥

// A ∨ A' ▷ A and A ▷ A ∧ A' (primed copies freshened).  Deterministic
// contraction is supported up to one existential alternation level inside
// (beyond that the witness terms would need answers from later rounds);
// duplication falls back to the dual view when the direct form is blocked.
DetFlow contract_flow(const Formula& a, const Signature& sig);
DetFlow dup_flow(const Formula& a, const Signature& sig);

// Cut: from f0 : ∧Γ ▷ ∨Δ ∨ A and f1 : ∧Γ ∧ A ▷ ∨Δ to ∧Γ ▷ ∨Δ.
DetFlow cut_flow(const DetFlow& f0, const DetFlow& f1, const Formula& gamma,
                 const Formula& delta, const Formula& cutf,
                 const Signature& sig);

// Tag dispatcher over the named constructors (conj, disj, glue, strong,
// char, em, contra, contract, dup, dual, cut); used by the CLI.
DetFlow logical_rules(const std::string& tag, std::vector<DetFlow> operands,
                      std::vector<Formula> params, const Signature& sig);

// --------------------------------------------------------------------------
// Extraction and completeness

enum class ExtractMode { Det, Nd };

struct ExtractResult {
  ExtractMode mode = ExtractMode::Det;
  DetFlow det;  // filled in det mode
  NdFlow nd;    // always filled (det mode: the forgetful image)
  std::vector<std::string> provenance;  // proof node -> flow segment notes
};

// Compiles a checked proof of Γ ⇒ Δ into a flow ∧Γ ▷ ∨Δ.  Det mode
// requires the unrestricted term ideal and open non-logical axioms; nd mode
// accepts any ideal and reports whether the final length stays inside it.
ExtractResult extract(const Proof& p, const TheorySpec& theory,
                      ExtractMode mode, const Cap& cap);

// Emits the induction proof of start ⇒ end from the flow conditions; the
// interpolant must fit the theory's induction class and the length its
// ideal.
Proof flow_to_proof(const DetFlow& f, const TheorySpec& theory);
Proof flow_to_proof(const NdFlow& f, const TheorySpec& theory);

// Replays each nd step deterministically.  Supported for steps between
// strict forms with at most one quantifier alternation (the leading-block
// scan construction); deeper steps are rejected.
DetFlow simulate_nd(const NdFlow& f, const Cap& cap, const Signature& sig);

// --------------------------------------------------------------------------
// Flow files: a single S-expression, e.g.
//   (flow (class "sigma1") (counter u) (length "x") (start "top")
//         (end "...") (interp "...")
//         (efwd (round "t" ...) ...) (ebwd ...) (gfwd ...) (gbwd ...)
//         (step ...))

std::string print_flow(const DetFlow& f);
DetFlow parse_flow(const std::string& text);

}  // namespace flowforge
