#pragma once

// Sequent-calculus kernel.  A proof is a tree of rule applications; checking
// derives every node's conclusion from its premises and fails loudly when a
// premise does not have the required shape.  Principal formulas live at the
// end of their side; the exchange rules reposition.
//
// Non-logical axioms are accepted verbatim from the theory's list, or -- when
// the theory allows it -- verified by enumeration at the cap and reported in
// the result's notes.  Induction is gated by the theory's term ideal (the
// bound) and formula class (the induction formula).

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flowforge/semantics.hpp"
#include "flowforge/syntax.hpp"

namespace flowforge {

struct ProofError : std::runtime_error {
  explicit ProofError(const std::string& what) : std::runtime_error(what) {}
};

struct Sequent {
  std::vector<Formula> left, right;  // Gamma => Delta
  bool operator==(const Sequent&) const = default;
  std::string to_string() const;
};

enum class Rule {
  Ax, BotL, NonLogAx,
  WeakL, WeakR, ContrL, ContrR, ExchL, ExchR, Cut,
  AndL, AndR, OrL, OrR, ImpL, ImpR, NotL, NotR,
  ForallL, ForallR, ExistsL, ExistsR,
  BForallL, BForallR, BExistsL, BExistsR,
  Ind, IndAlpha,
};

const std::string& rule_tag(Rule r);  // S-expression tag, e.g. "ballr"

struct ProofNode {
  Rule rule = Rule::Ax;
  Formula formula;    // principal formula / induction template
  Term term;          // instantiation term, induction bound, or ordinal stage
  std::string var;    // eigenvariable; induction variable; IndAlpha: stage var
  std::string var2;   // IndAlpha: name of the inner (history) variable
  std::size_t index = 0;  // exchange position (swapped with its successor)
  std::vector<std::shared_ptr<const ProofNode>> premises;
};

using Proof = std::shared_ptr<const ProofNode>;

struct TheorySpec {
  Signature sig = Signature::standard();
  TermIdeal ideal = TermIdeal::all();             // admissible induction bounds
  std::optional<FormulaClass> ind_class;          // nullopt: unrestricted
  std::vector<Formula> axioms;                    // accepted verbatim
  bool axioms_at_cap = true;                      // else: list only
};

struct CheckResult {
  Sequent conclusion;
  std::map<std::string, int> rule_counts;
  std::vector<std::string> notes;  // axioms accepted by enumeration, truncations
};

// Checks a bounded-arithmetic proof (IndAlpha is rejected here).
CheckResult check_proof(const Proof& p, const TheorySpec& theory, const Cap& cap);

// Checks a transfinite-induction proof: IndAlpha is allowed, its template
// must be universal, and axiom enumeration may truncate unbounded
// quantifiers (reported in notes).
CheckResult check_ti_proof(const Proof& p, const TheorySpec& theory, const Cap& cap);

// True when every formula of every derived sequent fits cls.
bool check_class_restricted(const Proof& p, const TheorySpec& theory, FormulaClass cls);

// ---------------------------------------------------------------------------
// Proof files: a sequence of S-expressions.  `;` starts a comment.
//
//   (ordvars b d)            optional: free variables of ordinal sort
//   (ops sq cube)            optional: extension operator names
//   (let H "formula")        macro; H may then stand for the formula
//   (<rule> <payload...> <premises...>)   the proof itself, last form wins
//
// Formula payloads are let-names or quoted strings; term payloads quoted
// strings; variable names and exchange indices bare atoms.

Proof parse_proof(const std::string& text);
std::string print_proof(const Proof& p);

}  // namespace flowforge
