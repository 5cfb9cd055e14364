#pragma once

// Strict forms: alternation-normal bounded prenex shape.  A formula in class
// Pi_k/Sigma_k is rewritten as k alternating blocks of bounded quantifiers
// over an open matrix, with every block bound depending on ambient free
// variables only.
//
// Determinism contract (relied on by witness lists): hoisting walks the
// negation normal form depth-first left-to-right, binder names are preserved
// unless already used (then "name_2", "name_3", ...), empty rounds get a
// dummy variable "_d<round>" bounded by 0, and a bound that mentions another
// quantified variable is replaced by a monotone majorizer evaluated at that
// variable's own bound, with the original constraint guarded into the matrix.

#include <map>
#include <string>
#include <vector>

#include "flowforge/syntax.hpp"

namespace flowforge {

// Negation normal form: implications unfolded, negations pushed to atoms
// (complemented nat `<=` atoms become flipped atoms, ordinal comparisons
// flip dually; negated `=` stays as a negated atom).
Formula nnf(const Formula& f);

struct StrictBlock {
  bool universal = false;
  std::vector<std::string> vars;
  std::vector<std::string> bases;   // binder names before collision renaming
  std::vector<Term> bounds;         // ambient variables only
};

struct StrictForm {
  FormulaClass cls;                 // level == blocks.size() unless Open
  std::vector<StrictBlock> blocks;
  Formula matrix;                   // open, negation normal

  Formula to_formula() const;       // rebuild the nested quantifier form
  std::set<std::string> block_var_names() const;
};

// Rewrites f into `cls` shape.  Throws SyntaxError when f does not fit the
// class, contains unbounded or ordinal quantifiers, or a dependent bound has
// no monotone majorizer.
StrictForm to_strict(const Formula& f, FormulaClass cls, const Signature& sig);

// Substitution into bounds and matrix; `var` must not be a block variable.
StrictForm subst_strict(const StrictForm& s, const std::string& var, const Term& repl);
StrictForm subst_strict(const StrictForm& s, const std::map<std::string, Term>& sub);

// A reduction pair shares one namespace: any source block variable that would
// collide with a target block variable (or a free variable of either side)
// gets primes appended.  `src_rename` maps original name -> primed name.
struct StrictPair {
  StrictForm src, tgt;
  std::map<std::string, std::string> src_rename;

  // Applies src_rename to a term written against unprimed source names.
  Term to_pair_names(const Term& t) const;
};

StrictPair make_strict_pair(const Formula& src, const Formula& tgt, FormulaClass cls,
                            const Signature& sig);

}  // namespace flowforge
