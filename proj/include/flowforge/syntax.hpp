#pragma once

// Terms and formulas of bounded arithmetic over the base language
// {0, 1, +, *, - (truncated), div, <=} with optional extension operators
// (binary length |x| and smash x#y ship by default), plus a second sort of
// ordinal-valued terms used by the transfinite-induction calculi.
//
// Values are immutable after construction; all operations are pure.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/ordinal.hpp"

namespace flowforge {

enum class Sort { Nat, Ord };

struct SyntaxError : std::runtime_error {
  explicit SyntaxError(const std::string& what) : std::runtime_error(what) {}
};

class Signature;

// ---------------------------------------------------------------------------
// Terms

class Term {
 public:
  enum class Kind { Var, Num, OrdNum, App };

  Term() = default;  // the numeral 0
  static Term var(std::string name, Sort sort = Sort::Nat);
  static Term num(std::uint64_t value);
  static Term ordnum(Ordinal value);
  static Term app(std::string op, std::vector<Term> args);

  Kind kind() const;
  const std::string& var_name() const;
  Sort var_sort() const;
  std::uint64_t num_value() const;
  const Ordinal& ord_value() const;
  const std::string& op() const;
  const std::vector<Term>& args() const;

  bool operator==(const Term& o) const;
  bool operator!=(const Term& o) const { return !(*this == o); }

  std::size_t size() const;  // node count

 private:
  struct Node;
  std::shared_ptr<const Node> node_;  // null encodes the numeral 0
};

// Built-in operator names.  Nat: "+", "*", "-", "div", "len", "smash".
// Ord: "o+", "o*", "o-", "odiv", "omod", "fin" (nat -> ord embedding).
bool is_builtin_op(const std::string& op);

// Convenience builders for the nat sort.
Term operator+(const Term& a, const Term& b);
Term operator*(const Term& a, const Term& b);
Term monus(const Term& a, const Term& b);      // truncated subtraction
Term quot(const Term& a, const Term& b);       // div(a,b); evaluates floor(a/(b+1))
Term t_len(const Term& a);                     // |a|
Term t_smash(const Term& a, const Term& b);    // a # b
Term t_min(const Term& a, const Term& b);      // a - (a - b)
// Select by a 0/1 flag: flag*then + (1-flag)*otherwise.
Term t_sel(const Term& flag01, const Term& then_t, const Term& else_t);

// ---------------------------------------------------------------------------
// Formulas

class Formula {
 public:
  enum class Kind {
    Atom, Top, Bot, Not, And, Or, Imp,
    AllB, ExB,       // bounded: nat v <= bound, ord v prec bound
    All, Ex          // unbounded
  };
  enum class Cmp { Le, Eq, OrdLess, OrdLeq, OrdEq };

  Formula();  // Top
  static Formula atom(Cmp cmp, Term lhs, Term rhs);
  static Formula le(Term a, Term b) { return atom(Cmp::Le, a, b); }
  static Formula eq(Term a, Term b) { return atom(Cmp::Eq, a, b); }
  static Formula top();
  static Formula bot();
  static Formula lnot(Formula a);
  static Formula land(Formula a, Formula b);
  static Formula lor(Formula a, Formula b);
  static Formula imp(Formula a, Formula b);
  static Formula all_le(std::string var, Term bound, Formula body);   // forall v <= t
  static Formula ex_le(std::string var, Term bound, Formula body);    // exists v <= t
  static Formula all_prec(std::string var, Term bound, Formula body); // forall g prec o
  static Formula ex_prec(std::string var, Term bound, Formula body);  // exists g prec o
  static Formula all(std::string var, Sort sort, Formula body);
  static Formula ex(std::string var, Sort sort, Formula body);

  Kind kind() const;
  Cmp cmp() const;
  const Term& lhs() const;
  const Term& rhs() const;
  const Formula& child(std::size_t i = 0) const;  // Not: 0; And/Or/Imp: 0,1
  const std::string& qvar() const;
  Sort qsort() const;
  const Term& qbound() const;  // AllB/ExB only
  const Formula& body() const;

  bool operator==(const Formula& o) const;
  bool operator!=(const Formula& o) const { return !(*this == o); }

  std::size_t size() const;
  bool is_open() const;  // quantifier-free

 private:
  struct Node;
  std::shared_ptr<const Node> node_;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
};

// Fold a list into a conjunction/disjunction; empty list gives Top/Bot.
Formula conj_all(const std::vector<Formula>& fs);
Formula disj_all(const std::vector<Formula>& fs);

// ---------------------------------------------------------------------------
// Free variables, substitution, renaming

struct VarRef {
  std::string name;
  Sort sort;
  auto operator<=>(const VarRef&) const = default;
};

std::set<VarRef> free_vars(const Term& t);
std::set<VarRef> free_vars(const Formula& f);
std::set<std::string> bound_vars(const Formula& f);

// Capture-avoiding substitution; binders shadow, bound variables are renamed
// when a substituted term would be captured.
Term substitute(const Term& t, const std::map<std::string, Term>& sub);
Formula substitute(const Formula& f, const std::map<std::string, Term>& sub);
Term substitute(const Term& t, const std::string& var, const Term& repl);
Formula substitute(const Formula& f, const std::string& var, const Term& repl);

// Renames every bound variable whose name is in `avoid` (or repeats within the
// formula) to a fresh derivative name; returns the renamed formula and extends
// `avoid` with every name now in use.  Used to keep constructions collision-free.
Formula freshen_bound(const Formula& f, std::set<std::string>& avoid);

// Derive a fresh name from `base` avoiding the given set ("y", "y_2", "y_3", ...).
std::string fresh_name(const std::string& base, const std::set<std::string>& avoid);
// Strips a "_<n>" or "'" suffix chain added by fresh_name / pair renaming.
std::string base_name(const std::string& name);

// ---------------------------------------------------------------------------
// Signature: interpreted operators beyond the base language

class Signature {
 public:
  struct OpInfo {
    std::size_t arity = 0;
    Sort result = Sort::Nat;
    std::vector<Sort> arg_sorts;   // empty means all-Nat
    bool monotone = false;         // admits itself as a monotone majorizer
    std::string interp_id;         // stable id for serialization
    std::function<std::uint64_t(const std::vector<std::uint64_t>&)> eval;
  };

  // Base + len + smash.
  static const Signature& standard();

  Signature();  // same as standard()
  void register_op(const std::string& name, OpInfo info);
  const OpInfo* find(const std::string& name) const;
  bool knows(const std::string& name) const;

  // Sort of a term; throws SyntaxError on arity/sort violations or unknown ops.
  Sort sort_of(const Term& t) const;
  void check_formula(const Formula& f) const;  // sorts of all atoms/bounds

 private:
  std::map<std::string, OpInfo> extra_;
};

// ---------------------------------------------------------------------------
// Classification in the bounded quantifier hierarchy over open matrices

struct FormulaClass {
  enum class Kind { Open, Sigma, Pi };
  Kind kind = Kind::Open;
  int level = 0;

  static FormulaClass open() { return {Kind::Open, 0}; }
  static FormulaClass sigma(int k) { return {Kind::Sigma, k}; }
  static FormulaClass pi(int k) { return {Kind::Pi, k}; }
  bool operator==(const FormulaClass&) const = default;
  std::string to_string() const;

  // True if a formula with least levels (sig, pi) fits inside this class.
  bool admits(int least_sigma, int least_pi) const;
};

// Least levels of a formula: least k with f in Sigma_k / Pi_k.  A conjunction
// or disjunction takes the max of its parts (the classes are closed under
// both); consecutive same-polarity bounded quantifiers share one block.
// Unbounded or ordinal quantifiers make a formula unclassifiable (INT_MAX).
struct Levels {
  int sigma = 0;
  int pi = 0;
  bool classifiable() const;
};
Levels least_levels(const Formula& f);

// The least class of f: Open when sigma==pi==0, otherwise the side with the
// smaller level (Pi on ties).  Throws SyntaxError if unclassifiable.
FormulaClass classify(const Formula& f);

// True if f is universal (no existential quantifier in negation normal form);
// this is the shape required of transfinite-induction formulas.
bool is_universal_formula(const Formula& f);

// ---------------------------------------------------------------------------
// Characteristic terms for open nat formulas: value 1 when true, else 0.

Term char_term(const Formula& open_formula);

// ---------------------------------------------------------------------------
// Monotone majorizer calculus and term ideals

// A term that is everywhere >= t, monotone in every variable (truncated
// subtraction and division are replaced by their left arguments).  Returns
// nullopt when t uses a non-monotone extension operator.
std::optional<Term> monotone_majorizer(const Term& t, const Signature& sig);

class TermIdeal {
 public:
  enum class Preset { All, Closed, PolyLen, IterLen };

  static TermIdeal all();
  static TermIdeal closed();
  static TermIdeal poly_len();           // terms majorized by p(|x...|)
  static TermIdeal iter_len(unsigned m); // terms below an m-fold length

  struct Membership {
    bool member = false;
    std::optional<Term> majorizer;  // monotone when present
  };
  Membership in_ideal(const Term& t, const Signature& sig) const;

  Preset preset() const { return preset_; }
  unsigned iter_depth() const { return m_; }
  std::string name() const;
  static TermIdeal by_name(const std::string& name);

 private:
  Preset preset_ = Preset::All;
  unsigned m_ = 1;
};

}  // namespace flowforge
