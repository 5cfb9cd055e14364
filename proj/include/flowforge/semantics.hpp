#pragma once

// Evaluation of terms and truncated decision of formulas over an initial
// segment of the naturals (and a finite sample of ordinals).  Everything a
// verdict reports is deterministic: counterexamples are the lexicographically
// least assignment in sorted-variable-name order.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flowforge/syntax.hpp"

namespace flowforge {

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised internally when the step budget runs out; surfaces as a verdict.
struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("evaluation budget exhausted") {}
};

using Value = std::variant<std::uint64_t, Ordinal>;

// Flat assignment; later bindings shadow earlier ones.
class Env {
 public:
  void set(const std::string& name, std::uint64_t v);
  void set(const std::string& name, Ordinal v);
  void set(const std::string& name, Value v);
  // Scoped shadowing for quantifier recursion.
  void push(const std::string& name, Value v);
  void pop();
  const Value* find(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::pair<std::string, Value>>& items() const { return items_; }
  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, Value>> items_;
};

// Truncation parameters.  `domain` is inclusive: free nat variables range over
// 0..domain.  `budget` counts evaluation steps across one whole query.
struct Cap {
  std::uint64_t domain = 8;
  std::uint64_t budget = 10'000'000;
  std::vector<Ordinal> ord_sample;  // enumeration set for ordinal variables

  Cap with_domain(std::uint64_t d) const { Cap c = *this; c.domain = d; return c; }
};

struct Budget {
  std::uint64_t remaining;
  explicit Budget(std::uint64_t b) : remaining(b) {}
  void spend(std::uint64_t n = 1) {
    if (remaining < n) { remaining = 0; throw BudgetExhausted{}; }
    remaining -= n;
  }
};

struct Verdict {
  enum class Status { Verified, Refuted, BudgetExceeded };
  Status status = Status::Verified;
  std::optional<Env> counterexample;  // Refuted only
  std::string note;                   // which condition failed, free text

  bool verified() const { return status == Status::Verified; }
  bool refuted() const { return status == Status::Refuted; }
  static Verdict ok() { return {}; }
  static Verdict refute(Env cex, std::string note_ = "");
  static Verdict out_of_budget(std::string note_ = "");
  std::string to_string() const;
};

// Term evaluation.  Nat overflow (beyond 2^64-1) raises EvalError; the
// checkers convert that into a budget-style failure note.
Value eval_value(const Term& t, const Env& env, const Signature& sig, Budget& budget);
std::uint64_t eval_term(const Term& t, const Env& env, const Signature& sig, Budget& budget);
Ordinal eval_ord(const Term& t, const Env& env, const Signature& sig, Budget& budget);

// Options for decide/check: `allow_unbounded` enumerates unbounded nat
// quantifiers over 0..domain and unbounded ordinal quantifiers over the
// sample (a truncation used by the transfinite checkers; reported, never
// silent).  With it off, unbounded quantifiers raise EvalError.
struct DecideOpts {
  bool allow_unbounded = false;
};

bool decide(const Formula& f, const Env& env, const Cap& cap, const Signature& sig,
            Budget& budget, const DecideOpts& opts = {});

// Checks hyp -> concl for every assignment of the free variables not fixed by
// `fixed` with values 0..domain (nat) / the sample (ord).  `workers` > 1
// splits the assignment space; the reported counterexample is still the least.
Verdict check_implication(const Formula& hyp, const Formula& concl, const Cap& cap,
                          const Signature& sig, const Env* fixed = nullptr,
                          unsigned workers = 1, const DecideOpts& opts = {});

// All assignments of `vars` (sorted by name) within the cap, in
// lexicographic order.  Helper shared by the checkers and the searchers.
std::vector<VarRef> sorted_free_vars(const Formula& f, const Env* fixed);

}  // namespace flowforge
