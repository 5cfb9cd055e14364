#pragma once

// Surface syntax for terms and formulas.  Canonical output is plain ASCII:
//
//   formula :=  atom | "top" | "bot" | "~" f | f "/\" f | f "\/" f | f "->" f
//             | ("forall"|"exists") var "<=" term "(" f ")"        nat, inclusive
//             | ("forall"|"exists") var "prec" term "(" f ")"      ord, strict
//             | ("forall"|"exists") var [":" ("nat"|"ord")] "(" f ")"   unbounded
//   atom    :=  term ("<="|"="|"prec"|"preceq") term
//   term    :=  numeral | var | "w" ["^(" ordexpr ")"] ["*" numeral]
//             | term ("+"|"-"|"*"|"#") term | "div(" t "," t ")" | "mod(" t "," t ")"
//             | "|" term "|" | "fin(" term ")" | "min(" t "," t ")"
//             | "sel(" t "," t "," t ")" | op "(" terms ")" | "(" term ")"
//
// Precedence: ~ binds tighter than /\ than \/ than -> (right associative);
// terms: * then # then +,- (left associative).  Quantifier bodies are always
// parenthesized on output.  Unicode aliases are accepted on input.
// Addition, subtraction, comparison and division resolve to their ordinal
// counterparts when an argument is ordinal-sorted; bare numerals coerce.

#include <string>

#include "flowforge/syntax.hpp"

namespace flowforge {

struct ParseError : SyntaxError {
  ParseError(const std::string& what, std::size_t pos)
      : SyntaxError(what + " at offset " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

struct ParseOpts {
  std::set<std::string> ord_vars;  // free variables of ordinal sort
  std::set<std::string> ops;       // extension operators accepted as name(...)
};

Term parse_term(const std::string& text, const ParseOpts& opts = {});
Formula parse_formula(const std::string& text, const ParseOpts& opts = {});

std::string print_term(const Term& t);
std::string print_formula(const Formula& f);

}  // namespace flowforge
