#pragma once

// Ordinals below epsilon_0 in Cantor normal form.
//
// An ordinal is a finite sum  w^(e_1)*c_1 + ... + w^(e_k)*c_k  with strictly
// decreasing exponents e_1 > ... > e_k (themselves ordinals) and coefficients
// c_i >= 1.  The empty sum is 0; finite ordinals are w^(0)*n.
//
// All values are immutable after construction; arithmetic is purely functional.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowforge {

struct OrdinalError : std::runtime_error {
  explicit OrdinalError(const std::string& what) : std::runtime_error(what) {}
};

class Ordinal {
 public:
  struct Part;

  Ordinal() = default;                      // zero
  static Ordinal finite(std::uint64_t n);   // w^0 * n
  static Ordinal omega();                   // w
  static Ordinal power(const Ordinal& exponent, std::uint64_t coeff = 1);
  static Ordinal omega_tower(unsigned n);   // w_1 = w, w_{n+1} = w^(w_n)

  bool is_zero() const { return parts_.empty(); }
  bool is_finite() const;
  // Value of a finite ordinal; throws OrdinalError on infinite ones.
  std::uint64_t finite_value() const;
  bool is_limit() const;                    // nonzero with no finite tail
  const std::vector<Part>& parts() const { return parts_; }

  // Total order: -1, 0, +1.
  static int compare(const Ordinal& a, const Ordinal& b);
  bool operator==(const Ordinal& o) const { return compare(*this, o) == 0; }
  bool operator!=(const Ordinal& o) const { return compare(*this, o) != 0; }
  bool operator<(const Ordinal& o) const { return compare(*this, o) < 0; }
  bool operator<=(const Ordinal& o) const { return compare(*this, o) <= 0; }

  // Ordinal sum (non-commutative: 1 + w = w, w + 1 > w).
  friend Ordinal operator+(const Ordinal& a, const Ordinal& b);
  // Ordinal product (non-commutative; a*b is "b copies of a").
  friend Ordinal operator*(const Ordinal& a, const Ordinal& b);
  // Left subtraction: for b <= a, the unique r with b + r = a.
  // Throws OrdinalError when a < b.
  static Ordinal left_sub(const Ordinal& a, const Ordinal& b);
  // Division with remainder: a = b*q + r with r < b.  Throws on b = 0.
  static void divmod(const Ordinal& a, const Ordinal& b, Ordinal& q, Ordinal& r);

  Ordinal successor() const { return *this + finite(1); }

  // Canonical rendering, e.g. "w^(w)*2 + w^(2) + 3"; "0" for zero.
  std::string to_string() const;

 private:
  // Invariant: exponents strictly decreasing, coefficients >= 1.
  std::vector<Part> parts_;
  void normalize_check() const;
};

struct Ordinal::Part {
  Ordinal exponent;
  std::uint64_t coeff = 0;
};

// Parses the canonical syntax produced by to_string:
//   ord   := '0' | sum
//   sum   := term (' + ' term)*
//   term  := NUM | 'w' ['^' '(' ord ')'] ['*' NUM]
// Throws OrdinalError on malformed input.
Ordinal parse_ordinal(const std::string& text);

// Named preset caps for search problems and TI calculi:
//   "w2"       -> w^2            (theories with Sigma_1 induction)
//   "w_n:<k>"  -> omega tower of height k
//   "eps0-below" -> marker for "any ordinal below eps_0"; represented as a cap
//                   that compares above every CNF ordinal we construct here.
// A cap is (ordinal, unbounded?) — unbounded means eps0-below.
struct OrdinalCap {
  Ordinal bound;        // meaningful when !unbounded
  bool unbounded = false;
  bool admits(const Ordinal& o) const { return unbounded || o < bound; }
  std::string to_string() const;
};
OrdinalCap parse_ordinal_cap(const std::string& name);

// Finite downward-sampled sub-order used to verify ordinal-indexed statements
// at cap.  Deterministic, sorted ascending, duplicate-free.
//
// The default sample for a cap contains every CNF ordinal built from exponents
// in the sample of the cap's exponent domain with coefficients <= coeff_max,
// value below the cap, up to `max_size` elements (smallest first).
std::vector<Ordinal> sample_below(const OrdinalCap& cap,
                                  std::uint64_t coeff_max = 3,
                                  std::size_t max_size = 64);

}  // namespace flowforge
