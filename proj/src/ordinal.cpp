#include "flowforge/ordinal.hpp"

#include <algorithm>
#include <sstream>

namespace flowforge {

Ordinal Ordinal::finite(std::uint64_t n) {
  Ordinal o;
  if (n > 0) o.parts_.push_back(Part{Ordinal(), n});
  return o;
}

Ordinal Ordinal::omega() { return power(finite(1)); }

Ordinal Ordinal::power(const Ordinal& exponent, std::uint64_t coeff) {
  Ordinal o;
  if (coeff > 0) o.parts_.push_back(Part{exponent, coeff});
  return o;
}

Ordinal Ordinal::omega_tower(unsigned n) {
  if (n == 0) throw OrdinalError("omega tower height must be >= 1");
  Ordinal o = omega();
  for (unsigned i = 1; i < n; ++i) o = power(o);
  return o;
}

bool Ordinal::is_finite() const {
  return parts_.empty() || (parts_.size() == 1 && parts_[0].exponent.is_zero());
}

std::uint64_t Ordinal::finite_value() const {
  if (!is_finite()) throw OrdinalError("finite_value of infinite ordinal " + to_string());
  return parts_.empty() ? 0 : parts_[0].coeff;
}

bool Ordinal::is_limit() const {
  return !parts_.empty() && !parts_.back().exponent.is_zero();
}

int Ordinal::compare(const Ordinal& a, const Ordinal& b) {
  // Lexicographic on (exponent, coeff) term lists; longer prefix wins ties.
  std::size_t n = std::min(a.parts_.size(), b.parts_.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(a.parts_[i].exponent, b.parts_[i].exponent);
    if (c != 0) return c;
    if (a.parts_[i].coeff != b.parts_[i].coeff)
      return a.parts_[i].coeff < b.parts_[i].coeff ? -1 : 1;
  }
  if (a.parts_.size() != b.parts_.size())
    return a.parts_.size() < b.parts_.size() ? -1 : 1;
  return 0;
}

Ordinal operator+(const Ordinal& a, const Ordinal& b) {
  if (b.is_zero()) return a;
  // Terms of a with exponent below b's leading exponent are absorbed.
  const Ordinal& lead = b.parts_.front().exponent;
  Ordinal r;
  for (const auto& p : a.parts_) {
    int c = Ordinal::compare(p.exponent, lead);
    if (c > 0) {
      r.parts_.push_back(p);
    } else if (c == 0) {
      // Merge with b's leading coefficient.
      Ordinal::Part merged{p.exponent, p.coeff + b.parts_.front().coeff};
      r.parts_.push_back(merged);
      r.parts_.insert(r.parts_.end(), b.parts_.begin() + 1, b.parts_.end());
      return r;
    } else {
      break;  // absorbed
    }
  }
  r.parts_.insert(r.parts_.end(), b.parts_.begin(), b.parts_.end());
  return r;
}

Ordinal operator*(const Ordinal& a, const Ordinal& b) {
  if (a.is_zero() || b.is_zero()) return Ordinal();
  Ordinal r;
  const Ordinal& e1 = a.parts_.front().exponent;
  for (const auto& p : b.parts_) {
    if (p.exponent.is_zero()) {
      // a * n: multiply the leading coefficient, keep a's tail.
      Ordinal t;
      t.parts_.push_back(Ordinal::Part{e1, a.parts_.front().coeff * p.coeff});
      t.parts_.insert(t.parts_.end(), a.parts_.begin() + 1, a.parts_.end());
      r = r + t;
    } else {
      // a * w^(e)*c = w^(e1+e)*c for e > 0.
      r = r + Ordinal::power(e1 + p.exponent, p.coeff);
    }
  }
  return r;
}

Ordinal Ordinal::left_sub(const Ordinal& a, const Ordinal& b) {
  if (compare(a, b) < 0) throw OrdinalError("left_sub underflow: " + a.to_string() + " - " + b.to_string());
  if (b.is_zero()) return a;
  // Find the first position where a and b differ.
  std::size_t i = 0;
  while (i < a.parts_.size() && i < b.parts_.size()) {
    int c = compare(a.parts_[i].exponent, b.parts_[i].exponent);
    if (c != 0 || a.parts_[i].coeff != b.parts_[i].coeff) break;
    ++i;
  }
  if (i == b.parts_.size()) {
    // b is a prefix of a: remainder is a's tail.
    Ordinal r;
    r.parts_.assign(a.parts_.begin() + i, a.parts_.end());
    return r;
  }
  // a and b differ at position i with a >= b, so a's part dominates there.
  const Part& pa = a.parts_[i];
  const Part& pb = b.parts_[i];
  Ordinal r;
  if (compare(pa.exponent, pb.exponent) > 0) {
    r.parts_.assign(a.parts_.begin() + i, a.parts_.end());
  } else {
    // Same exponent, pa.coeff > pb.coeff.
    r.parts_.push_back(Part{pa.exponent, pa.coeff - pb.coeff});
    r.parts_.insert(r.parts_.end(), a.parts_.begin() + i + 1, a.parts_.end());
  }
  return r;
}

void Ordinal::divmod(const Ordinal& a, const Ordinal& b, Ordinal& q, Ordinal& r) {
  if (b.is_zero()) throw OrdinalError("ordinal division by zero");
  q = Ordinal();
  r = a;
  // Greedy: peel quotient terms with decreasing exponents.
  while (compare(r, b) >= 0) {
    const Part& lr = r.parts_.front();
    const Part& lb = b.parts_.front();
    int c = compare(lr.exponent, lb.exponent);
    if (c > 0) {
      // b * w^(d) = w^(lb.exp + d); choose d with lb.exp + d = lr.exp.
      Ordinal d = left_sub(lr.exponent, lb.exponent);
      Ordinal qt = power(d, lr.coeff);
      q = q + qt;
      // Subtract b*qt = w^(lr.exp)*lr.coeff from r: drops r's leading term.
      Ordinal nr;
      nr.parts_.assign(r.parts_.begin() + 1, r.parts_.end());
      r = nr;
    } else {
      // Equal leading exponents: finite quotient step.  b*k can overshoot r
      // when the coefficients divide exactly but b's tail exceeds r's tail
      // (e.g. r = w*2, b = w+1), so back off by one in that case.
      std::uint64_t k = lr.coeff / lb.coeff;
      if (k == 0) break;  // r < b handled by loop guard, but be safe
      Ordinal prod = b * finite(k);
      if (compare(prod, r) > 0) {
        --k;
        if (k == 0) break;
        prod = b * finite(k);
      }
      q = q + finite(k);
      r = left_sub(r, prod);
    }
  }
}

std::string Ordinal::to_string() const {
  if (parts_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& p : parts_) {
    if (!first) os << " + ";
    first = false;
    if (p.exponent.is_zero()) {
      os << p.coeff;
    } else {
      os << "w";
      if (!(p.exponent.is_finite() && p.exponent.finite_value() == 1))
        os << "^(" << p.exponent.to_string() << ")";
      if (p.coeff != 1) os << "*" << p.coeff;
    }
  }
  return os.str();
}

void Ordinal::normalize_check() const {
  for (std::size_t i = 0; i + 1 < parts_.size(); ++i)
    if (compare(parts_[i].exponent, parts_[i + 1].exponent) <= 0)
      throw OrdinalError("CNF invariant violated");
  for (const auto& p : parts_)
    if (p.coeff == 0) throw OrdinalError("CNF zero coefficient");
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct OrdParser {
  const std::string& s;
  std::size_t i = 0;

  explicit OrdParser(const std::string& text) : s(text) {}

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool eat(char c) {
    skip_ws();
    if (i < s.size() && s[i] == c) { ++i; return true; }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) throw OrdinalError(std::string("expected '") + c + "' in ordinal at offset " + std::to_string(i));
  }
  bool peek_digit() {
    skip_ws();
    return i < s.size() && s[i] >= '0' && s[i] <= '9';
  }
  std::uint64_t number() {
    skip_ws();
    if (!peek_digit()) throw OrdinalError("expected number in ordinal at offset " + std::to_string(i));
    std::uint64_t v = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
      v = v * 10 + static_cast<std::uint64_t>(s[i] - '0');
      ++i;
    }
    return v;
  }

  Ordinal sum() {
    Ordinal r = term();
    while (true) {
      skip_ws();
      if (eat('+')) r = r + term(); else break;
    }
    return r;
  }

  Ordinal term() {
    skip_ws();
    if (peek_digit()) return Ordinal::finite(number());
    if (i < s.size() && (s[i] == 'w' || s[i] == 'W')) {
      ++i;
      Ordinal e = Ordinal::finite(1);
      if (eat('^')) {
        expect('(');
        e = sum();
        expect(')');
      }
      std::uint64_t c = 1;
      if (eat('*')) c = number();
      return Ordinal::power(e, c);
    }
    throw OrdinalError("malformed ordinal near offset " + std::to_string(i) + " in \"" + s + "\"");
  }
};

}  // namespace

Ordinal parse_ordinal(const std::string& text) {
  OrdParser p(text);
  p.skip_ws();
  if (p.i >= text.size()) throw OrdinalError("empty ordinal");
  Ordinal r = p.sum();
  p.skip_ws();
  if (p.i != text.size()) throw OrdinalError("trailing garbage in ordinal \"" + text + "\"");
  return r;
}

std::string OrdinalCap::to_string() const {
  return unbounded ? "eps0-below" : bound.to_string();
}

OrdinalCap parse_ordinal_cap(const std::string& name) {
  OrdinalCap cap;
  if (name == "eps0-below") {
    cap.unbounded = true;
    return cap;
  }
  if (name == "w2") {
    cap.bound = Ordinal::power(Ordinal::finite(2));
    return cap;
  }
  if (name.rfind("w_n:", 0) == 0) {
    unsigned long h = std::stoul(name.substr(4));
    cap.bound = Ordinal::omega_tower(static_cast<unsigned>(h));
    return cap;
  }
  cap.bound = parse_ordinal(name);  // explicit literal cap
  return cap;
}

std::vector<Ordinal> sample_below(const OrdinalCap& cap, std::uint64_t coeff_max,
                                  std::size_t max_size) {
  // Deterministic bottom-up closure: start from finite seeds, repeatedly add
  // w^(e)*c + tail for sampled exponents e and tails already in the pool.
  std::vector<Ordinal> pool;
  auto admit = [&](const Ordinal& o) {
    if (!cap.unbounded && !(o < cap.bound)) return;
    for (const auto& x : pool)
      if (x == o) return;
    pool.push_back(o);
  };
  for (std::uint64_t n = 0; n <= coeff_max; ++n) admit(Ordinal::finite(n));

  // Exponent seeds: small finites, then w and w^w for tall caps.
  std::vector<Ordinal> exps;
  for (std::uint64_t n = 1; n <= 2; ++n) exps.push_back(Ordinal::finite(n));
  exps.push_back(Ordinal::omega());
  exps.push_back(Ordinal::power(Ordinal::omega()));

  for (int round = 0; round < 2; ++round) {
    std::vector<Ordinal> base = pool;
    for (const auto& e : exps) {
      for (std::uint64_t c = 1; c <= coeff_max; ++c) {
        Ordinal head = Ordinal::power(e, c);
        for (const auto& tail : base) {
          if (pool.size() >= max_size * 4) break;
          if (tail < head || tail.is_zero()) admit(head + tail);
        }
      }
    }
  }
  std::sort(pool.begin(), pool.end(),
            [](const Ordinal& a, const Ordinal& b) { return a < b; });
  if (pool.size() > max_size) pool.resize(max_size);
  return pool;
}

}  // namespace flowforge
