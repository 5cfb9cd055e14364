#include "flowforge/semantics.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <mutex>
#include <sstream>
#include <thread>

namespace flowforge {

void Env::set(const std::string& name, std::uint64_t v) { set(name, Value{v}); }
void Env::set(const std::string& name, Ordinal v) { set(name, Value{std::move(v)}); }

void Env::set(const std::string& name, Value v) {
  for (auto it = items_.rbegin(); it != items_.rend(); ++it) {
    if (it->first == name) { it->second = std::move(v); return; }
  }
  items_.emplace_back(name, std::move(v));
}

void Env::push(const std::string& name, Value v) { items_.emplace_back(name, std::move(v)); }
void Env::pop() { items_.pop_back(); }

const Value* Env::find(const std::string& name) const {
  for (auto it = items_.rbegin(); it != items_.rend(); ++it)
    if (it->first == name) return &it->second;
  return nullptr;
}

std::string Env::to_string() const {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const auto& [k, v] : items_) {
    if (!first) os << ", ";
    first = false;
    os << k << "=";
    if (std::holds_alternative<std::uint64_t>(v)) os << std::get<std::uint64_t>(v);
    else os << std::get<Ordinal>(v).to_string();
  }
  os << "}";
  return os.str();
}

Verdict Verdict::refute(Env cex, std::string note_) {
  Verdict v;
  v.status = Status::Refuted;
  v.counterexample = std::move(cex);
  v.note = std::move(note_);
  return v;
}

Verdict Verdict::out_of_budget(std::string note_) {
  Verdict v;
  v.status = Status::BudgetExceeded;
  v.note = std::move(note_);
  return v;
}

std::string Verdict::to_string() const {
  switch (status) {
    case Status::Verified: return "verified" + (note.empty() ? "" : " (" + note + ")");
    case Status::Refuted:
      return "refuted " + (counterexample ? counterexample->to_string() : "{}") +
             (note.empty() ? "" : " (" + note + ")");
    case Status::BudgetExceeded:
      return "budget-exceeded" + (note.empty() ? "" : " (" + note + ")");
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Term evaluation

namespace {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = a + b;
  if (r < a) throw EvalError("arithmetic overflow in +");
  return r;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a) throw EvalError("arithmetic overflow in *");
  return a * b;
}

std::uint64_t nat_len(std::uint64_t a) {
  // Number of bits in the binary representation; |0| = 0.
  return a == 0 ? 0 : static_cast<std::uint64_t>(64 - std::countl_zero(a));
}

}  // namespace

Value eval_value(const Term& t, const Env& env, const Signature& sig, Budget& budget) {
  budget.spend();
  switch (t.kind()) {
    case Term::Kind::Num: return t.num_value();
    case Term::Kind::OrdNum: return t.ord_value();
    case Term::Kind::Var: {
      const Value* v = env.find(t.var_name());
      if (!v) throw EvalError("unbound variable " + t.var_name());
      bool is_nat = std::holds_alternative<std::uint64_t>(*v);
      if (is_nat != (t.var_sort() == Sort::Nat))
        throw EvalError("variable " + t.var_name() + " bound at the wrong sort");
      return *v;
    }
    case Term::Kind::App: {
      const std::string& op = t.op();
      const auto& args = t.args();
      auto nat = [&](std::size_t i) {
        return eval_term(args[i], env, sig, budget);
      };
      auto ord = [&](std::size_t i) {
        return eval_ord(args[i], env, sig, budget);
      };
      if (op == "+") return checked_add(nat(0), nat(1));
      if (op == "*") return checked_mul(nat(0), nat(1));
      if (op == "-") {
        std::uint64_t a = nat(0), b = nat(1);
        return a >= b ? a - b : 0;
      }
      if (op == "div") {
        // div(a,b) = floor(a / (b+1)): total, and b=0 gives plain identity.
        std::uint64_t a = nat(0), b = nat(1);
        return a / (b + 1);
      }
      if (op == "len") return nat_len(nat(0));
      if (op == "smash") {
        std::uint64_t e = checked_mul(nat_len(nat(0)), nat_len(nat(1)));
        if (e >= 64) throw EvalError("arithmetic overflow in smash");
        return std::uint64_t{1} << e;
      }
      if (op == "fin") return Ordinal::finite(nat(0));
      if (op == "o+") return ord(0) + ord(1);
      if (op == "o*") return ord(0) * ord(1);
      if (op == "o-") {
        Ordinal a = ord(0), b = ord(1);
        // Truncated on the ordinal side as well: a - b = 0 when a < b.
        if (Ordinal::compare(a, b) < 0) return Ordinal();
        return Ordinal::left_sub(a, b);
      }
      if (op == "odiv" || op == "omod") {
        Ordinal q, r;
        Ordinal::divmod(ord(0), ord(1), q, r);
        return op == "odiv" ? q : r;
      }
      const auto* info = sig.find(op);
      if (!info) throw EvalError("unknown operator " + op);
      std::vector<std::uint64_t> vals;
      vals.reserve(args.size());
      for (std::size_t i = 0; i < args.size(); ++i) vals.push_back(nat(i));
      return info->eval(vals);
    }
  }
  throw EvalError("bad term");
}

std::uint64_t eval_term(const Term& t, const Env& env, const Signature& sig, Budget& budget) {
  Value v = eval_value(t, env, sig, budget);
  if (!std::holds_alternative<std::uint64_t>(v))
    throw EvalError("expected a nat-sorted term");
  return std::get<std::uint64_t>(v);
}

Ordinal eval_ord(const Term& t, const Env& env, const Signature& sig, Budget& budget) {
  Value v = eval_value(t, env, sig, budget);
  if (!std::holds_alternative<Ordinal>(v))
    throw EvalError("expected an ordinal-sorted term");
  return std::get<Ordinal>(v);
}

// ---------------------------------------------------------------------------
// Decision

namespace {

bool decide_rec(const Formula& f, Env& env, const Cap& cap, const Signature& sig,
                Budget& budget, const DecideOpts& opts) {
  budget.spend();
  switch (f.kind()) {
    case Formula::Kind::Top: return true;
    case Formula::Kind::Bot: return false;
    case Formula::Kind::Atom: {
      switch (f.cmp()) {
        case Formula::Cmp::Le:
          return eval_term(f.lhs(), env, sig, budget) <= eval_term(f.rhs(), env, sig, budget);
        case Formula::Cmp::Eq:
          return eval_term(f.lhs(), env, sig, budget) == eval_term(f.rhs(), env, sig, budget);
        case Formula::Cmp::OrdLess:
          return Ordinal::compare(eval_ord(f.lhs(), env, sig, budget),
                                  eval_ord(f.rhs(), env, sig, budget)) < 0;
        case Formula::Cmp::OrdLeq:
          return Ordinal::compare(eval_ord(f.lhs(), env, sig, budget),
                                  eval_ord(f.rhs(), env, sig, budget)) <= 0;
        case Formula::Cmp::OrdEq:
          return Ordinal::compare(eval_ord(f.lhs(), env, sig, budget),
                                  eval_ord(f.rhs(), env, sig, budget)) == 0;
      }
      return false;
    }
    case Formula::Kind::Not: return !decide_rec(f.child(0), env, cap, sig, budget, opts);
    case Formula::Kind::And:
      return decide_rec(f.child(0), env, cap, sig, budget, opts) &&
             decide_rec(f.child(1), env, cap, sig, budget, opts);
    case Formula::Kind::Or:
      return decide_rec(f.child(0), env, cap, sig, budget, opts) ||
             decide_rec(f.child(1), env, cap, sig, budget, opts);
    case Formula::Kind::Imp:
      return !decide_rec(f.child(0), env, cap, sig, budget, opts) ||
             decide_rec(f.child(1), env, cap, sig, budget, opts);
    case Formula::Kind::AllB: case Formula::Kind::ExB: {
      const bool is_all = f.kind() == Formula::Kind::AllB;
      bool result = is_all;
      if (f.qsort() == Sort::Nat) {
        std::uint64_t b = eval_term(f.qbound(), env, sig, budget);
        env.push(f.qvar(), Value{std::uint64_t{0}});
        for (std::uint64_t v = 0; v <= b; ++v) {
          budget.spend();
          env.set(f.qvar(), v);
          bool inner = decide_rec(f.body(), env, cap, sig, budget, opts);
          if (inner != is_all) { result = !is_all; break; }
        }
      } else {
        Ordinal b = eval_ord(f.qbound(), env, sig, budget);
        env.push(f.qvar(), Value{Ordinal()});
        for (const Ordinal& o : cap.ord_sample) {
          if (Ordinal::compare(o, b) >= 0) continue;  // strict: o < b
          budget.spend();
          env.set(f.qvar(), o);
          bool inner = decide_rec(f.body(), env, cap, sig, budget, opts);
          if (inner != is_all) { result = !is_all; break; }
        }
      }
      env.pop();
      return result;
    }
    case Formula::Kind::All: case Formula::Kind::Ex: {
      if (!opts.allow_unbounded)
        throw EvalError("unbounded quantifier outside a truncated context");
      const bool is_all = f.kind() == Formula::Kind::All;
      bool result = is_all;
      if (f.qsort() == Sort::Nat) {
        env.push(f.qvar(), Value{std::uint64_t{0}});
        for (std::uint64_t v = 0; v <= cap.domain; ++v) {
          budget.spend();
          env.set(f.qvar(), v);
          bool inner = decide_rec(f.body(), env, cap, sig, budget, opts);
          if (inner != is_all) { result = !is_all; break; }
        }
      } else {
        env.push(f.qvar(), Value{Ordinal()});
        for (const Ordinal& o : cap.ord_sample) {
          budget.spend();
          env.set(f.qvar(), o);
          bool inner = decide_rec(f.body(), env, cap, sig, budget, opts);
          if (inner != is_all) { result = !is_all; break; }
        }
      }
      env.pop();
      return result;
    }
  }
  return false;
}

}  // namespace

bool decide(const Formula& f, const Env& env, const Cap& cap, const Signature& sig,
            Budget& budget, const DecideOpts& opts) {
  Env scratch = env;
  return decide_rec(f, scratch, cap, sig, budget, opts);
}

// ---------------------------------------------------------------------------
// Implication checking

std::vector<VarRef> sorted_free_vars(const Formula& f, const Env* fixed) {
  std::vector<VarRef> vars;
  for (const auto& v : free_vars(f)) {
    if (fixed && fixed->has(v.name)) continue;
    vars.push_back(v);
  }
  std::sort(vars.begin(), vars.end());
  return vars;
}

namespace {

// Odometer over variable assignments: nat variables count 0..domain, ordinal
// variables walk the sample.  Index order matches lexicographic order on the
// tuple of positions, vars[0] most significant.
struct Odometer {
  std::vector<VarRef> vars;
  std::uint64_t nat_radix;
  std::vector<std::uint64_t> radices;
  std::uint64_t total = 1;
  const std::vector<Ordinal>* sample;

  Odometer(std::vector<VarRef> vs, const Cap& cap)
      : vars(std::move(vs)), nat_radix(cap.domain + 1), sample(&cap.ord_sample) {
    for (const auto& v : vars) {
      std::uint64_t r = v.sort == Sort::Nat
                            ? nat_radix
                            : std::max<std::uint64_t>(1, sample->size());
      radices.push_back(r);
      if (total > UINT64_MAX / r) throw EvalError("assignment space too large");
      total *= r;
    }
  }

  void fill(std::uint64_t index, Env& env) const {
    for (std::size_t i = vars.size(); i-- > 0;) {
      std::uint64_t pos = index % radices[i];
      index /= radices[i];
      if (vars[i].sort == Sort::Nat) env.set(vars[i].name, pos);
      else env.set(vars[i].name, sample->empty() ? Ordinal() : (*sample)[pos]);
    }
  }
};

}  // namespace

Verdict check_implication(const Formula& hyp, const Formula& concl, const Cap& cap,
                          const Signature& sig, const Env* fixed, unsigned workers,
                          const DecideOpts& opts) {
  Formula query = Formula::imp(hyp, concl);
  std::vector<VarRef> vars = sorted_free_vars(query, fixed);
  Odometer odo(vars, cap);

  auto check_one = [&](std::uint64_t index, Env& env, Budget& budget) -> bool {
    odo.fill(index, env);
    return decide_rec(query, env, cap, sig, budget, opts);
  };

  if (workers <= 1 || odo.total < 256) {
    Env env = fixed ? *fixed : Env{};
    Budget budget(cap.budget);
    try {
      for (std::uint64_t i = 0; i < odo.total; ++i) {
        if (!check_one(i, env, budget)) {
          // Counterexamples include the fixed bindings for a full repro.
          Env cex = fixed ? *fixed : Env{};
          odo.fill(i, cex);
          return Verdict::refute(std::move(cex));
        }
      }
    } catch (const BudgetExhausted&) {
      return Verdict::out_of_budget();
    } catch (const EvalError& e) {
      return Verdict::out_of_budget(e.what());
    }
    return Verdict::ok();
  }

  // Parallel scan.  Each worker owns a contiguous slice and an equal share of
  // the budget; the least refutation index wins, and budget exhaustion only
  // counts when no refutation precedes the first exhausted slice.
  std::atomic<std::uint64_t> best_refuted{UINT64_MAX};
  std::atomic<std::uint64_t> first_exhausted{UINT64_MAX};
  std::atomic<bool> eval_failed{false};
  std::string eval_note;
  std::mutex note_mu;
  std::uint64_t chunk = (odo.total + workers - 1) / workers;
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      std::uint64_t lo = w * chunk;
      std::uint64_t hi = std::min<std::uint64_t>(odo.total, lo + chunk);
      if (lo >= hi) return;
      Env env = fixed ? *fixed : Env{};
      Budget budget(cap.budget / workers + 1);
      try {
        for (std::uint64_t i = lo; i < hi; ++i) {
          if (best_refuted.load(std::memory_order_relaxed) < lo) return;
          if (!check_one(i, env, budget)) {
            std::uint64_t cur = best_refuted.load();
            while (i < cur && !best_refuted.compare_exchange_weak(cur, i)) {}
            return;
          }
        }
      } catch (const BudgetExhausted&) {
        std::uint64_t cur = first_exhausted.load();
        while (lo < cur && !first_exhausted.compare_exchange_weak(cur, lo)) {}
      } catch (const EvalError& e) {
        eval_failed = true;
        std::lock_guard<std::mutex> lk(note_mu);
        eval_note = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();

  std::uint64_t r = best_refuted.load(), x = first_exhausted.load();
  if (r != UINT64_MAX && r < x) {
    Env cex = fixed ? *fixed : Env{};
    odo.fill(r, cex);
    return Verdict::refute(std::move(cex));
  }
  if (eval_failed) return Verdict::out_of_budget(eval_note);
  if (x != UINT64_MAX) return Verdict::out_of_budget();
  return Verdict::ok();
}

}  // namespace flowforge
