#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "flowforge/parse.hpp"
#include "flowforge/semantics.hpp"
#include "flowforge/strict.hpp"
#include "gen.hpp"
#include "oracle.hpp"

using namespace flowforge;

static Term V(const std::string& n) { return Term::var(n); }
static Term N(std::uint64_t v) { return Term::num(v); }

static const Signature& SIG = Signature::standard();

static std::uint64_t ev(const Term& t, const Env& env) {
  Budget b(1'000'000);
  return eval_term(t, env, SIG, b);
}

static bool dec(const Formula& f, const Env& env, std::uint64_t dom = 8,
                const DecideOpts& opts = {}) {
  Cap cap;
  cap.domain = dom;
  Budget b(100'000'000);
  return decide(f, env, cap, SIG, b, opts);
}

// Enumerate all assignments of `vars` over 0..dom, first variable most
// significant, calling fn(values).
template <class Fn>
static void for_each_env(const std::vector<std::string>& vars, std::uint64_t dom, Fn&& fn) {
  std::vector<std::uint64_t> vals(vars.size(), 0);
  for (;;) {
    fn(vals);
    std::size_t i = vars.size();
    while (i > 0) {
      if (++vals[i - 1] <= dom) break;
      vals[i - 1] = 0;
      --i;
    }
    if (i == 0) break;
  }
}

static std::vector<std::string> nat_free_names(const Formula& f) {
  std::vector<std::string> names;
  for (const auto& v : free_vars(f))
    if (v.sort == Sort::Nat) names.push_back(v.name);
  return names;
}

TEST_CASE("environment lookup and scoping") {
  Env e;
  e.set("x", std::uint64_t{3});
  CHECK(std::get<std::uint64_t>(*e.find("x")) == 3);
  e.push("x", std::uint64_t{9});
  CHECK(std::get<std::uint64_t>(*e.find("x")) == 9);
  e.pop();
  CHECK(std::get<std::uint64_t>(*e.find("x")) == 3);
  CHECK(e.find("nope") == nullptr);
  e.set("x", std::uint64_t{4});
  CHECK(std::get<std::uint64_t>(*e.find("x")) == 4);
  CHECK(e.size() == 1);
}

TEST_CASE("term evaluation matches the base-language semantics") {
  Env env;
  env.set("x", std::uint64_t{10});
  env.set("y", std::uint64_t{3});
  CHECK(ev(V("x") + V("y"), env) == 13);
  CHECK(ev(monus(V("y"), V("x")), env) == 0);
  CHECK(ev(monus(V("x"), V("y")), env) == 7);
  CHECK(ev(quot(V("x"), V("y")), env) == 2);   // 10 / (3+1)
  CHECK(ev(quot(V("x"), N(0)), env) == 10);    // division is total
  CHECK(ev(t_len(N(0)), env) == 0);
  CHECK(ev(t_len(N(1)), env) == 1);
  CHECK(ev(t_len(N(8)), env) == 4);
  CHECK(ev(t_smash(N(3), N(5)), env) == 64);   // 2^(2*3)
  CHECK(ev(t_min(V("x"), V("y")), env) == 3);
  CHECK(ev(t_sel(N(1), V("x"), V("y")), env) == 10);
  CHECK(ev(t_sel(N(0), V("x"), V("y")), env) == 0 + 3);

  CHECK_THROWS_AS(ev(V("unbound"), env), EvalError);
  // Overflow surfaces as an evaluation error.
  Term big = t_smash(N((1u << 16) - 1), N((1u << 16) - 1));
  CHECK_THROWS_AS(ev(t_smash(big, big), env), EvalError);

  Env oe;
  Budget b(1000);
  CHECK(Ordinal::compare(eval_ord(parse_term("w - 1"), oe, SIG, b), Ordinal::omega()) == 0);
  CHECK(eval_ord(parse_term("1 - w"), oe, SIG, b).is_zero());  // truncated
}

TEST_CASE("random terms agree with the reference evaluator") {
  std::mt19937_64 rng(20240819);
  std::vector<std::string> vars{"x", "y"};
  int agreed = 0, errored = 0;
  for (int i = 0; i < 1500; ++i) {
    Term t = gen::term(rng, 3, vars);
    std::uniform_int_distribution<std::uint64_t> val(0, 20);
    std::uint64_t xv = val(rng), yv = val(rng);
    Env env;
    env.set("x", xv);
    env.set("y", yv);
    oracle::NatEnv nenv{{"x", xv}, {"y", yv}};
    std::optional<std::uint64_t> got, want;
    try { got = ev(t, env); } catch (const EvalError&) {}
    try { want = oracle::eval(t, nenv); } catch (const oracle::Fail&) {}
    CAPTURE(print_term(t));
    CAPTURE(xv);
    CAPTURE(yv);
    CHECK(got == want);
    if (got) ++agreed; else ++errored;
  }
  CHECK(agreed > 1000);  // overflow should be the rare case
}

TEST_CASE("decision of quantified formulas matches the reference") {
  std::mt19937_64 rng(20240820);
  std::vector<std::string> vars{"x", "y"};
  const std::uint64_t dom = 3;
  for (int i = 0; i < 400; ++i) {
    Formula f = gen::formula(rng, 2, 2, vars);
    std::uniform_int_distribution<std::uint64_t> val(0, dom);
    std::uint64_t xv = val(rng), yv = val(rng);
    Env env;
    env.set("x", xv);
    env.set("y", yv);
    oracle::NatEnv nenv{{"x", xv}, {"y", yv}};
    std::optional<bool> got, want;
    try { got = dec(f, env, dom); } catch (const EvalError&) {}
    try { want = oracle::holds(f, nenv, {}, dom, {}); } catch (const oracle::Fail&) {}
    CAPTURE(print_formula(f));
    CHECK(got == want);
  }
}

TEST_CASE("characteristic terms track truth of open formulas") {
  std::mt19937_64 rng(20240821);
  std::vector<std::string> vars{"x", "y"};
  for (int i = 0; i < 300; ++i) {
    Formula f = gen::open_formula(rng, 2, vars);
    Term chi = char_term(f);
    std::uniform_int_distribution<std::uint64_t> val(0, 8);
    std::uint64_t xv = val(rng), yv = val(rng);
    Env env;
    env.set("x", xv);
    env.set("y", yv);
    std::optional<std::uint64_t> c;
    std::optional<bool> truth;
    try { c = ev(chi, env); } catch (const EvalError&) {}
    try { truth = dec(f, env); } catch (const EvalError&) {}
    if (!c || !truth) continue;  // overflow in a subterm
    CAPTURE(print_formula(f));
    CHECK((*c == 0 || *c == 1));
    CHECK((*c == 1) == *truth);
  }
}

TEST_CASE("ordinal quantification is strict and sample-driven") {
  Cap cap;
  cap.ord_sample = {Ordinal(), Ordinal::finite(1), Ordinal::finite(2),
                    Ordinal::omega(), Ordinal::omega() + Ordinal::finite(1),
                    Ordinal::power(Ordinal::finite(2))};
  Env env;
  Budget b(1'000'000);
  ParseOpts ov;
  ov.ord_vars = {"a"};

  CHECK(decide(parse_formula("forall g prec w (g prec w)"), env, cap, SIG, b));
  // Strict bound: w itself is excluded below w+1's predecessors... the bound
  // w^(2) excludes w^(2) from the range.
  CHECK(decide(parse_formula("forall g prec w^(2) (g prec w^(2))"), env, cap, SIG, b));
  CHECK(decide(parse_formula("exists g prec w^(2) (w preceq g)"), env, cap, SIG, b));
  CHECK(!decide(parse_formula("exists g prec w (w preceq g)"), env, cap, SIG, b));

  env.set("a", Ordinal::omega());
  CHECK(decide(parse_formula("a prec w^(2)", ov), env, cap, SIG, b));
  CHECK(decide(parse_formula("a + 1 prec w * 2", ov), env, cap, SIG, b));
  CHECK(decide(parse_formula("1 + a = a", ov), env, cap, SIG, b));

  // Unbounded quantifiers require explicit opt-in.
  Formula u = parse_formula("forall g : ord (g prec w^(3))");
  CHECK_THROWS_AS(decide(u, env, cap, SIG, b), EvalError);
  DecideOpts opts;
  opts.allow_unbounded = true;
  CHECK(decide(u, env, cap, SIG, b, opts));  // every sample point is below w^3
  Formula u2 = parse_formula("forall g : ord (g prec w^(2))");
  CHECK(!decide(u2, env, cap, SIG, b, opts));  // w^2 itself is in the sample

  Formula n = parse_formula("forall v : nat (v <= 8)");
  CHECK_THROWS_AS(decide(n, env, cap, SIG, b), EvalError);
  CHECK(decide(n, env, cap, SIG, b, opts));  // truncated to 0..domain
}

TEST_CASE("implication checking reports least counterexamples") {
  Cap cap;
  cap.domain = 3;

  Verdict v = check_implication(Formula::top(), parse_formula("x <= x"), cap, SIG);
  CHECK(v.verified());

  v = check_implication(Formula::top(), parse_formula("x = y"), cap, SIG);
  REQUIRE(v.refuted());
  REQUIRE(v.counterexample.has_value());
  // Lexicographically least failing assignment in sorted name order.
  CHECK(std::get<std::uint64_t>(*v.counterexample->find("x")) == 0);
  CHECK(std::get<std::uint64_t>(*v.counterexample->find("y")) == 1);

  v = check_implication(parse_formula("x <= 1"), parse_formula("x * x <= 1"), cap, SIG);
  CHECK(v.verified());
  v = check_implication(parse_formula("x <= 2"), parse_formula("x * x <= 2"), cap, SIG);
  REQUIRE(v.refuted());
  CHECK(std::get<std::uint64_t>(*v.counterexample->find("x")) == 2);

  // Fixed variables are not enumerated.
  Env fixed;
  fixed.set("y", std::uint64_t{2});
  v = check_implication(Formula::top(), parse_formula("x <= y \\/ y <= x"), cap, SIG, &fixed);
  CHECK(v.verified());
  v = check_implication(Formula::top(), parse_formula("x <= y"), cap, SIG, &fixed);
  REQUIRE(v.refuted());
  CHECK(std::get<std::uint64_t>(*v.counterexample->find("x")) == 3);
  CHECK(std::get<std::uint64_t>(*v.counterexample->find("y")) == 2);

  // Exhausted budget surfaces as a verdict, not an exception.
  Cap tiny = cap;
  tiny.budget = 5;
  v = check_implication(Formula::top(), parse_formula("x + y + z <= 9"), tiny, SIG);
  CHECK(v.status == Verdict::Status::BudgetExceeded);

  // Overflow during evaluation is reported the same way.
  Formula ovf = parse_formula("((x + 8) # (x + 8)) # ((y + 8) # (y + 8)) <= 1");
  v = check_implication(Formula::top(), ovf, cap, SIG);
  CHECK(v.status == Verdict::Status::BudgetExceeded);
  CHECK(!v.note.empty());
}

TEST_CASE("parallel implication checking matches sequential") {
  std::mt19937_64 rng(20240822);
  std::vector<std::string> vars{"x", "y", "z", "u"};
  Cap cap;
  cap.domain = 3;  // 4 vars over 0..3 = 256 assignments: the parallel path
  for (int i = 0; i < 60; ++i) {
    Formula hyp = gen::open_formula(rng, 1, vars);
    Formula concl = gen::open_formula(rng, 2, vars);
    Verdict seq = check_implication(hyp, concl, cap, SIG, nullptr, 1);
    Verdict par = check_implication(hyp, concl, cap, SIG, nullptr, 3);
    CAPTURE(print_formula(hyp));
    CAPTURE(print_formula(concl));
    CHECK(seq.status == par.status);
    if (seq.refuted() && par.refuted()) {
      CHECK(seq.counterexample->to_string() == par.counterexample->to_string());
    }
  }
}

TEST_CASE("sorted_free_vars respects fixing") {
  Formula f = parse_formula("x <= y /\\ z = 0");
  auto all = sorted_free_vars(f, nullptr);
  REQUIRE(all.size() == 3);
  CHECK(all[0].name == "x");
  CHECK(all[1].name == "y");
  CHECK(all[2].name == "z");
  Env fixed;
  fixed.set("y", std::uint64_t{1});
  auto some = sorted_free_vars(f, &fixed);
  REQUIRE(some.size() == 2);
  CHECK(some[0].name == "x");
  CHECK(some[1].name == "z");
}

// --------------------------------------------------------------------------
// Strict forms preserve meaning

static void check_strict_equivalent(const Formula& f, FormulaClass cls, std::uint64_t dom) {
  StrictForm s = to_strict(f, cls, SIG);
  Formula g = s.to_formula();
  auto names = nat_free_names(f);
  for_each_env(names, dom, [&](const std::vector<std::uint64_t>& vals) {
    oracle::NatEnv env;
    for (std::size_t i = 0; i < names.size(); ++i) env[names[i]] = vals[i];
    std::optional<bool> a, b;
    try { a = oracle::holds(f, env, {}, dom, {}); } catch (const oracle::Fail&) {}
    try { b = oracle::holds(g, env, {}, dom, {}); } catch (const oracle::Fail&) {}
    CAPTURE(print_formula(f));
    CAPTURE(print_formula(g));
    CHECK(a == b);
  });
}

TEST_CASE("strictification preserves truth at every admissible class") {
  std::mt19937_64 rng(20240823);
  std::vector<std::string> vars{"x", "y"};
  for (int i = 0; i < 250; ++i) {
    Formula f = gen::formula(rng, 2, 1, vars);
    Levels lv = least_levels(f);
    std::vector<FormulaClass> views;
    if (lv.sigma == 0 && lv.pi == 0) {
      views = {FormulaClass::open(), FormulaClass::sigma(1), FormulaClass::pi(1)};
    } else {
      if (lv.sigma <= 3) views.push_back(FormulaClass::sigma(lv.sigma));
      if (lv.pi <= 3) views.push_back(FormulaClass::pi(lv.pi));
      if (lv.sigma + 1 <= 3) views.push_back(FormulaClass::sigma(lv.sigma + 1));
    }
    for (const auto& cls : views) check_strict_equivalent(f, cls, 2);
  }
}

TEST_CASE("strict substitution rejects block variables and preserves meaning") {
  Formula f = parse_formula("exists y <= x (y * y <= x /\\ z <= y)");
  StrictForm s = to_strict(f, FormulaClass::sigma(1), SIG);
  CHECK_THROWS_AS(subst_strict(s, "y", N(1)), SyntaxError);

  StrictForm t = subst_strict(s, "x", N(4));
  Formula inst = t.to_formula();
  Formula direct = substitute(f, "x", N(4));
  for_each_env({"z"}, 6, [&](const std::vector<std::uint64_t>& vals) {
    oracle::NatEnv env{{"z", vals[0]}};
    CHECK(oracle::holds(inst, env, {}, 6, {}) == oracle::holds(direct, env, {}, 6, {}));
  });
}

TEST_CASE("strict pairs preserve both sides") {
  Formula a = parse_formula("exists y <= x (y * y <= x)");
  Formula b = parse_formula("exists y <= x (y + y <= x)");
  StrictPair p = make_strict_pair(a, b, FormulaClass::sigma(1), SIG);
  for_each_env({"x"}, 8, [&](const std::vector<std::uint64_t>& vals) {
    oracle::NatEnv env{{"x", vals[0]}};
    CHECK(oracle::holds(p.src.to_formula(), env, {}, 8, {}) ==
          oracle::holds(a, env, {}, 8, {}));
    CHECK(oracle::holds(p.tgt.to_formula(), env, {}, 8, {}) ==
          oracle::holds(b, env, {}, 8, {}));
  });
}
