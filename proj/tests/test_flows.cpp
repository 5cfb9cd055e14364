#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "../src/flow_detail.hpp"
#include "flowforge/flows.hpp"
#include "flowforge/parse.hpp"
#include "gen.hpp"

using namespace flowforge;
using detail::alpha_eq;

static const Signature& SIG = Signature::standard();
static Term V(const std::string& n) { return Term::var(n); }
static Term N(std::uint64_t v) { return Term::num(v); }

static Verdict vf(const DetFlow& f, std::uint64_t dom = 8) {
  Cap cap;
  cap.domain = dom;
  return verify_flow(f, cap, SIG);
}

TEST_CASE("constant flow on an open formula") {
  DetFlow f = constant_flow(parse_formula("x <= 5"), FormulaClass::open(), SIG);
  CHECK(f.length == N(0));
  CHECK(vf(f).verified());
}

TEST_CASE("constant flow keeps witnesses aligned at Sigma_1") {
  DetFlow f = constant_flow(parse_formula("exists y <= x (x <= y)"),
                            FormulaClass::sigma(1), SIG);
  CHECK(vf(f).verified());

  // Same start at a Sigma_2 view: padding rounds appear but stay trivial.
  DetFlow g = constant_flow(parse_formula("exists y <= x (x <= y)"),
                            FormulaClass::sigma(2), SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("constant flow at Pi_1") {
  DetFlow f = constant_flow(parse_formula("forall y <= x (y <= x + 1)"),
                            FormulaClass::pi(1), SIG);
  CHECK(vf(f).verified());
}

TEST_CASE("single step between existential statements") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  // Shared base name: the witness forwards automatically.
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  CHECK(vf(f).verified());

  // Distinct names need an explicit override.
  Formula c = parse_formula("exists z <= x (x <= z + 1)");
  DetFlow g = step_flow(a, c, FormulaClass::sigma(1), {{"z", V("y")}}, SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("step flow refutes a wrong witness") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula c = parse_formula("exists z <= x (x <= z + 1)");
  DetFlow g = step_flow(a, c, FormulaClass::sigma(1), {{"z", N(0)}}, SIG);
  Verdict v = vf(g);
  REQUIRE(v.refuted());
  CHECK(v.note.find("step 0") != std::string::npos);
}

TEST_CASE("step flow at Pi_1 answers challenges through the core") {
  Formula a = parse_formula("forall y <= x (y <= x + 2)");
  Formula b = parse_formula("forall z <= x (z <= x + 1)");
  // Core: the source challenge z is answered with the target's challenge y.
  DetFlow f = step_flow(b, a, FormulaClass::pi(1), {{"z", V("y")}}, SIG);
  CHECK(vf(f).verified());
}

TEST_CASE("run_flow transports a witness forward") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula c = parse_formula("exists z <= x (x <= z + 1)");
  DetFlow f = step_flow(a, c, FormulaClass::sigma(1), {{"z", V("y")}}, SIG);
  Env in;
  in.set("x", std::uint64_t{5});
  Cap cap;
  RunResult r = run_flow(f, in, {5}, cap, SIG);
  REQUIRE(r.validated);
  REQUIRE(r.values.size() == 1);
  CHECK(r.values[0] == 5);
  CHECK(r.trace.size() == 2);  // H(0), H(1)
}

TEST_CASE("run_flow rejects an out-of-range input") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  DetFlow f = constant_flow(a, FormulaClass::sigma(1), SIG);
  Env in;
  in.set("x", std::uint64_t{3});
  Cap cap;
  CHECK_THROWS_AS(run_flow(f, in, {1, 2}, cap, SIG), FlowError);
}

TEST_CASE("dual flow swaps direction and class") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula c = parse_formula("exists z <= x (x <= z + 1)");
  DetFlow f = step_flow(a, c, FormulaClass::sigma(1), {{"z", V("y")}}, SIG);
  DetFlow d = dual_flow(f, SIG);
  CHECK(d.cls == FormulaClass::pi(1));
  CHECK(vf(d).verified());

  // The dual runs backwards: a falsifier for not-start comes out of one for
  // not-end.
  // Backward run: a falsifier for the dual end (y = 4 under x = 4) maps to a
  // falsifier for the dual start.
  Env in;
  in.set("x", std::uint64_t{4});
  Cap cap;
  RunResult r = run_flow(d, in, {4}, cap, SIG);
  REQUIRE(r.validated);
  REQUIRE(r.values.size() == 1);
  CHECK(r.values[0] + 1 >= 4);  // x <= z + 1 holds at the transported z

  // y = 2 does not falsify the end, and the run reports that.
  RunResult r2 = run_flow(d, in, {2}, cap, SIG);
  CHECK(!r2.validated);
}

TEST_CASE("dual of the dual verifies") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow dd = dual_flow(dual_flow(f, SIG), SIG);
  CHECK(dd.cls == f.cls);
  CHECK(vf(dd).verified());
}

TEST_CASE("conj_apply carries a context conjunct") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);

  DetFlow g1 = conj_apply(f, parse_formula("1 <= x"), SIG);
  CHECK(g1.cls == FormulaClass::sigma(1));
  CHECK(vf(g1).verified());

  DetFlow g2 = conj_apply(f, parse_formula("exists v <= x (v + v <= x)"), SIG);
  CHECK(g2.cls == FormulaClass::sigma(1));
  CHECK(vf(g2).verified());

  DetFlow g3 = conj_apply(f, parse_formula("forall q <= x (q <= x)"), SIG);
  CHECK(g3.cls == FormulaClass::sigma(2));
  CHECK(vf(g3).verified());
}

TEST_CASE("disj_apply carries a context disjunct") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);

  DetFlow g1 = disj_apply(f, parse_formula("x <= 2"), SIG);
  CHECK(vf(g1).verified());

  DetFlow g2 = disj_apply(f, parse_formula("exists v <= x (x <= v + v)"), SIG);
  CHECK(vf(g2).verified());
}

TEST_CASE("conj_apply avoids capture of shared names") {
  // The context reuses the flow's binder name; hygiene keeps them apart.
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow g = conj_apply(f, parse_formula("exists y <= x (y + y <= x + x)"), SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("weak_glue chains two steps through a shared formula") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  Formula c = parse_formula("exists z <= x + 2 (x <= z + 2)");
  DetFlow f1 = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow f2 = step_flow(b, c, FormulaClass::sigma(1), {{"z", V("y")}}, SIG);
  DetFlow g = weak_glue(f1, f2, SIG);
  CHECK(alpha_eq(g.start, a));
  CHECK(alpha_eq(g.end, c));
  CHECK(vf(g).verified());

  Env in;
  in.set("x", std::uint64_t{6});
  Cap cap;
  RunResult r = run_flow(g, in, {6}, cap, SIG);
  REQUIRE(r.validated);
  CHECK(r.values[0] == 6);
}

TEST_CASE("weak_glue requires matching endpoints") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f1 = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow f2 = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  CHECK_THROWS_AS(weak_glue(f2, f1, SIG), FlowError);
}

TEST_CASE("weak_glue folds a vector of flows") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  Formula c = parse_formula("exists y <= x + 2 (x <= y + 2)");
  Formula d = parse_formula("exists y <= x + 3 (x <= y + 3)");
  std::vector<DetFlow> chain;
  chain.push_back(step_flow(a, b, FormulaClass::sigma(1), {}, SIG));
  chain.push_back(step_flow(b, c, FormulaClass::sigma(1), {}, SIG));
  chain.push_back(step_flow(c, d, FormulaClass::sigma(1), {}, SIG));
  DetFlow g = weak_glue(std::move(chain), SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("ex_lift wraps a flow under a bounded existential") {
  // Family in z: (z <= x ∧ x <= z + z) ▷ (z <= x ∧ x <= z + z + 1), open.
  Formula a = parse_formula("x <= z + z");
  Formula b = parse_formula("x <= z + z + 1");
  DetFlow f = step_flow(a, b, FormulaClass::open(), {}, SIG);
  DetFlow g = ex_lift(f, "z", V("x"), SIG);
  CHECK(g.cls == FormulaClass::sigma(1));
  CHECK(vf(g).verified());
}

TEST_CASE("all_lift wraps a flow under a bounded universal") {
  Formula a = parse_formula("z <= x + 1");
  Formula b = parse_formula("z <= x + 2");
  DetFlow f = step_flow(a, b, FormulaClass::open(), {}, SIG);
  DetFlow g = all_lift(f, "z", V("x"), SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("all_lift over a Sigma_1 family") {
  Formula a = parse_formula("exists v <= x (z <= v + x)");
  Formula b = parse_formula("exists v <= x + 1 (z <= v + x + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow g = all_lift(f, "z", V("x"), SIG);
  CHECK(vf(g).verified());
}

TEST_CASE("strong_glue iterates a parameterised family") {
  // A(y) = exists m <= y (y <= m + m + 1), preserved from y to y+1 by
  // nudging the witness when it falls behind.
  Formula ay = parse_formula("exists m <= y (y <= m + m + 1)");
  Formula ay1 = substitute(ay, "y", V("y") + N(1));
  Term nudge = t_sel(char_term(Formula::le(V("y") + N(1), V("m") + V("m") + N(1))),
                     V("m"), V("m") + N(1));
  DetFlow fam = step_flow(ay, ay1, FormulaClass::sigma(1), {{"m", nudge}}, SIG);
  CHECK(vf(fam, 6).verified());

  DetFlow g = strong_glue(fam, "y", V("s"), SIG);
  CHECK(alpha_eq(g.start, substitute(ay, "y", N(0))));
  CHECK(alpha_eq(g.end, substitute(ay, "y", V("s"))));
  CHECK(vf(g, 6).verified());

  Env in;
  in.set("s", std::uint64_t{5});
  Cap cap;
  RunResult r = run_flow(g, in, {0}, cap, SIG);
  REQUIRE(r.validated);
  CHECK(r.values[0] + r.values[0] + 1 >= 5);
  CHECK(r.values[0] <= 5);
}

TEST_CASE("strong_glue rejects a non-inductive family") {
  Formula a = parse_formula("exists m <= y (y <= m + 1)");
  Formula b = parse_formula("exists m <= y (y <= m + 2)");
  DetFlow fam = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  CHECK_THROWS_AS(strong_glue(fam, "y", V("s"), SIG), FlowError);
}

TEST_CASE("coarsen pads rounds upward") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow g = coarsen(f, FormulaClass::sigma(3), SIG);
  CHECK(vf(g).verified());
  CHECK_THROWS_AS(coarsen(f, FormulaClass::pi(2), SIG), FlowError);
}

TEST_CASE("flow_subst pins an ambient variable") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  DetFlow g = flow_subst(f, "x", N(3), SIG);
  CHECK(free_vars(g.start).empty());
  CHECK(vf(g).verified());
}

TEST_CASE("verify_flow runs the counter over an open length") {
  // length = x: the step sweep happens per ambient environment.
  Formula a = parse_formula("exists y <= x (x <= y)");
  DetFlow f = constant_flow(a, FormulaClass::sigma(1), SIG);
  DetFlow g = f;
  g.length = V("x");
  // interp is constant in the counter, so longer sweeps still verify.
  CHECK(vf(g, 4).verified());
}

TEST_CASE("counter hygiene is enforced") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  DetFlow f = constant_flow(a, FormulaClass::sigma(1), SIG);
  DetFlow g = f;
  g.length = Term::var(g.counter);
  CHECK_THROWS_AS(verify_flow(g, Cap{}, SIG), FlowError);
}

TEST_CASE("nondeterministic flow verification checks implications only") {
  NdFlow f;
  f.cls = FormulaClass::sigma(1);
  f.counter = "u";
  f.length = V("x");
  f.start = parse_formula("x <= x");
  f.end = parse_formula("exists y <= x (x <= y + x)");
  f.interp = parse_formula("exists y <= x (x <= y + x)");
  Cap cap;
  CHECK(verify_flow(f, cap, SIG).verified());

  NdFlow bad = f;
  bad.end = parse_formula("exists y <= x (x + 1 <= y)");
  CHECK(verify_flow(bad, cap, SIG).refuted());
}

TEST_CASE("forget drops witnesses but keeps the shape") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  DetFlow f = constant_flow(a, FormulaClass::sigma(1), SIG);
  NdFlow n = forget(f);
  Cap cap;
  CHECK(verify_flow(n, cap, SIG).verified());
}

TEST_CASE("flow files round-trip") {
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  std::string text = print_flow(f);
  DetFlow g = parse_flow(text);
  CHECK(g.cls == f.cls);
  CHECK(g.counter == f.counter);
  CHECK(g.length == f.length);
  CHECK(g.start == f.start);
  CHECK(g.end == f.end);
  CHECK(g.interp == f.interp);
  CHECK(g.step == f.step);
  CHECK(g.e_fwd == f.e_fwd);
  CHECK(vf(g).verified());
}

TEST_CASE("parse_flow rejects malformed input") {
  CHECK_THROWS_AS(parse_flow("(flow (class \"Sigma_1\"))"), FlowError);
  CHECK_THROWS_AS(parse_flow("(notflow)"), FlowError);
}

TEST_CASE("verified inputs stay verified across random conj contexts") {
  std::mt19937_64 rng(20260823);
  Formula a = parse_formula("exists y <= x (x <= y)");
  Formula b = parse_formula("exists y <= x + 1 (x <= y + 1)");
  DetFlow f = step_flow(a, b, FormulaClass::sigma(1), {}, SIG);
  int ok = 0;
  for (int i = 0; i < 25; ++i) {
    Formula c = gen::formula(rng, 1, 2, {"x"});
    DetFlow g = conj_apply(f, c, SIG);
    Verdict v = vf(g, 4);
    if (v.verified()) ++ok;
    else FAIL_CHECK("conj_apply broke verification: ", print_formula(c), " -> ", v.to_string());
  }
  CHECK(ok == 25);
}
