#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "flowforge/kernel.hpp"
#include "flowforge/parse.hpp"

using namespace flowforge;

namespace {

std::shared_ptr<ProofNode> node(Rule r, std::vector<Proof> prem = {}) {
  auto n = std::make_shared<ProofNode>();
  n->rule = r;
  n->premises = std::move(prem);
  return n;
}

Proof ax(const std::string& f) {
  auto n = node(Rule::Ax);
  n->formula = parse_formula(f);
  return n;
}

Proof axiom(const std::string& f, ParseOpts opts = {}) {
  auto n = node(Rule::NonLogAx);
  n->formula = parse_formula(f, opts);
  return n;
}

Proof weak(Rule r, const std::string& f, Proof p, ParseOpts opts = {}) {
  auto n = node(r, {std::move(p)});
  n->formula = parse_formula(f, opts);
  return n;
}

Formula F(const std::string& s) { return parse_formula(s); }
Term T(const std::string& s) { return parse_term(s); }

const TheorySpec kTheory;  // standard signature, everything allowed
const Cap kCap;

Sequent conclude(const Proof& p) { return check_proof(p, kTheory, kCap).conclusion; }

}  // namespace

TEST_CASE("rule tags are total and distinct") {
  std::set<std::string> tags;
  for (int i = 0; i <= static_cast<int>(Rule::IndAlpha); ++i)
    tags.insert(rule_tag(static_cast<Rule>(i)));
  CHECK(tags.size() == 28);
  CHECK(rule_tag(Rule::BForallR) == "ballr");
  CHECK(rule_tag(Rule::NonLogAx) == "axiom");
}

TEST_CASE("axioms and weakening") {
  Sequent s = conclude(ax("x <= y"));
  CHECK(s == Sequent{{F("x <= y")}, {F("x <= y")}});
  CHECK(s.to_string() == "x <= y => x <= y");

  CHECK(conclude(node(Rule::BotL)) == Sequent{{Formula::bot()}, {}});

  Sequent w = conclude(weak(Rule::WeakR, "y = 0", weak(Rule::WeakL, "x = 0", ax("x <= y"))));
  CHECK(w.left == std::vector<Formula>{F("x <= y"), F("x = 0")});
  CHECK(w.right == std::vector<Formula>{F("x <= y"), F("y = 0")});

  CHECK(Sequent{{}, {}}.to_string() == " => ");
}

TEST_CASE("contraction and exchange") {
  // x<=y, x<=y => x<=y  --cl-->  x<=y => x<=y
  Proof dup = weak(Rule::WeakL, "x <= y", ax("x <= y"));
  CHECK(conclude(node(Rule::ContrL, {dup})) == conclude(ax("x <= y")));

  // Contraction demands literal duplication of the last two.
  Proof nodup = weak(Rule::WeakL, "x = 0", ax("x <= y"));
  CHECK_THROWS_WITH_AS(conclude(node(Rule::ContrL, {nodup})),
                       doctest::Contains("coincide"), ProofError);

  Proof dupr = weak(Rule::WeakR, "x <= y", ax("x <= y"));
  CHECK(conclude(node(Rule::ContrR, {dupr})) == conclude(ax("x <= y")));

  // exl 0 swaps the first two antecedent formulas.
  auto ex = node(Rule::ExchL, {weak(Rule::WeakL, "x = 0", ax("x <= y"))});
  ex->index = 0;
  CHECK(conclude(ex).left == std::vector<Formula>{F("x = 0"), F("x <= y")});

  auto oor = node(Rule::ExchR, {ax("x <= y")});
  oor->index = 0;  // only one succedent formula: nothing to swap with
  CHECK_THROWS_AS(conclude(oor), ProofError);
}

TEST_CASE("cut") {
  // From => A and A => B conclude => B.
  auto p1 = node(Rule::ExchR, {weak(Rule::WeakR, "x <= x + 2", axiom("x <= x + 1"))});
  p1->index = 0;  // => x<=x+2, x<=x+1
  Proof p2 = weak(Rule::WeakL, "x <= x + 1", axiom("x <= x + 2"));
  auto c = node(Rule::Cut, {p1, p2});
  c->formula = F("x <= x + 1");
  CHECK(conclude(c) == Sequent{{}, {F("x <= x + 2")}});

  // Mismatched side contexts are rejected.
  auto bad = node(Rule::Cut, {p1, node(Rule::ExchL, {weak(Rule::WeakL, "x = 0", p2)})});
  bad->formula = F("x <= x + 1");
  CHECK_THROWS_WITH_AS(conclude(bad), doctest::Contains("contexts differ"), ProofError);
}

TEST_CASE("propositional rules") {
  // andl: A, B => ...  becomes  A /\ B => ...
  Proof two = weak(Rule::WeakL, "y = 0", ax("x = 0"));
  Sequent al = conclude(node(Rule::AndL, {two}));
  CHECK(al.left == std::vector<Formula>{F("x = 0 /\\ y = 0")});
  CHECK(al.right == std::vector<Formula>{F("x = 0")});

  auto ar = node(Rule::AndR, {ax("x = 0"), weak(Rule::WeakL, "y = 0", ax("x = 0"))});
  CHECK_THROWS_WITH_AS(conclude(ar), doctest::Contains("contexts differ"), ProofError);
  auto ar2 = node(Rule::AndR, {ax("x = 0"), ax("x = 0")});
  Sequent s2 = conclude(ar2);
  CHECK(s2.right.back() == F("x = 0 /\\ x = 0"));
  CHECK(s2.left == std::vector<Formula>{F("x = 0")});

  // orl from A => A and B => B after weakening to a shared succedent.
  auto p2 = node(Rule::ExchR, {weak(Rule::WeakR, "x = 0", ax("y = 0"))});
  p2->index = 0;
  auto ol = node(Rule::OrL, {weak(Rule::WeakR, "y = 0", ax("x = 0")), p2});
  Sequent so = conclude(ol);
  CHECK(so.left == std::vector<Formula>{F("x = 0 \\/ y = 0")});
  CHECK(so.right == std::vector<Formula>{F("x = 0"), F("y = 0")});

  auto orr = node(Rule::OrR, {ax("x = 0")});
  orr->formula = F("x = 0 \\/ y <= x");
  CHECK(conclude(orr).right == std::vector<Formula>{F("x = 0 \\/ y <= x")});
  auto orr2 = node(Rule::OrR, {ax("x = 0")});
  orr2->formula = F("y <= x \\/ x = 0");  // right disjunct also accepted
  CHECK(conclude(orr2).right == std::vector<Formula>{F("y <= x \\/ x = 0")});
  auto orrbad = node(Rule::OrR, {ax("x = 0")});
  orrbad->formula = F("y <= x \\/ y = 0");
  CHECK_THROWS_WITH_AS(conclude(orrbad), doctest::Contains("disjunct"), ProofError);

  // impr: from A => A derive A -> A on the right.
  auto ir = node(Rule::ImpR, {ax("x = 0")});
  CHECK(conclude(ir) == Sequent{{}, {F("x = 0 -> x = 0")}});
  // impl: from => Delta, A and B => Delta derive A -> B => Delta.
  auto ip1 = node(Rule::ExchR, {weak(Rule::WeakR, "x <= x + 2", axiom("x <= x + 1"))});
  ip1->index = 0;  // => x<=x+2, x<=x+1
  auto il = node(Rule::ImpL, {ip1, ax("x <= x + 2")});
  Sequent si = conclude(il);
  CHECK(si.left == std::vector<Formula>{F("x <= x + 1 -> x <= x + 2")});
  CHECK(si.right == std::vector<Formula>{F("x <= x + 2")});
  auto ilbad = node(Rule::ImpL, {ip1, weak(Rule::WeakL, "y = 0", ax("x <= x + 2"))});
  CHECK_THROWS_WITH_AS(conclude(ilbad), doctest::Contains("contexts differ"), ProofError);

  // not rules move a formula across and negate it.
  Sequent nl = conclude(node(Rule::NotL, {ax("x = 0")}));
  CHECK(nl == Sequent{{F("x = 0"), F("~(x = 0)")}, {}});
  Sequent nr = conclude(node(Rule::NotR, {ax("x = 0")}));
  CHECK(nr == Sequent{{}, {F("x = 0"), F("~(x = 0)")}});
}

TEST_CASE("unbounded quantifier rules") {
  // foralll: from A(t) on the left infer forall v A(v).
  auto fl = node(Rule::ForallL, {ax("y + 1 <= x")});
  fl->formula = F("forall v : nat (v + 1 <= x)");
  fl->term = T("y");
  CHECK(conclude(fl).left == std::vector<Formula>{F("forall v : nat (v + 1 <= x)")});

  auto flbad = node(Rule::ForallL, {ax("y + 1 <= x")});
  flbad->formula = F("forall v : nat (v <= x)");  // wrong instance
  flbad->term = T("y");
  CHECK_THROWS_WITH_AS(conclude(flbad), doctest::Contains("instance"), ProofError);

  // forallr rejects an eigenvariable that stays free in the conclusion.
  auto fr = node(Rule::ForallR, {ax("y <= y")});
  fr->formula = F("forall v : nat (v <= v)");
  fr->var = "y";
  // y still free in the conclusion through the antecedent copy of y<=y.
  CHECK_THROWS_WITH_AS(conclude(fr), doctest::Contains("eigenvariable"), ProofError);

  auto fr3 = node(Rule::ForallR, {axiom("y <= y")});
  fr3->formula = F("forall v : nat (v <= v)");
  fr3->var = "y";
  Sequent s3 = conclude(fr3);
  CHECK(s3 == Sequent{{}, {F("forall v : nat (v <= v)")}});

  // existsr: from A(t) infer exists v A(v); term sort must match.
  auto er = node(Rule::ExistsR, {ax("x * x <= y")});
  er->formula = F("exists v : nat (v * v <= y)");
  er->term = T("x");
  CHECK(conclude(er).right == std::vector<Formula>{F("exists v : nat (v * v <= y)")});

  auto ersort = node(Rule::ExistsR, {ax("x * x <= y")});
  ersort->formula = F("exists v : nat (v * v <= y)");
  ParseOpts ord;
  ord.ord_vars = {"b"};
  ersort->term = parse_term("b", ord);
  CHECK_THROWS_WITH_AS(conclude(ersort), doctest::Contains("sort"), ProofError);

  // existsl mirrors forallr.
  auto el = node(Rule::ExistsL, {axiom("y <= y")});
  // axiom has empty antecedent: existsl needs the instance on the left.
  CHECK_THROWS_AS(conclude(el), ProofError);
  auto el2 = node(Rule::ExistsL, {weak(Rule::WeakL, "y <= x", ax("0 = 0"))});
  el2->formula = F("exists v : nat (v <= x)");
  el2->var = "y";
  Sequent se = conclude(el2);
  CHECK(se.left == std::vector<Formula>{F("0 = 0"), F("exists v : nat (v <= x)")});
}

TEST_CASE("bounded quantifier rules") {
  // balll adds the guard and the bounded formula to the antecedent.
  auto bl = node(Rule::BForallL, {ax("y * y <= x")});
  bl->formula = F("forall v <= x (v * v <= x)");
  bl->term = T("y");
  Sequent s = conclude(bl);
  CHECK(s.left == std::vector<Formula>{F("y <= x"), F("forall v <= x (v * v <= x)")});
  CHECK(s.right == std::vector<Formula>{F("y * y <= x")});

  // ballr consumes the guard from the antecedent.
  auto br = node(Rule::BForallR, {ax("y <= x")});
  br->formula = F("forall v <= x (v <= x)");
  br->var = "y";
  CHECK(conclude(br) == Sequent{{}, {F("forall v <= x (v <= x)")}});

  auto brbad = node(Rule::BForallR, {axiom("y <= y + 1")});
  brbad->formula = F("forall v <= x (v <= v + 1)");
  brbad->var = "y";
  CHECK_THROWS_WITH_AS(conclude(brbad), doctest::Contains("guard"), ProofError);

  // bexl: guard then instance before the turnstile.
  auto two = weak(Rule::WeakL, "y * y <= x", weak(Rule::WeakL, "y <= x", ax("0 = 0")));
  auto bel = node(Rule::BExistsL, {two});
  bel->formula = F("exists v <= x (v * v <= x)");
  bel->var = "y";
  Sequent sb = conclude(bel);
  CHECK(sb.left == std::vector<Formula>{F("0 = 0"), F("exists v <= x (v * v <= x)")});

  // eigenvariable must not survive elsewhere.
  auto leaky = weak(Rule::WeakL, "y * y <= x", weak(Rule::WeakL, "y <= x", ax("y = 0")));
  auto belbad = node(Rule::BExistsL, {leaky});
  belbad->formula = F("exists v <= x (v * v <= x)");
  belbad->var = "y";
  CHECK_THROWS_WITH_AS(conclude(belbad), doctest::Contains("eigenvariable"), ProofError);

  // bexr adds the guard as a new hypothesis.
  auto ber = node(Rule::BExistsR, {ax("y * y <= x")});
  ber->formula = F("exists v <= x (v * v <= x)");
  ber->term = T("y");
  Sequent sr = conclude(ber);
  CHECK(sr.left == std::vector<Formula>{F("y * y <= x"), F("y <= x")});
  CHECK(sr.right == std::vector<Formula>{F("exists v <= x (v * v <= x)")});

  // Ordinal-bounded quantifiers guard with prec.
  ParseOpts ov;
  ov.ord_vars = {"b", "d"};
  auto oaxn = node(Rule::Ax);
  oaxn->formula = parse_formula("d preceq b", ov);
  auto obl = node(Rule::BForallL, {oaxn});
  obl->formula = parse_formula("forall g prec b (g preceq b)", ov);
  obl->term = parse_term("d", ov);
  Sequent so = conclude(obl);
  CHECK(so.left[0] == parse_formula("d prec b", ov));
  CHECK(so.left[1] == obl->formula);
}

TEST_CASE("nonlogical axioms") {
  // Listed axioms are trusted verbatim, with no notes.
  TheorySpec listed;
  listed.axioms = {F("x + 1 <= 0")};  // false, but listed
  auto bad = axiom("x + 1 <= 0");
  CheckResult r = check_proof(bad, listed, kCap);
  CHECK(r.conclusion == Sequent{{}, {F("x + 1 <= 0")}});
  CHECK(r.notes.empty());

  // Unlisted axioms are checked by enumeration at the cap.
  CheckResult ok = check_proof(axiom("x <= x + 1"), kTheory, kCap);
  CHECK(ok.notes.size() == 1);
  CHECK(ok.notes[0].find("enumeration") != std::string::npos);

  CHECK_THROWS_WITH_AS(check_proof(bad, kTheory, kCap),
                       doctest::Contains("axiom refuted at cap"), ProofError);

  TheorySpec strict;
  strict.axioms_at_cap = false;
  CHECK_THROWS_WITH_AS(check_proof(axiom("x <= x + 1"), strict, kCap),
                       doctest::Contains("not in the theory's list"), ProofError);

  Cap tiny;
  tiny.budget = 2;
  CHECK_THROWS_WITH_AS(check_proof(axiom("x + y <= y + x"), kTheory, tiny),
                       doctest::Contains("within budget"), ProofError);
}

TEST_CASE("induction") {
  // A(v) = 0 <= v.  Premise 0<=v => 0<=v+1 via an enumerated axiom.
  auto step = weak(Rule::WeakL, "0 <= v", axiom("0 <= v + 1"));
  auto ind = node(Rule::Ind, {step});
  ind->formula = F("0 <= v");
  ind->var = "v";
  ind->term = T("x");
  CheckResult r = check_proof(ind, kTheory, kCap);
  CHECK(r.conclusion == Sequent{{F("0 <= 0")}, {F("0 <= x")}});
  CHECK(r.rule_counts.at("ind") == 1);
  CHECK(r.rule_counts.at("axiom") == 1);

  // The induction variable may not leak through the context...
  auto polluted = node(Rule::ExchR, {weak(Rule::WeakR, "v <= v", axiom("0 <= v + 1"))});
  polluted->index = 0;  // => v<=v, 0<=v+1
  auto leak = weak(Rule::WeakL, "0 <= v", polluted);
  auto badctx = node(Rule::Ind, {leak});
  badctx->formula = F("0 <= v");
  badctx->var = "v";
  badctx->term = T("x");
  CHECK_THROWS_WITH_AS(check_proof(badctx, kTheory, kCap),
                       doctest::Contains("free in the context"), ProofError);

  // ...nor into the bound.
  auto badbound = node(Rule::Ind, {step});
  badbound->formula = F("0 <= v");
  badbound->var = "v";
  badbound->term = T("v + 1");
  CHECK_THROWS_WITH_AS(check_proof(badbound, kTheory, kCap),
                       doctest::Contains("occurs in the bound"), ProofError);

  // Term-ideal gate: a bare variable is not polynomial in lengths.
  TheorySpec narrow;
  narrow.ideal = TermIdeal::poly_len();
  CHECK_THROWS_WITH_AS(check_proof(ind, narrow, kCap),
                       doctest::Contains("term ideal"), ProofError);
  auto lenb = node(Rule::Ind, {step});
  lenb->formula = F("0 <= v");
  lenb->var = "v";
  lenb->term = T("len(x) * len(x)");
  CHECK(check_proof(lenb, narrow, kCap).conclusion.right ==
        std::vector<Formula>{F("0 <= len(x) * len(x)")});

  // Formula-class gate.
  TheorySpec open_only;
  open_only.ind_class = FormulaClass::open();
  CHECK(check_proof(ind, open_only, kCap).conclusion.left ==
        std::vector<Formula>{F("0 <= 0")});
  auto qstep = weak(Rule::WeakL, "exists u <= v (u = v)",
                    axiom("exists u <= v + 1 (u = v + 1)"));
  auto qind = node(Rule::Ind, {qstep});
  qind->formula = F("exists u <= v (u = v)");
  qind->var = "v";
  qind->term = T("x");
  CHECK(check_proof(qind, kTheory, kCap).conclusion.right ==
        std::vector<Formula>{F("exists u <= x (u = x)")});
  CHECK_THROWS_WITH_AS(check_proof(qind, open_only, kCap),
                       doctest::Contains("induction class"), ProofError);
  TheorySpec sigma1;
  sigma1.ind_class = FormulaClass::sigma(1);
  CHECK(check_proof(qind, sigma1, kCap).conclusion.right.size() == 1);
}

TEST_CASE("transfinite induction") {
  ParseOpts ov;
  ov.ord_vars = {"b"};
  // Template A(b) = b preceq b, universal and true at every stage.
  Formula tmpl = parse_formula("b preceq b", ov);
  auto hist = node(Rule::WeakL);
  hist->formula = parse_formula("forall g prec b (g preceq g)", ov);
  auto base = node(Rule::NonLogAx);
  base->formula = tmpl;
  hist->premises = {base};
  auto ia = node(Rule::IndAlpha, {hist});
  ia->formula = tmpl;
  ia->var = "b";
  ia->var2 = "g";
  ia->term = parse_term("fin(x)", ov);

  CHECK_THROWS_WITH_AS(check_proof(ia, kTheory, kCap),
                       doctest::Contains("TI"), ProofError);
  CheckResult r = check_ti_proof(ia, kTheory, kCap);
  CHECK(r.conclusion ==
        Sequent{{}, {parse_formula("fin(x) preceq fin(x)", ov)}});

  // Existential templates are rejected.
  Formula exf = parse_formula("exists v : nat (fin(v) preceq b)", ov);
  auto hist2 = node(Rule::WeakL);
  hist2->formula = parse_formula("forall g prec b (exists v : nat (fin(v) preceq g))", ov);
  auto base2 = node(Rule::NonLogAx);
  base2->formula = exf;
  hist2->premises = {base2};
  auto ia2 = node(Rule::IndAlpha, {hist2});
  ia2->formula = exf;
  ia2->var = "b";
  ia2->var2 = "g";
  ia2->term = parse_term("fin(0)", ov);
  CHECK_THROWS_WITH_AS(check_ti_proof(ia2, kTheory, kCap),
                       doctest::Contains("universal"), ProofError);

  // The stage variable must be fresh for the context.
  auto hist3 = node(Rule::WeakL);
  hist3->formula = parse_formula("forall g prec b (g preceq g)", ov);
  auto inner = node(Rule::WeakR);
  inner->formula = parse_formula("b prec w", ov);
  inner->premises = {base};
  // => tmpl, b prec w: last right formula must be tmpl; exchange first.
  auto swapped = node(Rule::ExchR, {inner});
  swapped->index = 0;
  hist3->premises = {swapped};
  auto ia3 = node(Rule::IndAlpha, {hist3});
  ia3->formula = tmpl;
  ia3->var = "b";
  ia3->var2 = "g";
  ia3->term = parse_term("fin(0)", ov);
  CHECK_THROWS_WITH_AS(check_ti_proof(ia3, kTheory, kCap),
                       doctest::Contains("free in the context"), ProofError);
}

TEST_CASE("proof files parse, check and round trip") {
  const std::string text = R"PRF(
; square roots below the cap exist
(let B "exists v <= x (v * v <= x)")
(bexr B "0"              ; witness v := 0
  (axiom "0 * 0 <= x"))
)PRF";
  Proof p = parse_proof(text);
  CheckResult r = check_proof(p, kTheory, kCap);
  CHECK(r.conclusion.left == std::vector<Formula>{F("0 <= x")});
  CHECK(r.conclusion.right == std::vector<Formula>{F("exists v <= x (v * v <= x)")});

  // print -> parse -> identical conclusion and rule counts.
  std::string printed = print_proof(p);
  Proof q = parse_proof(printed);
  CheckResult r2 = check_proof(q, kTheory, kCap);
  CHECK(r2.conclusion == r.conclusion);
  CHECK(r2.rule_counts == r.rule_counts);
  CHECK(print_proof(q) == printed);

  // Ordinal variables survive the round trip via the ordvars header.
  ParseOpts ov;
  ov.ord_vars = {"b"};
  auto oax = node(Rule::Ax);
  oax->formula = parse_formula("b preceq b", ov);
  std::string otext = print_proof(oax);
  CHECK(otext.find("(ordvars b)") != std::string::npos);
  CHECK(parse_proof(otext)->formula == oax->formula);

  // Extension operators survive via the ops header.
  Signature sig = Signature::standard();
  Signature::OpInfo sq;
  sq.arity = 1;
  sq.interp_id = "sq";
  sq.eval = [](const std::vector<std::uint64_t>& a) { return a[0] * a[0]; };
  sig.register_op("sq", sq);
  auto eax = node(Rule::Ax);
  ParseOpts eo;
  eo.ops = {"sq"};
  eax->formula = parse_formula("sq(x) <= y", eo);
  std::string etext = print_proof(eax);
  CHECK(etext.find("(ops sq)") != std::string::npos);
  TheorySpec ext;
  ext.sig = sig;
  CHECK(check_proof(parse_proof(etext), ext, kCap).conclusion ==
        check_proof(eax, ext, kCap).conclusion);

  CHECK_THROWS_AS(parse_proof("(bexr"), ProofError);
  CHECK_THROWS_AS(parse_proof("(frobnicate \"x = 0\")"), ProofError);
  CHECK_THROWS_AS(parse_proof("(ax H)"), ProofError);  // unknown let name
  CHECK_THROWS_AS(parse_proof("(exl x (ax \"x = 0\"))"), ProofError);
  CHECK_THROWS_AS(parse_proof("; only a comment"), ProofError);
  CHECK_THROWS_AS(parse_proof("(ax \"x = 0\") stray"), ProofError);
}

TEST_CASE("class-restricted scan") {
  // Sigma_1 proof: every sequent formula is open or bounded-existential.
  Proof p = parse_proof(R"PRF(
(bexr "exists v <= x (v * v <= x)" "0" (axiom "0 * 0 <= x"))
)PRF");
  CHECK(check_class_restricted(p, kTheory, FormulaClass::sigma(1)));
  CHECK_FALSE(check_class_restricted(p, kTheory, FormulaClass::open()));
  // Weakening in a Pi_2 formula breaks the restriction.
  auto wide = weak(Rule::WeakL, "forall u <= x (exists v <= u (v = u))", p);
  CHECK(check_class_restricted(wide, kTheory, FormulaClass::pi(2)));
  CHECK_FALSE(check_class_restricted(wide, kTheory, FormulaClass::sigma(1)));
  // The scan trusts axioms (no cap checking): a false axiom still scans.
  Proof liar = axiom("x + 1 <= 0");
  CHECK(check_class_restricted(liar, kTheory, FormulaClass::open()));
  // Unclassifiable (unbounded) formulas never fit.
  auto unb = weak(Rule::WeakR, "forall v : nat (v <= x)", p);
  CHECK_FALSE(check_class_restricted(unb, kTheory, FormulaClass::pi(2)));
}
