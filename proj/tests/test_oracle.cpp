#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sepentail/frontend.hpp"
#include "sepentail/oracle.hpp"

using namespace sepentail;

namespace {

Problem ILS_ALS() {
  return parse_problem(R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ils(x1,x2) |- als(x1,x2) }
)");
}

Problem PU_EXAMPLE() {
  return parse_problem(R"(
sid {
  p(x) <= exists z1 z2. x -> (z1,z2) * q(z1) * q(z2);
  q(x) <= x -> (x,x);
}
entail { p(x) |- }
)",
                       true);
}

}  // namespace

TEST_CASE("holds on the worked increasing-list model") {
  Problem p = ILS_ALS();
  Structure st;
  st.loc_count = 6;
  st.store = {{Var("x1"), 1}, {Var("x2"), 2}, {Var("x3"), 4}};
  st.heap = {{1, {2}}, {2, {3}}, {3, {4}}};
  CHECK(holds(st, parse_formula("ils(x1,x2) * ils(x2,x3)"), *p.sid, p.theory));
  CHECK(!holds(st, parse_formula("ils(x1,x2) * ils(x1,x3)"), *p.sid, p.theory));
}

TEST_CASE("double allocation never holds") {
  Problem p = ILS_ALS();
  for (const auto& st : models_of(parse_formula("ils(x1,x2) * ils(x1,x3)"), *p.sid, p.theory, 4, 4))
    CHECK(false);  // no model may exist
}

TEST_CASE("pu-atom satisfaction via partial unfolding") {
  Problem p = PU_EXAMPLE();
  Structure st;
  st.loc_count = 4;
  st.store = {{Var("x"), 0}, {Var("y"), 1}};
  st.heap = {{0, {1, 2}}, {2, {2, 2}}};
  FormulaPtr pu = parse_formula("(q(y') -* p(x'))[x',y' <- x,y]", true);
  CHECK(holds(st, pu, *p.sid, p.theory));
  // with the frame removed the whole tree is required: one subtree is missing
  CHECK(!holds(st, parse_formula("p(x)"), *p.sid, p.theory));
}

TEST_CASE("oracle refutes the increasing-vs-acyclic entailment with the known shape") {
  Problem p = ILS_ALS();
  Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
  OracleVerdict v = oracle_entails(s, 6, 3);
  REQUIRE(!v.valid_up_to_bound);
  REQUIRE(v.countermodel);
  const Structure& st = *v.countermodel;
  // h = {(a,b),(b,b)} up to renaming
  REQUIRE(st.heap.size() == 2);
  Loc a = st.store.at(Var("x1"));
  REQUIRE(st.heap.count(a));
  Loc b = st.heap.at(a)[0];
  REQUIRE(st.heap.count(b));
  CHECK(st.heap.at(b)[0] == b);
}

TEST_CASE("oracle confirms the guarded extension up to bound") {
  Problem p = parse_problem(R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ils(x1,x2) * x2 -> (x3) * x2 < x3 |- als(x1,x3) }
)");
  Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
  CHECK(oracle_entails(s, 6, 4).valid_up_to_bound);
}

TEST_CASE("reflexive entailments are bounded-valid") {
  Problem p = ILS_ALS();
  Sequent s = mk_sequent(parse_formula("ils(x1,x2)"), {parse_formula("ils(x1,x2)")}, p.sid, p.theory);
  CHECK(oracle_entails(s, 5, 3).valid_up_to_bound);
}

TEST_CASE("models of a single cell at the smallest bounds") {
  Problem p = parse_problem("sid { r(x) <= x -> (x); } entail { x -> (y) |- }");
  auto ms = models_of(p.lhs, *p.sid, p.theory, 2, 1);
  CHECK(ms.size() == 2);  // both injective stores over two locations
  for (const auto& st : ms) {
    CHECK(st.heap.size() == 1);
    CHECK(st.heap.count(st.store.at(Var("x"))));
  }
}

TEST_CASE("models of emp have empty heaps") {
  Problem p = parse_problem("sid { r(x) <= x -> (x); } entail { emp |- }");
  for (const auto& st : models_of(p.lhs, *p.sid, p.theory, 3, 2)) CHECK(st.heap.empty());
}

TEST_CASE("unsatisfiable formulas have no models") {
  Problem p = parse_problem("sid { r(x) <= x -> (x); } entail { emp |- }");
  CHECK(models_of(ftheory(TheoryOp::False, {}), *p.sid, p.theory, 3, 2).empty());
}

TEST_CASE("bound errors are reported") {
  Problem p = parse_problem("sid { r(x) <= x -> (x); } entail { x -> (y) * y -> (z) |- }");
  Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
  CHECK_THROWS_AS(oracle_entails(s, 2, 2), BoundTooSmall);
}

TEST_CASE("a countermodel survives larger bounds") {
  Problem p = ILS_ALS();
  Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
  OracleVerdict small = oracle_entails(s, 5, 2);
  REQUIRE(!small.valid_up_to_bound);
  Structure st = *small.countermodel;
  CHECK(holds(st, s.lhs, *p.sid, p.theory));
  bool rhs_holds = false;
  for (const auto& f : s.rhs) rhs_holds |= holds(st, f, *p.sid, p.theory);
  CHECK(!rhs_holds);
  // the same structure embedded in a larger universe still refutes
  st.loc_count = 8;
  CHECK(holds(st, s.lhs, *p.sid, p.theory));
  rhs_holds = false;
  for (const auto& f : s.rhs) rhs_holds |= holds(st, f, *p.sid, p.theory);
  CHECK(!rhs_holds);
}

TEST_CASE("models of spatial formulas have nonempty heaps") {
  Problem p = PU_EXAMPLE();
  for (const auto& st : models_of(parse_formula("p(x)"), *p.sid, p.theory, 5, 4)) CHECK(!st.heap.empty());
}

TEST_CASE("zero-constrained satisfaction is renaming invariant") {
  Problem p = PU_EXAMPLE();
  std::mt19937_64 rng(31);
  auto ms = models_of(parse_formula("p(x)"), *p.sid, p.theory, 5, 3);
  REQUIRE(!ms.empty());
  for (const auto& st : ms) {
    // apply a random injective relocation
    std::vector<Loc> perm(10);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Structure moved;
    moved.loc_count = 10;
    for (const auto& [v, l] : st.store) moved.store[v] = perm[l];
    for (const auto& [l, t] : st.heap) {
      std::vector<Loc> nt;
      for (Loc u : t) nt.push_back(perm[u]);
      moved.heap[perm[l]] = nt;
    }
    CHECK(holds(moved, parse_formula("p(x)"), *p.sid, p.theory));
  }
}

TEST_CASE("parallel oracle agrees with sequential") {
  Problem p = ILS_ALS();
  Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
  OracleVerdict seq = oracle_entails(s, 6, 3, 1);
  OracleVerdict par = oracle_entails(s, 6, 3, 4);
  CHECK(seq.valid_up_to_bound == par.valid_up_to_bound);
}
