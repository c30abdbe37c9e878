#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sepentail/frontend.hpp"
#include "sepentail/oracle.hpp"
#include "sepentail/sid.hpp"

using namespace sepentail;

namespace {

Problem parse(const std::string& text, bool assume = false) { return parse_problem(text, assume); }

}  // namespace

TEST_CASE("the ils/als rules validate") {
  Problem p = parse(R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ils(x,y) |- als(x,y) }
)");
  CHECK(p.sid->alloc_compatible);
  CHECK(p.sid->depends.at("ils").count("ils"));
  CHECK(p.sid->depends_strict.at("ils").count("ils"));
}

TEST_CASE("connectivity violations are caught") {
  std::vector<Rule> rules;
  Rule r;
  r.head = "p";
  r.head_args = {Var("x"), Var("y")};
  r.cell = PointsTo{Var("x"), {Var("x")}};
  r.calls = {PredAtom{"p", {Var("y"), Var("x")}}};  // y is not a cell target
  rules.push_back(r);
  CHECK_THROWS_AS(validate_pcsid(rules, 1), ConnectivityViolation);
}

TEST_CASE("unestablished existentials are flagged and waivable") {
  std::string text = R"(
sid {
  p(x) <= exists z. x -> (z);
}
entail { p(x) |- }
)";
  CHECK_THROWS_AS(parse(text), EstablishmentUnknown);
  CHECK_NOTHROW(parse(text, /*assume=*/true));
}

TEST_CASE("equation chains establish existentials") {
  CHECK_NOTHROW(parse(R"(
theory eq
sid {
  q(y) <= y -> (y);
  p(x) <= exists z w. x -> (z) * q(z) * w = z;
}
entail { p(x) |- }
)"));
}

TEST_CASE("alloc fixpoint on the self-loop example") {
  Problem p = parse("sid { p(x) <= x -> (x); } entail { p(x) |- }");
  CHECK(p.sid->alloc_of("p") == std::set<std::size_t>{0});
  CHECK(p.sid->alloc_compatible);
}

TEST_CASE("alloc-compatibility of the two-rule pair examples") {
  Problem good = parse(R"(
sid {
  p(x,y) <= x -> (y);
  p(x,y) <= exists z. x -> (z) * p(z,x);
}
entail { p(x,y) |- }
)");
  CHECK(good.sid->alloc_compatible);
  CHECK(good.sid->alloc_of("p") == std::set<std::size_t>{0});

  Problem bad = parse(R"(
sid {
  p(x,y) <= x -> (y);
  p(x,y) <= x -> (y) * p(y,x);
}
entail { p(x,y) |- }
)");
  CHECK(!bad.sid->alloc_compatible);
}

TEST_CASE("make_alloc_compatible splits variants and preserves bounded validity") {
  Problem bad = parse(R"(
sid {
  p(x,y) <= x -> (y);
  p(x,y) <= x -> (y) * p(y,x);
}
entail { p(x,y) |- p(x,y) }
)");
  Problem out = make_alloc_compatible(bad);
  CHECK(out.sid->alloc_compatible);
  // brute force over annotations: realizable variants of a binary predicate
  // never exceed the four position subsets, and unreachable ones are absent
  std::set<PredSym> heads;
  for (const auto& r : out.sid->rules) heads.insert(r.head);
  CHECK(heads.size() <= 4);
  CHECK(heads.count("p@{1}"));
  CHECK(heads.count("p@{1,2}"));

  // oracle verdicts agree at small bounds
  for (const auto& s : to_prenex_dnf(bad.lhs, bad.rhs, bad.sid, bad.theory)) {
    OracleVerdict vin = oracle_entails(s, 5, 3);
    CHECK(vin.valid_up_to_bound);
  }
  bool all = true;
  for (const auto& s : to_prenex_dnf(out.lhs, out.rhs, out.sid, out.theory)) {
    OracleVerdict v = oracle_entails(s, 5, 3);
    all = all && v.valid_up_to_bound;
  }
  CHECK(all);
}

TEST_CASE("alloc-compatible systems pass through unchanged") {
  Problem good = parse(R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) |- ls(x,y) }
)");
  Problem out = make_alloc_compatible(good);
  CHECK(out.sid->rules.size() == good.sid->rules.size());
  CHECK(equal(out.lhs, good.lhs));
}

TEST_CASE("vart positions reach theory atoms through calls") {
  Problem p = parse(R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  plain(x) <= x -> (x);
}
entail { ils(a,b) |- }
)");
  CHECK(p.sid->vart_of_pred("ils") == std::set<std::size_t>{0, 1});
  CHECK(p.sid->vart_of_pred("plain").empty());
  FormulaPtr f = parse_formula("ils(x1,x2) * x3 <= x3");
  CHECK(vart_of(f, *p.sid) == std::set<Var>{Var("x1"), Var("x2"), Var("x3")});
  CHECK(vart_of(parse_formula("x -> (y)"), *p.sid).empty());
}

TEST_CASE("empty theory means empty vart") {
  Problem p = parse("sid { p(x) <= x -> (x); } entail { p(x) |- }");
  CHECK(p.sid->vart_of_pred("p").empty());
}

TEST_CASE("left termination") {
  Problem rec = parse(R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) |- }
)");
  Sequent s1 = mk_sequent(rec.lhs, rec.rhs, rec.sid, rec.theory);
  CHECK(!is_left_terminating(s1));

  Problem fin = parse("sid { q(x) <= x -> (x); } entail { q(x) |- }");
  Sequent s2 = mk_sequent(fin.lhs, fin.rhs, fin.sid, fin.theory);
  CHECK(is_left_terminating(s2));

  Sequent s3 = mk_sequent(parse_formula("x -> (y)"), {}, rec.sid, TheoryTag::Empty);
  CHECK(is_left_terminating(s3));
}

TEST_CASE("roots collect sources and first arguments") {
  Roots r = roots_of(parse_formula("x -> (y) * p(z,w)"));
  CHECK(r.main == std::vector<Var>{Var("x"), Var("z")});
  CHECK(r.aux.empty());
}

TEST_CASE("pu-atom roots split into main and auxiliary") {
  FormulaPtr pu = parse_formula("(p(y) * q(z,u) -* q(x,u))[x,y,z,u <- x,y,z,u]", true);
  Roots r = roots_of(pu);
  REQUIRE(r.main.size() == 1);
  CHECK(r.main[0] == Var("x"));
  CHECK(r.aux == std::vector<Var>{Var("y"), Var("z")});
}

TEST_CASE("duplicate main roots are unsatisfiable") {
  CHECK(root_unsatisfiable(parse_formula("x -> (y) * x -> (z)")));
  CHECK(!root_unsatisfiable(parse_formula("x -> (y) * y -> (z)")));
}

TEST_CASE("oracle spot checks the alloc lemma and establishment lemma") {
  Problem p = parse(R"(
sid {
  p(x,y) <= x -> (y);
  p(x,y) <= exists z. x -> (z) * p(z,x);
}
entail { p(a,b) |- }
)");
  // every model allocates the variables in alloc(phi), and every referenced
  // but unallocated location is named by a free variable
  for (const auto& st : models_of(p.lhs, *p.sid, p.theory, 4, 3)) {
    for (const auto& v : alloc_of(p.lhs, *p.sid)) CHECK(st.heap.count(st.store.at(v)));
    std::set<Loc> named;
    for (const auto& [v, l] : st.store) named.insert(l);
    for (const auto& [l, tup] : st.heap)
      for (Loc t : tup) {
        if (!st.heap.count(t)) CHECK(named.count(t));
      }
    // the root is allocated in every model
    CHECK(st.heap.count(st.store.at(Var("a"))));
  }
}
