#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sepentail/frontend.hpp"
#include "sepentail/fuzz.hpp"

using namespace sepentail;

namespace {

const char* ILS_ALS = R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ils(x1,x2) |- als(x1,x2) }
)";

const char* PQ = R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)";

}  // namespace

TEST_CASE("parses the increasing/acyclic list system") {
  Problem p = parse_problem(ILS_ALS);
  CHECK(p.sid->rules.size() == 4);
  CHECK(p.sid->kappa == 1);
  CHECK(p.theory == TheoryTag::NatOrder);
}

TEST_CASE("parses the tree system with kappa 2") {
  Problem p = parse_problem(PQ);
  CHECK(p.sid->rules.size() == 4);
  CHECK(p.sid->kappa == 2);
  CHECK(p.theory == TheoryTag::Empty);
}

TEST_CASE("kappa mismatch is rejected") {
  CHECK_THROWS_AS(parse_problem(R"(
sid {
  p(x) <= x -> (y,z);
  q(x) <= x -> (x);
}
entail { p(x) |- }
)"),
                  ParseError);
}

TEST_CASE("missing points-to is a progress violation") {
  CHECK_THROWS_AS(parse_problem(R"(
theory eq
sid {
  ils(x,y) <= x = y;
}
entail { ils(x,y) |- }
)"),
                  ProgressViolation);
}

TEST_CASE("unknown predicates and arity mismatches are rejected") {
  CHECK_THROWS(parse_problem("sid { p(x) <= x -> (x); } entail { q(x) |- }"));
  CHECK_THROWS(parse_problem("sid { p(x) <= x -> (x); } entail { p(x,y) |- }"));
}

TEST_CASE("theory atoms must fit the declared theory") {
  CHECK_THROWS_AS(parse_problem(R"(
theory eq
sid { p(x) <= x -> (x) * x <= x; }
entail { p(x) |- }
)"),
                  ParseError);
  CHECK_THROWS_AS(parse_problem(R"(
sid { p(x) <= x -> (x); }
entail { x = y * p(x) |- }
)"),
                  ParseError);
}

TEST_CASE("pu-atoms are rejected in user input") {
  CHECK_THROWS_AS(parse_problem(R"(
sid { ls(x,y) <= x -> (y); }
entail { (ls(a,b) -* ls(c,b))[a,b,c <- x,y,z] |- }
)"),
                  ParseError);
}

TEST_CASE("reserved identifiers are rejected") {
  CHECK_THROWS_AS(parse_problem("sid { p(x) <= x -> (_v0); } entail { p(x) |- }"), ParseError);
  CHECK_THROWS_AS(parse_formula("p(x@1)"), ParseError);
}

TEST_CASE("empty right-hand side prints and parses") {
  Sequent s = mk_sequent(parse_formula("emp"), {}, nullptr, TheoryTag::Empty);
  CHECK(print(s) == "emp |- ");
  Parser p("emp |- ", true);
  Sequent back = p.parse_sequent(nullptr, TheoryTag::Empty);
  CHECK(back.rhs.empty());
}

TEST_CASE("pu-atoms print in frame-inner-binding form and reparse") {
  FormulaPtr pu = parse_formula("(ls(z',nil) -* ls(u,nil))[u,z' <- y,x]", true);
  std::string text = print(pu);
  CHECK(text.find("-*") != std::string::npos);
  CHECK(text.find("<-") != std::string::npos);
  FormulaPtr back = parse_formula(text, true);
  CHECK(equal(pu, back));
}

TEST_CASE("problem round trip on the corpus grammar") {
  for (const char* text : {ILS_ALS, PQ}) {
    Problem p = parse_problem(text);
    Problem q = parse_problem(print(p));
    CHECK(print(p) == print(q));
    Sequent a = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
    Sequent b = mk_sequent(q.lhs, q.rhs, q.sid, q.theory);
    CHECK(canonical_key(a) == canonical_key(b));
  }
}

TEST_CASE("round trip on random problems") {
  std::mt19937_64 rng(2024);
  FuzzParams fp;
  for (int it = 0; it < 60; ++it) {
    Problem p = gen_problem(rng, fp);
    Problem q = parse_problem(print(p));
    CHECK(print(p) == print(q));
    Sequent a = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
    Sequent b = mk_sequent(q.lhs, q.rhs, q.sid, q.theory);
    CHECK(canonical_key(a) == canonical_key(b));
  }
}

TEST_CASE("comments and whitespace are tolerated") {
  Problem p = parse_problem("# a list\nsid {\n  ls(x,y) <= x -> (y); # base\n}\nentail { ls(a,b) |- ls(a,b) }\n");
  CHECK(p.sid->rules.size() == 1);
}

TEST_CASE("generated names with @ segments reparse") {
  Problem p = parse_problem(R"(
theory eq
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) |- ls(y,x) }
)");
  auto [out, trace] = eliminate_eq(p);
  Problem back = parse_problem(print(out), /*assume_established=*/true);
  CHECK(print(back) == print(out));
}
