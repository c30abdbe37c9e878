#include <catch2/catch_amalgamated.hpp>

#include "sepentail/frontend.hpp"
#include "sepentail/unfold.hpp"

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
entail { ils(x,y) |- als(x,y) }
)");
}

Problem PQ() {
  return parse_problem(R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)");
}

Problem LS() {
  return parse_problem(R"(
sid {
  ls(u,v) <= u -> (v);
  ls(u,v) <= exists w. u -> (w) * ls(w,v);
}
entail { ls(x,nil) |- ls(x,nil) }
)");
}

}  // namespace

TEST_CASE("unfolding a predicate instantiates each rule") {
  Problem p = ILS_ALS();
  auto us = unfold_pred(PredAtom{"als", {Var("x1"), Var("x2")}}, *p.sid);
  REQUIRE(us.size() == 2);
  std::set<std::string> prints;
  for (auto& u : us) prints.insert(print(u.result));
  CHECK(prints.count("x1 -> (x2) * x1 != x2"));
  bool found_rec = false;
  for (auto& u : us) {
    PrenexView pv = prenex_view(u.result);
    if (pv.prefix.size() == 1) found_rec = true;
  }
  CHECK(found_rec);
}

TEST_CASE("unfoldings introduce no new free variables") {
  Problem p = PQ();
  for (const char* atom : {"p", "q"}) {
    PredAtom a{atom, {Var("a")}};
    if (p.sid->ar(atom) == 2) a.args.push_back(Var("b"));
    std::set<Var> fv_atom(a.args.begin(), a.args.end());
    for (auto& u : unfold_pred(a, *p.sid)) {
      for (const auto& v : free_vars(u.result)) CHECK(fv_atom.count(v));
    }
  }
}

TEST_CASE("pu-atom unfolding matches the frame syntactically") {
  Problem p = ILS_ALS();
  // <als(z',y') -* als(x',y')>[x,y,z]: one step yields x -> (z) * x != y
  FormulaPtr pu = parse_formula("(als(z',y') -* als(x',y'))[x',y',z' <- x,y,z]", true);
  auto us = unfold_pu(*pu->as<PuAtom>(), *p.sid);
  REQUIRE(us.size() == 1);
  CHECK(print(us[0].result) == "x -> (z) * x != y");
}

TEST_CASE("unmatched frames yield no unfolding") {
  Problem p = LS();
  FormulaPtr pu = parse_formula("(ls(b,a) -* ls(a,b))[a,b <- x,y]", true);
  CHECK(unfold_pu(*pu->as<PuAtom>(), *p.sid).empty());
}

TEST_CASE("empty frames reduce to plain unfolding") {
  Problem p = PQ();
  FormulaPtr pu = parse_formula("(emp -* p(a))[a <- x]", true);
  auto us = unfold_pu(*pu->as<PuAtom>(), *p.sid);
  auto plain = unfold_pred(PredAtom{"p", {Var("x")}}, *p.sid);
  REQUIRE(us.size() == plain.size());
  std::set<std::string> a, b;
  for (auto& u : us) a.insert(canonical_key(Sequent{u.result, {}, nullptr, TheoryTag::Empty}));
  for (auto& u : plain) b.insert(canonical_key(Sequent{u.result, {}, nullptr, TheoryTag::Empty}));
  CHECK(a == b);
}

TEST_CASE("mapsto unfoldings single out the points-to rules") {
  Problem p = PQ();
  auto ms = mapsto_unfoldings(fpred("q", {Var("x"), Var("u")}), *p.sid);
  REQUIRE(ms.size() == 1);
  CHECK(print(ms[0]) == "x -> (u,u)");
  auto mp = mapsto_unfoldings(fpred("p", {Var("x")}), *p.sid);
  REQUIRE(mp.size() == 1);
  CHECK(print(mp[0]) == "x -> (x,x)");
}

TEST_CASE("predicates without points-to rules have no mapsto unfoldings") {
  Problem p = parse_problem(R"(
sid {
  a(x) <= exists y. x -> (y) * a(y);
  a(x) <= exists y. x -> (y) * b(y);
  b(x) <= x -> (x);
}
entail { a(x) |- }
)",
                            true);
  CHECK(mapsto_unfoldings(fpred("a", {Var("v")}), *p.sid).empty());
}

TEST_CASE("split on a points-to atom") {
  Problem p = LS();
  auto out = split_at(parse_formula("x -> (y)"), Var("x"), *p.sid);
  REQUIRE(out.size() == 1);
  CHECK(print(out[0]) == "x -> (y)");
  CHECK(split_at(parse_formula("emp"), Var("x"), *p.sid).empty());
  CHECK(split_at(parse_formula("z -> (y)"), Var("x"), *p.sid).empty());
}

TEST_CASE("split of the quantified list example") {
  Problem p = LS();
  FormulaPtr f = parse_formula("exists y. ls(y,nil)");
  auto out = split_at(f, Var("x"), *p.sid);
  // ls(x,nil) itself, plus the partial unfolding through x
  REQUIRE(out.size() >= 2);
  bool plain = false, with_frame = false;
  for (const auto& g : out) {
    if (print(g) == "ls(x,nil)") plain = true;
    PrenexView pv = prenex_view(g);
    std::size_t pu_count = 0;
    for (const auto& c : pv.conjuncts) pu_count += c->is<PuAtom>() ? 1 : 0;
    if (pu_count == 2) with_frame = true;
  }
  CHECK(plain);
  CHECK(with_frame);
  // every split result makes x a main root alongside the original roots
  for (const auto& g : out) {
    Roots r = roots_of(g);
    bool has_x = false;
    for (const auto& v : r.main) has_x |= v == Var("x");
    CHECK(has_x);
  }
}

TEST_CASE("splitting at an existing root is the identity") {
  Problem p = LS();
  for (const char* text : {"ls(x,nil)", "x -> (y) * ls(y,nil)"}) {
    FormulaPtr f = parse_formula(text);
    auto out = split_at(f, Var("x"), *p.sid);
    REQUIRE(out.size() == 1);
    CHECK(equal(out[0], prenex(f, {})));
  }
}

TEST_CASE("bounded unfolding of the increasing list") {
  Problem p = ILS_ALS();
  auto us = bounded_unfold(fpred("als", {Var("x"), Var("y")}), *p.sid, 2);
  REQUIRE(us.size() == 2);
  for (const auto& u : us) {
    PrenexView pv = prenex_view(u);
    std::size_t cells = 0;
    for (const auto& c : pv.conjuncts) cells += c->is<PointsTo>() ? 1 : 0;
    CHECK(cells >= 1);
    CHECK(cells <= 2);
    for (const auto& c : pv.conjuncts) CHECK(!c->is<PredAtom>());
  }
}

TEST_CASE("bounded unfolding respects the budget") {
  Problem p = PQ();
  CHECK(bounded_unfold(fpred("p", {Var("x")}), *p.sid, 0).empty());
  auto keep = bounded_unfold(parse_formula("x -> (y,z)"), *p.sid, 3);
  REQUIRE(keep.size() == 1);
  CHECK(print(keep[0]) == "x -> (y,z)");
}

TEST_CASE("partial unfoldings stay within the cell budget") {
  Problem p = PQ();
  for (auto& part : partial_unfoldings(PredAtom{"p", {Var("x")}}, *p.sid, 3)) {
    CHECK(part.cells.size() >= 1);
    CHECK(part.cells.size() <= 3);
  }
  CHECK(partial_unfoldings(PredAtom{"p", {Var("x")}}, *p.sid, 0).empty());
}
