#include <catch2/catch_amalgamated.hpp>

#include "sepentail/frontend.hpp"
#include "sepentail/fuzz.hpp"
#include "sepentail/pipeline.hpp"

using namespace sepentail;

namespace {

CheckResult run(const std::string& text, CheckConfig cfg = {}) {
  Problem p = parse_problem(text);
  if (p.theory != TheoryTag::Empty && !cfg.timeout) cfg.timeout = std::chrono::milliseconds(8000);
  return check_entailment(p, cfg);
}

}  // namespace

TEST_CASE("the cyclic tree example proves with a backedge") {
  Problem p = parse_problem(R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)");
  CheckResult res = check_entailment(p);
  CHECK(res.aggregate == Verdict::Valid);
  CHECK(res.stats.backedges >= 1);
  // the certificate passes the kernel
  ParsedCertificate cert = parse_certificate(write_certificates(res, p, Strategy::Terminating));
  CHECK(verify_certificate(cert, p).accepted);
}

TEST_CASE("list composition through a middle point") {
  CheckResult res = run(R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) * ls(y,z) |- exists u. (ls(x,u) * ls(u,z)) }
)");
  CHECK(res.aggregate == Verdict::Valid);
}

TEST_CASE("equivalence cases are dispatched per partition") {
  CheckResult res = run(R"(
sid {
  r(x,y) <= x -> (y);
}
entail { r(a,b) |- r(a,b) }
)");
  CHECK(res.aggregate == Verdict::Valid);
  CHECK(res.cases.size() == 2);  // Bell(2)
}

TEST_CASE("invalid entailments come with countermodels") {
  CheckResult res = run(R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
  els(x,y) <= exists z. x -> (z) * ols(z,y);
  ols(x,y) <= x -> (y);
  ols(x,y) <= exists z. x -> (z) * els(z,y);
}
entail { ls(x,y) |- els(x,y) }
)");
  CHECK(res.aggregate == Verdict::Invalid);
  CHECK(res.witness.has_value());
}

TEST_CASE("eq problems are routed through equality elimination") {
  CheckResult res = run(R"(
theory eq
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ls(x,y) |- als(x,y) }
)");
  CHECK(res.aggregate == Verdict::Invalid);
  for (const auto& c : res.cases) CHECK(c.prepared.theory == TheoryTag::Empty);
}

TEST_CASE("left-terminating proofs close without backedges") {
  CheckConfig cfg;
  cfg.backedges = false;
  CheckResult res = run(R"(
sid {
  top(x) <= exists y. x -> (y) * mid(y);
  mid(x) <= x -> (x);
}
entail { exists y. (x -> (y) * mid(y)) |- top(x) }
)",
                        cfg);
  CHECK(res.aggregate == Verdict::Valid);
  CHECK(res.stats.backedges == 0);
}

TEST_CASE("fuzzed left-terminating valid sequents prove without backedges") {
  std::mt19937_64 rng(41);
  FuzzParams fp;
  CheckConfig cfg;
  cfg.backedges = false;
  cfg.oracle_confirm = false;
  int proved = 0;
  for (int i = 0; i < 25; ++i) {
    Problem p = gen_left_terminating_valid(rng, fp);
    Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
    REQUIRE(is_left_terminating(s));
    CheckResult res = check_entailment(p, cfg);
    if (res.aggregate == Verdict::Valid) ++proved;
  }
  CHECK(proved == 25);
}

TEST_CASE("certificates are stable and reverifiable after reparse") {
  Problem p = parse_problem(R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) |- exists u. ls(x,u) }
)");
  CheckResult a = check_entailment(p);
  CheckResult b = check_entailment(p);
  REQUIRE(a.aggregate == Verdict::Valid);
  std::string ca = write_certificates(a, p, Strategy::Terminating);
  std::string cb = write_certificates(b, p, Strategy::Terminating);
  CHECK(ca == cb);  // deterministic in sequential mode
  CHECK(verify_certificate(parse_certificate(ca), p).accepted);
}

TEST_CASE("tampered certificates are rejected") {
  Problem p = parse_problem(R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)");
  CheckResult res = check_entailment(p);
  REQUIRE(res.aggregate == Verdict::Valid);
  std::string text = write_certificates(res, p, Strategy::Terminating);
  ParsedCertificate good = parse_certificate(text);
  REQUIRE(verify_certificate(good, p).accepted);

  // deleting a premise breaks the parent's derivation
  {
    ParsedCertificate mut = good;
    for (auto& nd : mut.cases[0].cert.nodes)
      if (nd.children.size() >= 2) {
        nd.children.pop_back();
        break;
      }
    CHECK(!verify_certificate(mut, p).accepted);
  }
  // retargeting a backedge to a non-ancestor
  {
    ParsedCertificate mut = good;
    bool changed = false;
    for (auto& nd : mut.cases[0].cert.nodes)
      if (nd.backedge && !changed) {
        // pick a node that the target does not reach
        for (const auto& other : mut.cases[0].cert.nodes)
          if (!other.backedge && other.id != *nd.backedge && other.id > nd.id) {
            nd.backedge = other.id;
            changed = true;
            break;
          }
      }
    REQUIRE(changed);
    CHECK(!verify_certificate(mut, p).accepted);
  }
  // changing a rule name invalidates the instance
  {
    ParsedCertificate mut = good;
    for (auto& nd : mut.cases[0].cert.nodes)
      if (!nd.backedge && nd.rule == RuleName::UL) {
        nd.rule = RuleName::W;
        break;
      }
    CHECK(!verify_certificate(mut, p).accepted);
  }
}

TEST_CASE("dot export renders nodes and dashed backedges") {
  Problem p = parse_problem(R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)");
  CheckResult res = check_entailment(p);
  REQUIRE(res.aggregate == Verdict::Valid);
  std::string dot = export_dot(res);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("style=dashed") != std::string::npos);

  Certificate empty;
  CHECK(export_dot(empty).find("digraph") != std::string::npos);
}

TEST_CASE("soundness spot-check against the oracle on the corpus rules") {
  CheckResult res = run(R"(
sid {
  c(x,y) <= x -> (y,x);
  chain(x,y) <= x -> (y,x);
  chain(x,y) <= exists z. x -> (z,x) * chain(z,y);
}
entail { c(x,y) |- chain(x,y) }
)");
  REQUIRE(res.aggregate == Verdict::Valid);
  Problem p = parse_problem(R"(
sid {
  c(x,y) <= x -> (y,x);
  chain(x,y) <= x -> (y,x);
  chain(x,y) <= exists z. x -> (z,x) * chain(z,y);
}
entail { c(x,y) |- chain(x,y) }
)");
  for (const auto& s : to_prenex_dnf(p.lhs, p.rhs, p.sid, p.theory))
    CHECK(oracle_entails(s, 6, 3).valid_up_to_bound);
}
