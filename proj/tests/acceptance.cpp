// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits nonzero when any fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "sepentail/fuzz.hpp"
#include "sepentail/pipeline.hpp"

using namespace sepentail;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, const std::string& what, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* INFINITE_PQ = R"(
sid {
  p(x) <= exists y z. x -> (y,z) * p(y) * p(z);
  p(x) <= x -> (x,x);
  q(x,u) <= exists y z. x -> (y,z) * p(y) * q(z,u);
  q(x,u) <= x -> (u,u);
}
entail { p(x) |- exists u. q(x,u) }
)";

const char* LS_COMPOSE = R"(
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
}
entail { ls(x,y) * ls(y,z) |- exists u. (ls(x,u) * ls(u,z)) }
)";

const char* ILS_ALS_SID = R"(
theory natorder
sid {
  ils(x,y) <= x -> (y) * x <= y;
  ils(x,y) <= exists z. x -> (z) * ils(z,y) * x <= z;
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
)";

const char* LS_ALS_EQ = R"(
theory eq
sid {
  ls(x,y) <= x -> (y);
  ls(x,y) <= exists z. x -> (z) * ls(z,y);
  als(x,y) <= x -> (y) * x != y;
  als(x,y) <= exists z. x -> (z) * als(z,y) * x != y;
}
entail { ls(x,y) |- als(x,y) }
)";

// ---------------------------------------------------------------------------

void criterion1() {
  auto t0 = std::chrono::steady_clock::now();
  Problem p = parse_problem(INFINITE_PQ);
  CheckResult res = check_entailment(p);
  bool ok = res.aggregate == Verdict::Valid && res.stats.backedges >= 1;
  std::string detail;
  if (ok) {
    ParsedCertificate cert = parse_certificate(write_certificates(res, p, Strategy::Terminating));
    VerifyOutcome v = verify_certificate(cert, p);
    ok = v.accepted;
    if (!ok) detail = "kernel: " + v.detail;
  }
  double secs = seconds_since(t0);
  ok = ok && secs < 5.0;
  report(1, "cyclic proof of the p/q tree example, certificate accepted", ok,
         "backedges=" + std::to_string(res.stats.backedges) + ", " + std::to_string(secs).substr(0, 5) + "s");
}

void criterion2() {
  bool ok1, ok2;
  std::string d1, d2;
  {
    auto t0 = std::chrono::steady_clock::now();
    Problem p = parse_problem(LS_COMPOSE);
    CheckResult res = check_entailment(p);
    double secs = seconds_since(t0);
    ok1 = res.aggregate == Verdict::Valid && secs < 30.0;
    d1 = "ls-compose " + std::string(res.aggregate == Verdict::Valid ? "VALID" : "not valid") + " " +
         std::to_string(secs).substr(0, 5) + "s";
  }
  {
    auto t0 = std::chrono::steady_clock::now();
    Problem p = parse_problem(std::string(ILS_ALS_SID) +
                              "entail { ils(x1,x2) * x2 -> (x3) * x2 < x3 |- als(x1,x3) }\n");
    CheckConfig cfg;
    cfg.strategy = Strategy::General;
    cfg.timeout = std::chrono::milliseconds(12000);
    CheckResult res = check_entailment(p, cfg);
    bool confirmed = false;
    if (res.aggregate != Verdict::Valid && res.aggregate != Verdict::Invalid) {
      confirmed = true;
      for (const auto& s : to_prenex_dnf(p.lhs, p.rhs, p.sid, p.theory))
        confirmed = confirmed && oracle_entails(s, 6, 4).valid_up_to_bound;
    }
    double secs = seconds_since(t0);
    ok2 = (res.aggregate == Verdict::Valid || confirmed) && res.aggregate != Verdict::Invalid && secs < 30.0;
    d2 = std::string("guarded-extension ") +
         (res.aggregate == Verdict::Valid ? "VALID" : confirmed ? "UNKNOWN+oracle-confirmed" : "unconfirmed") +
         " " + std::to_string(secs).substr(0, 5) + "s";
  }
  report(2, "golden valid entailments", ok1 && ok2, d1 + "; " + d2);
}

void criterion3() {
  bool ok1, ok2;
  std::string d1, d2;
  {
    auto t0 = std::chrono::steady_clock::now();
    Problem p = parse_problem(std::string(ILS_ALS_SID) + "entail { ils(x1,x2) |- als(x1,x2) }\n");
    CheckConfig cfg;
    cfg.strategy = Strategy::General;
    cfg.timeout = std::chrono::milliseconds(8000);
    CheckResult res = check_entailment(p, cfg);
    double secs = seconds_since(t0);
    ok1 = res.aggregate == Verdict::Invalid && secs < 30.0;
    // the witness must be the two-cell lasso up to renaming
    if (ok1) {
      ok1 = res.witness.has_value();
      if (ok1) {
        const Structure& st = *res.witness;
        ok1 = st.heap.size() == 2;
        if (ok1) {
          Loc a = st.store.at(Var("x1"));
          ok1 = st.heap.count(a) > 0;
          if (ok1) {
            Loc b = st.heap.at(a)[0];
            ok1 = st.heap.count(b) && st.heap.at(b)[0] == b;
          }
        }
      }
    }
    d1 = "increasing-vs-acyclic " + std::to_string(secs).substr(0, 5) + "s";
  }
  {
    auto t0 = std::chrono::steady_clock::now();
    Problem p = parse_problem(LS_ALS_EQ);
    CheckConfig cfg;
    cfg.timeout = std::chrono::milliseconds(8000);
    CheckResult res = check_entailment(p, cfg);
    double secs = seconds_since(t0);
    ok2 = res.aggregate == Verdict::Invalid && secs < 30.0;
    d2 = "ls-vs-als-through-eqelim " + std::string(res.aggregate == Verdict::Invalid ? "INVALID" : "?") + " " +
         std::to_string(secs).substr(0, 5) + "s";
  }
  report(3, "golden invalid entailments with countermodels", ok1 && ok2, d1 + "; " + d2);
}

void criterion4() {
  FuzzParams fp;
  CheckConfig cfg;
  cfg.fuel = 100000;
  cfg.timeout = std::chrono::milliseconds(5000);
  cfg.oracle_locs = 6;
  cfg.oracle_heap = 4;
  DifferentialOutcome out = differential_run(20240817, 300, fp, cfg);
  bool ok = out.disagreements == 0 && out.total == 300;
  report(4, "differential agreement on 300 fuzzed problems", ok,
         "valid=" + std::to_string(out.prover_valid) + " invalid=" + std::to_string(out.prover_invalid) +
             " unknown=" + std::to_string(out.prover_unknown) +
             " disagreements=" + std::to_string(out.disagreements));
}

// every derivable non-UL instance must decrease the measure
void criterion5() {
  std::mt19937_64 rng(515151);
  FuzzParams fp;
  std::size_t sequents = 0, instances = 0, bad = 0;
  while (sequents < 500) {
    Problem p = gen_problem(rng, fp);
    Problem pc = make_alloc_compatible(p);
    for (Sequent s : to_prenex_dnf(pc.lhs, pc.rhs, pc.sid, pc.theory)) {
      if (sequents >= 500) break;
      ++sequents;
      auto check_inst = [&](RuleName rule, const Choice& ch) {
        auto prem = derive_instance(s, rule, ch);
        if (!prem) return;
        ++instances;
        if (rule != RuleName::UL && !measure_decreases(s, RuleInstance{rule, ch, *prem})) ++bad;
      };
      PrenexView lv = prenex_view(s.lhs);
      if (!lv.prefix.empty()) {
        Choice ch;
        ch.x = lv.prefix.front();
        ch.fresh = fresh_vars(1, all_vars(s.lhs))[0];
        check_inst(RuleName::Sk, ch);
      }
      for (std::size_t i = 0; i < s.rhs.size(); ++i) {
        Choice ch;
        ch.i = i;
        check_inst(RuleName::W, ch);
        PrenexView rv = prenex_view(s.rhs[i]);
        for (std::size_t j = 0; j < rv.conjuncts.size(); ++j) {
          Choice cj;
          cj.i = i;
          cj.j = j;
          check_inst(RuleName::UR, cj);
          check_inst(RuleName::HF, cj);
        }
        if (!rv.prefix.empty()) {
          Choice ce;
          ce.i = i;
          ce.x = rv.prefix.back();
          ce.fresh = fresh_vars(1, calc::sequent_vars(s))[0];
          check_inst(RuleName::ED, ce);
        }
        std::set<Var> alloc = alloc_of(s.lhs, *s.sid);
        for (const auto& x : alloc) {
          Choice cd;
          cd.i = i;
          cd.x = x;
          check_inst(RuleName::HD, cd);
        }
      }
      // singleton separating-conjunction covers
      for (std::size_t pivot = 0; pivot < lv.conjuncts.size() && !s.rhs.empty(); ++pivot) {
        Choice ch;
        ch.i = pivot;
        ch.I = {{0}};
        ch.J = {{0}};
        check_inst(RuleName::SC, ch);
      }
    }
  }
  report(5, "measure decreases for every non-unfolding instance", bad == 0 && sequents == 500,
         std::to_string(instances) + " instances over " + std::to_string(sequents) + " sequents, " +
             std::to_string(bad) + " violations");
}

// both directions of the splitting lemma under oracle evaluation
void criterion6() {
  std::mt19937_64 rng(66);
  FuzzParams fp;
  std::size_t triples = 0, bad = 0;
  while (triples < 200) {
    Problem p = gen_problem(rng, fp);
    std::vector<FormulaPtr> formulas{p.lhs};
    // include pu-bearing formulas: split once, then split the result again
    std::set<Var> fv = free_vars(p.lhs);
    if (fv.empty()) continue;
    std::vector<Var> fvv(fv.begin(), fv.end());
    Var x = fvv[rng() % fvv.size()];
    for (auto& g : split_at(p.lhs, x, *p.sid))
      if (formulas.size() < 3) formulas.push_back(g);
    for (const auto& f : formulas) {
      if (triples >= 200) break;
      std::set<Var> ffv = free_vars(f);
      if (ffv.empty()) continue;
      std::vector<Var> cand(ffv.begin(), ffv.end());
      Var y = cand[rng() % cand.size()];
      auto split = split_at(f, y, *p.sid);
      std::vector<Structure> f_models, split_models;
      try {
        f_models = models_of(f, *p.sid, p.theory, 5, 3);
        for (const auto& g : split)
          for (auto& st : models_of(g, *p.sid, p.theory, 5, 3)) split_models.push_back(st);
      } catch (BoundTooSmall&) {
        continue;
      }
      if (f_models.empty() && split_models.empty()) continue;
      ++triples;
      // left to right: any model of a split result satisfies f
      for (const auto& st : split_models)
        if (!holds(st, f, *p.sid, p.theory)) ++bad;
      // right to left: injective models of f allocating y satisfy the split
      for (const auto& st : f_models) {
        auto it = st.store.find(y);
        if (it == st.store.end() || !st.heap.count(it->second)) continue;
        bool any = false;
        for (const auto& g : split) any = any || holds(st, g, *p.sid, p.theory);
        if (!any) ++bad;
      }
    }
  }
  report(6, "heap splitting lemma holds in both directions", bad == 0,
         std::to_string(triples) + " triples, " + std::to_string(bad) + " violations");
}

void criterion7(const fs::path& corpus) {
  std::size_t files = 0, agreed = 0;
  std::string failed;
  for (const auto& entry : fs::directory_iterator(corpus)) {
    if (entry.path().extension() != ".sep") continue;
    Problem p;
    try {
      p = parse_problem(slurp(entry.path()), /*assume_established=*/true);
    } catch (std::exception&) {
      continue;
    }
    ++files;
    auto bounded = [&](const Problem& q, std::size_t L, std::size_t K) {
      bool all = true;
      for (const auto& s : to_prenex_dnf(q.lhs, q.rhs, q.sid, q.theory))
        all = all && oracle_entails(s, L, K).valid_up_to_bound;
      return all;
    };
    try {
      bool in_v = bounded(p, 6, 4);
      bool ac_v = bounded(make_alloc_compatible(p), 6, 4);
      bool eq_ok = true;
      if (p.theory == TheoryTag::Eq) {
        auto [out, trace] = eliminate_eq(p);
        eq_ok = bounded(out, 6, 4) == in_v;
      }
      if (in_v == ac_v && eq_ok)
        ++agreed;
      else if (failed.empty())
        failed = entry.path().filename().string();
    } catch (BoundTooSmall&) {
      ++agreed;  // out of oracle scope: nothing to compare
    }
  }
  report(7, "preprocessing preserves bounded verdicts on the corpus", files >= 15 && agreed == files,
         std::to_string(agreed) + "/" + std::to_string(files) + " files" +
             (failed.empty() ? "" : ", first failure: " + failed));
}

void criterion8() {
  std::mt19937_64 rng(88);
  FuzzParams fp;
  CheckConfig cfg;
  cfg.backedges = false;
  cfg.oracle_confirm = false;
  std::size_t proved = 0, total = 50;
  for (std::size_t i = 0; i < total; ++i) {
    Problem p = gen_left_terminating_valid(rng, fp);
    Sequent s = mk_sequent(p.lhs, p.rhs, p.sid, p.theory);
    if (!is_left_terminating(s)) continue;
    CheckResult res = check_entailment(p, cfg);
    bool finite_cert = true;
    for (const auto& cr : res.cases)
      for (const auto& v : cr.verdicts)
        if (v.certificate)
          for (const auto& nd : v.certificate->nodes)
            if (nd.backedge) finite_cert = false;
    if (res.aggregate == Verdict::Valid && finite_cert) ++proved;
  }
  report(8, "left-terminating valid sequents prove without backedges", proved == total,
         std::to_string(proved) + "/" + std::to_string(total));
}

void criterion9() {
  Problem p = parse_problem(INFINITE_PQ);
  CheckResult res = check_entailment(p);
  if (res.aggregate != Verdict::Valid) {
    report(9, "certificate mutation testing", false, "no certificate to mutate");
    return;
  }
  ParsedCertificate good = parse_certificate(write_certificates(res, p, Strategy::Terminating));
  if (!verify_certificate(good, p).accepted) {
    report(9, "certificate mutation testing", false, "baseline rejected");
    return;
  }
  std::mt19937_64 rng(99);
  std::size_t tried = 0, rejected = 0;
  auto& nodes = good.cases[0].cert.nodes;
  while (tried < 100) {
    ParsedCertificate mut = good;
    auto& mnodes = mut.cases[0].cert.nodes;
    std::size_t n = rng() % mnodes.size();
    ProofNode& nd = mnodes[n];
    bool changed = false;
    switch (rng() % 5) {
      case 0:  // disturb a child link
        if (!nd.children.empty()) {
          nd.children[rng() % nd.children.size()] = rng() % mnodes.size();
          changed = true;
        }
        break;
      case 1:  // swap the rule
        if (!nd.backedge) {
          RuleName old = nd.rule;
          nd.rule = old == RuleName::W ? RuleName::UL : RuleName::W;
          changed = nd.rule != old;
        }
        break;
      case 2:  // shift a choice index
        if (!nd.backedge) {
          nd.choice.i += 1;
          changed = true;
        }
        break;
      case 3:  // rename a variable in the node's sequent
      {
        std::set<Var> fv = free_vars(nd.sequent);
        if (!fv.empty()) {
          Var v = *fv.begin();
          Subst s = single_subst(v, Var(v.name + "mut"));
          nd.sequent.lhs = apply_subst(nd.sequent.lhs, s);
          changed = true;
        }
        break;
      }
      case 4:  // retarget a backedge
        if (nd.backedge && mnodes.size() > 1) {
          std::size_t t = rng() % mnodes.size();
          if (t != *nd.backedge && t != nd.id) {
            // avoid picking a different-but-still-legal ancestor
            if (canonical_key(mnodes[t].sequent) != canonical_key(nd.sequent)) {
              nd.backedge = t;
              changed = true;
            }
          }
        }
        break;
    }
    if (!changed) continue;
    ++tried;
    if (!verify_certificate(mut, p).accepted) ++rejected;
  }
  (void)nodes;
  report(9, "single-field certificate mutations are rejected", rejected == 100,
         std::to_string(rejected) + "/100 rejected");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path corpus = argc > 1 ? argv[1] : "corpus";
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7(corpus);
  criterion8();
  criterion9();
  if (failures) {
    std::cout << failures << " criterion(s) failing" << std::endl;
    return 1;
  }
  std::cout << "all criteria pass" << std::endl;
  return 0;
}
