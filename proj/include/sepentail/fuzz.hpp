// Random problem generation and differential testing against the bounded
// oracle. Progress and connectivity hold by construction; establishment is
// arranged by making every rule existential the root of a call.

#ifndef SEPENTAIL_FUZZ_HPP
#define SEPENTAIL_FUZZ_HPP

#include <random>
#include <string>
#include <vector>

#include "sepentail/frontend.hpp"
#include "sepentail/oracle.hpp"
#include "sepentail/pipeline.hpp"
#include "sepentail/prover.hpp"
#include "sepentail/sid.hpp"

namespace sepentail {

struct FuzzParams {
  std::size_t max_preds = 3;
  std::size_t max_rules = 4;
  std::size_t max_kappa = 2;
  std::size_t max_fv = 4;
  bool dag_only = false;  // left-terminating systems
};

namespace fuzzdetail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + rng() % (hi - lo + 1);
}

template <class T>
inline const T& choose(std::mt19937_64& rng, const std::vector<T>& xs) {
  return xs[rng() % xs.size()];
}

}  // namespace fuzzdetail

// A random pc-SID: every rule allocates its first argument, every body call
// is rooted at a cell target, and every existential is the root of a call.
inline std::shared_ptr<const PcSid> gen_sid(std::mt19937_64& rng, const FuzzParams& fp, std::size_t kappa) {
  using fuzzdetail::pick;
  std::size_t npreds = pick(rng, 1, fp.max_preds);
  std::vector<PredSym> preds;
  std::vector<std::size_t> arity;
  for (std::size_t i = 0; i < npreds; ++i) {
    preds.push_back("P" + std::to_string(i));
    arity.push_back(pick(rng, 1, 2));
  }
  std::vector<Rule> rules;
  for (std::size_t i = 0; i < npreds; ++i) {
    std::size_t nrules = pick(rng, 1, std::max<std::size_t>(1, fp.max_rules / npreds));
    for (std::size_t r = 0; r < nrules; ++r) {
      Rule rule;
      rule.head = preds[i];
      for (std::size_t a = 0; a < arity[i]; ++a) rule.head_args.push_back(Var("a" + std::to_string(a)));
      bool base = (r == 0);
      std::size_t nex = base ? 0 : pick(rng, 0, std::min<std::size_t>(2, kappa));
      // callable predicates: any, or only higher-indexed for DAG systems
      std::vector<std::size_t> callable;
      for (std::size_t j = 0; j < npreds; ++j)
        if (!fp.dag_only || j > i) callable.push_back(j);
      if (callable.empty()) nex = 0;
      for (std::size_t e = 0; e < nex; ++e) rule.exvars.push_back(Var("e" + std::to_string(e)));
      // cell targets: all existentials first (they must be reachable), then
      // random head args
      rule.cell.src = rule.head_args[0];
      std::vector<Var> pool = rule.head_args;
      for (std::size_t t = 0; t < kappa; ++t) {
        if (t < rule.exvars.size())
          rule.cell.tgt.push_back(rule.exvars[t]);
        else
          rule.cell.tgt.push_back(fuzzdetail::choose(rng, pool));
      }
      // one call per existential (roots them and establishes them)
      for (const auto& z : rule.exvars) {
        std::size_t q = fuzzdetail::choose(rng, callable);
        PredAtom call{preds[q], {z}};
        std::vector<Var> argpool = rule.head_args;
        argpool.push_back(z);
        for (std::size_t a = 1; a < arity[q]; ++a) call.args.push_back(fuzzdetail::choose(rng, argpool));
        rule.calls.push_back(std::move(call));
      }
      // occasionally an extra call rooted at a target
      if (!callable.empty() && !rule.cell.tgt.empty() && pick(rng, 0, 3) == 0) {
        Var root = fuzzdetail::choose(rng, rule.cell.tgt);
        std::size_t q = fuzzdetail::choose(rng, callable);
        PredAtom call{preds[q], {root}};
        std::vector<Var> argpool = rule.head_args;
        for (std::size_t a = 1; a < arity[q]; ++a) call.args.push_back(fuzzdetail::choose(rng, argpool));
        rule.calls.push_back(std::move(call));
      }
      rules.push_back(std::move(rule));
    }
  }
  return validate_pcsid(std::move(rules), kappa, /*assume_established=*/true);
}

// A random symbolic heap over the given free variables.
inline FormulaPtr gen_formula(std::mt19937_64& rng, const PcSid& sid, const std::vector<Var>& fv,
                              std::size_t max_atoms, bool allow_exists) {
  using fuzzdetail::pick;
  std::vector<PredSym> preds;
  for (const auto& [p, n] : sid.arity) preds.push_back(p);
  std::size_t natoms = pick(rng, 1, max_atoms);
  std::vector<Var> pool = fv;
  std::vector<Var> exvars;
  if (allow_exists && pick(rng, 0, 2) == 0) {
    Var u("w" + std::to_string(pick(rng, 0, 9)));
    exvars.push_back(u);
    pool.push_back(u);
  }
  std::vector<FormulaPtr> parts;
  for (std::size_t i = 0; i < natoms; ++i) {
    if (pick(rng, 0, 2) == 0) {
      Var src = fuzzdetail::choose(rng, pool);
      std::vector<Var> tgt;
      for (std::size_t t = 0; t < sid.kappa; ++t) tgt.push_back(fuzzdetail::choose(rng, pool));
      parts.push_back(fpointsto(src, tgt));
    } else {
      const PredSym& p = fuzzdetail::choose(rng, preds);
      std::vector<Var> args;
      for (std::size_t a = 0; a < sid.ar(p); ++a) args.push_back(fuzzdetail::choose(rng, pool));
      parts.push_back(fpred(p, args));
    }
  }
  return fexists(exvars, fsep(std::move(parts)));
}

inline Problem gen_problem(std::mt19937_64& rng, const FuzzParams& fp) {
  using fuzzdetail::pick;
  std::size_t kappa = pick(rng, 1, fp.max_kappa);
  Problem pb;
  pb.theory = TheoryTag::Empty;
  pb.sid = gen_sid(rng, fp, kappa);
  std::vector<Var> fv;
  for (std::size_t i = 0, n = pick(rng, 1, fp.max_fv); i < n; ++i) fv.push_back(Var("x" + std::to_string(i)));
  pb.lhs = gen_formula(rng, *pb.sid, fv, 3, true);
  std::size_t nrhs = pick(rng, 0, 2);
  for (std::size_t i = 0; i < nrhs; ++i) pb.rhs.push_back(gen_formula(rng, *pb.sid, fv, 2, true));
  // bias toward valid instances: sometimes entail an unfolding by its atom
  if (pick(rng, 0, 1) == 0) {
    std::vector<PredSym> preds;
    for (const auto& [p, n] : pb.sid->arity) preds.push_back(p);
    const PredSym& p = fuzzdetail::choose(rng, preds);
    std::vector<Var> args;
    for (std::size_t a = 0; a < pb.sid->ar(p); ++a) args.push_back(fv[a % fv.size()]);
    PredAtom atom{p, args};
    auto us = unfold_pred(atom, *pb.sid);
    if (!us.empty()) {
      pb.lhs = us[rng() % us.size()].result;
      pb.rhs = {fpred(atom)};
    }
  }
  return sanitize_names(pb);
}

// A left-terminating sequent that is valid by construction: the left-hand
// side is an unfolding of the right-hand side atom.
inline Problem gen_left_terminating_valid(std::mt19937_64& rng, const FuzzParams& fp) {
  using fuzzdetail::pick;
  FuzzParams dag = fp;
  dag.dag_only = true;
  std::size_t kappa = pick(rng, 1, fp.max_kappa);
  Problem pb;
  pb.theory = TheoryTag::Empty;
  pb.sid = gen_sid(rng, dag, kappa);
  std::vector<PredSym> preds;
  for (const auto& [p, n] : pb.sid->arity) preds.push_back(p);
  const PredSym& p = fuzzdetail::choose(rng, preds);
  std::vector<Var> args;
  for (std::size_t a = 0; a < pb.sid->ar(p); ++a) args.push_back(Var("x" + std::to_string(a)));
  PredAtom atom{p, args};
  FormulaPtr lhs = fpred(atom);
  std::size_t steps = pick(rng, 1, 2);
  for (std::size_t s = 0; s < steps; ++s) {
    // unfold the first predicate atom occurrence
    PrenexView pv = prenex_view(lhs);
    std::size_t at = pv.conjuncts.size();
    for (std::size_t i = 0; i < pv.conjuncts.size(); ++i)
      if (pv.conjuncts[i]->is<PredAtom>()) {
        at = i;
        break;
      }
    if (at == pv.conjuncts.size()) break;
    auto us = unfold_pred(*pv.conjuncts[at]->as<PredAtom>(), *pb.sid, all_vars(lhs));
    if (us.empty()) break;
    std::vector<FormulaPtr> parts;
    for (std::size_t i = 0; i < pv.conjuncts.size(); ++i)
      if (i != at) parts.push_back(pv.conjuncts[i]);
    parts.push_back(us[rng() % us.size()].result);
    lhs = prenex(fexists(pv.prefix, fsep(parts)), {});
  }
  pb.lhs = lhs;
  pb.rhs = {fpred(atom)};
  return sanitize_names(pb);
}

// ---------------------------------------------------------------------------
// Differential run

struct DifferentialOutcome {
  std::size_t total = 0;
  std::size_t prover_valid = 0, prover_invalid = 0, prover_unknown = 0;
  std::size_t oracle_countermodels = 0;
  std::size_t disagreements = 0;      // both conclusive, different answers
  std::size_t invalid_unwitnessed = 0;  // prover invalid, oracle silent
  std::vector<Problem> failing;
};

inline DifferentialOutcome differential_run(std::uint64_t seed, std::size_t count, const FuzzParams& fp,
                                            const CheckConfig& cfg) {
  DifferentialOutcome out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Problem pb = gen_problem(rng, fp);
    CheckConfig c = cfg;
    c.oracle_confirm = false;
    CheckResult res = check_entailment(pb, c);
    ++out.total;
    // bounded oracle on every equivalence case
    bool counter = false;
    try {
      for (const auto& merge : equivalence_cases(free_vars(Sequent{pb.lhs, pb.rhs, pb.sid, pb.theory}))) {
        Problem cs = pb;
        cs.lhs = apply_subst(cs.lhs, merge);
        std::vector<FormulaPtr> rhs;
        for (const auto& f : cs.rhs) rhs.push_back(apply_subst(f, merge));
        cs.rhs = std::move(rhs);
        for (const auto& s : to_prenex_dnf(cs.lhs, cs.rhs, cs.sid, cs.theory)) {
          OracleVerdict ov = oracle_entails(s, cfg.oracle_locs, cfg.oracle_heap);
          if (!ov.valid_up_to_bound) counter = true;
        }
      }
    } catch (BoundTooSmall&) {
      continue;  // out of scope for the oracle
    }
    if (counter) ++out.oracle_countermodels;
    switch (res.aggregate) {
      case Verdict::Valid: ++out.prover_valid; break;
      case Verdict::Invalid: ++out.prover_invalid; break;
      case Verdict::Unknown: ++out.prover_unknown; break;
    }
    bool disagree = (res.aggregate == Verdict::Valid && counter);
    if (disagree) {
      ++out.disagreements;
      out.failing.push_back(pb);
    }
    if (res.aggregate == Verdict::Invalid && !counter) ++out.invalid_unwitnessed;
  }
  return out;
}

}  // namespace sepentail

#endif  // SEPENTAIL_FUZZ_HPP
