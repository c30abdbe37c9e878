// The sequent calculus: enumeration and checking of rule and axiom
// instances, redundancy elimination, and the termination measure.
//
// Every instance is re-derivable from (conclusion, rule, choice) by
// derive_instance, which re-checks the side conditions; the prover and the
// certificate kernel share that code path.

#ifndef SEPENTAIL_CALCULUS_HPP
#define SEPENTAIL_CALCULUS_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sepentail/core.hpp"
#include "sepentail/sid.hpp"
#include "sepentail/theory.hpp"
#include "sepentail/unfold.hpp"

namespace sepentail {

enum class RuleName { Sk, HF, UL, UR, W, HD, SC, ED, TS, TD, AxR, AxD, AxTC, AxEH };

inline const char* rule_name(RuleName r) {
  switch (r) {
    case RuleName::Sk: return "Sk";
    case RuleName::HF: return "HF";
    case RuleName::UL: return "UL";
    case RuleName::UR: return "UR";
    case RuleName::W: return "W";
    case RuleName::HD: return "HD";
    case RuleName::SC: return "SC";
    case RuleName::ED: return "ED";
    case RuleName::TS: return "TS";
    case RuleName::TD: return "TD";
    case RuleName::AxR: return "R";
    case RuleName::AxD: return "D";
    case RuleName::AxTC: return "TC";
    case RuleName::AxEH: return "EH";
  }
  return "?";
}

inline std::optional<RuleName> rule_by_name(const std::string& s) {
  static const std::map<std::string, RuleName> m = {
      {"Sk", RuleName::Sk}, {"HF", RuleName::HF}, {"UL", RuleName::UL}, {"UR", RuleName::UR},
      {"W", RuleName::W},   {"HD", RuleName::HD}, {"SC", RuleName::SC}, {"ED", RuleName::ED},
      {"TS", RuleName::TS}, {"TD", RuleName::TD}, {"R", RuleName::AxR}, {"D", RuleName::AxD},
      {"TC", RuleName::AxTC}, {"EH", RuleName::AxEH}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

// Rule-specific payload; unused fields stay empty.
struct Choice {
  std::size_t i = 0;                 // rhs formula / lhs conjunct index
  std::size_t j = 0;                 // secondary index (conjunct, atom)
  Var x;                             // pivot variable
  Var fresh;                         // fresh variable (Sk, ED)
  std::map<Var, Var> sigma;          // AxR matching substitution
  std::vector<std::vector<std::size_t>> I, J;  // SC covers
};

struct RuleInstance {
  RuleName rule;
  Choice choice;
  std::vector<Sequent> premises;
};

// ---------------------------------------------------------------------------
// Small helpers over prenex sequents

namespace calc {

inline std::vector<TheoryAtom> theory_conjuncts(const FormulaPtr& f) {
  std::vector<TheoryAtom> out;
  PrenexView pv = prenex_view(f);
  for (const auto& c : pv.conjuncts)
    if (auto* t = c->as<TheoryAtom>()) out.push_back(*t);
  return out;
}

inline std::vector<TheoryAtom> theory_atoms_deep(const FormulaPtr& f) {
  std::vector<TheoryAtom> out;
  std::function<void(const FormulaPtr&)> go = [&](const FormulaPtr& g) {
    if (auto* t = g->as<TheoryAtom>()) out.push_back(*t);
    if (auto* s = g->as<FSep>())
      for (const auto& p : s->parts) go(p);
    if (auto* d = g->as<FDis>())
      for (const auto& p : d->parts) go(p);
    if (auto* e = g->as<FExists>()) go(e->body);
  };
  go(f);
  return out;
}

// chi |= xi over stores injective on fvset only (bound variables are not
// constrained by countermodel injectivity).
inline bool entails_inj_over(const TheoryFormula& chi, const TheoryFormula& xi, TheoryTag t,
                             const std::set<Var>& fvset) {
  TheoryFormula full = chi;
  if (t != TheoryTag::Empty) {
    std::vector<Var> vv(fvset.begin(), fvset.end());
    for (std::size_t i = 0; i < vv.size(); ++i)
      for (std::size_t j = i + 1; j < vv.size(); ++j)
        full.push_back(TheoryAtom{TheoryOp::Neq, {vv[i], vv[j]}});
  }
  return entails(full, xi, t);
}

// The sequent never mentions a theory atom, not even through unfoldings.
inline bool zero_constrained(const Sequent& s) {
  if (s.theory == TheoryTag::Empty) return true;
  if (!theory_atoms_deep(s.lhs).empty()) return false;
  for (const auto& f : s.rhs)
    if (!theory_atoms_deep(f).empty()) return false;
  if (!s.sid) return true;
  std::vector<FormulaPtr> all{s.lhs};
  for (const auto& f : s.rhs) all.push_back(f);
  for (const auto& f : all)
    for (const auto& p : preds_reachable(f, *s.sid)) {
      auto it = s.sid->rules_of.find(p);
      if (it == s.sid->rules_of.end()) continue;
      for (std::size_t ri : it->second)
        if (!s.sid->rules[ri].theory.empty()) return false;
    }
  return true;
}

inline std::set<Var> sequent_vars(const Sequent& s) {
  std::set<Var> out = all_vars(s.lhs);
  for (const auto& f : s.rhs)
    for (const auto& v : all_vars(f)) out.insert(v);
  return out;
}

}  // namespace calc

// ---------------------------------------------------------------------------
// Instance derivation (shared by prover and certificate kernel)

inline std::optional<std::vector<Sequent>> derive_instance(const Sequent& s, RuleName rule, const Choice& ch) {
  const PcSid& sid = *s.sid;
  PrenexView lv = prenex_view(s.lhs);
  std::set<Var> lhs_fv = free_vars(s.lhs);
  std::set<Var> seq_fv = free_vars(s);
  auto sub_sequent = [&](FormulaPtr lhs, std::vector<FormulaPtr> rhs) {
    return mk_sequent(std::move(lhs), std::move(rhs), s.sid, s.theory);
  };
  auto rhs_without = [&](std::size_t i) {
    std::vector<FormulaPtr> out;
    for (std::size_t k = 0; k < s.rhs.size(); ++k)
      if (k != i) out.push_back(s.rhs[k]);
    return out;
  };

  switch (rule) {
    case RuleName::Sk: {
      if (lv.prefix.empty()) return std::nullopt;
      Var x = lv.prefix.front();
      if (!(ch.x == x)) return std::nullopt;
      std::vector<Var> rest(lv.prefix.begin() + 1, lv.prefix.end());
      FormulaPtr body = fexists(rest, fsep(lv.conjuncts));
      if (calc::sequent_vars(s).count(ch.fresh)) return std::nullopt;
      std::vector<Sequent> prem;
      for (const auto& xi : seq_fv)
        prem.push_back(sub_sequent(apply_subst(body, single_subst(x, xi)), s.rhs));
      prem.push_back(sub_sequent(apply_subst(body, single_subst(x, ch.fresh)), s.rhs));
      return prem;
    }

    case RuleName::HF: {
      if (!lv.prefix.empty()) return std::nullopt;
      if (ch.i >= s.rhs.size()) return std::nullopt;
      PrenexView rv = prenex_view(s.rhs[ch.i]);
      if (rv.prefix.empty()) return std::nullopt;  // dom(sigma) would be empty
      if (ch.j >= rv.conjuncts.size()) return std::nullopt;
      auto* rcell = rv.conjuncts[ch.j]->as<PointsTo>();
      if (!rcell) return std::nullopt;
      std::set<Var> ys(rv.prefix.begin(), rv.prefix.end());
      if (ys.count(rcell->src)) return std::nullopt;  // source must be free
      // the matching lhs cell
      const PointsTo* lcell = nullptr;
      for (const auto& c : lv.conjuncts)
        if (auto* p = c->as<PointsTo>())
          if (p->src == rcell->src) {
            lcell = p;
            break;
          }
      if (!lcell) return std::nullopt;
      // y~ must not meet the lhs cell's variables
      if (ys.count(lcell->src)) return std::nullopt;
      for (const auto& v : lcell->tgt)
        if (ys.count(v)) return std::nullopt;
      std::map<Var, Var> sg;
      for (std::size_t k = 0; k < rcell->tgt.size(); ++k) {
        const Var& z = rcell->tgt[k];
        const Var& y = lcell->tgt[k];
        if (ys.count(z)) {
          auto it = sg.find(z);
          if (it != sg.end() && !(it->second == y)) return std::nullopt;
          sg.emplace(z, y);
        } else if (!(z == y)) {
          return std::nullopt;  // free and mismatched: HF does not apply
        }
      }
      if (sg.empty()) return std::nullopt;
      Subst sigma{std::map<Var, Var>(sg)};
      std::vector<Var> rest;
      for (const auto& y : rv.prefix)
        if (!sg.count(y)) rest.push_back(y);
      FormulaPtr nf = fexists(rest, apply_subst(fsep(rv.conjuncts), sigma));
      std::vector<FormulaPtr> rhs = rhs_without(ch.i);
      rhs.push_back(nf);
      return std::vector<Sequent>{sub_sequent(s.lhs, std::move(rhs))};
    }

    case RuleName::UL: {
      if (ch.i >= lv.conjuncts.size()) return std::nullopt;
      auto* atom = lv.conjuncts[ch.i]->as<PredAtom>();
      if (!atom) return std::nullopt;
      std::set<Var> avoid = calc::sequent_vars(s);
      std::vector<Sequent> prem;
      for (auto& u : unfold_pred(*atom, sid, avoid)) {
        std::vector<FormulaPtr> parts;
        for (std::size_t k = 0; k < lv.conjuncts.size(); ++k)
          if (k != ch.i) parts.push_back(lv.conjuncts[k]);
        parts.push_back(u.result);
        prem.push_back(sub_sequent(prenex(fexists(lv.prefix, fsep(parts)), {}), s.rhs));
      }
      return prem;
    }

    case RuleName::UR: {
      if (ch.i >= s.rhs.size()) return std::nullopt;
      PrenexView rv = prenex_view(s.rhs[ch.i]);
      if (ch.j >= rv.conjuncts.size()) return std::nullopt;
      FormulaPtr atom = rv.conjuncts[ch.j];
      if (!atom->is<PuAtom>() && !atom->is<PredAtom>()) return std::nullopt;
      Roots rr = roots_of(atom);
      std::set<Var> bound(rv.prefix.begin(), rv.prefix.end());
      for (const auto& r : rr.main) {
        if (bound.count(r) || !lhs_fv.count(r)) return std::nullopt;
      }
      if (rr.main.empty()) return std::nullopt;
      std::set<Var> avoid = calc::sequent_vars(s);
      for (const auto& v : rv.prefix) avoid.insert(v);
      std::vector<FormulaPtr> rhs = rhs_without(ch.i);
      for (auto& m : mapsto_unfoldings(atom, sid, avoid)) {
        std::vector<FormulaPtr> parts;
        for (std::size_t k = 0; k < rv.conjuncts.size(); ++k)
          if (k != ch.j) parts.push_back(rv.conjuncts[k]);
        parts.push_back(m);
        rhs.push_back(prenex(fexists(rv.prefix, fsep(parts)), {}));
      }
      return std::vector<Sequent>{sub_sequent(s.lhs, std::move(rhs))};
    }

    case RuleName::W: {
      if (ch.i >= s.rhs.size()) return std::nullopt;
      return std::vector<Sequent>{sub_sequent(s.lhs, rhs_without(ch.i))};
    }

    case RuleName::HD: {
      if (ch.i >= s.rhs.size()) return std::nullopt;
      std::set<Var> alloc = alloc_of(s.lhs, sid);
      if (!alloc.count(ch.x)) return std::nullopt;
      Roots rr = roots_of(s.rhs[ch.i]);
      for (const auto& r : rr.main)
        if (r == ch.x) return std::nullopt;
      std::vector<FormulaPtr> rhs = rhs_without(ch.i);
      for (auto& g : split_at(s.rhs[ch.i], ch.x, sid)) rhs.push_back(g);
      return std::vector<Sequent>{sub_sequent(s.lhs, std::move(rhs))};
    }

    case RuleName::ED: {
      if (ch.i >= s.rhs.size()) return std::nullopt;
      PrenexView rv = prenex_view(s.rhs[ch.i]);
      auto xit = std::find(rv.prefix.begin(), rv.prefix.end(), ch.x);
      if (xit == rv.prefix.end()) return std::nullopt;
      if (calc::sequent_vars(s).count(ch.fresh)) return std::nullopt;
      std::vector<Var> ys;
      for (const auto& y : rv.prefix)
        if (!(y == ch.x)) ys.push_back(y);
      std::vector<FormulaPtr> rhs = rhs_without(ch.i);
      // substituted copies, one per free variable of the lhs
      FormulaPtr gamma = fsep(rv.conjuncts);
      for (const auto& xj : lhs_fv)
        rhs.push_back(prenex(fexists(ys, apply_subst(gamma, single_subst(ch.x, xj))), {}));
      // decompositions gamma = psi * psi' * chi with psi' nonempty and
      // x-free (vart); chi is either all x-free theory conjuncts or emp
      std::vector<FormulaPtr> must_psi, spatial_free, theory_free;
      for (const auto& c : rv.conjuncts) {
        std::set<Var> vt = vart_of(c, sid);
        bool has_x = vt.count(ch.x) || (c->is<TheoryAtom>() && free_vars(c).count(ch.x));
        if (c->is<TheoryAtom>()) {
          if (has_x)
            must_psi.push_back(c);
          else
            theory_free.push_back(c);
        } else if (has_x) {
          must_psi.push_back(c);
        } else {
          spatial_free.push_back(c);
        }
      }
      std::set<std::string> seen;
      for (int chi_mode = 0; chi_mode < 2; ++chi_mode) {
        // chi_mode 0: chi = xi = the x-free theory conjuncts
        // chi_mode 1: chi = xi = emp, theory conjuncts stay in psi
        if (chi_mode == 1 && theory_free.empty()) continue;
        std::size_t n = spatial_free.size();
        for (std::size_t mask = 0; mask < (1u << n); ++mask) {
          std::vector<FormulaPtr> psi = must_psi, psip;
          for (std::size_t k = 0; k < n; ++k)
            ((mask >> k) & 1 ? psip : psi).push_back(spatial_free[k]);
          if (psip.empty()) continue;  // psi' must differ from emp
          std::vector<FormulaPtr> parts;
          if (chi_mode == 1)
            for (const auto& t : theory_free) psi.push_back(t);
          parts.push_back(fexists(ch.x, fsep(psi)));
          parts.push_back(apply_subst(fsep(psip), single_subst(ch.x, ch.fresh)));
          if (chi_mode == 0)
            for (const auto& t : theory_free) parts.push_back(t);
          FormulaPtr g = fexists(ys, fsep(std::move(parts)));
          std::string key;
          key_of(g, key);
          if (seen.insert(key).second) rhs.push_back(g);
        }
      }
      return std::vector<Sequent>{sub_sequent(s.lhs, std::move(rhs))};
    }

    case RuleName::SC: {
      if (!lv.prefix.empty()) return std::nullopt;
      if (ch.i >= lv.conjuncts.size()) return std::nullopt;
      FormulaPtr pivot = lv.conjuncts[ch.i];
      if (pivot->is<TheoryAtom>() || pivot->is<FEmp>()) return std::nullopt;
      std::vector<FormulaPtr> restv;
      for (std::size_t k = 0; k < lv.conjuncts.size(); ++k)
        if (k != ch.i) restv.push_back(lv.conjuncts[k]);
      FormulaPtr rest = fsep(restv);
      std::set<Var> alloc1 = alloc_of(pivot, sid);
      std::set<Var> alloc2 = alloc_of(rest, sid);
      if (alloc1.empty() || alloc2.empty()) return std::nullopt;
      // each rhs formula splits by root membership in alloc(pivot)
      std::size_t n = s.rhs.size();
      std::vector<FormulaPtr> part1(n), part2(n);
      for (std::size_t k = 0; k < n; ++k) {
        PrenexView rv = prenex_view(s.rhs[k]);
        if (!rv.prefix.empty()) return std::nullopt;  // ED first
        std::vector<FormulaPtr> a, b;
        for (const auto& c : rv.conjuncts) {
          Roots rr = roots_of(c);
          bool all_in = !rr.main.empty();
          for (const auto& r : rr.main)
            if (!alloc1.count(r)) all_in = false;
          (all_in ? a : b).push_back(c);
        }
        part1[k] = fsep(a);
        part2[k] = fsep(b);
      }
      // cover condition: every X contains some I_i or its complement some J_j
      auto subseteq = [](const std::vector<std::size_t>& a, std::size_t maskn, std::size_t mask) {
        for (std::size_t e : a) {
          if (e >= maskn) return false;
          if (!((mask >> e) & 1)) return false;
        }
        return true;
      };
      if (n > 20) return std::nullopt;
      for (std::size_t mask = 0; mask < (1u << n); ++mask) {
        bool covered = false;
        for (const auto& I : ch.I)
          if (subseteq(I, n, mask)) covered = true;
        std::size_t comp = ~mask & ((1u << n) - 1);
        for (const auto& J : ch.J)
          if (subseteq(J, n, comp)) covered = true;
        if (!covered) return std::nullopt;
      }
      // antichains
      auto antichain = [](const std::vector<std::vector<std::size_t>>& F) {
        for (std::size_t a = 0; a < F.size(); ++a)
          for (std::size_t b = 0; b < F.size(); ++b) {
            if (a == b) continue;
            bool sub = true;
            for (std::size_t e : F[a])
              if (std::find(F[b].begin(), F[b].end(), e) == F[b].end()) sub = false;
            if (sub) return false;
          }
        return true;
      };
      if (!antichain(ch.I) || !antichain(ch.J)) return std::nullopt;
      std::vector<Sequent> prem;
      for (const auto& I : ch.I) {
        std::vector<FormulaPtr> g;
        for (std::size_t e : I) {
          if (e >= n) return std::nullopt;
          g.push_back(part1[e]);
        }
        prem.push_back(sub_sequent(pivot, std::move(g)));
      }
      for (const auto& J : ch.J) {
        std::vector<FormulaPtr> g;
        for (std::size_t e : J) {
          if (e >= n) return std::nullopt;
          g.push_back(part2[e]);
        }
        prem.push_back(sub_sequent(rest, std::move(g)));
      }
      return prem;
    }

    case RuleName::TS: {
      // drop the j-th theory conjunct of the lhs matrix
      std::size_t seen = 0;
      std::vector<FormulaPtr> parts;
      bool dropped = false;
      TheoryFormula before, after;
      for (const auto& c : lv.conjuncts) {
        if (auto* t = c->as<TheoryAtom>()) {
          before.push_back(*t);
          if (seen == ch.j) {
            dropped = true;
            ++seen;
            continue;
          }
          after.push_back(*t);
          ++seen;
        }
        parts.push_back(c);
      }
      if (!dropped) return std::nullopt;
      if (!ts_order_less(after, before)) return std::nullopt;
      if (!calc::entails_inj_over(before, after, s.theory, seq_fv)) return std::nullopt;
      return std::vector<Sequent>{sub_sequent(fexists(lv.prefix, fsep(parts)), s.rhs)};
    }

    case RuleName::TD: {
      if (ch.i >= s.rhs.size()) return std::nullopt;
      PrenexView rv = prenex_view(s.rhs[ch.i]);
      if (!rv.prefix.empty()) return std::nullopt;
      if (ch.j >= rv.conjuncts.size()) return std::nullopt;
      auto* chi = rv.conjuncts[ch.j]->as<TheoryAtom>();
      if (!chi) return std::nullopt;
      auto neg = negate_atom(*chi, s.theory);
      if (!neg) return std::nullopt;
      // append to the lhs matrix, renaming the prefix clear of the atom
      auto extend_lhs = [&](const TheoryAtom& a) {
        std::set<Var> avoid(a.args.begin(), a.args.end());
        FormulaPtr lhs = prenex(s.lhs, avoid);
        PrenexView pv = prenex_view(lhs);
        std::vector<FormulaPtr> parts = pv.conjuncts;
        parts.push_back(ftheory(a));
        return fexists(pv.prefix, fsep(std::move(parts)));
      };
      std::vector<FormulaPtr> rhs1 = rhs_without(ch.i);
      std::vector<FormulaPtr> restc;
      for (std::size_t k = 0; k < rv.conjuncts.size(); ++k)
        if (k != ch.j) restc.push_back(rv.conjuncts[k]);
      rhs1.push_back(fsep(restc));
      std::vector<Sequent> prem;
      prem.push_back(sub_sequent(extend_lhs(*chi), std::move(rhs1)));
      prem.push_back(sub_sequent(extend_lhs(*neg), rhs_without(ch.i)));
      return prem;
    }

    case RuleName::AxR: {
      if (!lv.prefix.empty()) return std::nullopt;
      if (ch.i >= s.rhs.size()) return std::nullopt;
      PrenexView rv = prenex_view(s.rhs[ch.i]);
      std::set<Var> zs(rv.prefix.begin(), rv.prefix.end());
      for (const auto& [k, v] : ch.sigma)
        if (!zs.count(k)) return std::nullopt;
      for (const auto& z : rv.prefix)
        if (!ch.sigma.count(z)) return std::nullopt;  // dom(sigma) = z~
      Subst sigma{std::map<Var, Var>(ch.sigma)};
      FormulaPtr inst = apply_subst(fsep(rv.conjuncts), sigma);
      // lhs = psi sigma * chi for a theory formula chi: spatial parts match
      // exactly, instantiated theory atoms form a submultiset
      PrenexView iv = prenex_view(inst);
      std::vector<std::string> lspat, ispat;
      std::map<std::string, int> ltheo;
      for (const auto& c : lv.conjuncts) {
        std::string k;
        key_of(c, k);
        if (c->is<TheoryAtom>())
          ltheo[k]++;
        else
          lspat.push_back(k);
      }
      for (const auto& c : iv.conjuncts) {
        std::string k;
        key_of(c, k);
        if (c->is<TheoryAtom>()) {
          if (--ltheo[k] < 0) return std::nullopt;
        } else {
          ispat.push_back(k);
        }
      }
      std::sort(lspat.begin(), lspat.end());
      std::sort(ispat.begin(), ispat.end());
      if (lspat != ispat) return std::nullopt;
      return std::vector<Sequent>{};
    }

    case RuleName::AxD: {
      // ch.x allocated by two distinct matrix conjuncts
      std::size_t count = 0;
      for (const auto& c : lv.conjuncts) {
        std::set<Var> a = alloc_of(c, sid);
        if (a.count(ch.x)) ++count;
      }
      if (count < 2) return std::nullopt;
      return std::vector<Sequent>{};
    }

    case RuleName::AxTC: {
      TheoryFormula chi;
      for (const auto& c : lv.conjuncts)
        if (auto* t = c->as<TheoryAtom>()) chi.push_back(*t);
      if (!calc::entails_inj_over(chi, {TheoryAtom{TheoryOp::False, {}}}, s.theory, seq_fv))
        return std::nullopt;
      return std::vector<Sequent>{};
    }

    case RuleName::AxEH: {
      // lhs is a theory formula; the theory-only rhs formulas must cover it
      TheoryFormula chi;
      for (const auto& c : lv.conjuncts) {
        auto* t = c->as<TheoryAtom>();
        if (!t) return std::nullopt;
        chi.push_back(*t);
      }
      if (!lv.prefix.empty()) return std::nullopt;
      // injective over the free variables
      TheoryFormula full = chi;
      if (s.theory != TheoryTag::Empty) {
        std::vector<Var> vv(seq_fv.begin(), seq_fv.end());
        for (std::size_t a = 0; a < vv.size(); ++a)
          for (std::size_t b = a + 1; b < vv.size(); ++b)
            full.push_back(TheoryAtom{TheoryOp::Neq, {vv[a], vv[b]}});
      }
      if (!theory_sat(full, s.theory)) return std::vector<Sequent>{};  // unsat lhs
      // collect quantifier-free theory-only rhs formulas, plus instantiations
      // of quantified ones over the sequent's free variables
      std::vector<TheoryFormula> disjuncts;
      for (const auto& f : s.rhs) {
        PrenexView rv = prenex_view(f);
        bool theo = true;
        TheoryFormula xs;
        for (const auto& c : rv.conjuncts) {
          if (auto* t = c->as<TheoryAtom>())
            xs.push_back(*t);
          else if (!c->is<FEmp>())
            theo = false;
        }
        if (!theo) continue;
        if (rv.prefix.empty()) {
          disjuncts.push_back(xs);
        } else if (rv.prefix.size() <= 2) {
          std::vector<Var> fvv(seq_fv.begin(), seq_fv.end());
          std::vector<std::size_t> idx(rv.prefix.size(), 0);
          if (fvv.empty()) continue;
          while (true) {
            Subst sg;
            for (std::size_t k = 0; k < rv.prefix.size(); ++k) sg.m[rv.prefix[k]] = fvv[idx[k]];
            TheoryFormula inst;
            for (const auto& a : xs) inst.push_back(TheoryAtom{a.op, sg(a.args)});
            disjuncts.push_back(inst);
            std::size_t k = 0;
            for (; k < rv.prefix.size(); ++k) {
              if (++idx[k] < fvv.size()) break;
              idx[k] = 0;
            }
            if (k == rv.prefix.size()) break;
          }
        }
      }
      if (disjuncts.empty()) return std::nullopt;
      // full |= \/ disjuncts: check branch-wise over disequality splits by
      // refuting full * prod(neg picks)
      std::function<bool(std::size_t, TheoryFormula)> refuted = [&](std::size_t di, TheoryFormula acc) -> bool {
        if (di == disjuncts.size()) return !theory_sat(acc, s.theory);
        // negation of a conjunction: one atom falsified; try each
        for (const auto& a : disjuncts[di]) {
          auto na = negate_atom(a, s.theory);
          if (!na) {
            if (a.op == TheoryOp::False) {  // not(false) = emp
              if (refuted(di + 1, acc)) return true;
              continue;
            }
            return false;
          }
          TheoryFormula acc2 = acc;
          acc2.push_back(*na);
          if (refuted(di + 1, std::move(acc2))) return true;
        }
        return false;
      };
      // for the empty theory: emp |= emp always; false handled by sat check
      if (s.theory == TheoryTag::Empty) {
        for (const auto& d : disjuncts) {
          bool all_emp = true;
          for (const auto& a : d)
            if (a.op == TheoryOp::False) all_emp = false;
          if (all_emp) return std::vector<Sequent>{};
        }
        return std::nullopt;
      }
      if (!refuted(0, full)) return std::nullopt;
      return std::vector<Sequent>{};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Redundancy elimination (Weakening instances justified by validity
// preservation; variable/root redundancy only on zero-constrained sequents)

struct RedundancyStep {
  std::size_t index;  // rhs formula removed
  Sequent result;
};

inline bool formula_matches_pinned(const FormulaPtr& a, const FormulaPtr& b, const std::set<Var>& pinned) {
  // equal after canonically renaming the non-pinned free variables
  auto canon = [&](const FormulaPtr& f) {
    std::map<Var, Var> ren;
    std::function<FormulaPtr(const FormulaPtr&, std::set<Var>&)> go = [&](const FormulaPtr& g,
                                                                          std::set<Var>& bound) -> FormulaPtr {
      auto r = [&](const Var& v) -> Var {
        if (bound.count(v) || pinned.count(v)) return v;
        auto it = ren.find(v);
        if (it != ren.end()) return it->second;
        Var nv("$r" + std::to_string(ren.size()));
        ren.emplace(v, nv);
        return nv;
      };
      if (auto* p = g->as<PointsTo>()) {
        std::vector<Var> t;
        for (const auto& v : p->tgt) t.push_back(r(v));
        return fpointsto(r(p->src), t);
      }
      if (auto* p = g->as<PredAtom>()) {
        std::vector<Var> t;
        for (const auto& v : p->args) t.push_back(r(v));
        return fpred(p->pred, t);
      }
      if (auto* t = g->as<TheoryAtom>()) {
        std::vector<Var> u;
        for (const auto& v : t->args) u.push_back(r(v));
        return ftheory(t->op, u);
      }
      if (auto* pu = g->as<PuAtom>()) {
        std::vector<Var> u;
        for (const auto& v : pu->actuals) u.push_back(r(v));
        return fpu(pu->frame, pu->inner, pu->params, u);
      }
      if (auto* sc = g->as<FSep>()) {
        std::vector<FormulaPtr> ps;
        for (const auto& p : sc->parts) ps.push_back(go(p, bound));
        return fsep(std::move(ps));
      }
      if (auto* d = g->as<FDis>()) {
        std::vector<FormulaPtr> ps;
        for (const auto& p : d->parts) ps.push_back(go(p, bound));
        return fdis(std::move(ps));
      }
      if (auto* e = g->as<FExists>()) {
        bool fresh = bound.insert(e->v).second;
        FormulaPtr body = go(e->body, bound);
        if (fresh) bound.erase(e->v);
        return fexists(e->v, body);
      }
      return g;
    };
    std::set<Var> bound;
    FormulaPtr out = go(f, bound);
    std::string k;
    key_of(out, k);
    return k;
  };
  return canon(a) == canon(b);
}

// psi entails psi_prime syntactically: some instantiation of psi_prime's
// prefix turns its matrix into psi's matrix. Dropping such a psi from the
// right-hand side preserves the sequent's status in both directions.
inline bool subsumed_by(const FormulaPtr& psi, const FormulaPtr& psi_prime) {
  PrenexView a = prenex_view(psi), b = prenex_view(psi_prime);
  if (a.conjuncts.size() != b.conjuncts.size()) return false;
  std::set<Var> bind(b.prefix.begin(), b.prefix.end());
  std::map<Var, Var> sigma;
  std::vector<bool> used(a.conjuncts.size(), false);
  std::function<bool(std::size_t)> go = [&](std::size_t k) -> bool {
    if (k == b.conjuncts.size()) return true;
    for (std::size_t i = 0; i < a.conjuncts.size(); ++i) {
      if (used[i]) continue;
      std::vector<Var> added;
      bool ok = true;
      auto unify = [&](const Var& bv, const Var& av) {
        if (!ok) return;
        if (bind.count(bv)) {
          auto it = sigma.find(bv);
          if (it != sigma.end()) {
            if (!(it->second == av)) ok = false;
          } else {
            sigma.emplace(bv, av);
            added.push_back(bv);
          }
        } else if (!(bv == av)) {
          ok = false;
        }
      };
      const FormulaPtr &bf = b.conjuncts[k], &af = a.conjuncts[i];
      if (bf->node.index() != af->node.index()) continue;
      if (auto* bp = bf->as<PointsTo>()) {
        auto* ap = af->as<PointsTo>();
        if (ap->tgt.size() != bp->tgt.size()) continue;
        unify(bp->src, ap->src);
        for (std::size_t t = 0; t < bp->tgt.size() && ok; ++t) unify(bp->tgt[t], ap->tgt[t]);
      } else if (auto* bq = bf->as<PredAtom>()) {
        auto* aq = af->as<PredAtom>();
        if (aq->pred != bq->pred || aq->args.size() != bq->args.size()) continue;
        for (std::size_t t = 0; t < bq->args.size() && ok; ++t) unify(bq->args[t], aq->args[t]);
      } else if (auto* bt = bf->as<TheoryAtom>()) {
        auto* at = af->as<TheoryAtom>();
        if (at->op != bt->op || at->args.size() != bt->args.size()) continue;
        for (std::size_t t = 0; t < bt->args.size() && ok; ++t) unify(bt->args[t], at->args[t]);
      } else if (auto* bu = bf->as<PuAtom>()) {
        auto* au = af->as<PuAtom>();
        if (au->params.size() != bu->params.size()) continue;
        if (cmp_pred(au->inner, bu->inner) != 0) continue;
        if (au->frame.size() != bu->frame.size()) continue;
        bool same = true;
        for (std::size_t t = 0; t < bu->frame.size(); ++t)
          if (cmp_pred(au->frame[t], bu->frame[t]) != 0) same = false;
        if (!same) continue;
        for (std::size_t t = 0; t < bu->actuals.size() && ok; ++t) unify(bu->actuals[t], au->actuals[t]);
      } else {
        // nested shapes: require exact equality
        if (cmp(*af, *bf) != 0) continue;
      }
      if (ok) {
        used[i] = true;
        if (go(k + 1)) return true;
        used[i] = false;
      }
      for (const auto& v : added) sigma.erase(v);
    }
    return false;
  };
  return go(0);
}

// Removes root-unsatisfiable, root-redundant, variable-redundant and
// instance-subsumed rhs formulas; each removal is a W instance.
inline std::vector<RedundancyStep> redundancy_filter(Sequent s) {
  std::vector<RedundancyStep> steps;
  bool zero = calc::zero_constrained(s);
  std::set<Var> lhs_fv = free_vars(s.lhs);
  std::set<Var> lhs_alloc = alloc_of(s.lhs, *s.sid);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < s.rhs.size() && !changed; ++i) {
      const FormulaPtr& f = s.rhs[i];
      bool drop = false;
      if (root_unsatisfiable(f)) drop = true;
      if (!drop && zero) {
        Roots rr = roots_of(f);
        for (const auto& r : rr.main)
          if (!lhs_alloc.count(r)) drop = true;
        for (const auto& r : rr.aux)
          if (!lhs_fv.count(r)) drop = true;
        if (!drop) {
          for (std::size_t k = 0; k < s.rhs.size() && !drop; ++k) {
            if (k == i) continue;
            if (formula_matches_pinned(f, s.rhs[k], lhs_fv) && i > k) drop = true;
          }
        }
      }
      if (!drop) {
        for (std::size_t k = 0; k < s.rhs.size() && !drop; ++k) {
          if (k == i) continue;
          if (cmp(*f, *s.rhs[k]) != 0 && subsumed_by(f, s.rhs[k])) drop = true;
        }
      }
      if (drop) {
        std::vector<FormulaPtr> rhs;
        for (std::size_t k = 0; k < s.rhs.size(); ++k)
          if (k != i) rhs.push_back(s.rhs[k]);
        Sequent next = mk_sequent(s.lhs, std::move(rhs), s.sid, s.theory);
        steps.push_back(RedundancyStep{i, next});
        s = steps.back().result;
        changed = true;
      }
    }
  }
  return steps;
}

// ---------------------------------------------------------------------------
// The measure

struct Measure {
  std::size_t lhs_spatial = 0;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::vector<TheoryAtom>>> rhs;  // mu'
  std::vector<TheoryAtom> lhs_theory;
};

namespace calc {

inline std::size_t pred_weight(const PcSid& sid) { return sid.kappa + 3 + 2 * sid.max_rule_exvars; }

inline std::size_t mu_size(const FormulaPtr& f, const PcSid& sid);

inline std::size_t mu_atom(const PredAtom& a, const PcSid& sid) { return pred_weight(sid) + a.args.size(); }

// spatial size with theory formulas erased (emp neutral for *)
inline std::size_t mu_size(const FormulaPtr& f, const PcSid& sid) {
  if (f->is<FEmp>() || f->is<TheoryAtom>()) return 0;
  if (f->is<PointsTo>()) return sid.kappa + 2;
  if (auto* p = f->as<PredAtom>()) return mu_atom(*p, sid);
  if (auto* pu = f->as<PuAtom>()) {
    std::size_t n = 1 + pu->params.size() + pu->actuals.size() + mu_atom(pu->inner, sid);
    for (const auto& a : pu->frame) n += mu_atom(a, sid) + 1;
    return n;
  }
  if (auto* s = f->as<FSep>()) {
    std::size_t n = 0, parts = 0;
    for (const auto& p : s->parts) {
      std::size_t k = mu_size(p, sid);
      if (k) {
        n += k;
        ++parts;
      }
    }
    return parts ? n + (parts - 1) : 0;
  }
  if (auto* e = f->as<FExists>()) return 2 + mu_size(e->body, sid);
  if (auto* d = f->as<FDis>()) {
    std::size_t n = 0;
    for (const auto& p : d->parts) n = std::max(n, mu_size(p, sid));
    return n;
  }
  return 0;
}

inline std::size_t nexists_prefix(const FormulaPtr& f) {
  std::size_t n = 0;
  FormulaPtr cur = f;
  while (auto* e = cur->as<FExists>()) {
    ++n;
    cur = e->body;
  }
  return n;
}

inline int cmp_theory_multiset(const std::vector<TheoryAtom>& a, const std::vector<TheoryAtom>& b) {
  if (ts_order_less(a, b)) return -1;
  if (ts_order_less(b, a)) return 1;
  return 0;
}

using MuPrime = std::tuple<std::size_t, std::size_t, std::size_t, std::vector<TheoryAtom>>;

inline int cmp_muprime(const MuPrime& a, const MuPrime& b) {
  if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b) ? -1 : 1;
  if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b) ? -1 : 1;
  if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) < std::get<2>(b) ? -1 : 1;
  return cmp_theory_multiset(std::get<3>(a), std::get<3>(b));
}

// Dershowitz-Manna: a <mul b iff after removing common elements, every
// leftover of a is dominated by some leftover of b, and b has leftovers.
inline bool multiset_less(std::vector<MuPrime> a, std::vector<MuPrime> b) {
  for (std::size_t i = 0; i < a.size();) {
    bool matched = false;
    for (std::size_t j = 0; j < b.size(); ++j)
      if (cmp_muprime(a[i], b[j]) == 0) {
        a.erase(a.begin() + i);
        b.erase(b.begin() + j);
        matched = true;
        break;
      }
    if (!matched) ++i;
  }
  if (b.empty()) return false;
  for (const auto& x : a) {
    bool dominated = false;
    for (const auto& y : b)
      if (cmp_muprime(x, y) < 0) dominated = true;
    if (!dominated) return false;
  }
  return true;
}

}  // namespace calc

inline Measure measure_mu(const Sequent& s) {
  const PcSid& sid = *s.sid;
  Measure m;
  m.lhs_spatial = calc::mu_size(s.lhs, sid);
  std::set<Var> lhs_alloc = alloc_of(s.lhs, sid);
  for (const auto& f : s.rhs) {
    Roots rr = roots_of(f);
    std::set<Var> roots(rr.main.begin(), rr.main.end());
    std::size_t c1 = 0;
    for (const auto& v : lhs_alloc)
      if (!roots.count(v)) ++c1;
    m.rhs.emplace_back(c1, calc::mu_size(f, sid), calc::nexists_prefix(f), calc::theory_atoms_deep(f));
  }
  m.lhs_theory = calc::theory_atoms_deep(s.lhs);
  return m;
}

inline bool measure_less(const Measure& a, const Measure& b) {
  if (a.lhs_spatial != b.lhs_spatial) return a.lhs_spatial < b.lhs_spatial;
  if (calc::multiset_less(a.rhs, b.rhs)) return true;
  if (calc::multiset_less(b.rhs, a.rhs)) return false;
  // equal multisets: compare lhs theory parts
  return ts_order_less(a.lhs_theory, b.lhs_theory);
}

inline bool measure_decreases(const Sequent& conclusion, const RuleInstance& inst) {
  Measure mc = measure_mu(conclusion);
  for (const auto& p : inst.premises)
    if (!measure_less(measure_mu(p), mc)) return false;
  return true;
}

}  // namespace sepentail

#endif  // SEPENTAIL_CALCULUS_HPP
