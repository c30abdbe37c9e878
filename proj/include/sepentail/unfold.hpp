// Unfolding of predicate and pu-atoms, bounded predicate-free unfoldings,
// partial unfoldings, and the heap-splitting operation.

#ifndef SEPENTAIL_UNFOLD_HPP
#define SEPENTAIL_UNFOLD_HPP

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sepentail/core.hpp"
#include "sepentail/sid.hpp"

namespace sepentail {

struct Unfolding {
  FormulaPtr result;       // prenex
  std::size_t rule_index;  // index into sid.rules
  Subst renaming;          // fresh names chosen for the rule existentials
};

// One-step unfoldings of a predicate atom. Rule existentials are renamed to
// fresh variables avoiding |avoid| and the atom's own arguments.
inline std::vector<Unfolding> unfold_pred(const PredAtom& a, const PcSid& sid, std::set<Var> avoid = {}) {
  std::vector<Unfolding> out;
  auto it = sid.rules_of.find(a.pred);
  if (it == sid.rules_of.end()) return out;
  for (const auto& v : a.args) avoid.insert(v);
  for (std::size_t ri : it->second) {
    const Rule& r = sid.rules[ri];
    std::set<Var> av = avoid;
    for (const auto& v : r.head_args) av.insert(v);
    std::vector<Var> fresh = fresh_vars(r.exvars.size(), av);
    std::map<Var, Var> m;
    for (std::size_t i = 0; i < r.head_args.size(); ++i) m[r.head_args[i]] = a.args[i];
    Subst ren;
    for (std::size_t i = 0; i < r.exvars.size(); ++i) {
      m[r.exvars[i]] = fresh[i];
      ren.m[r.exvars[i]] = fresh[i];
    }
    auto sub = [&](const Var& v) {
      auto f = m.find(v);
      return f == m.end() ? v : f->second;
    };
    std::vector<FormulaPtr> parts;
    {
      std::vector<Var> tgt;
      for (const auto& v : r.cell.tgt) tgt.push_back(sub(v));
      parts.push_back(fpointsto(sub(r.cell.src), tgt));
    }
    for (const auto& c : r.calls) {
      std::vector<Var> args;
      for (const auto& v : c.args) args.push_back(sub(v));
      parts.push_back(fpred(c.pred, args));
    }
    for (const auto& t : r.theory) {
      std::vector<Var> args;
      for (const auto& v : t.args) args.push_back(sub(v));
      parts.push_back(ftheory(t.op, args));
    }
    out.push_back(Unfolding{fexists(fresh, fsep(std::move(parts))), ri, ren});
  }
  return out;
}

namespace detail {

// Matches |frame| against a sub-multiset of |calls|, instantiating only
// variables in |instantiable|. Calls |yield| with (sigma, used-call-flags)
// for every complete match.
inline void match_frame(const std::vector<PredAtom>& frame, const std::vector<PredAtom>& calls,
                        const std::set<Var>& instantiable, std::size_t fi, std::map<Var, Var>& sigma,
                        std::vector<bool>& used, const std::function<void(const std::map<Var, Var>&, const std::vector<bool>&)>& yield) {
  if (fi == frame.size()) {
    yield(sigma, used);
    return;
  }
  const PredAtom& f = frame[fi];
  for (std::size_t ci = 0; ci < calls.size(); ++ci) {
    if (used[ci]) continue;
    const PredAtom& c = calls[ci];
    if (c.pred != f.pred || c.args.size() != f.args.size()) continue;
    std::vector<std::pair<Var, bool>> added;  // (key, inserted)
    bool ok = true;
    for (std::size_t k = 0; k < c.args.size() && ok; ++k) {
      const Var& cv = c.args[k];
      const Var& fv = f.args[k];
      auto it = sigma.find(cv);
      if (it != sigma.end()) {
        ok = it->second == fv;
      } else if (instantiable.count(cv)) {
        sigma.emplace(cv, fv);
        added.emplace_back(cv, true);
      } else {
        ok = cv == fv;
      }
    }
    if (ok) {
      used[ci] = true;
      match_frame(frame, calls, instantiable, fi + 1, sigma, used, yield);
      used[ci] = false;
    }
    for (auto& [k, ins] : added)
      if (ins) sigma.erase(k);
  }
}

}  // namespace detail

// One-step unfoldings of a pu-atom: unfold the inner atom once, match a
// sub-multiset of the produced predicate atoms syntactically against the
// frame (substituting fresh existentials only), instantiate the remainder
// and apply the actuals.
inline std::vector<Unfolding> unfold_pu(const PuAtom& a, const PcSid& sid, std::set<Var> avoid = {}) {
  std::vector<Unfolding> out;
  std::set<std::string> seen;
  for (const auto& v : a.params) avoid.insert(v);
  for (const auto& v : a.actuals) avoid.insert(v);
  Subst theta;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!(a.params[i] == a.actuals[i])) theta.m[a.params[i]] = a.actuals[i];
  for (auto& u : unfold_pred(a.inner, sid, avoid)) {
    PrenexView pv = prenex_view(u.result);
    std::set<Var> ex(pv.prefix.begin(), pv.prefix.end());
    std::vector<PredAtom> calls;
    std::vector<FormulaPtr> rest;
    for (const auto& c : pv.conjuncts) {
      if (auto* p = c->as<PredAtom>())
        calls.push_back(*p);
      else
        rest.push_back(c);
    }
    if (calls.size() < a.frame.size()) continue;
    std::map<Var, Var> sigma;
    std::vector<bool> used(calls.size(), false);
    detail::match_frame(a.frame, calls, ex, 0, sigma, used,
                        [&](const std::map<Var, Var>& sg, const std::vector<bool>& us) {
                          std::vector<FormulaPtr> parts = rest;
                          for (std::size_t i = 0; i < calls.size(); ++i)
                            if (!us[i]) parts.push_back(fpred(calls[i]));
                          std::vector<Var> remaining;
                          for (const auto& z : pv.prefix)
                            if (!sg.count(z)) remaining.push_back(z);
                          FormulaPtr body = fsep(parts);
                          body = apply_subst(body, Subst(std::map<Var, Var>(sg)));
                          body = apply_subst(body, theta);
                          FormulaPtr res = prenex(fexists(remaining, body), {});
                          std::string key;
                          key_of(res, key);
                          if (seen.insert(key).second) out.push_back(Unfolding{res, u.rule_index, u.renaming});
                        });
  }
  return out;
}

// A |->-formula: exists x~. (u |-> v~ * chi) with chi a theory formula.
inline bool is_mapsto_formula(const FormulaPtr& f) {
  PrenexView pv = prenex_view(f);
  std::size_t cells = 0;
  for (const auto& c : pv.conjuncts) {
    if (c->is<PointsTo>())
      ++cells;
    else if (!c->is<TheoryAtom>() && !c->is<FEmp>())
      return false;
  }
  return cells == 1;
}

// The one-step unfoldings of a predicate or pu-atom that are |->-formulas.
inline std::vector<FormulaPtr> mapsto_unfoldings(const FormulaPtr& atom, const PcSid& sid,
                                                 std::set<Var> avoid = {}) {
  std::vector<Unfolding> us;
  if (auto* p = atom->as<PredAtom>())
    us = unfold_pred(*p, sid, std::move(avoid));
  else if (auto* pu = atom->as<PuAtom>())
    us = unfold_pu(*pu, sid, std::move(avoid));
  std::vector<FormulaPtr> out;
  for (auto& u : us)
    if (is_mapsto_formula(u.result)) out.push_back(u.result);
  return out;
}

// ---------------------------------------------------------------------------
// Bounded predicate-free unfoldings (oracle support). Complete for deciding
// satisfaction in heaps of at most max_cells cells: by progress, every
// unfolding step contributes exactly one points-to atom.

inline std::vector<FormulaPtr> bounded_unfold(const FormulaPtr& f, const PcSid& sid, std::size_t max_cells) {
  std::vector<FormulaPtr> out;
  std::set<std::string> seen, emitted;
  std::vector<FormulaPtr> work{prenex(f, {})};
  while (!work.empty()) {
    FormulaPtr cur = work.back();
    work.pop_back();
    std::string key;
    key_of(cur, key);
    if (!seen.insert(key).second) continue;
    PrenexView pv = prenex_view(cur);
    std::size_t cells = 0, preds = 0;
    std::size_t pred_at = pv.conjuncts.size();
    for (std::size_t i = 0; i < pv.conjuncts.size(); ++i) {
      if (pv.conjuncts[i]->is<PointsTo>()) ++cells;
      if (pv.conjuncts[i]->is<PredAtom>()) {
        ++preds;
        if (pred_at == pv.conjuncts.size()) pred_at = i;
      }
    }
    if (cells + preds > max_cells) continue;
    if (preds == 0) {
      if (emitted.insert(key).second) out.push_back(cur);
      continue;
    }
    const PredAtom& p = *pv.conjuncts[pred_at]->as<PredAtom>();
    std::set<Var> avoid = all_vars(cur);
    for (auto& u : unfold_pred(p, sid, avoid)) {
      std::vector<FormulaPtr> parts;
      for (std::size_t i = 0; i < pv.conjuncts.size(); ++i)
        if (i != pred_at) parts.push_back(pv.conjuncts[i]);
      parts.push_back(u.result);
      work.push_back(prenex(fexists(pv.prefix, fsep(parts)), {}));
    }
  }
  return out;
}

// A partial unfolding: >= 1 step applied to the root atom, children frozen
// or expanded recursively. Exvars are pairwise distinct and fresh.
struct PartialUnfolding {
  std::vector<Var> exvars;
  std::vector<PointsTo> cells;
  std::vector<PredAtom> calls;  // frozen atoms
  std::vector<TheoryAtom> theory;
};

// All partial unfoldings of |a| with at most max_cells points-to atoms and,
// when frozen_slack is given, at most frozen_slack + (max_cells - #cells)
// frozen calls: a frozen atom either matches a frame atom or must consume a
// heap cell of its own.
inline std::vector<PartialUnfolding> partial_unfoldings(const PredAtom& a, const PcSid& sid,
                                                        std::size_t max_cells, std::set<Var> avoid = {},
                                                        std::size_t frozen_slack = SIZE_MAX) {
  std::vector<PartialUnfolding> out;
  for (const auto& v : a.args) avoid.insert(v);
  std::size_t counter = 0;
  auto next_fresh = [&]() {
    while (true) {
      Var v = fresh_var(counter++);
      if (!avoid.count(v)) {
        avoid.insert(v);
        return v;
      }
    }
  };
  // expand(state, pending): pending atoms each either frozen or unfolded
  std::function<void(PartialUnfolding, std::vector<PredAtom>)> expand =
      [&](PartialUnfolding st, std::vector<PredAtom> pending) {
        if (st.cells.size() > max_cells) return;
        if (frozen_slack != SIZE_MAX &&
            st.calls.size() > frozen_slack + (max_cells - st.cells.size()))
          return;
        if (pending.empty()) {
          out.push_back(std::move(st));
          return;
        }
        PredAtom next = pending.back();
        pending.pop_back();
        // freeze it
        {
          PartialUnfolding st2 = st;
          st2.calls.push_back(next);
          expand(st2, pending);
        }
        // or unfold it once
        if (st.cells.size() + 1 > max_cells) return;
        auto it = sid.rules_of.find(next.pred);
        if (it == sid.rules_of.end()) return;
        for (std::size_t ri : it->second) {
          const Rule& r = sid.rules[ri];
          std::map<Var, Var> m;
          for (std::size_t i = 0; i < r.head_args.size(); ++i) m[r.head_args[i]] = next.args[i];
          PartialUnfolding st2 = st;
          std::vector<PredAtom> pend2 = pending;
          for (const auto& z : r.exvars) {
            Var f = next_fresh();
            m[z] = f;
            st2.exvars.push_back(f);
          }
          auto sub = [&](const std::vector<Var>& vs) {
            std::vector<Var> o;
            for (const auto& v : vs) o.push_back(m.count(v) ? m.at(v) : v);
            return o;
          };
          st2.cells.push_back(PointsTo{m.count(r.cell.src) ? m.at(r.cell.src) : r.cell.src, sub(r.cell.tgt)});
          for (const auto& c : r.calls) pend2.push_back(PredAtom{c.pred, sub(c.args)});
          for (const auto& t : r.theory) st2.theory.push_back(TheoryAtom{t.op, sub(t.args)});
          expand(st2, pend2);
        }
      };
  // the root atom must be unfolded at least once
  auto it = sid.rules_of.find(a.pred);
  if (it == sid.rules_of.end()) return out;
  if (max_cells == 0) return out;
  for (std::size_t ri : it->second) {
    const Rule& r = sid.rules[ri];
    std::map<Var, Var> m;
    for (std::size_t i = 0; i < r.head_args.size(); ++i) m[r.head_args[i]] = a.args[i];
    PartialUnfolding st;
    std::vector<PredAtom> pend;
    for (const auto& z : r.exvars) {
      Var f = next_fresh();
      m[z] = f;
      st.exvars.push_back(f);
    }
    auto sub = [&](const std::vector<Var>& vs) {
      std::vector<Var> o;
      for (const auto& v : vs) o.push_back(m.count(v) ? m.at(v) : v);
      return o;
    };
    st.cells.push_back(PointsTo{m.count(r.cell.src) ? m.at(r.cell.src) : r.cell.src, sub(r.cell.tgt)});
    for (const auto& c : r.calls) pend.push_back(PredAtom{c.pred, sub(c.args)});
    for (const auto& t : r.theory) st.theory.push_back(TheoryAtom{t.op, sub(t.args)});
    expand(st, pend);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heap splitting

namespace detail {

// Abstract shapes of predicate atoms occurring in unfoldings of p: argument
// tokens are either a formal position of p (>= 0) or a pattern variable
// (< 0), numbered by first occurrence.
struct AtomPattern {
  PredSym pred;
  std::vector<int> args;
};

inline AtomPattern canon_pattern(AtomPattern p) {
  std::map<int, int> ren;
  for (auto& t : p.args)
    if (t < 0) {
      auto it = ren.find(t);
      if (it == ren.end()) {
        int id = -static_cast<int>(ren.size()) - 1;
        ren[t] = id;
        t = id;
      } else {
        t = it->second;
      }
    }
  return p;
}

inline std::string pattern_key(const AtomPattern& p) {
  std::string s = p.pred;
  for (int t : p.args) s += "," + std::to_string(t);
  return s;
}

// Fixpoint over the rules reachable from p.
inline std::vector<AtomPattern> atom_patterns(const PredSym& p, const PcSid& sid) {
  std::vector<AtomPattern> out;
  std::set<std::string> seen;
  std::vector<AtomPattern> work;
  auto push = [&](AtomPattern pat) {
    pat = canon_pattern(std::move(pat));
    if (seen.insert(pattern_key(pat)).second) {
      out.push_back(pat);
      work.push_back(out.back());
    }
  };
  // seed: atoms in bodies of p's rules, tokens relative to p's formals
  auto it = sid.rules_of.find(p);
  if (it == sid.rules_of.end()) return out;
  for (std::size_t ri : it->second) {
    const Rule& r = sid.rules[ri];
    std::map<Var, int> tok;
    for (std::size_t i = 0; i < r.head_args.size(); ++i) tok[r.head_args[i]] = static_cast<int>(i);
    int next_pv = -1;
    for (const auto& z : r.exvars) tok[z] = next_pv--;
    for (const auto& c : r.calls) {
      AtomPattern pat{c.pred, {}};
      for (const auto& v : c.args) pat.args.push_back(tok.at(v));
      push(std::move(pat));
    }
  }
  while (!work.empty()) {
    AtomPattern cur = work.back();
    work.pop_back();
    auto rit = sid.rules_of.find(cur.pred);
    if (rit == sid.rules_of.end()) continue;
    int min_pv = 0;
    for (int t : cur.args) min_pv = std::min(min_pv, t);
    for (std::size_t ri : rit->second) {
      const Rule& r = sid.rules[ri];
      std::map<Var, int> tok;
      for (std::size_t i = 0; i < r.head_args.size(); ++i) tok[r.head_args[i]] = cur.args[i];
      int next_pv = min_pv - 1;
      for (const auto& z : r.exvars) tok[z] = next_pv--;
      for (const auto& c : r.calls) {
        AtomPattern pat{c.pred, {}};
        for (const auto& v : c.args) pat.args.push_back(tok.at(v));
        push(std::move(pat));
      }
    }
  }
  return out;
}

}  // namespace detail

// split_x of a single pu-atom (predicate atoms are handled by viewing them
// as pu-atoms with an empty frame). Returns prenex formulas.
inline std::vector<FormulaPtr> split_pu_at(const PuAtom& a, const Var& x, const PcSid& sid,
                                           std::set<Var> avoid) {
  std::vector<FormulaPtr> out;
  for (const auto& v : a.params) avoid.insert(v);
  for (const auto& v : a.actuals) avoid.insert(v);
  avoid.insert(x);

  // parameter y with y(theta) = x, added if missing
  std::vector<Var> params = a.params, actuals = a.actuals;
  std::optional<Var> y;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (actuals[i] == x) {
      y = params[i];
      break;
    }
  std::size_t internal_counter = 0;
  auto fresh_internal = [&]() {
    while (true) {
      Var v("_q" + std::to_string(internal_counter++));
      if (!avoid.count(v)) {
        avoid.insert(v);
        return v;
      }
    }
  };
  if (!y) {
    y = fresh_internal();
    params.push_back(*y);
    actuals.push_back(x);
  }

  // internal-space candidates for q(y, y~)
  std::set<Var> beta_vars;
  for (const auto& f : a.frame)
    for (const auto& v : f.args) beta_vars.insert(v);

  for (const auto& pat : detail::atom_patterns(a.inner.pred, sid)) {
    if (pat.args.empty()) continue;
    // instantiations of pattern tokens
    std::set<int> patvars;
    for (int t : pat.args)
      if (t < 0) patvars.insert(t);
    // the first argument must become y
    std::map<int, Var> fixed;
    if (pat.args[0] >= 0) {
      if (static_cast<std::size_t>(pat.args[0]) >= a.inner.args.size()) continue;
      if (!(a.inner.args[pat.args[0]] == *y)) {
        // formal position: its variable must be the x-parameter
        // (theta images are per-parameter, so compare the parameter itself)
        bool matches = false;
        for (std::size_t i = 0; i < params.size(); ++i)
          if (params[i] == a.inner.args[pat.args[0]] && actuals[i] == x) matches = true;
        if (!matches) continue;
      }
    } else {
      fixed[pat.args[0]] = *y;
    }
    // remaining pattern variables range over: a private fresh internal var,
    // any frame variable, or y
    std::vector<int> pvs;
    for (int t : patvars)
      if (!fixed.count(t)) pvs.push_back(t);
    std::vector<Var> range(beta_vars.begin(), beta_vars.end());
    range.push_back(*y);
    // choice index per pattern var: 0 = private fresh, 1.. = range
    std::vector<std::size_t> choice(pvs.size(), 0);
    while (true) {
      std::map<int, Var> inst = fixed;
      std::vector<Var> new_params, new_actuals;
      std::vector<Var> new_exvars;
      bool ok = true;
      std::size_t fresh_used = 0;
      for (std::size_t i = 0; i < pvs.size(); ++i) {
        if (choice[i] == 0) {
          Var zi = fresh_internal();
          Var zeta = fresh_vars(1, avoid)[0];
          avoid.insert(zeta);
          inst[pvs[i]] = zi;
          new_params.push_back(zi);
          new_actuals.push_back(zeta);
          new_exvars.push_back(zeta);
          ++fresh_used;
        } else {
          inst[pvs[i]] = range[choice[i] - 1];
        }
      }
      (void)fresh_used;
      if (ok) {
        PredAtom q{pat.pred, {}};
        for (int t : pat.args) q.args.push_back(t >= 0 ? a.inner.args[t] : inst.at(t));
        std::vector<Var> ps = params, as = actuals;
        for (std::size_t i = 0; i < new_params.size(); ++i) {
          ps.push_back(new_params[i]);
          as.push_back(new_actuals[i]);
        }
        // every 2-partition of the frame
        std::size_t n = a.frame.size();
        for (std::size_t mask = 0; mask < (1u << n); ++mask) {
          std::vector<PredAtom> b1, b2;
          for (std::size_t i = 0; i < n; ++i)
            ((mask >> i) & 1 ? b1 : b2).push_back(a.frame[i]);
          std::vector<PredAtom> f1 = b1;
          f1.push_back(q);
          FormulaPtr left = fpu(f1, a.inner, ps, as);
          FormulaPtr right = fpu(b2, q, ps, as);
          out.push_back(fexists(new_exvars, fsep({left, right})));
        }
      }
      // advance
      std::size_t i = 0;
      for (; i < pvs.size(); ++i) {
        if (++choice[i] <= range.size()) break;
        choice[i] = 0;
      }
      if (pvs.empty() || i == pvs.size()) break;
    }
  }
  return out;
}

// split_x(f): rewrites f so that x becomes a main root. Root-unsatisfiable
// results are deleted and results are returned in prenex form.
inline std::vector<FormulaPtr> split_at(const FormulaPtr& f, const Var& x, const PcSid& sid) {
  std::set<Var> avoid = all_vars(f);
  avoid.insert(x);
  std::function<std::vector<FormulaPtr>(const FormulaPtr&)> go = [&](const FormulaPtr& g) -> std::vector<FormulaPtr> {
    if (g->is<FEmp>() || g->is<TheoryAtom>()) return {};
    if (auto* p = g->as<PointsTo>()) {
      if (p->src == x) return {g};
      return {};
    }
    if (auto* p = g->as<PredAtom>()) {
      if (!p->args.empty() && p->args[0] == x) return {g};
      // view as a pu-atom with empty frame
      std::vector<Var> formals;
      std::set<Var> used;
      for (std::size_t i = 0; i < p->args.size(); ++i) formals.push_back(Var("_q" + std::to_string(100 + i)));
      return split_pu_at(PuAtom{{}, PredAtom{p->pred, formals}, formals, p->args}, x, sid, avoid);
    }
    if (auto* pu = g->as<PuAtom>()) {
      Roots r = roots_of(g);
      if (r.main.size() == 1 && r.main[0] == x) return {g};
      return split_pu_at(*pu, x, sid, avoid);
    }
    if (auto* s = g->as<FSep>()) {
      std::vector<FormulaPtr> out;
      for (std::size_t i = 0; i < s->parts.size(); ++i) {
        for (auto& repl : go(s->parts[i])) {
          std::vector<FormulaPtr> parts = s->parts;
          parts[i] = repl;
          out.push_back(fsep(std::move(parts)));
        }
      }
      return out;
    }
    if (auto* e = g->as<FExists>()) {
      Var v = e->v;
      FormulaPtr body = e->body;
      if (v == x) {
        // rename the binder apart from the split variable
        Var nv = fresh_vars(1, avoid)[0];
        avoid.insert(nv);
        body = apply_subst(body, single_subst(v, nv));
        v = nv;
      }
      std::vector<FormulaPtr> out;
      for (auto& q : go(body)) out.push_back(fexists(v, q));
      for (auto& q : go(apply_subst(body, single_subst(v, x)))) out.push_back(q);
      return out;
    }
    return {};  // disjunctions are not split
  };
  std::vector<FormulaPtr> raw = go(f);
  std::vector<FormulaPtr> out;
  std::set<std::string> seen;
  for (auto& g : raw) {
    FormulaPtr p = prenex(g, {});
    if (root_unsatisfiable(p)) continue;
    std::string key;
    key_of(p, key);
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

}  // namespace sepentail

#endif  // SEPENTAIL_UNFOLD_HPP
