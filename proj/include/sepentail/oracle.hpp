// Bounded-model reference semantics and brute-force entailment checking,
// used for differential validation of the prover and the preprocessing
// passes. Locations are the naturals 0..L-1; heaps carry at most K cells.

#ifndef SEPENTAIL_ORACLE_HPP
#define SEPENTAIL_ORACLE_HPP

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sepentail/core.hpp"
#include "sepentail/sid.hpp"
#include "sepentail/theory.hpp"
#include "sepentail/unfold.hpp"

namespace sepentail {

using Loc = std::size_t;

struct Structure {
  std::map<Var, Loc> store;
  std::map<Loc, std::vector<Loc>> heap;
  std::size_t loc_count = 0;
};

struct BoundTooSmall : std::runtime_error {
  explicit BoundTooSmall(const std::string& m) : std::runtime_error("bound too small: " + m) {}
};

namespace detail {

inline bool store_sat_atom(const std::map<Var, Loc>& s, const TheoryAtom& a) {
  auto val = [&](const Var& v) -> Loc {
    auto it = s.find(v);
    if (it == s.end()) throw std::logic_error("store not total on " + v.name);
    return it->second;
  };
  switch (a.op) {
    case TheoryOp::False: return false;
    case TheoryOp::Eq: return val(a.args[0]) == val(a.args[1]);
    case TheoryOp::Neq: return val(a.args[0]) != val(a.args[1]);
    case TheoryOp::Le: return val(a.args[0]) <= val(a.args[1]);
    case TheoryOp::Lt: return val(a.args[0]) < val(a.args[1]);
    case TheoryOp::Ge0: return true;  // locations are naturals
  }
  return false;
}

}  // namespace detail

bool holds(const Structure& st, const FormulaPtr& f, const PcSid& sid, TheoryTag theory);
inline void pu_frame_match(const std::vector<PredAtom>& frame, const PartialUnfolding& part, const Structure& st,
                           const Subst& theta, const PcSid& sid, TheoryTag theory, bool& sat);

namespace detail {

// Satisfaction of exists exvars. (cells * calls * chi) on (store, heap):
// matches the cells bijectively onto the heap, binding existentials, then
// evaluates the frozen calls on the leftover cells and checks chi.
inline bool sat_unfolded(const Structure& st, std::map<Var, Loc> store, const std::vector<Var>& exvars,
                         std::vector<PointsTo> cells, const std::vector<PredAtom>& calls,
                         const std::vector<TheoryAtom>& chi, const PcSid& sid, TheoryTag theory) {
  // with frozen calls present, the cells claim a sub-heap and the calls
  // split the remainder; without calls the match must be exact
  std::set<Var> exset(exvars.begin(), exvars.end());
  for (const auto& z : exvars) store.erase(z);  // existentials shadow
  std::function<bool(std::map<Var, Loc>&, std::size_t, std::set<Loc>&)> match =
      [&](std::map<Var, Loc>& s, std::size_t ci, std::set<Loc>& used) -> bool {
    if (ci == cells.size()) {
      // remaining heap cells go to the frozen calls
      std::vector<std::pair<Loc, std::vector<Loc>>> rest;
      for (const auto& [l, t] : st.heap)
        if (!used.count(l)) rest.emplace_back(l, t);
      if (calls.empty() && !rest.empty()) return false;
      // bind leftover existentials occurring in calls or chi
      std::vector<Var> loose;
      for (const auto& z : exvars)
        if (!s.count(z)) loose.push_back(z);
      std::function<bool(std::size_t)> bindloose = [&](std::size_t li) -> bool {
        if (li == loose.size()) {
          for (const auto& a : chi)
            if (!store_sat_atom(s, a)) return false;
          if (calls.empty()) return rest.empty();
          // distribute rest cells over the calls
          std::vector<std::size_t> assign(rest.size(), 0);
          while (true) {
            bool ok = true;
            for (std::size_t k = 0; k < calls.size() && ok; ++k) {
              Structure sub;
              sub.loc_count = st.loc_count;
              sub.store = s;
              for (std::size_t m = 0; m < rest.size(); ++m)
                if (assign[m] == k) sub.heap.emplace(rest[m].first, rest[m].second);
              ok = holds(sub, fpred(calls[k]), sid, theory);
            }
            if (ok) return true;
            std::size_t m = 0;
            for (; m < rest.size(); ++m) {
              if (++assign[m] < calls.size()) break;
              assign[m] = 0;
            }
            if (m == rest.size()) return false;
          }
        }
        for (Loc v = 0; v < st.loc_count; ++v) {
          s[loose[li]] = v;
          if (bindloose(li + 1)) return true;
        }
        s.erase(loose[li]);
        return false;
      };
      return bindloose(0);
    }
    const PointsTo& c = cells[ci];
    auto try_cell = [&](Loc l) -> bool {
      if (used.count(l)) return false;
      const auto& tuple = st.heap.at(l);
      std::vector<std::pair<Var, bool>> bound;
      bool ok = true;
      auto bind = [&](const Var& v, Loc val) {
        auto it = s.find(v);
        if (it != s.end()) {
          if (it->second != val) ok = false;
        } else if (exset.count(v)) {
          s[v] = val;
          bound.emplace_back(v, true);
        } else {
          ok = false;  // free var missing from store
        }
      };
      bind(c.src, l);
      for (std::size_t k = 0; k < tuple.size() && ok; ++k) bind(c.tgt[k], tuple[k]);
      if (c.tgt.size() != tuple.size()) ok = false;
      bool res = false;
      if (ok) {
        used.insert(l);
        res = match(s, ci + 1, used);
        used.erase(l);
      }
      for (auto& [v, b] : bound)
        if (b) s.erase(v);
      return res;
    };
    auto it = s.find(c.src);
    if (it != s.end()) {
      return st.heap.count(it->second) ? try_cell(it->second) : false;
    }
    for (const auto& [l, t] : st.heap)
      if (try_cell(l)) return true;
    return false;
  };
  std::set<Loc> used;
  return match(store, 0, used);
}

}  // namespace detail

// Structural satisfaction per the small-step semantics; predicate atoms are
// decided through bounded unfolding (complete at |heap| cells thanks to the
// progress condition), pu-atoms through partial unfoldings plus syntactic
// frame matching.
inline bool holds(const Structure& st, const FormulaPtr& f, const PcSid& sid, TheoryTag theory) {
  if (f->is<FEmp>()) return st.heap.empty();
  if (auto* t = f->as<TheoryAtom>()) return st.heap.empty() && detail::store_sat_atom(st.store, *t);
  if (auto* p = f->as<PointsTo>()) {
    if (st.heap.size() != 1) return false;
    auto it = st.store.find(p->src);
    if (it == st.store.end()) return false;
    auto hit = st.heap.find(it->second);
    if (hit == st.heap.end() || hit->second.size() != p->tgt.size()) return false;
    for (std::size_t i = 0; i < p->tgt.size(); ++i) {
      auto vt = st.store.find(p->tgt[i]);
      if (vt == st.store.end() || vt->second != hit->second[i]) return false;
    }
    return true;
  }
  if (auto* d = f->as<FDis>()) {
    for (const auto& p : d->parts)
      if (holds(st, p, sid, theory)) return true;
    return false;
  }
  if (auto* e = f->as<FExists>()) {
    for (Loc v = 0; v < st.loc_count; ++v) {
      Structure st2 = st;
      st2.store[e->v] = v;
      if (holds(st2, e->body, sid, theory)) return true;
    }
    return false;
  }
  if (auto* s = f->as<FSep>()) {
    // deterministic parts first: points-to claim their own cell, theory
    // formulas claim nothing; remaining cells are distributed over the rest
    std::vector<FormulaPtr> hard;
    std::set<Loc> claimed;
    for (const auto& p : s->parts) {
      if (auto* pt = p->as<PointsTo>()) {
        auto it = st.store.find(pt->src);
        if (it == st.store.end()) return false;
        if (claimed.count(it->second)) return false;
        auto hit = st.heap.find(it->second);
        if (hit == st.heap.end()) return false;
        Structure one;
        one.loc_count = st.loc_count;
        one.store = st.store;
        one.heap.emplace(hit->first, hit->second);
        if (!holds(one, p, sid, theory)) return false;
        claimed.insert(it->second);
      } else if (p->is<TheoryAtom>() || p->is<FEmp>()) {
        Structure none;
        none.loc_count = st.loc_count;
        none.store = st.store;
        if (!holds(none, p, sid, theory)) return false;
      } else {
        hard.push_back(p);
      }
    }
    std::vector<std::pair<Loc, std::vector<Loc>>> rest;
    for (const auto& [l, t] : st.heap)
      if (!claimed.count(l)) rest.emplace_back(l, t);
    if (hard.empty()) return rest.empty();
    std::vector<std::size_t> assign(rest.size(), 0);
    while (true) {
      bool ok = true;
      for (std::size_t k = 0; k < hard.size() && ok; ++k) {
        Structure sub;
        sub.loc_count = st.loc_count;
        sub.store = st.store;
        for (std::size_t m = 0; m < rest.size(); ++m)
          if (assign[m] == k) sub.heap.emplace(rest[m].first, rest[m].second);
        ok = holds(sub, hard[k], sid, theory);
      }
      if (ok) return true;
      std::size_t m = 0;
      for (; m < rest.size(); ++m) {
        if (++assign[m] < hard.size()) break;
        assign[m] = 0;
      }
      if (m == rest.size() || rest.empty()) return false;
    }
  }
  if (auto* p = f->as<PredAtom>()) {
    std::set<Var> avoid;
    for (const auto& [v, l] : st.store) avoid.insert(v);
    for (auto& u : bounded_unfold(fpred(*p), sid, st.heap.size())) {
      PrenexView pv = prenex_view(u);
      std::vector<PointsTo> cells;
      std::vector<TheoryAtom> chi;
      for (const auto& c : pv.conjuncts) {
        if (auto* pt = c->as<PointsTo>()) cells.push_back(*pt);
        if (auto* ta = c->as<TheoryAtom>()) chi.push_back(*ta);
      }
      if (cells.size() != st.heap.size()) continue;
      if (detail::sat_unfolded(st, st.store, pv.prefix, cells, {}, chi, sid, theory)) return true;
    }
    return false;
  }
  if (auto* pu = f->as<PuAtom>()) {
    std::set<Var> avoid;
    for (const auto& [v, l] : st.store) avoid.insert(v);
    for (const auto& v : pu->actuals) avoid.insert(v);
    Subst theta;
    for (std::size_t i = 0; i < pu->params.size(); ++i)
      if (!(pu->params[i] == pu->actuals[i])) theta.m[pu->params[i]] = pu->actuals[i];
    for (auto& part : partial_unfoldings(pu->inner, sid, st.heap.size(), avoid, pu->frame.size())) {
      bool sat = false;
      pu_frame_match(pu->frame, part, st, theta, sid, theory, sat);
      if (sat) return true;
    }
    return false;
  }
  return false;
}

// Frame matching for the pu-atom case of holds(); separated out to keep the
// recursion readable.
inline void pu_frame_match(const std::vector<PredAtom>& frame, const PartialUnfolding& part,
                           const Structure& st, const Subst& theta, const PcSid& sid, TheoryTag theory,
                           bool& sat) {
  std::set<Var> ex(part.exvars.begin(), part.exvars.end());
  std::map<Var, Var> sigma;
  std::vector<bool> used(part.calls.size(), false);
  detail::match_frame(frame, part.calls, ex, 0, sigma, used,
                      [&](const std::map<Var, Var>& sg, const std::vector<bool>& us) {
                        if (sat) return;
                        std::vector<FormulaPtr> parts;
                        for (const auto& c : part.cells) parts.push_back(fpointsto(c.src, c.tgt));
                        for (std::size_t i = 0; i < part.calls.size(); ++i)
                          if (!us[i]) parts.push_back(fpred(part.calls[i]));
                        for (const auto& t : part.theory) parts.push_back(ftheory(t));
                        std::vector<Var> remaining;
                        for (const auto& z : part.exvars)
                          if (!sg.count(z)) remaining.push_back(z);
                        FormulaPtr body = fsep(parts);
                        body = apply_subst(body, Subst(std::map<Var, Var>(sg)));
                        body = apply_subst(body, theta);
                        if (holds(st, fexists(remaining, body), sid, theory)) sat = true;
                      });
}

// ---------------------------------------------------------------------------
// Model enumeration

namespace detail {

// All heaps h with (store, h) |= disjunct and |h| <= max_cells, collected by
// instantiating the predicate-free unfoldings of the disjunct.
inline std::vector<std::map<Loc, std::vector<Loc>>> models_of_disjunct(const FormulaPtr& disjunct,
                                                                       const std::map<Var, Loc>& store,
                                                                       const PcSid& sid, TheoryTag theory,
                                                                       std::size_t L, std::size_t K) {
  std::vector<std::map<Loc, std::vector<Loc>>> out;
  std::set<std::string> seen;
  for (auto& u : bounded_unfold(disjunct, sid, K)) {
    PrenexView pv = prenex_view(u);
    std::vector<PointsTo> cells;
    std::vector<TheoryAtom> chi;
    bool bad = false;
    for (const auto& c : pv.conjuncts) {
      if (auto* pt = c->as<PointsTo>())
        cells.push_back(*pt);
      else if (auto* ta = c->as<TheoryAtom>())
        chi.push_back(*ta);
      else if (!c->is<FEmp>())
        bad = true;
    }
    if (bad) continue;
    std::map<Var, Loc> s = store;
    for (const auto& z : pv.prefix) s.erase(z);  // existentials shadow
    // assign existentials: cells with bound sources first, then free choice
    std::function<void(std::vector<PointsTo>, std::map<Loc, std::vector<Loc>>)> place =
        [&](std::vector<PointsTo> pending, std::map<Loc, std::vector<Loc>> heap) {
          if (pending.empty()) {
            // leftover existentials occur only in theory atoms
            std::vector<Var> loose;
            for (const auto& z : pv.prefix)
              if (!s.count(z)) loose.push_back(z);
            std::function<void(std::size_t)> bind = [&](std::size_t li) {
              if (li == loose.size()) {
                for (const auto& a : chi)
                  if (!store_sat_atom(s, a)) return;
                std::string key;
                for (const auto& [l, t] : heap) {
                  key += std::to_string(l) + ":";
                  for (Loc v : t) key += std::to_string(v) + ",";
                  key += ";";
                }
                if (seen.insert(key).second) out.push_back(heap);
                return;
              }
              for (Loc v = 0; v < L; ++v) {
                s[loose[li]] = v;
                bind(li + 1);
                s.erase(loose[li]);
              }
            };
            bind(0);
            return;
          }
          // prefer a cell whose source is already bound
          std::size_t pick = pending.size();
          for (std::size_t i = 0; i < pending.size(); ++i)
            if (s.count(pending[i].src)) {
              pick = i;
              break;
            }
          if (pick == pending.size()) pick = 0;
          PointsTo c = pending[pick];
          pending.erase(pending.begin() + pick);
          auto with_src = [&](Loc l) {
            if (heap.count(l)) return;  // sources must be distinct
            std::function<void(std::size_t, std::vector<Loc>)> tgts = [&](std::size_t k, std::vector<Loc> acc) {
              if (k == c.tgt.size()) {
                auto h2 = heap;
                h2.emplace(l, acc);
                place(pending, std::move(h2));
                return;
              }
              auto it = s.find(c.tgt[k]);
              if (it != s.end()) {
                acc.push_back(it->second);
                tgts(k + 1, std::move(acc));
                return;
              }
              for (Loc v = 0; v < L; ++v) {
                s[c.tgt[k]] = v;
                auto a2 = acc;
                a2.push_back(v);
                tgts(k + 1, std::move(a2));
                s.erase(c.tgt[k]);
              }
            };
            tgts(0, {});
          };
          auto it = s.find(c.src);
          if (it != s.end()) {
            with_src(it->second);
          } else {
            for (Loc l = 0; l < L; ++l) {
              s[c.src] = l;
              with_src(l);
              s.erase(c.src);
            }
          }
        };
    place(cells, {});
  }
  (void)theory;
  return out;
}

inline void enumerate_injective_stores(const std::vector<Var>& vars, std::size_t L,
                                       const std::function<void(const std::map<Var, Loc>&)>& yield) {
  std::map<Var, Loc> s;
  std::set<Loc> used;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      yield(s);
      return;
    }
    for (Loc v = 0; v < L; ++v) {
      if (used.count(v)) continue;
      used.insert(v);
      s[vars[i]] = v;
      rec(i + 1);
      s.erase(vars[i]);
      used.erase(v);
    }
  };
  rec(0);
}

}  // namespace detail

// All satisfying structures with injective stores within the bounds.
// For the empty and eq theories only structures whose used locations form an
// initial segment 0..m are kept (gap-shifted duplicates removed); natorder
// keeps everything since the order matters.
inline std::vector<Structure> models_of(const FormulaPtr& f, const PcSid& sid, TheoryTag theory, std::size_t L,
                                        std::size_t K) {
  std::set<Var> fvset = free_vars(f);
  std::vector<Var> fv(fvset.begin(), fvset.end());
  if (fv.size() > L) throw BoundTooSmall(std::to_string(fv.size()) + " free variables, " + std::to_string(L) + " locations");
  std::vector<Structure> out;
  std::set<std::string> seen;
  for (const auto& disjunct : dnf(f)) {
    detail::enumerate_injective_stores(fv, L, [&](const std::map<Var, Loc>& s) {
      for (auto& h : detail::models_of_disjunct(disjunct, s, sid, theory, L, K)) {
        if (theory != TheoryTag::NatOrder) {
          std::set<Loc> usedlocs;
          for (const auto& [v, l] : s) usedlocs.insert(l);
          for (const auto& [l, t] : h) {
            usedlocs.insert(l);
            for (Loc v : t) usedlocs.insert(v);
          }
          bool prefix = true;
          std::size_t i = 0;
          for (Loc l : usedlocs)
            if (l != i++) prefix = false;
          if (!prefix) continue;
        }
        std::string key;
        for (const auto& [v, l] : s) key += v.name + "=" + std::to_string(l) + ";";
        for (const auto& [l, t] : h) {
          key += std::to_string(l) + ":";
          for (Loc v : t) key += std::to_string(v) + ",";
        }
        if (seen.insert(key).second) out.push_back(Structure{s, h, L});
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bounded entailment

struct OracleVerdict {
  bool valid_up_to_bound = true;
  std::optional<Structure> countermodel;
};

// Enumerates injective stores (one representative for theories insensitive
// to the choice of locations) and all bounded models of the left-hand side;
// returns the first countermodel in enumeration order.
inline OracleVerdict oracle_entails(const Sequent& seq, std::size_t L, std::size_t K, unsigned jobs = 1) {
  std::set<Var> fvset = free_vars(seq);
  std::vector<Var> fv(fvset.begin(), fvset.end());
  if (fv.size() > L)
    throw BoundTooSmall(std::to_string(fv.size()) + " free variables, " + std::to_string(L) + " locations");
  const PcSid& sid = *seq.sid;

  std::vector<std::map<Var, Loc>> stores;
  if (seq.theory == TheoryTag::NatOrder) {
    detail::enumerate_injective_stores(fv, L, [&](const std::map<Var, Loc>& s) { stores.push_back(s); });
  } else {
    std::map<Var, Loc> s;
    Loc i = 0;
    for (const auto& v : fv) s[v] = i++;
    stores.push_back(std::move(s));
  }

  auto check_store = [&](const std::map<Var, Loc>& s) -> std::optional<Structure> {
    for (auto& h : detail::models_of_disjunct(seq.lhs, s, sid, seq.theory, L, K)) {
      Structure st{s, h, L};
      bool any = false;
      for (const auto& r : seq.rhs)
        if (holds(st, r, sid, seq.theory)) {
          any = true;
          break;
        }
      if (!any) return st;
    }
    return std::nullopt;
  };

  if (jobs <= 1 || stores.size() <= 1) {
    for (const auto& s : stores) {
      if (auto cm = check_store(s)) return OracleVerdict{false, cm};
    }
    return OracleVerdict{true, std::nullopt};
  }
  std::vector<std::optional<Structure>> results(stores.size());
  std::vector<std::thread> threads;
  std::size_t chunk = (stores.size() + jobs - 1) / jobs;
  for (unsigned t = 0; t < jobs; ++t) {
    std::size_t lo = t * chunk, hi = std::min(stores.size(), lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, lo, hi]() {
      for (std::size_t i = lo; i < hi; ++i) results[i] = check_store(stores[i]);
    });
  }
  for (auto& th : threads) th.join();
  for (auto& r : results)
    if (r) return OracleVerdict{false, r};
  return OracleVerdict{true, std::nullopt};
}

}  // namespace sepentail

#endif  // SEPENTAIL_ORACLE_HPP
