// Reduction of equality-theory sequents to the empty theory: equations are
// compiled away by instantiating rules, disequations by making every
// referenced location allocated, after which they are redundant.
//
// Step 1  adds every free variable of the query (plus a fresh sentinel u)
//         as an extra parameter of every predicate.
// Step 2  eliminates equations on existentials and expands every
//         existential block into its instantiation variants, padded with
//         pairwise disequations.
// Step 3  collapses duplicate-argument atoms into specialized predicates,
//         after which all equations are trivial and disappear; the system
//         is then made alloc-compatible.
// Step 4  extends the record width by the sentinel u, pads unallocated free
//         variables with cells pointing at (u',..,u'), and erases all
//         disequations.

#ifndef SEPENTAIL_EQELIM_HPP
#define SEPENTAIL_EQELIM_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sepentail/core.hpp"
#include "sepentail/sid.hpp"
#include "sepentail/frontend.hpp"

namespace sepentail {

struct TheoryNotEq : std::runtime_error {
  TheoryNotEq() : std::runtime_error("equality elimination requires theory eq") {}
};

struct ElimTrace {
  std::optional<Problem> after_step1, after_step2, after_step3, after_step4;
  std::vector<Var> added_params;
  Var sentinel_u, sentinel_u_prime;
  std::size_t new_kappa = 0;
};

namespace eqdetail {

inline Var gensym(const std::string& base, std::set<Var>& avoid) {
  for (std::size_t i = 0;; ++i) {
    Var v(base + std::to_string(i));
    if (avoid.insert(v).second) return v;
  }
}

// Mutable working state: rules plus the query as explicit disjunct lists.
struct State {
  std::vector<Rule> rules;
  std::map<PredSym, std::size_t> upos;  // position of the sentinel parameter
  std::vector<FormulaPtr> lhs;          // disjuncts, prenex
  std::vector<FormulaPtr> rhs;          // formulas, prenex
  std::size_t kappa = 0;

  Problem snapshot(TheoryTag theory) const {
    Problem p;
    p.theory = theory;
    p.sid = validate_pcsid(rules, kappa, /*assume_established=*/true);
    std::vector<FormulaPtr> ds = lhs;
    p.lhs = ds.empty() ? ftheory(TheoryOp::False, {}) : fdis(std::move(ds));
    p.rhs = rhs;
    return p;
  }
};

inline FormulaPtr map_preds(const FormulaPtr& f, const std::function<FormulaPtr(const PredAtom&)>& fn) {
  if (auto* p = f->as<PredAtom>()) return fn(*p);
  if (auto* s = f->as<FSep>()) {
    std::vector<FormulaPtr> parts;
    for (const auto& q : s->parts) parts.push_back(map_preds(q, fn));
    return fsep(std::move(parts));
  }
  if (auto* d = f->as<FDis>()) {
    std::vector<FormulaPtr> parts;
    for (const auto& q : d->parts) parts.push_back(map_preds(q, fn));
    return fdis(std::move(parts));
  }
  if (auto* e = f->as<FExists>()) return fexists(e->v, map_preds(e->body, fn));
  return f;
}

// ---- Step 1 ---------------------------------------------------------------

inline void step1(State& st, const std::vector<Var>& extra) {
  std::map<PredSym, PredSym> ren;
  for (const auto& r : st.rules)
    if (!ren.count(r.head)) ren[r.head] = r.head + "@e";
  std::vector<Rule> out;
  for (const auto& r : st.rules) {
    Rule nr = r;
    nr.head = ren.at(r.head);
    std::set<Var> avoid(r.head_args.begin(), r.head_args.end());
    for (const auto& z : r.exvars) avoid.insert(z);
    std::vector<Var> formals;
    for (std::size_t i = 0; i < extra.size(); ++i) formals.push_back(gensym("c", avoid));
    for (const auto& w : formals) nr.head_args.push_back(w);
    for (auto& c : nr.calls) {
      c.pred = ren.at(c.pred);
      for (const auto& w : formals) c.args.push_back(w);
    }
    out.push_back(std::move(nr));
  }
  st.rules = std::move(out);
  for (auto& r : st.rules) st.upos[r.head] = r.head_args.size() - 1;
  auto fix = [&](const FormulaPtr& f) {
    return map_preds(f, [&](const PredAtom& a) {
      PredAtom na{ren.at(a.pred), a.args};
      for (const auto& w : extra) na.args.push_back(w);
      return fpred(na);
    });
  };
  for (auto& f : st.lhs) f = fix(f);
  for (auto& f : st.rhs) f = fix(f);
}

// ---- Step 2 ---------------------------------------------------------------

struct Block {
  std::vector<Var> exvars;
  std::vector<FormulaPtr> conjuncts;
};

// exists x.(x = y * phi)  ~>  phi{x <- y}
inline void eliminate_ex_equations(Block& b) {
  bool again = true;
  while (again) {
    again = false;
    std::set<Var> ex(b.exvars.begin(), b.exvars.end());
    for (std::size_t i = 0; i < b.conjuncts.size(); ++i) {
      auto* t = b.conjuncts[i]->as<TheoryAtom>();
      if (!t || t->op != TheoryOp::Eq) continue;
      Var from, to;
      if (ex.count(t->args[0])) {
        from = t->args[0];
        to = t->args[1];
      } else if (ex.count(t->args[1])) {
        from = t->args[1];
        to = t->args[0];
      } else {
        continue;
      }
      if (from == to) {  // x = x with x existential: drop the atom only
        b.conjuncts.erase(b.conjuncts.begin() + i);
        again = true;
        break;
      }
      Subst s = single_subst(from, to);
      b.conjuncts.erase(b.conjuncts.begin() + i);
      for (auto& c : b.conjuncts) c = apply_subst(c, s);
      b.exvars.erase(std::remove(b.exvars.begin(), b.exvars.end(), from), b.exvars.end());
      again = true;
      break;
    }
  }
}

// All idempotent substitutions with domain within the existentials and image
// within existentials plus the given anchors.
inline std::vector<Subst> instantiation_variants(const std::vector<Var>& exvars, const std::vector<Var>& anchors) {
  std::vector<Var> image = exvars;
  for (const auto& a : anchors) image.push_back(a);
  std::vector<Subst> out;
  std::vector<std::size_t> choice(exvars.size(), 0);  // 0 = keep, i+1 = image[i]
  while (true) {
    std::map<Var, Var> m;
    bool ok = true;
    for (std::size_t i = 0; i < exvars.size() && ok; ++i) {
      if (choice[i] == 0) continue;
      const Var& img = image[choice[i] - 1];
      if (img == exvars[i]) ok = false;  // identity handled by choice 0
      m[exvars[i]] = img;
    }
    if (ok) {
      Subst s{std::move(m)};
      if (s.idempotent()) out.push_back(std::move(s));
    }
    std::size_t i = 0;
    for (; i < exvars.size(); ++i) {
      if (++choice[i] <= image.size()) break;
      choice[i] = 0;
    }
    if (exvars.empty() || i == exvars.size()) break;
  }
  return out;
}

// Expands one existential block into its variants, each padded with the
// pairwise disequations among the surviving existentials and the anchors.
inline std::vector<Block> step2_block(Block b, const std::vector<Var>& anchors) {
  eliminate_ex_equations(b);
  std::vector<Block> out;
  std::set<std::string> seen;
  for (const auto& sigma : instantiation_variants(b.exvars, anchors)) {
    Block nb;
    for (const auto& z : b.exvars)
      if (!sigma.m.count(z)) nb.exvars.push_back(z);
    for (const auto& c : b.conjuncts) nb.conjuncts.push_back(apply_subst(c, sigma));
    for (std::size_t i = 0; i < nb.exvars.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.exvars.size(); ++j)
        nb.conjuncts.push_back(ftheory(TheoryOp::Neq, {nb.exvars[i], nb.exvars[j]}));
      for (const auto& a : anchors)
        nb.conjuncts.push_back(ftheory(TheoryOp::Neq, {nb.exvars[i], a}));
    }
    Sequent probe{fexists(nb.exvars, fsep(nb.conjuncts)), {}, nullptr, TheoryTag::Eq};
    std::string key = canonical_key(probe);
    if (seen.insert(key).second) out.push_back(std::move(nb));
  }
  return out;
}

// Predicates that lost all their rules are unsatisfiable: rules calling
// them follow, and query atoms over them become false.
inline void drop_empty_preds(State& st) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<PredSym> defined;
    for (const auto& r : st.rules) defined.insert(r.head);
    std::vector<Rule> keep;
    for (auto& r : st.rules) {
      bool ok = true;
      for (const auto& c : r.calls)
        if (!defined.count(c.pred)) ok = false;
      if (ok)
        keep.push_back(std::move(r));
      else
        changed = true;
    }
    st.rules = std::move(keep);
  }
  std::set<PredSym> defined;
  for (const auto& r : st.rules) defined.insert(r.head);
  auto fix = [&](const FormulaPtr& f) {
    return map_preds(f, [&](const PredAtom& a) -> FormulaPtr {
      if (!defined.count(a.pred)) return ftheory(TheoryOp::False, {});
      return fpred(a);
    });
  };
  for (auto& f : st.lhs) f = fix(f);
  for (auto& f : st.rhs) f = fix(f);
}

inline Block block_of(const FormulaPtr& f) {
  PrenexView pv = prenex_view(prenex(f, {}));
  return Block{pv.prefix, pv.conjuncts};
}

inline FormulaPtr block_formula(const Block& b) {
  return fexists(b.exvars, fsep(b.conjuncts));
}

inline void step2(State& st) {
  std::vector<Rule> rules;
  for (const auto& r : st.rules) {
    Block b;
    b.exvars = r.exvars;
    b.conjuncts.push_back(fpointsto(r.cell.src, r.cell.tgt));
    for (const auto& c : r.calls) b.conjuncts.push_back(fpred(c));
    for (const auto& t : r.theory) b.conjuncts.push_back(ftheory(t));
    for (auto& nb : step2_block(b, r.head_args)) {
      // root-unsatisfiable rule bodies can never contribute a model
      if (root_unsatisfiable(fsep(nb.conjuncts))) continue;
      Rule nr;
      nr.head = r.head;
      nr.head_args = r.head_args;
      nr.exvars = nb.exvars;
      bool have_cell = false, bad = false;
      for (const auto& c : nb.conjuncts) {
        if (auto* pt = c->as<PointsTo>()) {
          if (have_cell) bad = true;
          have_cell = true;
          nr.cell = *pt;
        } else if (auto* pa = c->as<PredAtom>()) {
          nr.calls.push_back(*pa);
        } else if (auto* ta = c->as<TheoryAtom>()) {
          nr.theory.push_back(*ta);
        }
      }
      if (!bad && have_cell) rules.push_back(std::move(nr));
    }
  }
  st.rules = std::move(rules);
  auto expand = [&](const FormulaPtr& f) {
    Block b = block_of(f);
    std::set<Var> fvset = free_vars(f);
    std::vector<Var> anchors(fvset.begin(), fvset.end());
    std::vector<FormulaPtr> out;
    for (auto& nb : step2_block(b, anchors)) out.push_back(block_formula(nb));
    return out;
  };
  std::vector<FormulaPtr> lhs, rhs;
  for (const auto& f : st.lhs)
    for (auto& g : expand(f)) lhs.push_back(g);
  for (const auto& f : st.rhs)
    for (auto& g : expand(f)) rhs.push_back(g);
  st.lhs = std::move(lhs);
  st.rhs = std::move(rhs);
}

// ---- Step 3 ---------------------------------------------------------------

// Partition pattern of an argument vector: args[i] maps to the index of the
// first position carrying the same variable.
inline std::vector<std::size_t> arg_pattern(const std::vector<Var>& args) {
  std::vector<std::size_t> pat(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    pat[i] = i;
    for (std::size_t j = 0; j < i; ++j)
      if (args[j] == args[i]) {
        pat[i] = j;
        break;
      }
  }
  return pat;
}

inline bool identity_pattern(const std::vector<std::size_t>& pat) {
  for (std::size_t i = 0; i < pat.size(); ++i)
    if (pat[i] != i) return false;
  return true;
}

inline std::string pattern_suffix(const std::vector<std::size_t>& pat) {
  std::string s = "@d";
  for (std::size_t i = 0; i < pat.size(); ++i) {
    if (i) s += "_";
    s += std::to_string(pat[i]);
  }
  return s;
}

// Collapsed predicates are tracked relative to the original predicate: a
// pattern over the original positions, composed when a collapsed atom
// collapses further. Every generated predicate is therefore one request
// away from original rules.
struct Step3 {
  struct Spec {
    PredSym orig;
    std::vector<std::size_t> pat;  // over orig positions
  };
  std::map<PredSym, Spec> specs;           // collapsed name -> spec
  std::vector<PredSym> work;               // names whose rules are pending

  static std::vector<std::size_t> kept_of(const std::vector<std::size_t>& pat) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < pat.size(); ++i)
      if (pat[i] == i) kept.push_back(i);
    return kept;
  }

  Spec spec_of(const PredSym& p) const {
    auto it = specs.find(p);
    if (it != specs.end()) return it->second;
    return Spec{p, {}};  // original predicate, identity
  }

  PredSym request(const Spec& s) {
    if (identity_pattern(s.pat)) return s.orig;
    PredSym name = s.orig + pattern_suffix(s.pat);
    if (!specs.count(name)) {
      specs[name] = s;
      work.push_back(name);
    }
    return name;
  }

  // rewrite one atom: collapse duplicate arguments, composing with the
  // predicate's existing pattern
  PredAtom collapse(const PredAtom& a) {
    auto local = arg_pattern(a.args);
    if (identity_pattern(local)) return a;
    Spec base = spec_of(a.pred);
    std::vector<std::size_t> kept =
        base.pat.empty() ? std::vector<std::size_t>{} : kept_of(base.pat);
    if (base.pat.empty()) {
      kept.resize(a.args.size());
      for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
      base.pat = kept;
    }
    // compose: original position j with base.pat[j] == j sits at local index
    // idx(j); merge classes per the local pattern
    std::vector<std::size_t> composed = base.pat;
    for (std::size_t li = 0; li < local.size(); ++li) {
      if (local[li] == li) continue;
      std::size_t oj = kept[li], otgt = kept[local[li]];
      for (std::size_t j = 0; j < composed.size(); ++j)
        if (composed[j] == oj) composed[j] = composed[otgt];
    }
    // renormalize to first-occurrence representatives
    for (std::size_t j = 0; j < composed.size(); ++j) {
      std::size_t r = composed[j];
      while (composed[r] != r) r = composed[r];
      composed[j] = r;
    }
    PredSym np = request(Spec{base.orig, composed});
    PredAtom out{np, {}};
    for (std::size_t i = 0; i < local.size(); ++i)
      if (local[i] == i) out.args.push_back(a.args[i]);
    return out;
  }
};

// Simplifies equations in a rule body under the pairwise-distinctness
// assumptions; returns false when the rule is unsatisfiable.
inline bool simplify_rule_theory(std::vector<TheoryAtom>& theory) {
  std::vector<TheoryAtom> out;
  for (const auto& t : theory) {
    if (t.op == TheoryOp::Eq) {
      if (t.args[0] == t.args[1]) continue;   // trivial
      return false;                            // callers enforce distinctness
    }
    if (t.op == TheoryOp::Neq && t.args[0] == t.args[1]) return false;
    if (t.op == TheoryOp::False) return false;
    out.push_back(t);
  }
  theory = std::move(out);
  return true;
}

inline void step3(State& st) {
  Step3 ctx;
  // collapse query atoms; equations between distinct free variables are
  // false on injective stores, trivial ones vanish
  auto fix_formula = [&](const FormulaPtr& f) -> FormulaPtr {
    Block b = block_of(f);
    std::vector<FormulaPtr> conjuncts;
    for (const auto& c : b.conjuncts) {
      if (auto* pa = c->as<PredAtom>()) {
        conjuncts.push_back(fpred(ctx.collapse(*pa)));
      } else if (auto* ta = c->as<TheoryAtom>()) {
        if (ta->op == TheoryOp::Eq) {
          if (ta->args[0] == ta->args[1]) continue;
          conjuncts.push_back(ftheory(TheoryOp::False, {}));
        } else if (ta->op == TheoryOp::Neq && ta->args[0] == ta->args[1]) {
          conjuncts.push_back(ftheory(TheoryOp::False, {}));
        } else {
          conjuncts.push_back(c);
        }
      } else {
        conjuncts.push_back(c);
      }
    }
    return fexists(b.exvars, fsep(std::move(conjuncts)));
  };
  for (auto& f : st.lhs) f = fix_formula(f);
  for (auto& f : st.rhs) f = fix_formula(f);

  std::map<PredSym, std::vector<Rule>> base;  // original rules by head
  for (const auto& r : st.rules) base[r.head].push_back(r);
  std::vector<Rule> rules;
  auto specialize = [&](const Rule& r, const std::vector<std::size_t>& pat,
                        const PredSym& np) -> std::optional<Rule> {
    Rule nr;
    nr.head = np;
    std::map<Var, Var> theta;
    for (std::size_t i = 0; i < pat.size(); ++i) {
      if (pat[i] == i)
        nr.head_args.push_back(r.head_args[i]);
      else
        theta[r.head_args[i]] = r.head_args[pat[i]];
    }
    Subst th{std::move(theta)};
    nr.exvars = r.exvars;
    nr.cell.src = th(r.cell.src);
    nr.cell.tgt = th(r.cell.tgt);
    for (const auto& c : r.calls) nr.calls.push_back(ctx.collapse(PredAtom{c.pred, th(c.args)}));
    for (const auto& t : r.theory) nr.theory.push_back(TheoryAtom{t.op, th(t.args)});
    if (!simplify_rule_theory(nr.theory)) return std::nullopt;
    // a collapsed body may force a double allocation
    std::vector<FormulaPtr> parts{fpointsto(nr.cell.src, nr.cell.tgt)};
    for (const auto& c : nr.calls) parts.push_back(fpred(c));
    if (root_unsatisfiable(fsep(parts))) return std::nullopt;
    return nr;
  };
  // identity pass over original rules (their calls may need collapsing)
  for (const auto& r : st.rules) {
    std::vector<std::size_t> id(r.head_args.size());
    for (std::size_t i = 0; i < id.size(); ++i) id[i] = i;
    if (auto nr = specialize(r, id, r.head)) rules.push_back(std::move(*nr));
  }
  std::set<PredSym> built;
  while (!ctx.work.empty()) {
    PredSym np = ctx.work.back();
    ctx.work.pop_back();
    if (!built.insert(np).second) continue;
    Step3::Spec sp = ctx.specs.at(np);
    auto it = base.find(sp.orig);
    if (it == base.end()) continue;
    for (const auto& r : it->second)
      if (auto nr = specialize(r, sp.pat, np)) rules.push_back(std::move(*nr));
    // track the sentinel position through the collapse
    auto up = st.upos.find(sp.orig);
    if (up != st.upos.end()) {
      std::size_t rep = sp.pat[up->second];
      std::size_t idx = 0;
      for (std::size_t i = 0; i < rep; ++i)
        if (sp.pat[i] == i) ++idx;
      st.upos[np] = idx;
    }
  }
  st.rules = std::move(rules);
}

// ---- Step 4 ---------------------------------------------------------------

// Appends the sentinel u to every points-to atom; in rules the sentinel is
// the rule's own threaded parameter.
inline void extend_kappa(State& st, const Var& u) {
  for (auto& r : st.rules) {
    auto it = st.upos.find(r.head);
    Var ru = (it != st.upos.end() && it->second < r.head_args.size()) ? r.head_args[it->second] : u;
    r.cell.tgt.push_back(ru);
  }
  auto fix = [&](const FormulaPtr& f) {
    std::function<FormulaPtr(const FormulaPtr&)> go = [&](const FormulaPtr& g) -> FormulaPtr {
      if (auto* p = g->as<PointsTo>()) {
        std::vector<Var> tgt = p->tgt;
        tgt.push_back(u);
        return fpointsto(p->src, tgt);
      }
      if (auto* s = g->as<FSep>()) {
        std::vector<FormulaPtr> parts;
        for (const auto& q : s->parts) parts.push_back(go(q));
        return fsep(std::move(parts));
      }
      if (auto* e = g->as<FExists>()) return fexists(e->v, go(e->body));
      return g;
    };
    return go(f);
  };
  for (auto& f : st.lhs) f = fix(f);
  for (auto& f : st.rhs) f = fix(f);
  st.kappa += 1;
}

inline void erase_diseqs(State& st) {
  for (auto& r : st.rules) {
    std::vector<TheoryAtom> keep;
    for (const auto& t : r.theory)
      if (t.op != TheoryOp::Neq) keep.push_back(t);
    r.theory = std::move(keep);
  }
  auto fix = [&](const FormulaPtr& f) {
    Block b = block_of(f);
    std::vector<FormulaPtr> conjuncts;
    for (const auto& c : b.conjuncts) {
      auto* t = c->as<TheoryAtom>();
      if (t && t->op == TheoryOp::Neq) continue;
      conjuncts.push_back(c);
    }
    return fexists(b.exvars, fsep(std::move(conjuncts)));
  };
  for (auto& f : st.lhs) f = fix(f);
  for (auto& f : st.rhs) f = fix(f);
}

// ---- dead parameter elimination -------------------------------------------

inline void drop_dead_params(State& st) {
  // position (p, i) is live when some rule of p uses the i-th parameter in
  // its cell, a theory atom, or at a live position of a call; roots stay
  std::map<PredSym, std::set<std::size_t>> live;
  for (const auto& r : st.rules) live[r.head].insert(0);
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& r : st.rules) {
      std::set<Var> hot;
      hot.insert(r.cell.src);
      for (const auto& v : r.cell.tgt) hot.insert(v);
      for (const auto& t : r.theory)
        for (const auto& v : t.args) hot.insert(v);
      for (const auto& c : r.calls) {
        for (std::size_t i : live[c.pred])
          if (i < c.args.size()) hot.insert(c.args[i]);
      }
      for (std::size_t i = 0; i < r.head_args.size(); ++i)
        if (hot.count(r.head_args[i]) && live[r.head].insert(i).second) grew = true;
    }
  }
  for (auto& r : st.rules) {
    const auto& lv = live[r.head];
    std::vector<Var> ha;
    for (std::size_t i = 0; i < r.head_args.size(); ++i)
      if (lv.count(i)) ha.push_back(r.head_args[i]);
    r.head_args = std::move(ha);
    for (auto& c : r.calls) {
      const auto& clv = live[c.pred];
      std::vector<Var> as;
      for (std::size_t i = 0; i < c.args.size(); ++i)
        if (clv.count(i)) as.push_back(c.args[i]);
      c.args = std::move(as);
    }
    std::set<Var> used;
    used.insert(r.cell.src);
    for (const auto& v : r.cell.tgt) used.insert(v);
    for (const auto& c : r.calls)
      for (const auto& v : c.args) used.insert(v);
    for (const auto& t : r.theory)
      for (const auto& v : t.args) used.insert(v);
    std::vector<Var> ex;
    for (const auto& z : r.exvars)
      if (used.count(z)) ex.push_back(z);
    r.exvars = std::move(ex);
  }
  auto fix = [&](const FormulaPtr& f) {
    return map_preds(f, [&](const PredAtom& a) {
      auto it = live.find(a.pred);
      if (it == live.end()) return fpred(a);
      PredAtom na{a.pred, {}};
      for (std::size_t i = 0; i < a.args.size(); ++i)
        if (it->second.count(i)) na.args.push_back(a.args[i]);
      return fpred(na);
    });
  };
  for (auto& f : st.lhs) f = fix(f);
  for (auto& f : st.rhs) f = fix(f);
}

}  // namespace eqdetail

// ---------------------------------------------------------------------------

// Transforms an established eq-constrained problem into an equivalent
// problem over the empty theory. Entailment status is preserved.
inline std::pair<Problem, ElimTrace> eliminate_eq(const Problem& in, bool simplify = true) {
  if (in.theory != TheoryTag::Eq) throw TheoryNotEq();
  ElimTrace trace;
  eqdetail::State st;
  st.kappa = in.sid->kappa;
  st.rules = in.sid->rules;

  std::set<Var> avoid;
  for (const auto& v : free_vars(in.lhs)) avoid.insert(v);
  for (const auto& f : in.rhs)
    for (const auto& v : free_vars(f)) avoid.insert(v);
  std::set<Var> query_fv = avoid;
  for (const auto& r : in.sid->rules) {
    for (const auto& v : r.head_args) avoid.insert(v);
    for (const auto& v : r.exvars) avoid.insert(v);
  }
  Var u = eqdetail::gensym("u", avoid);
  trace.sentinel_u = u;

  // prenex-dnf the query
  for (auto& d : dnf(in.lhs)) st.lhs.push_back(d);
  for (const auto& f : in.rhs)
    for (auto& d : dnf(f)) st.rhs.push_back(d);

  std::vector<Var> extra(query_fv.begin(), query_fv.end());
  extra.push_back(u);
  trace.added_params = extra;

  eqdetail::step1(st, extra);
  trace.after_step1 = st.snapshot(TheoryTag::Eq);

  eqdetail::step2(st);
  eqdetail::drop_empty_preds(st);
  trace.after_step2 = st.snapshot(TheoryTag::Eq);

  eqdetail::step3(st);
  eqdetail::drop_empty_preds(st);

  // kappa extension before alloc-compatibility keeps the sentinel positions
  // trackable; the two commute
  eqdetail::extend_kappa(st, u);
  {
    Problem mid = st.snapshot(TheoryTag::Eq);
    Problem compat = make_alloc_compatible(mid);
    // re-import: the query may now contain disjunctions
    st.rules = compat.sid->rules;
    st.lhs.clear();
    for (auto& d : dnf(compat.lhs)) st.lhs.push_back(d);
    st.rhs.clear();
    for (const auto& f : compat.rhs)
      for (auto& d : dnf(f)) st.rhs.push_back(d);
    trace.after_step3 = compat;
  }

  // sentinel u': an existing free variable distinct from u, or a fresh one
  std::optional<Var> uprime;
  for (const auto& v : query_fv)
    if (!(v == u)) {
      uprime = v;
      break;
    }
  if (!uprime) uprime = eqdetail::gensym("u", avoid);
  trace.sentinel_u_prime = *uprime;

  // padding: fv(query) \ alloc(gamma), per symbolic heap
  {
    std::set<Var> fvs = query_fv;
    fvs.insert(u);
    Problem cur = st.snapshot(TheoryTag::Eq);
    auto pad = [&](const FormulaPtr& f) {
      std::set<Var> alloc = alloc_of(f, *cur.sid);
      std::vector<FormulaPtr> parts{f};
      for (const auto& x : fvs) {
        if (alloc.count(x)) continue;
        std::vector<Var> tgt(st.kappa, *uprime);
        parts.push_back(fpointsto(x, tgt));
      }
      return prenex(fsep(std::move(parts)), {});
    };
    for (auto& f : st.lhs) f = pad(f);
    for (auto& f : st.rhs) f = pad(f);
  }

  eqdetail::erase_diseqs(st);
  if (simplify) eqdetail::drop_dead_params(st);
  trace.new_kappa = st.kappa;

  // drop rules unreachable from the query
  {
    std::set<PredSym> reach;
    std::function<void(const FormulaPtr&)> seed = [&](const FormulaPtr& f) {
      if (auto* pa = f->as<PredAtom>()) reach.insert(pa->pred);
      if (auto* sc = f->as<FSep>())
        for (const auto& q : sc->parts) seed(q);
      if (auto* d = f->as<FDis>())
        for (const auto& q : d->parts) seed(q);
      if (auto* e = f->as<FExists>()) seed(e->body);
    };
    for (const auto& f : st.lhs) seed(f);
    for (const auto& f : st.rhs) seed(f);
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& r : st.rules)
        if (reach.count(r.head))
          for (const auto& c : r.calls)
            if (reach.insert(c.pred).second) grew = true;
    }
    std::vector<Rule> keep;
    std::set<std::string> seen;
    for (auto& r : st.rules) {
      if (!reach.count(r.head)) continue;
      std::string key = r.head;
      for (const auto& v : r.head_args) key += "," + v.name;
      key += "<=";
      key_of(r.body(), key);
      if (seen.insert(key).second) keep.push_back(std::move(r));
    }
    st.rules = std::move(keep);
  }

  Problem out = sanitize_names(st.snapshot(TheoryTag::Empty));
  trace.after_step4 = out;
  return {out, trace};
}

}  // namespace sepentail

#endif  // SEPENTAIL_EQELIM_HPP
