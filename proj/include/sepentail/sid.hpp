// pc-SID validation and static analysis: progress/connectivity checks, the
// establishment test, alloc and vart fixpoints, dependency preorder,
// alloc-compatibility transformation, roots.

#ifndef SEPENTAIL_SID_HPP
#define SEPENTAIL_SID_HPP

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepentail/core.hpp"

namespace sepentail {

struct SidError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProgressViolation : SidError {
  explicit ProgressViolation(const std::string& m) : SidError("progress violation: " + m) {}
};
struct ConnectivityViolation : SidError {
  explicit ConnectivityViolation(const std::string& m) : SidError("connectivity violation: " + m) {}
};
struct EstablishmentUnknown : SidError {
  explicit EstablishmentUnknown(const std::string& m) : SidError("establishment not confirmed: " + m) {}
};

// One inductive rule, body decomposed per the progress condition:
// head(args) <= exists exvars. cell * calls * theory
struct Rule {
  PredSym head;
  std::vector<Var> head_args;  // pairwise distinct
  std::vector<Var> exvars;
  PointsTo cell;
  std::vector<PredAtom> calls;
  std::vector<TheoryAtom> theory;

  FormulaPtr body() const {
    std::vector<FormulaPtr> parts;
    parts.push_back(fpointsto(cell.src, cell.tgt));
    for (const auto& c : calls) parts.push_back(fpred(c));
    for (const auto& t : theory) parts.push_back(ftheory(t));
    return fexists(exvars, fsep(std::move(parts)));
  }
};

struct PcSid {
  std::vector<Rule> rules;
  std::size_t kappa = 0;
  std::map<PredSym, std::size_t> arity;
  std::map<PredSym, std::vector<std::size_t>> rules_of;  // indices into rules
  std::map<PredSym, std::set<std::size_t>> alloc;        // 0-based positions
  bool alloc_compatible = false;
  std::map<PredSym, std::set<std::size_t>> vart;         // 0-based positions
  std::map<PredSym, std::set<PredSym>> depends;          // reflexive-transitive
  std::map<PredSym, std::set<PredSym>> depends_strict;   // >= 1 rule step
  std::size_t max_rule_exvars = 0;

  std::size_t ar(const PredSym& p) const {
    auto it = arity.find(p);
    if (it == arity.end()) throw SidError("unknown predicate: " + p);
    return it->second;
  }
  bool declared(const PredSym& p) const { return arity.count(p) != 0; }
  const std::set<std::size_t>& alloc_of(const PredSym& p) const {
    static const std::set<std::size_t> none;
    auto it = alloc.find(p);
    return it == alloc.end() ? none : it->second;
  }
  const std::set<std::size_t>& vart_of_pred(const PredSym& p) const {
    static const std::set<std::size_t> none;
    auto it = vart.find(p);
    return it == vart.end() ? none : it->second;
  }
};

// A parse-level problem: validated sid + theory + entailment query.
struct Problem {
  std::shared_ptr<const PcSid> sid;
  TheoryTag theory = TheoryTag::Empty;
  FormulaPtr lhs;
  std::vector<FormulaPtr> rhs;
};

namespace detail {

// alloc(f) under a candidate assignment; f disjunction-free and pu-free.
inline std::set<Var> alloc_of_formula(const FormulaPtr& f, const std::map<PredSym, std::set<std::size_t>>& alloc,
                                      std::set<Var>& bound) {
  std::set<Var> out;
  if (auto* p = f->as<PointsTo>()) {
    if (!bound.count(p->src)) out.insert(p->src);
  } else if (auto* p = f->as<PredAtom>()) {
    auto it = alloc.find(p->pred);
    if (it != alloc.end())
      for (std::size_t i : it->second)
        if (i < p->args.size() && !bound.count(p->args[i])) out.insert(p->args[i]);
  } else if (auto* s = f->as<FSep>()) {
    for (const auto& q : s->parts)
      for (const auto& v : alloc_of_formula(q, alloc, bound)) out.insert(v);
  } else if (auto* e = f->as<FExists>()) {
    bool fresh = bound.insert(e->v).second;
    out = alloc_of_formula(e->body, alloc, bound);
    if (fresh) bound.erase(e->v);
  }
  return out;
}

}  // namespace detail

// Must-allocated free variables of a disjunction-free pu-free formula.
inline std::set<Var> alloc_of(const FormulaPtr& f, const PcSid& sid) {
  std::set<Var> bound;
  return detail::alloc_of_formula(f, sid.alloc, bound);
}

// Greatest-fixpoint must-allocate positions, plus the compatibility verdict.
inline std::pair<std::map<PredSym, std::set<std::size_t>>, bool> compute_alloc(
    const std::vector<Rule>& rules, const std::map<PredSym, std::size_t>& arity) {
  std::map<PredSym, std::set<std::size_t>> alloc;
  for (const auto& [p, n] : arity) {
    std::set<std::size_t> all;
    for (std::size_t i = 0; i < n; ++i) all.insert(i);
    alloc[p] = all;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<PredSym, std::set<std::size_t>> next;
    bool first;
    std::map<PredSym, bool> seen;
    for (const auto& [p, n] : arity) (void)n, seen[p] = false;
    for (const auto& r : rules) {
      std::set<Var> bound;
      std::set<Var> body_alloc = detail::alloc_of_formula(r.body(), alloc, bound);
      std::set<std::size_t> pos;
      for (std::size_t i = 0; i < r.head_args.size(); ++i)
        if (body_alloc.count(r.head_args[i])) pos.insert(i);
      first = !seen[r.head];
      seen[r.head] = true;
      if (first)
        next[r.head] = pos;
      else {
        std::set<std::size_t> inter;
        for (std::size_t i : next[r.head])
          if (pos.count(i)) inter.insert(i);
        next[r.head] = inter;
      }
    }
    for (auto& [p, s] : next)
      if (s != alloc[p]) {
        alloc[p] = s;
        changed = true;
      }
  }
  // compatible iff every rule realizes exactly the fixpoint set of its head
  bool compatible = true;
  for (const auto& r : rules) {
    std::set<Var> bound;
    std::set<Var> body_alloc = detail::alloc_of_formula(r.body(), alloc, bound);
    std::set<std::size_t> pos;
    for (std::size_t i = 0; i < r.head_args.size(); ++i)
      if (body_alloc.count(r.head_args[i])) pos.insert(i);
    if (pos != alloc[r.head]) compatible = false;
  }
  return {alloc, compatible};
}

// Least-fixpoint positions that may reach a theory atom.
inline std::map<PredSym, std::set<std::size_t>> compute_vart(const std::vector<Rule>& rules,
                                                             const std::map<PredSym, std::size_t>& arity) {
  std::map<PredSym, std::set<std::size_t>> vt;
  for (const auto& [p, n] : arity) (void)n, vt[p] = {};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : rules) {
      std::set<Var> hot;
      for (const auto& t : r.theory)
        for (const auto& v : t.args) hot.insert(v);
      for (const auto& c : r.calls)
        for (std::size_t i : vt[c.pred])
          if (i < c.args.size()) hot.insert(c.args[i]);
      for (std::size_t i = 0; i < r.head_args.size(); ++i)
        if (hot.count(r.head_args[i]) && vt[r.head].insert(i).second) changed = true;
    }
  }
  return vt;
}

// Validates progress, connectivity and (sufficient test) establishment, and
// fills in all static metadata. Establishment failures throw unless
// assume_established is set.
inline std::shared_ptr<const PcSid> validate_pcsid(std::vector<Rule> rules, std::size_t kappa,
                                                   bool assume_established = false) {
  auto sid = std::make_shared<PcSid>();
  sid->kappa = kappa;
  for (const auto& r : rules) {
    auto it = sid->arity.find(r.head);
    if (it == sid->arity.end())
      sid->arity[r.head] = r.head_args.size();
    else if (it->second != r.head_args.size())
      throw SidError("inconsistent arity for " + r.head);
  }
  for (const auto& r : rules)
    for (const auto& c : r.calls) {
      if (!sid->arity.count(c.pred)) throw SidError("undeclared predicate in rule body: " + c.pred);
      if (sid->arity[c.pred] != c.args.size()) throw SidError("arity mismatch for " + c.pred);
    }
  // progress and connectivity
  for (const auto& r : rules) {
    if (r.head_args.empty()) throw ProgressViolation(r.head + " has no arguments");
    std::set<Var> distinct(r.head_args.begin(), r.head_args.end());
    if (distinct.size() != r.head_args.size()) throw SidError("rule head of " + r.head + " repeats a variable");
    if (!(r.cell.src == r.head_args[0]))
      throw ProgressViolation("rule of " + r.head + " does not allocate its first argument");
    if (r.cell.tgt.size() != kappa) throw SidError("rule of " + r.head + " has wrong record width");
    std::set<Var> targets(r.cell.tgt.begin(), r.cell.tgt.end());
    for (const auto& c : r.calls) {
      if (c.args.empty() || !targets.count(c.args[0]))
        throw ConnectivityViolation("call to " + c.pred + " in rule of " + r.head);
    }
  }
  sid->rules = std::move(rules);
  for (std::size_t i = 0; i < sid->rules.size(); ++i) sid->rules_of[sid->rules[i].head].push_back(i);
  for (const auto& r : sid->rules) sid->max_rule_exvars = std::max(sid->max_rule_exvars, r.exvars.size());

  auto [alloc, compatible] = compute_alloc(sid->rules, sid->arity);
  sid->alloc = std::move(alloc);
  sid->alloc_compatible = compatible;
  sid->vart = compute_vart(sid->rules, sid->arity);

  // dependency preorder
  for (const auto& [p, n] : sid->arity) (void)n, sid->depends[p].insert(p);
  for (const auto& r : sid->rules)
    for (const auto& c : r.calls) {
      sid->depends[r.head].insert(c.pred);
      sid->depends_strict[r.head].insert(c.pred);
    }
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [p, ds] : sid->depends_strict) {
      std::set<PredSym> add;
      for (const auto& q : ds) {
        auto it = sid->depends_strict.find(q);
        if (it != sid->depends_strict.end())
          for (const auto& rc : it->second)
            if (!ds.count(rc)) add.insert(rc);
      }
      if (!add.empty()) {
        changed = true;
        for (const auto& a : add) ds.insert(a);
      }
    }
  }
  for (const auto& [p, ds] : sid->depends_strict)
    for (const auto& q : ds) sid->depends[p].insert(q);

  // establishment: every existential must be equation-linked to a variable
  // at a must-allocated position of the body (sound, incomplete)
  for (const auto& r : sid->rules) {
    std::set<Var> established;
    established.insert(r.cell.src);
    for (const auto& c : r.calls) {
      const auto& a = sid->alloc_of(c.pred);
      if (!c.args.empty()) established.insert(c.args[0]);
      for (std::size_t i : a)
        if (i < c.args.size()) established.insert(c.args[i]);
    }
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& t : r.theory) {
        if (t.op != TheoryOp::Eq || t.args.size() != 2) continue;
        bool l = established.count(t.args[0]), rr = established.count(t.args[1]);
        if (l != rr) {
          established.insert(l ? t.args[1] : t.args[0]);
          grew = true;
        }
      }
    }
    for (const auto& z : r.exvars)
      if (!established.count(z)) {
        if (!assume_established)
          throw EstablishmentUnknown("rule of " + r.head + ", variable " + z.name);
      }
  }
  return sid;
}

// p occurs-in-or-is-reachable-from the formula under >=_R.
inline std::set<PredSym> preds_reachable(const FormulaPtr& f, const PcSid& sid) {
  std::set<PredSym> out;
  std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& g) {
    if (auto* p = g->as<PredAtom>()) {
      out.insert(p->pred);
    } else if (auto* pu = g->as<PuAtom>()) {
      out.insert(pu->inner.pred);
      for (const auto& a : pu->frame) out.insert(a.pred);
    } else if (auto* s = g->as<FSep>()) {
      for (const auto& p : s->parts) walk(p);
    } else if (auto* d = g->as<FDis>()) {
      for (const auto& p : d->parts) walk(p);
    } else if (auto* e = g->as<FExists>()) {
      walk(e->body);
    }
  };
  walk(f);
  std::set<PredSym> closed;
  for (const auto& p : out) {
    closed.insert(p);
    auto it = sid.depends.find(p);
    if (it != sid.depends.end())
      for (const auto& q : it->second) closed.insert(q);
  }
  return closed;
}

// True iff no predicate reachable from the left-hand side depends
// recursively on itself.
inline bool is_left_terminating(const Sequent& s) {
  if (!s.sid) return true;
  for (const auto& p : preds_reachable(s.lhs, *s.sid)) {
    auto it = s.sid->depends_strict.find(p);
    if (it != s.sid->depends_strict.end() && it->second.count(p)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Roots

struct Roots {
  std::vector<Var> main;  // multiset
  std::vector<Var> aux;   // multiset
};

// Main roots: points-to sources, first arguments of predicate atoms and the
// instantiated first argument of a pu-atom's inner atom. Auxiliary roots:
// instantiated first arguments of pu-frame atoms. Only free occurrences
// count.
inline void roots_into(const FormulaPtr& f, std::set<Var>& bound, Roots& out) {
  if (auto* p = f->as<PointsTo>()) {
    if (!bound.count(p->src)) out.main.push_back(p->src);
  } else if (auto* p = f->as<PredAtom>()) {
    if (!p->args.empty() && !bound.count(p->args[0])) out.main.push_back(p->args[0]);
  } else if (auto* pu = f->as<PuAtom>()) {
    std::map<Var, Var> theta;
    for (std::size_t i = 0; i < pu->params.size(); ++i) theta[pu->params[i]] = pu->actuals[i];
    auto img = [&](const Var& v) { return theta.count(v) ? theta.at(v) : v; };
    if (!pu->inner.args.empty()) {
      Var r = img(pu->inner.args[0]);
      if (!bound.count(r)) out.main.push_back(r);
    }
    for (const auto& a : pu->frame)
      if (!a.args.empty()) {
        Var r = img(a.args[0]);
        if (!bound.count(r)) out.aux.push_back(r);
      }
  } else if (auto* s = f->as<FSep>()) {
    for (const auto& p : s->parts) roots_into(p, bound, out);
  } else if (auto* d = f->as<FDis>()) {
    for (const auto& p : d->parts) roots_into(p, bound, out);
  } else if (auto* e = f->as<FExists>()) {
    bool fresh = bound.insert(e->v).second;
    roots_into(e->body, bound, out);
    if (fresh) bound.erase(e->v);
  }
}

inline Roots roots_of(const FormulaPtr& f) {
  Roots r;
  std::set<Var> bound;
  roots_into(f, bound, r);
  std::sort(r.main.begin(), r.main.end());
  std::sort(r.aux.begin(), r.aux.end());
  return r;
}

// A variable occurring twice among the main roots forces a double
// allocation.
inline bool root_unsatisfiable(const FormulaPtr& f) {
  Roots r = roots_of(f);
  for (std::size_t i = 1; i < r.main.size(); ++i)
    if (r.main[i] == r.main[i - 1]) return true;
  return false;
}

// vart over formulas: variables that may reach a theory atom in some
// unfolding. For pu-atoms the inner atom (instantiated) is used.
inline void vart_into(const FormulaPtr& f, const PcSid& sid, std::set<Var>& bound, std::set<Var>& out) {
  if (auto* t = f->as<TheoryAtom>()) {
    for (const auto& v : t->args)
      if (!bound.count(v)) out.insert(v);
  } else if (auto* p = f->as<PredAtom>()) {
    for (std::size_t i : sid.vart_of_pred(p->pred))
      if (i < p->args.size() && !bound.count(p->args[i])) out.insert(p->args[i]);
  } else if (auto* pu = f->as<PuAtom>()) {
    std::map<Var, Var> theta;
    for (std::size_t i = 0; i < pu->params.size(); ++i) theta[pu->params[i]] = pu->actuals[i];
    auto img = [&](const Var& v) { return theta.count(v) ? theta.at(v) : v; };
    for (std::size_t i : sid.vart_of_pred(pu->inner.pred))
      if (i < pu->inner.args.size()) {
        Var v = img(pu->inner.args[i]);
        if (!bound.count(v)) out.insert(v);
      }
  } else if (auto* s = f->as<FSep>()) {
    for (const auto& p : s->parts) vart_into(p, sid, bound, out);
  } else if (auto* d = f->as<FDis>()) {
    for (const auto& p : d->parts) vart_into(p, sid, bound, out);
  } else if (auto* e = f->as<FExists>()) {
    bool fresh = bound.insert(e->v).second;
    vart_into(e->body, sid, bound, out);
    if (fresh) bound.erase(e->v);
  }
}

inline std::set<Var> vart_of(const FormulaPtr& f, const PcSid& sid) {
  std::set<Var> bound, out;
  vart_into(f, sid, bound, out);
  return out;
}

// ---------------------------------------------------------------------------
// Alloc-compatibility transformation

namespace detail {

inline std::string variant_name(const PredSym& base, const std::set<std::size_t>& positions) {
  std::string n = base + "@{";
  bool first = true;
  for (std::size_t i : positions) {
    if (!first) n += ",";
    n += std::to_string(i + 1);
    first = false;
  }
  return n + "}";
}

}  // namespace detail

// Rewrites the problem over variant predicates p@{..} so that alloc is
// unfolding-invariant. Only variants reachable from the query (and
// realizable by at least one rule chain) are generated; every predicate atom
// in the query becomes the disjunction of its realizable variants.
inline Problem make_alloc_compatible(const Problem& in) {
  const PcSid& sid = *in.sid;
  if (sid.alloc_compatible) return in;

  // Realizable variants: least fixpoint over (pred, annotation of calls).
  // variant_rules[(p,A)] = specialized rules.
  using Key = std::pair<PredSym, std::set<std::size_t>>;
  std::map<Key, std::vector<Rule>> variant_rules;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& r : sid.rules) {
      // enumerate annotations of each call by known variants
      std::vector<std::vector<Key>> options;
      bool feasible = true;
      for (const auto& c : r.calls) {
        std::vector<Key> opt;
        for (const auto& [k, v] : variant_rules)
          if (k.first == c.pred) opt.push_back(k);
        if (opt.empty()) feasible = false;
        options.push_back(std::move(opt));
      }
      if (!feasible && !r.calls.empty()) continue;
      std::vector<std::size_t> idx(options.size(), 0);
      while (true) {
        Rule nr = r;
        std::set<Var> allocated;
        allocated.insert(r.cell.src);
        for (std::size_t ci = 0; ci < nr.calls.size(); ++ci) {
          const Key& k = options[ci][idx[ci]];
          nr.calls[ci].pred = detail::variant_name(k.first, k.second);
          for (std::size_t i : k.second)
            if (i < nr.calls[ci].args.size()) allocated.insert(nr.calls[ci].args[i]);
        }
        std::set<std::size_t> head_pos;
        for (std::size_t i = 0; i < r.head_args.size(); ++i)
          if (allocated.count(r.head_args[i])) head_pos.insert(i);
        Key hk{r.head, head_pos};
        nr.head = detail::variant_name(r.head, head_pos);
        auto& bucket = variant_rules[hk];
        bool dup = false;
        for (const auto& old : bucket)
          if (equal(old.body(), nr.body()) && old.head_args == nr.head_args) dup = true;
        if (!dup) {
          bucket.push_back(nr);
          grew = true;
        }
        std::size_t i = 0;
        for (; i < idx.size(); ++i) {
          if (++idx[i] < options[i].size()) break;
          idx[i] = 0;
        }
        if (i == idx.size()) break;
      }
    }
  }

  // replace every predicate atom in the query by the disjunction of its
  // realizable variants
  std::set<Key> used;
  std::function<FormulaPtr(const FormulaPtr&)> rewrite = [&](const FormulaPtr& f) -> FormulaPtr {
    if (auto* p = f->as<PredAtom>()) {
      std::vector<FormulaPtr> alts;
      for (const auto& [k, v] : variant_rules)
        if (k.first == p->pred) {
          used.insert(k);
          alts.push_back(fpred(detail::variant_name(k.first, k.second), p->args));
        }
      if (alts.empty()) return ftheory(TheoryOp::False, {});  // no realizable unfolding
      return fdis(std::move(alts));
    }
    if (auto* s = f->as<FSep>()) {
      std::vector<FormulaPtr> parts;
      for (const auto& p : s->parts) parts.push_back(rewrite(p));
      return fsep(std::move(parts));
    }
    if (auto* d = f->as<FDis>()) {
      std::vector<FormulaPtr> parts;
      for (const auto& p : d->parts) parts.push_back(rewrite(p));
      return fdis(std::move(parts));
    }
    if (auto* e = f->as<FExists>()) return fexists(e->v, rewrite(e->body));
    return f;
  };
  Problem out;
  out.theory = in.theory;
  out.lhs = rewrite(in.lhs);
  for (const auto& r : in.rhs) out.rhs.push_back(rewrite(r));

  // keep only variants reachable from the query
  bool more = true;
  while (more) {
    more = false;
    std::set<Key> next = used;
    for (const auto& k : used) {
      auto it = variant_rules.find(k);
      if (it == variant_rules.end()) continue;
      for (const auto& r : it->second)
        for (const auto& c : r.calls) {
          // c.pred is already a variant name; find its key
          for (const auto& [k2, v2] : variant_rules)
            if (detail::variant_name(k2.first, k2.second) == c.pred && !next.count(k2)) {
              next.insert(k2);
              more = true;
            }
        }
    }
    used = std::move(next);
  }
  std::vector<Rule> rules;
  for (const auto& k : used) {
    auto it = variant_rules.find(k);
    if (it != variant_rules.end())
      for (const auto& r : it->second) rules.push_back(r);
  }
  out.sid = validate_pcsid(std::move(rules), sid.kappa, /*assume_established=*/true);
  return out;
}

}  // namespace sepentail

#endif  // SEPENTAIL_SID_HPP
