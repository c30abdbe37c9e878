// Core syntax: variables, formulas, substitutions, normalization and
// structural metrics for symbolic-heap entailment problems.

#ifndef SEPENTAIL_CORE_HPP
#define SEPENTAIL_CORE_HPP

#include <algorithm>
#include <cassert>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace sepentail {

// ---------------------------------------------------------------------------
// Variables

// Fresh variables live in the reserved "_v" namespace; the parser rejects
// user identifiers starting with "_v", so a fresh name can never collide
// with user input.
struct Var {
  std::string name;

  Var() = default;
  explicit Var(std::string n) : name(std::move(n)) {}

  bool is_fresh() const { return name.rfind("_v", 0) == 0; }

  bool operator==(const Var& o) const { return name == o.name; }
  bool operator!=(const Var& o) const { return name != o.name; }
  bool operator<(const Var& o) const { return name < o.name; }
};

using PredSym = std::string;

inline Var fresh_var(std::size_t i) { return Var("_v" + std::to_string(i)); }

// Picks |count| fresh variables avoiding every name in |avoid|.
inline std::vector<Var> fresh_vars(std::size_t count, const std::set<Var>& avoid) {
  std::vector<Var> out;
  std::size_t i = 0;
  while (out.size() < count) {
    Var v = fresh_var(i++);
    if (!avoid.count(v)) out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Atoms

struct PointsTo {
  Var src;
  std::vector<Var> tgt;  // length kappa, problem-wide
};

struct PredAtom {
  PredSym pred;
  std::vector<Var> args;
};

enum class TheoryOp { Eq, Neq, Le, Lt, Ge0, False };

inline const char* theory_op_name(TheoryOp op) {
  switch (op) {
    case TheoryOp::Eq: return "=";
    case TheoryOp::Neq: return "!=";
    case TheoryOp::Le: return "<=";
    case TheoryOp::Lt: return "<";
    case TheoryOp::Ge0: return "0<=";
    case TheoryOp::False: return "false";
  }
  return "?";
}

struct TheoryAtom {
  TheoryOp op;
  std::vector<Var> args;  // 2 for binary ops, 1 for Ge0, 0 for False
};

// Partially unfolded atom <frame -* inner>[params <- actuals].
// params are pairwise distinct and cover fv(frame) and inner.args;
// |params| == |actuals|. Only actuals are exposed to substitution.
struct PuAtom {
  std::vector<PredAtom> frame;
  PredAtom inner;
  std::vector<Var> params;
  std::vector<Var> actuals;
};

// ---------------------------------------------------------------------------
// Formulas

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct FEmp {};
struct FSep { std::vector<FormulaPtr> parts; };   // flattened, sorted, size >= 2
struct FDis { std::vector<FormulaPtr> parts; };   // flattened, sorted, size >= 2
struct FExists { Var v; FormulaPtr body; };

struct Formula {
  std::variant<FEmp, PointsTo, PredAtom, TheoryAtom, PuAtom, FSep, FDis, FExists> node;

  template <class T>
  const T* as() const { return std::get_if<T>(&node); }
  template <class T>
  bool is() const { return std::holds_alternative<T>(node); }
};

inline FormulaPtr mk(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

inline FormulaPtr femp() {
  static FormulaPtr e = mk(Formula{FEmp{}});
  return e;
}
inline FormulaPtr fpointsto(Var src, std::vector<Var> tgt) {
  return mk(Formula{PointsTo{std::move(src), std::move(tgt)}});
}
inline FormulaPtr fpred(PredSym p, std::vector<Var> args) {
  return mk(Formula{PredAtom{std::move(p), std::move(args)}});
}
inline FormulaPtr fpred(PredAtom a) { return mk(Formula{std::move(a)}); }
inline FormulaPtr ftheory(TheoryOp op, std::vector<Var> args) {
  return mk(Formula{TheoryAtom{op, std::move(args)}});
}
inline FormulaPtr ftheory(TheoryAtom a) { return mk(Formula{std::move(a)}); }

// Total syntactic order over formulas; drives AC normalization.
std::strong_ordering cmp(const Formula& a, const Formula& b);

inline std::strong_ordering cmp_vars(const std::vector<Var>& a, const std::vector<Var>& b) {
  if (auto c = a.size() <=> b.size(); c != 0) return c;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (auto c = a[i].name <=> b[i].name; c != 0) return c;
  return std::strong_ordering::equal;
}

inline std::strong_ordering cmp_pred(const PredAtom& a, const PredAtom& b) {
  if (auto c = a.pred <=> b.pred; c != 0) return c;
  return cmp_vars(a.args, b.args);
}

inline std::strong_ordering cmp(const FormulaPtr& a, const FormulaPtr& b) { return cmp(*a, *b); }

inline std::strong_ordering cmp(const Formula& a, const Formula& b) {
  if (auto c = a.node.index() <=> b.node.index(); c != 0) return c;
  switch (a.node.index()) {
    case 0: return std::strong_ordering::equal;
    case 1: {
      const auto &x = std::get<PointsTo>(a.node), &y = std::get<PointsTo>(b.node);
      if (auto c = x.src.name <=> y.src.name; c != 0) return c;
      return cmp_vars(x.tgt, y.tgt);
    }
    case 2: return cmp_pred(std::get<PredAtom>(a.node), std::get<PredAtom>(b.node));
    case 3: {
      const auto &x = std::get<TheoryAtom>(a.node), &y = std::get<TheoryAtom>(b.node);
      if (auto c = static_cast<int>(x.op) <=> static_cast<int>(y.op); c != 0) return c;
      return cmp_vars(x.args, y.args);
    }
    case 4: {
      const auto &x = std::get<PuAtom>(a.node), &y = std::get<PuAtom>(b.node);
      if (auto c = x.frame.size() <=> y.frame.size(); c != 0) return c;
      for (std::size_t i = 0; i < x.frame.size(); ++i)
        if (auto c = cmp_pred(x.frame[i], y.frame[i]); c != 0) return c;
      if (auto c = cmp_pred(x.inner, y.inner); c != 0) return c;
      if (auto c = cmp_vars(x.params, y.params); c != 0) return c;
      return cmp_vars(x.actuals, y.actuals);
    }
    case 5:
    case 6: {
      const auto& xs = a.node.index() == 5 ? std::get<FSep>(a.node).parts : std::get<FDis>(a.node).parts;
      const auto& ys = b.node.index() == 5 ? std::get<FSep>(b.node).parts : std::get<FDis>(b.node).parts;
      if (auto c = xs.size() <=> ys.size(); c != 0) return c;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (auto c = cmp(*xs[i], *ys[i]); c != 0) return c;
      return std::strong_ordering::equal;
    }
    case 7: {
      const auto &x = std::get<FExists>(a.node), &y = std::get<FExists>(b.node);
      if (auto c = x.v.name <=> y.v.name; c != 0) return c;
      return cmp(*x.body, *y.body);
    }
  }
  return std::strong_ordering::equal;
}

inline bool equal(const FormulaPtr& a, const FormulaPtr& b) { return cmp(*a, *b) == 0; }

// Separating conjunction, normalized: flattened, emp dropped, parts sorted.
inline FormulaPtr fsep(std::vector<FormulaPtr> parts) {
  std::vector<FormulaPtr> flat;
  for (auto& p : parts) {
    if (p->is<FEmp>()) continue;
    if (auto* s = p->as<FSep>())
      flat.insert(flat.end(), s->parts.begin(), s->parts.end());
    else
      flat.push_back(p);
  }
  if (flat.empty()) return femp();
  if (flat.size() == 1) return flat[0];
  std::sort(flat.begin(), flat.end(), [](const FormulaPtr& x, const FormulaPtr& y) { return cmp(*x, *y) < 0; });
  return mk(Formula{FSep{std::move(flat)}});
}

// Disjunction, normalized like fsep (duplicate branches collapse).
inline FormulaPtr fdis(std::vector<FormulaPtr> parts) {
  std::vector<FormulaPtr> flat;
  for (auto& p : parts) {
    if (auto* d = p->as<FDis>())
      flat.insert(flat.end(), d->parts.begin(), d->parts.end());
    else
      flat.push_back(p);
  }
  assert(!flat.empty());
  std::sort(flat.begin(), flat.end(), [](const FormulaPtr& x, const FormulaPtr& y) { return cmp(*x, *y) < 0; });
  flat.erase(std::unique(flat.begin(), flat.end(), [](const FormulaPtr& x, const FormulaPtr& y) { return cmp(*x, *y) == 0; }),
             flat.end());
  if (flat.size() == 1) return flat[0];
  return mk(Formula{FDis{std::move(flat)}});
}

std::set<Var> free_vars(const FormulaPtr& f);

// Dead binders are dropped, so quantifier prefixes stay tight.
inline FormulaPtr fexists(Var v, FormulaPtr body) {
  if (!free_vars(body).count(v)) return body;
  return mk(Formula{FExists{std::move(v), std::move(body)}});
}

inline FormulaPtr fexists(const std::vector<Var>& vs, FormulaPtr body) {
  for (auto it = vs.rbegin(); it != vs.rend(); ++it) body = fexists(*it, std::move(body));
  return body;
}

// pu-atom constructor. Parameters are extended to cover every variable of
// the frame and inner atom (uncovered ones bind to themselves), irrelevant
// positions are dropped, and the internal parameters are renamed to a
// canonical sequence so that pu-atoms equal up to internal renaming compare
// equal.
inline FormulaPtr fpu(std::vector<PredAtom> frame, PredAtom inner, std::vector<Var> params,
                      std::vector<Var> actuals) {
  assert(params.size() == actuals.size());
  {
    std::set<Var> have(params.begin(), params.end());
    auto cover = [&](const Var& v) {
      if (have.insert(v).second) {
        params.push_back(v);
        actuals.push_back(v);
      }
    };
    for (const auto& v : inner.args) cover(v);
    for (const auto& a : frame)
      for (const auto& v : a.args) cover(v);
  }
  for (int round = 0; round < 3; ++round) {
    std::set<Var> relevant(inner.args.begin(), inner.args.end());
    for (const auto& a : frame)
      for (const auto& v : a.args) relevant.insert(v);
    std::vector<Var> ps, as;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (relevant.count(params[i])) {
        ps.push_back(params[i]);
        as.push_back(actuals[i]);
      }
    }
    // first-occurrence order: inner args, then frame
    std::map<Var, std::size_t> order;
    auto note = [&](const Var& v) {
      if (!order.count(v)) order.emplace(v, order.size());
    };
    for (const auto& v : inner.args) note(v);
    std::sort(frame.begin(), frame.end(), [](const PredAtom& x, const PredAtom& y) { return cmp_pred(x, y) < 0; });
    for (const auto& a : frame)
      for (const auto& v : a.args) note(v);
    std::map<Var, Var> ren;
    for (auto& [v, idx] : order) ren.emplace(v, Var("_p" + std::to_string(idx)));
    auto ren_of = [&](const Var& v) { return ren.count(v) ? ren.at(v) : v; };
    bool changed = false;
    auto apply_atom = [&](PredAtom& a) {
      for (auto& v : a.args) {
        Var nv = ren_of(v);
        if (!(nv == v)) changed = true;
        v = nv;
      }
    };
    apply_atom(inner);
    for (auto& a : frame) apply_atom(a);
    std::vector<std::pair<Var, Var>> pairs;
    for (std::size_t i = 0; i < ps.size(); ++i) pairs.emplace_back(ren_of(ps[i]), as[i]);
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& x, const auto& y) { return x.first.name < y.first.name ||
                                                        (x.first.name == y.first.name && x.second.name < y.second.name); });
    params.clear();
    actuals.clear();
    for (auto& [p, a] : pairs) {
      params.push_back(p);
      actuals.push_back(a);
    }
    if (!changed) break;
  }
  return mk(Formula{PuAtom{std::move(frame), std::move(inner), std::move(params), std::move(actuals)}});
}

// ---------------------------------------------------------------------------
// Free variables

inline void free_vars_into(const FormulaPtr& f, std::set<Var>& bound, std::set<Var>& out) {
  if (f->is<FEmp>()) return;
  if (auto* p = f->as<PointsTo>()) {
    if (!bound.count(p->src)) out.insert(p->src);
    for (const auto& v : p->tgt)
      if (!bound.count(v)) out.insert(v);
    return;
  }
  if (auto* p = f->as<PredAtom>()) {
    for (const auto& v : p->args)
      if (!bound.count(v)) out.insert(v);
    return;
  }
  if (auto* t = f->as<TheoryAtom>()) {
    for (const auto& v : t->args)
      if (!bound.count(v)) out.insert(v);
    return;
  }
  if (auto* pu = f->as<PuAtom>()) {
    // only the actuals are visible; irrelevant positions were dropped at
    // construction time
    for (const auto& v : pu->actuals)
      if (!bound.count(v)) out.insert(v);
    return;
  }
  if (auto* s = f->as<FSep>()) {
    for (const auto& p : s->parts) free_vars_into(p, bound, out);
    return;
  }
  if (auto* d = f->as<FDis>()) {
    for (const auto& p : d->parts) free_vars_into(p, bound, out);
    return;
  }
  if (auto* e = f->as<FExists>()) {
    bool fresh = bound.insert(e->v).second;
    free_vars_into(e->body, bound, out);
    if (fresh) bound.erase(e->v);
    return;
  }
}

inline std::set<Var> free_vars(const FormulaPtr& f) {
  std::set<Var> bound, out;
  free_vars_into(f, bound, out);
  return out;
}

inline std::set<Var> all_vars(const FormulaPtr& f) {
  std::set<Var> out;
  std::set<Var> bound;
  free_vars_into(f, bound, out);
  // collect binders too
  struct {
    void operator()(const FormulaPtr& g, std::set<Var>& acc) {
      if (auto* e = g->as<FExists>()) {
        acc.insert(e->v);
        (*this)(e->body, acc);
      } else if (auto* s = g->as<FSep>()) {
        for (const auto& p : s->parts) (*this)(p, acc);
      } else if (auto* d = g->as<FDis>()) {
        for (const auto& p : d->parts) (*this)(p, acc);
      }
    }
  } walk;
  walk(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Substitution

// Finite idempotent map Var -> Var.
struct Subst {
  std::map<Var, Var> m;

  Subst() = default;
  explicit Subst(std::map<Var, Var> mm) : m(std::move(mm)) { normalize(); }

  void normalize() {
    for (auto it = m.begin(); it != m.end();)
      it = (it->first == it->second) ? m.erase(it) : std::next(it);
  }
  bool idempotent() const {
    for (const auto& [k, v] : m)
      if (m.count(v)) return false;
    return true;
  }
  Var operator()(const Var& v) const {
    auto it = m.find(v);
    return it == m.end() ? v : it->second;
  }
  std::vector<Var> operator()(const std::vector<Var>& vs) const {
    std::vector<Var> out;
    out.reserve(vs.size());
    for (const auto& v : vs) out.push_back((*this)(v));
    return out;
  }
  bool empty() const { return m.empty(); }
};

inline Subst single_subst(Var from, Var to) {
  std::map<Var, Var> m;
  m.emplace(std::move(from), std::move(to));
  return Subst(std::move(m));
}

// Capture-avoiding; inside pu-atoms only the actuals are instantiated.
inline FormulaPtr apply_subst(const FormulaPtr& f, const Subst& s) {
  if (s.empty()) return f;
  if (f->is<FEmp>()) return f;
  if (auto* p = f->as<PointsTo>()) return fpointsto(s(p->src), s(p->tgt));
  if (auto* p = f->as<PredAtom>()) return fpred(p->pred, s(p->args));
  if (auto* t = f->as<TheoryAtom>()) return ftheory(t->op, s(t->args));
  if (auto* pu = f->as<PuAtom>()) return fpu(pu->frame, pu->inner, pu->params, s(pu->actuals));
  if (auto* sc = f->as<FSep>()) {
    std::vector<FormulaPtr> parts;
    for (const auto& p : sc->parts) parts.push_back(apply_subst(p, s));
    return fsep(std::move(parts));
  }
  if (auto* d = f->as<FDis>()) {
    std::vector<FormulaPtr> parts;
    for (const auto& p : d->parts) parts.push_back(apply_subst(p, s));
    return fdis(std::move(parts));
  }
  const auto* e = f->as<FExists>();
  Subst inner = s;
  inner.m.erase(e->v);
  // rename the binder when some image would be captured
  bool capture = false;
  for (const auto& [k, v] : inner.m)
    if (v == e->v) {
      capture = true;
      break;
    }
  if (!capture) {
    if (inner.empty()) return f;
    return fexists(e->v, apply_subst(e->body, inner));
  }
  std::set<Var> avoid = all_vars(f);
  for (const auto& [k, v] : inner.m) {
    avoid.insert(k);
    avoid.insert(v);
  }
  Var nv = fresh_vars(1, avoid)[0];
  FormulaPtr body = apply_subst(e->body, single_subst(e->v, nv));
  return fexists(nv, apply_subst(body, inner));
}

// ---------------------------------------------------------------------------
// Prenex helpers

// Splits a prenex formula into its quantifier prefix and matrix conjuncts.
struct PrenexView {
  std::vector<Var> prefix;
  std::vector<FormulaPtr> conjuncts;  // matrix, flattened (atoms or emp-free)
};

inline PrenexView prenex_view(const FormulaPtr& f) {
  PrenexView pv;
  FormulaPtr cur = f;
  while (auto* e = cur->as<FExists>()) {
    pv.prefix.push_back(e->v);
    cur = e->body;
  }
  if (auto* s = cur->as<FSep>())
    pv.conjuncts = s->parts;
  else if (!cur->is<FEmp>())
    pv.conjuncts.push_back(cur);
  return pv;
}

inline FormulaPtr from_prenex(const std::vector<Var>& prefix, std::vector<FormulaPtr> conjuncts) {
  return fexists(prefix, fsep(std::move(conjuncts)));
}

// Pulls all quantifiers of a disjunction-free formula to the front. A binder
// is renamed when it collides with a free variable of the whole formula, an
// already extracted binder, or anything in |extra_avoid|.
inline FormulaPtr prenex(const FormulaPtr& f, std::set<Var> extra_avoid) {
  std::set<Var> fv = free_vars(f);
  std::set<Var> avoid = all_vars(f);
  for (const auto& v : extra_avoid) avoid.insert(v);
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
  std::vector<Var> prefix;
  auto rec = [&](const FormulaPtr& g, auto&& self) -> FormulaPtr {
    if (auto* e = g->as<FExists>()) {
      Var v = e->v;
      FormulaPtr body = e->body;
      bool clash = fv.count(v) || extra_avoid.count(v) ||
                   std::find(prefix.begin(), prefix.end(), v) != prefix.end();
      if (clash) {
        Var nv = next_fresh();
        body = apply_subst(body, single_subst(v, nv));
        v = nv;
      }
      prefix.push_back(v);
      return self(body, self);
    }
    if (auto* s = g->as<FSep>()) {
      std::vector<FormulaPtr> parts;
      for (const auto& p : s->parts) parts.push_back(self(p, self));
      return fsep(std::move(parts));
    }
    return g;
  };
  FormulaPtr matrix = rec(f, rec);
  return fexists(prefix, matrix);
}

// ---------------------------------------------------------------------------
// Disjunctive normal form

// Returns the disjuncts of f as prenex disjunction-free formulas.
inline std::vector<FormulaPtr> dnf(const FormulaPtr& f) {
  if (f->is<FEmp>() || f->is<PointsTo>() || f->is<PredAtom>() || f->is<TheoryAtom>() || f->is<PuAtom>())
    return {f};
  if (auto* d = f->as<FDis>()) {
    std::vector<FormulaPtr> out;
    for (const auto& p : d->parts)
      for (auto& q : dnf(p)) out.push_back(q);
    return out;
  }
  if (auto* e = f->as<FExists>()) {
    std::vector<FormulaPtr> out;
    for (auto& q : dnf(e->body)) out.push_back(fexists(e->v, q));
    return out;
  }
  const auto* s = f->as<FSep>();
  std::vector<std::vector<FormulaPtr>> choices;
  for (const auto& p : s->parts) choices.push_back(dnf(p));
  std::vector<FormulaPtr> out;
  std::vector<std::size_t> idx(choices.size(), 0);
  while (true) {
    std::vector<FormulaPtr> parts;
    for (std::size_t i = 0; i < choices.size(); ++i) parts.push_back(choices[i][idx[i]]);
    out.push_back(prenex(fsep(std::move(parts)), {}));
    std::size_t i = 0;
    for (; i < choices.size(); ++i) {
      if (++idx[i] < choices[i].size()) break;
      idx[i] = 0;
    }
    if (i == choices.size()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequents

enum class TheoryTag { Empty, Eq, NatOrder };

inline const char* theory_tag_name(TheoryTag t) {
  switch (t) {
    case TheoryTag::Empty: return "empty";
    case TheoryTag::Eq: return "eq";
    case TheoryTag::NatOrder: return "natorder";
  }
  return "?";
}

struct PcSid;  // defined in sid.hpp

struct Sequent {
  FormulaPtr lhs;                  // prenex, disjunction-free, pu-free
  std::vector<FormulaPtr> rhs;     // disjunction-free, kept sorted and deduped
  std::shared_ptr<const PcSid> sid;
  TheoryTag theory = TheoryTag::Empty;
};

inline std::vector<FormulaPtr> normalize_rhs(std::vector<FormulaPtr> rhs) {
  std::sort(rhs.begin(), rhs.end(), [](const FormulaPtr& a, const FormulaPtr& b) { return cmp(*a, *b) < 0; });
  rhs.erase(std::unique(rhs.begin(), rhs.end(), [](const FormulaPtr& a, const FormulaPtr& b) { return cmp(*a, *b) == 0; }),
            rhs.end());
  return rhs;
}

inline Sequent mk_sequent(FormulaPtr lhs, std::vector<FormulaPtr> rhs, std::shared_ptr<const PcSid> sid,
                          TheoryTag theory) {
  return Sequent{std::move(lhs), normalize_rhs(std::move(rhs)), std::move(sid), theory};
}

inline std::set<Var> free_vars(const Sequent& s) {
  std::set<Var> out = free_vars(s.lhs);
  for (const auto& f : s.rhs)
    for (const auto& v : free_vars(f)) out.insert(v);
  return out;
}

// Turns an arbitrary pu-free query into the equivalent set of
// disjunction-free prenex sequents.
inline std::vector<Sequent> to_prenex_dnf(const FormulaPtr& lhs, const std::vector<FormulaPtr>& rhs,
                                          std::shared_ptr<const PcSid> sid, TheoryTag theory) {
  std::vector<FormulaPtr> gamma;
  for (const auto& r : rhs)
    for (auto& d : dnf(r)) gamma.push_back(d);
  std::vector<Sequent> out;
  for (auto& l : dnf(lhs)) out.push_back(mk_sequent(l, gamma, sid, theory));
  return out;
}

// ---------------------------------------------------------------------------
// Structural metrics (sizes per the surface syntax, names weighted by length)

struct Stats {
  std::size_t size = 0;
  std::size_t width = 0;
  std::size_t nexists_prefix = 0;
};

inline std::size_t atom_size(const Formula& f) {
  if (f.is<FEmp>()) return 1;
  if (auto* p = f.as<PointsTo>()) {
    std::size_t n = p->src.name.size() + 1;
    for (const auto& v : p->tgt) n += v.name.size();
    return n;
  }
  if (auto* p = f.as<PredAtom>()) {
    std::size_t n = p->pred.size();
    for (const auto& v : p->args) n += v.name.size();
    return n;
  }
  if (auto* t = f.as<TheoryAtom>()) {
    std::size_t n = 1;
    for (const auto& v : t->args) n += v.name.size();
    return n;
  }
  if (auto* pu = f.as<PuAtom>()) {
    std::size_t n = 1;
    for (const auto& a : pu->frame) n += atom_size(*mk(Formula{a})) + 1;
    n += atom_size(*mk(Formula{pu->inner}));
    for (const auto& v : pu->params) n += v.name.size();
    for (const auto& v : pu->actuals) n += v.name.size();
    return n;
  }
  return 1;
}

inline std::size_t formula_size(const FormulaPtr& f) {
  if (auto* s = f->as<FSep>()) {
    std::size_t n = s->parts.size() - 1;  // one * between parts
    for (const auto& p : s->parts) n += formula_size(p);
    return n;
  }
  if (auto* d = f->as<FDis>()) {
    std::size_t n = d->parts.size() - 1;
    for (const auto& p : d->parts) n += formula_size(p);
    return n;
  }
  if (auto* e = f->as<FExists>()) return 1 + e->v.name.size() + formula_size(e->body);
  return atom_size(*f);
}

inline std::size_t formula_width(const FormulaPtr& f) {
  if (auto* d = f->as<FDis>()) {
    std::size_t w = 0;
    for (const auto& p : d->parts) w = std::max(w, formula_width(p));
    return w;
  }
  if (auto* s = f->as<FSep>()) {
    std::size_t w = s->parts.size() - 1;
    for (const auto& p : s->parts) w += formula_width(p);
    return w;
  }
  if (auto* e = f->as<FExists>()) return formula_width(e->body) + 1 + e->v.name.size();
  return atom_size(*f);
}

inline Stats stats(const FormulaPtr& f) {
  Stats st;
  st.size = formula_size(f);
  st.width = formula_width(f);
  FormulaPtr cur = f;
  while (auto* e = cur->as<FExists>()) {
    ++st.nexists_prefix;
    cur = e->body;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Alpha-canonicalization

// Internal key printer: compact, unambiguous, independent of the pretty
// printer in frontend.hpp.
inline void key_of(const FormulaPtr& f, std::string& out) {
  if (f->is<FEmp>()) {
    out += "e";
    return;
  }
  if (auto* p = f->as<PointsTo>()) {
    out += "m(" + p->src.name;
    for (const auto& v : p->tgt) out += "," + v.name;
    out += ")";
    return;
  }
  if (auto* p = f->as<PredAtom>()) {
    out += "p:" + p->pred + "(";
    for (const auto& v : p->args) out += v.name + ",";
    out += ")";
    return;
  }
  if (auto* t = f->as<TheoryAtom>()) {
    out += "t:";
    out += theory_op_name(t->op);
    out += "(";
    for (const auto& v : t->args) out += v.name + ",";
    out += ")";
    return;
  }
  if (auto* pu = f->as<PuAtom>()) {
    out += "w[";
    for (const auto& a : pu->frame) {
      key_of(fpred(a), out);
      out += "*";
    }
    out += "|";
    key_of(fpred(pu->inner), out);
    out += "|";
    for (const auto& v : pu->params) out += v.name + ",";
    out += "<-";
    for (const auto& v : pu->actuals) out += v.name + ",";
    out += "]";
    return;
  }
  if (auto* s = f->as<FSep>()) {
    out += "S(";
    for (const auto& p : s->parts) {
      key_of(p, out);
      out += "*";
    }
    out += ")";
    return;
  }
  if (auto* d = f->as<FDis>()) {
    out += "D(";
    for (const auto& p : d->parts) {
      key_of(p, out);
      out += "|";
    }
    out += ")";
    return;
  }
  const auto* e = f->as<FExists>();
  out += "E" + e->v.name + ".";
  key_of(e->body, out);
}

inline std::string key_of(const Sequent& s) {
  std::string out;
  key_of(s.lhs, out);
  out += " |- ";
  for (const auto& f : s.rhs) {
    key_of(f, out);
    out += " ; ";
  }
  return out;
}

// Renames every variable (free and bound) of the sequent by first occurrence
// in a left-to-right traversal of the sorted structure, then re-sorts, until
// a fixpoint or the iteration bound is hit. Canonization is best effort:
// alpha-equivalent sequents usually share a canonical form, never the other
// way round.
inline Sequent alpha_canonical(const Sequent& s, int max_iters = 8) {
  auto rename_all = [](const Sequent& q) {
    std::map<Var, Var> ren;
    // free variables first, in name order: their relative order is
    // semantic (argument swaps must not collapse)
    for (const auto& v : free_vars(q))
      ren.emplace(v, Var("$" + std::to_string(ren.size())));
    auto touch = [&](const Var& v) {
      if (!ren.count(v)) ren.emplace(v, Var("$" + std::to_string(ren.size())));
    };
    auto walk = [&](const FormulaPtr& f, auto&& self) -> void {
      if (auto* p = f->as<PointsTo>()) {
        touch(p->src);
        for (const auto& v : p->tgt) touch(v);
      } else if (auto* p = f->as<PredAtom>()) {
        for (const auto& v : p->args) touch(v);
      } else if (auto* t = f->as<TheoryAtom>()) {
        for (const auto& v : t->args) touch(v);
      } else if (auto* pu = f->as<PuAtom>()) {
        for (const auto& v : pu->actuals) touch(v);
      } else if (auto* sc = f->as<FSep>()) {
        for (const auto& p : sc->parts) self(p, self);
      } else if (auto* d = f->as<FDis>()) {
        for (const auto& p : d->parts) self(p, self);
      } else if (auto* e = f->as<FExists>()) {
        touch(e->v);
        self(e->body, self);
      }
    };
    walk(q.lhs, walk);
    for (const auto& f : q.rhs) walk(f, walk);
    // apply; binders renamed directly (all names map injectively)
    auto app = [&](const FormulaPtr& f, auto&& self) -> FormulaPtr {
      auto r = [&](const Var& v) { return ren.count(v) ? ren.at(v) : v; };
      if (f->is<FEmp>()) return f;
      if (auto* p = f->as<PointsTo>()) {
        std::vector<Var> tg;
        for (const auto& v : p->tgt) tg.push_back(r(v));
        return fpointsto(r(p->src), tg);
      }
      if (auto* p = f->as<PredAtom>()) {
        std::vector<Var> as;
        for (const auto& v : p->args) as.push_back(r(v));
        return fpred(p->pred, as);
      }
      if (auto* t = f->as<TheoryAtom>()) {
        std::vector<Var> as;
        for (const auto& v : t->args) as.push_back(r(v));
        return ftheory(t->op, as);
      }
      if (auto* pu = f->as<PuAtom>()) {
        std::vector<Var> as;
        for (const auto& v : pu->actuals) as.push_back(r(v));
        return fpu(pu->frame, pu->inner, pu->params, as);
      }
      if (auto* sc = f->as<FSep>()) {
        std::vector<FormulaPtr> ps;
        for (const auto& p : sc->parts) ps.push_back(self(p, self));
        return fsep(std::move(ps));
      }
      if (auto* d = f->as<FDis>()) {
        std::vector<FormulaPtr> ps;
        for (const auto& p : d->parts) ps.push_back(self(p, self));
        return fdis(std::move(ps));
      }
      const auto* e = f->as<FExists>();
      return mk(Formula{FExists{r(e->v), self(e->body, self)}});
    };
    Sequent out = q;
    out.lhs = app(q.lhs, app);
    std::vector<FormulaPtr> rhs;
    for (const auto& f : q.rhs) rhs.push_back(app(f, app));
    out.rhs = normalize_rhs(std::move(rhs));
    return out;
  };
  Sequent cur = s;
  cur.rhs = normalize_rhs(cur.rhs);
  std::string prev = key_of(cur);
  for (int i = 0; i < max_iters; ++i) {
    Sequent next = rename_all(cur);
    std::string k = key_of(next);
    if (k == prev) return next;
    prev = k;
    cur = std::move(next);
  }
  return cur;
}

inline std::string canonical_key(const Sequent& s) { return key_of(alpha_canonical(s)); }

// FNV-1a, used for stable problem hashes in certificates.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sepentail

#endif  // SEPENTAIL_CORE_HPP
