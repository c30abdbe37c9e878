// Theory backends: satisfiability and entailment of theory formulas over
// the empty, equality and integer-order signatures, atom negation, and the
// well-founded order used by rule TS.
//
// A theory formula is a multiset of theory atoms (emp = empty multiset).
// natorder interprets variables over the integers; entailment is decided on
// the difference-constraint graph (x < y encoded as x - y <= -1), splitting
// disequalities into the two strict orders.

#ifndef SEPENTAIL_THEORY_HPP
#define SEPENTAIL_THEORY_HPP

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepentail/core.hpp"

namespace sepentail {

struct UnsupportedAtom : std::runtime_error {
  explicit UnsupportedAtom(const std::string& m) : std::runtime_error("unsupported theory atom: " + m) {}
};

using TheoryFormula = std::vector<TheoryAtom>;

inline bool atom_supported(const TheoryAtom& a, TheoryTag t) {
  switch (a.op) {
    case TheoryOp::False: return true;
    case TheoryOp::Eq:
    case TheoryOp::Neq: return t != TheoryTag::Empty;
    case TheoryOp::Le:
    case TheoryOp::Lt:
    case TheoryOp::Ge0: return t == TheoryTag::NatOrder;
  }
  return false;
}

inline std::set<Var> vars_of(const TheoryFormula& f) {
  std::set<Var> out;
  for (const auto& a : f)
    for (const auto& v : a.args) out.insert(v);
  return out;
}

namespace detail {

// --- equality backend: union-find over =, contradiction scan over != -----

struct UnionFind {
  std::map<Var, Var> parent;
  Var find(const Var& v) {
    auto it = parent.find(v);
    if (it == parent.end()) {
      parent[v] = v;
      return v;
    }
    if (it->second == v) return v;
    Var r = find(it->second);
    parent[v] = r;
    return r;
  }
  void merge(const Var& a, const Var& b) { parent[find(a)] = find(b); }
};

inline bool eq_sat(const TheoryFormula& chi) {
  UnionFind uf;
  for (const auto& a : chi) {
    if (a.op == TheoryOp::False) return false;
    if (a.op == TheoryOp::Eq) uf.merge(a.args[0], a.args[1]);
  }
  for (const auto& a : chi)
    if (a.op == TheoryOp::Neq && uf.find(a.args[0]) == uf.find(a.args[1])) return false;
  return true;
}

inline bool eq_entails(const TheoryFormula& chi, const TheoryFormula& xi) {
  if (!eq_sat(chi)) return true;
  UnionFind uf;
  for (const auto& a : chi)
    if (a.op == TheoryOp::Eq) uf.merge(a.args[0], a.args[1]);
  for (const auto& a : xi) {
    switch (a.op) {
      case TheoryOp::False: return false;
      case TheoryOp::Eq:
        if (uf.find(a.args[0]) != uf.find(a.args[1])) return false;
        break;
      case TheoryOp::Neq: {
        // entailed only when chi forces distinctness
        bool forced = false;
        for (const auto& d : chi)
          if (d.op == TheoryOp::Neq &&
              ((uf.find(d.args[0]) == uf.find(a.args[0]) && uf.find(d.args[1]) == uf.find(a.args[1])) ||
               (uf.find(d.args[0]) == uf.find(a.args[1]) && uf.find(d.args[1]) == uf.find(a.args[0]))))
            forced = true;
        if (!forced) return false;
        break;
      }
      default: throw UnsupportedAtom(theory_op_name(a.op));
    }
  }
  return true;
}

// --- integer order backend ------------------------------------------------

// Difference constraints x - y <= w on a dense graph; ZERO is an extra node
// so 0<=x fits the same scheme. Satisfiable iff no negative cycle.
struct OrderGraph {
  std::vector<Var> vars;
  std::map<Var, std::size_t> index;
  std::vector<std::vector<long>> w;  // w[i][j]: x_i - x_j <= w[i][j]
  static constexpr long INF = 1u << 30;

  std::size_t node(const Var& v) {
    auto it = index.find(v);
    if (it != index.end()) return it->second;
    std::size_t i = vars.size();
    vars.push_back(v);
    index[v] = i;
    for (auto& row : w) row.push_back(INF);
    w.emplace_back(vars.size(), INF);
    w[i][i] = 0;
    return i;
  }
  void add(const Var& a, const Var& b, long bound) {  // a - b <= bound
    std::size_t i = node(a), j = node(b);
    w[i][j] = std::min(w[i][j], bound);
  }
  bool closure_sat() {
    std::size_t n = vars.size();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (w[i][k] < INF && w[k][j] < INF) w[i][j] = std::min(w[i][j], w[i][k] + w[k][j]);
    for (std::size_t i = 0; i < n; ++i)
      if (w[i][i] < 0) return false;
    return true;
  }
};

inline const Var& zero_var() {
  static Var z("@zero");
  return z;
}

// Adds one non-disequality atom to the graph.
inline void order_add(OrderGraph& g, const TheoryAtom& a) {
  switch (a.op) {
    case TheoryOp::Eq:
      g.add(a.args[0], a.args[1], 0);
      g.add(a.args[1], a.args[0], 0);
      break;
    case TheoryOp::Le: g.add(a.args[0], a.args[1], 0); break;
    case TheoryOp::Lt: g.add(a.args[0], a.args[1], -1); break;
    case TheoryOp::Ge0: g.add(zero_var(), a.args[0], 0); break;
    default: break;
  }
}

// Satisfiability over the integers. Disequalities are resolved in layers: a
// pair forced equal by the closure refutes, a pair whose difference ranges
// over a finite interval containing zero is case-split, and the remaining
// pairs can always be pushed apart (one side of the difference is
// unbounded), so they are dropped. The split budget guards pathological
// inputs; exhausting it errs on the satisfiable side.
inline bool order_sat_graph(OrderGraph g, std::vector<std::pair<Var, Var>> diseqs, int budget) {
  while (true) {
    if (!g.closure_sat()) return false;
    std::vector<std::pair<Var, Var>> ambiguous;
    for (auto& [x, y] : diseqs) {
      if (!g.index.count(x) || !g.index.count(y)) continue;  // unconstrained
      std::size_t i = g.index.at(x), j = g.index.at(y);
      long d1 = g.w[i][j], d2 = g.w[j][i];  // x-y in [-d2, d1]
      if (d1 == 0 && d2 == 0) return false;  // forced equal
      if (d1 < OrderGraph::INF && d2 < OrderGraph::INF && d1 >= 0 && d2 >= 0)
        ambiguous.emplace_back(x, y);
      // otherwise the pair can be pushed apart
    }
    if (ambiguous.empty()) return true;
    if (budget <= 0) return true;  // give up splitting, assume satisfiable
    auto [x, y] = ambiguous.front();
    std::vector<std::pair<Var, Var>> rest;
    for (auto& d : diseqs)
      if (!(d.first == x && d.second == y)) rest.push_back(d);
    OrderGraph l = g;
    l.add(x, y, -1);
    if (order_sat_graph(std::move(l), rest, budget - 1)) return true;
    g.add(y, x, -1);
    diseqs = rest;
    --budget;
  }
}

inline bool order_sat(const TheoryFormula& atoms) {
  std::vector<std::pair<Var, Var>> diseqs;
  OrderGraph base;
  for (const auto& a : atoms) {
    if (a.op == TheoryOp::False) return false;
    if (a.op == TheoryOp::Neq) {
      if (a.args[0] == a.args[1]) return false;
      diseqs.emplace_back(a.args[0], a.args[1]);
      // register the nodes so forced equality is visible
      base.node(a.args[0]);
      base.node(a.args[1]);
    } else {
      order_add(base, a);
    }
  }
  return order_sat_graph(std::move(base), std::move(diseqs), 16);
}

// chi |= a  iff  chi * not(a) is unsatisfiable.
inline bool order_entails_atom(const TheoryFormula& chi, const TheoryAtom& a) {
  auto unsat_with = [&](const TheoryAtom& extra) {
    TheoryFormula f = chi;
    f.push_back(extra);
    return !order_sat(f);
  };
  switch (a.op) {
    case TheoryOp::False: return !order_sat(chi);
    case TheoryOp::Le: return unsat_with(TheoryAtom{TheoryOp::Lt, {a.args[1], a.args[0]}});
    case TheoryOp::Lt: return unsat_with(TheoryAtom{TheoryOp::Le, {a.args[1], a.args[0]}});
    case TheoryOp::Eq: return unsat_with(TheoryAtom{TheoryOp::Neq, {a.args[0], a.args[1]}});
    case TheoryOp::Neq: return unsat_with(TheoryAtom{TheoryOp::Eq, {a.args[0], a.args[1]}});
    case TheoryOp::Ge0: return unsat_with(TheoryAtom{TheoryOp::Lt, {a.args[0], zero_var()}});
  }
  return false;
}

inline bool order_entails(const TheoryFormula& chi, const TheoryFormula& xi) {
  if (!order_sat(chi)) return true;
  for (const auto& a : xi)
    if (!order_entails_atom(chi, a)) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations

inline void check_supported(const TheoryFormula& f, TheoryTag t) {
  for (const auto& a : f)
    if (!atom_supported(a, t)) throw UnsupportedAtom(theory_op_name(a.op));
}

inline bool theory_sat(const TheoryFormula& chi, TheoryTag t) {
  check_supported(chi, t);
  switch (t) {
    case TheoryTag::Empty:
      for (const auto& a : chi)
        if (a.op == TheoryOp::False) return false;
      return true;
    case TheoryTag::Eq: return detail::eq_sat(chi);
    case TheoryTag::NatOrder: return detail::order_sat(chi);
  }
  return false;
}

// chi |= xi: every store satisfying chi satisfies xi.
inline bool entails(const TheoryFormula& chi, const TheoryFormula& xi, TheoryTag t) {
  check_supported(chi, t);
  check_supported(xi, t);
  switch (t) {
    case TheoryTag::Empty: {
      bool chi_false = false;
      for (const auto& a : chi)
        if (a.op == TheoryOp::False) chi_false = true;
      if (chi_false) return true;
      for (const auto& a : xi)
        if (a.op == TheoryOp::False) return false;
      return true;
    }
    case TheoryTag::Eq: return detail::eq_entails(chi, xi);
    case TheoryTag::NatOrder: return detail::order_entails(chi, xi);
  }
  return false;
}

// chi |=^i xi: entailment over injective stores, i.e. chi * chi_inj |= xi
// with chi_inj the pairwise disequations over fvset.
inline bool entails_injective(const TheoryFormula& chi, const TheoryFormula& xi, TheoryTag t,
                              const std::set<Var>& fvset) {
  std::set<Var> vs = fvset;
  for (const auto& v : vars_of(chi)) vs.insert(v);
  for (const auto& v : vars_of(xi)) vs.insert(v);
  TheoryFormula full = chi;
  if (t != TheoryTag::Empty) {
    std::vector<Var> vv(vs.begin(), vs.end());
    for (std::size_t i = 0; i < vv.size(); ++i)
      for (std::size_t j = i + 1; j < vv.size(); ++j)
        full.push_back(TheoryAtom{TheoryOp::Neq, {vv[i], vv[j]}});
  }
  return entails(full, xi, t);
}

// Atom-wise negation; absent when the theory has no complement for it.
inline std::optional<TheoryAtom> negate_atom(const TheoryAtom& a, TheoryTag t) {
  switch (t) {
    case TheoryTag::Empty: return std::nullopt;
    case TheoryTag::Eq:
      if (a.op == TheoryOp::Eq) return TheoryAtom{TheoryOp::Neq, a.args};
      if (a.op == TheoryOp::Neq) return TheoryAtom{TheoryOp::Eq, a.args};
      return std::nullopt;
    case TheoryTag::NatOrder:
      switch (a.op) {
        case TheoryOp::Eq: return TheoryAtom{TheoryOp::Neq, a.args};
        case TheoryOp::Neq: return TheoryAtom{TheoryOp::Eq, a.args};
        case TheoryOp::Le: return TheoryAtom{TheoryOp::Lt, {a.args[1], a.args[0]}};
        case TheoryOp::Lt: return TheoryAtom{TheoryOp::Le, {a.args[1], a.args[0]}};
        default: return std::nullopt;
      }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// The order for rule TS: fewer atoms first, ties broken lexicographically on
// the sorted atom prints. Strict submultisets are smaller, and the order is
// a congruence for adding the same context on both sides.

inline std::string atom_print_key(const TheoryAtom& a) {
  std::string s = theory_op_name(a.op);
  for (const auto& v : a.args) s += " " + v.name;
  return s;
}

inline bool ts_order_less(const TheoryFormula& chi, const TheoryFormula& chi_prime) {
  if (chi.size() != chi_prime.size()) return chi.size() < chi_prime.size();
  std::vector<std::string> a, b;
  for (const auto& x : chi) a.push_back(atom_print_key(x));
  for (const auto& x : chi_prime) b.push_back(atom_print_key(x));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a < b;
}

}  // namespace sepentail

#endif  // SEPENTAIL_THEORY_HPP
