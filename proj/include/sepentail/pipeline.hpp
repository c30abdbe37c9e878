// The end-to-end entailment pipeline and the certificate machinery:
// equivalence-class dispatch for non-injective stores, preprocessing,
// per-case proving, certificate files, the re-checking kernel, and DOT
// export.

#ifndef SEPENTAIL_PIPELINE_HPP
#define SEPENTAIL_PIPELINE_HPP

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sepentail/eqelim.hpp"
#include "sepentail/frontend.hpp"
#include "sepentail/oracle.hpp"
#include "sepentail/prover.hpp"

namespace sepentail {

// ---------------------------------------------------------------------------
// Equivalence classes over the query's free variables

// All partitions of vars; each partition is rendered as a substitution onto
// class representatives (the smallest member).
inline std::vector<Subst> equivalence_cases(const std::set<Var>& vars) {
  std::vector<Var> vs(vars.begin(), vars.end());
  std::vector<std::vector<std::vector<Var>>> parts{{}};
  for (const auto& v : vs) {
    std::vector<std::vector<std::vector<Var>>> next;
    for (auto& p : parts) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        auto q = p;
        q[i].push_back(v);
        next.push_back(q);
      }
      auto q = p;
      q.push_back({v});
      next.push_back(q);
    }
    parts = std::move(next);
  }
  std::vector<Subst> out;
  std::set<std::string> seen;
  for (auto& p : parts) {
    Subst s;
    std::string key;
    for (auto& cls : p) {
      Var rep = *std::min_element(cls.begin(), cls.end());
      key += "|";
      for (auto& v : cls) {
        key += v.name + ",";
        if (!(v == rep)) s.m[v] = rep;
      }
    }
    if (seen.insert(key).second) out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// check_entailment

struct CaseResult {
  Subst merge;            // the equivalence case
  Problem prepared;       // after eqelim / alloc-compatibility
  std::vector<Sequent> sequents;
  std::vector<Verdict> verdicts;
};

struct CheckConfig {
  std::size_t fuel = 100000;
  Strategy strategy = Strategy::Terminating;
  bool backedges = true;
  std::optional<std::chrono::milliseconds> timeout;
  bool oracle_confirm = true;  // consult the oracle on inconclusive verdicts
  std::size_t oracle_locs = 6, oracle_heap = 4;
  bool simplify_eqelim = true;
};

struct CheckResult {
  Verdict::Kind aggregate = Verdict::Unknown;
  std::vector<CaseResult> cases;
  std::optional<Structure> witness;
  SearchStats stats;
  std::string note;
};

inline Problem prepare_case(const Problem& in, const Subst& merge, const CheckConfig& cfg) {
  Problem p = in;
  p.lhs = apply_subst(p.lhs, merge);
  std::vector<FormulaPtr> rhs;
  for (const auto& f : p.rhs) rhs.push_back(apply_subst(f, merge));
  p.rhs = std::move(rhs);
  if (p.theory == TheoryTag::Eq) {
    auto [out, trace] = eliminate_eq(p, cfg.simplify_eqelim);
    p = out;
  }
  return make_alloc_compatible(p);
}

inline CheckResult check_entailment(const Problem& problem, const CheckConfig& cfg = {}) {
  CheckResult out;
  bool all_valid = true, any_invalid = false, any_unknown = false;
  for (const auto& merge : equivalence_cases(free_vars(Sequent{problem.lhs, problem.rhs, problem.sid, problem.theory}))) {
    CaseResult cr;
    cr.merge = merge;
    cr.prepared = prepare_case(problem, merge, cfg);
    Strategy strat = cfg.strategy;
    if (cr.prepared.theory == TheoryTag::NatOrder && cfg.strategy == Strategy::Terminating) {
      // recursive definitions under a theory generally need the general
      // strategy; callers may still force terminating explicitly
      strat = cfg.strategy;
    }
    cr.sequents = to_prenex_dnf(cr.prepared.lhs, cr.prepared.rhs, cr.prepared.sid, cr.prepared.theory);
    for (const auto& s : cr.sequents) {
      Prover prover(strat, cfg.fuel, cfg.backedges);
      if (cfg.timeout) prover.set_timeout(*cfg.timeout);
      Verdict v = prover.prove(s);
      out.stats.expansions += v.stats.expansions;
      out.stats.backedges += v.stats.backedges;
      out.stats.rule_applications += v.stats.rule_applications;
      out.stats.distinct_sequents += v.stats.distinct_sequents;
      if (cfg.oracle_confirm && v.kind != Verdict::Valid) {
        // attach or search for a bounded countermodel
        try {
          OracleVerdict ov = oracle_entails(s, cfg.oracle_locs, cfg.oracle_heap);
          if (!ov.valid_up_to_bound) {
            v.kind = Verdict::Invalid;
            v.witness = ov.countermodel;
          } else if (v.kind == Verdict::Invalid && s.theory != TheoryTag::Empty) {
            // keep the refutation; note the lack of a bounded witness
            out.note = "refuted without bounded witness";
          } else if (v.kind == Verdict::Unknown) {
            out.note = "oracle: valid up to bound L=" + std::to_string(cfg.oracle_locs) +
                       ",K=" + std::to_string(cfg.oracle_heap);
          }
        } catch (BoundTooSmall&) {
        }
      }
      if (v.kind == Verdict::Invalid && v.witness && !out.witness) out.witness = v.witness;
      if (v.kind != Verdict::Valid) all_valid = false;
      if (v.kind == Verdict::Invalid) any_invalid = true;
      if (v.kind == Verdict::Unknown) any_unknown = true;
      cr.verdicts.push_back(std::move(v));
    }
    out.cases.push_back(std::move(cr));
  }
  out.aggregate = all_valid ? Verdict::Valid : any_invalid ? Verdict::Invalid : Verdict::Unknown;
  if (any_unknown && !any_invalid) out.aggregate = Verdict::Unknown;
  return out;
}

// ---------------------------------------------------------------------------
// Certificate serialization

namespace certio {

inline std::string encode_choice(const Choice& ch) {
  std::string s = "i=" + std::to_string(ch.i) + ";j=" + std::to_string(ch.j);
  if (!ch.x.name.empty()) s += ";x=" + ch.x.name;
  if (!ch.fresh.name.empty()) s += ";f=" + ch.fresh.name;
  if (!ch.sigma.empty()) {
    s += ";s=";
    bool first = true;
    for (const auto& [k, v] : ch.sigma) {
      if (!first) s += ",";
      s += k.name + ":" + v.name;
      first = false;
    }
  }
  auto enc_sets = [](const std::vector<std::vector<std::size_t>>& F) {
    std::string t;
    for (std::size_t a = 0; a < F.size(); ++a) {
      if (a) t += "|";
      for (std::size_t b = 0; b < F[a].size(); ++b) {
        if (b) t += ".";
        t += std::to_string(F[a][b]);
      }
      if (F[a].empty()) t += "~";  // explicit empty set
    }
    return t;
  };
  if (!ch.I.empty()) s += ";I=" + enc_sets(ch.I);
  if (!ch.J.empty()) s += ";J=" + enc_sets(ch.J);
  return s;
}

inline std::vector<std::string> split_on(const std::string& s, char c) {
  std::vector<std::string> out;
  std::string cur;
  for (char d : s) {
    if (d == c) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += d;
    }
  }
  out.push_back(cur);
  return out;
}

inline Choice decode_choice(const std::string& s) {
  Choice ch;
  auto dec_sets = [](const std::string& t) {
    std::vector<std::vector<std::size_t>> F;
    if (t.empty()) return F;
    for (const auto& grp : split_on(t, '|')) {
      std::vector<std::size_t> one;
      if (grp != "~" && !grp.empty())
        for (const auto& e : split_on(grp, '.')) one.push_back(std::stoul(e));
      F.push_back(one);
    }
    return F;
  };
  for (const auto& fld : split_on(s, ';')) {
    auto eq = fld.find('=');
    if (eq == std::string::npos) continue;
    std::string k = fld.substr(0, eq), v = fld.substr(eq + 1);
    if (k == "i") ch.i = std::stoul(v);
    else if (k == "j") ch.j = std::stoul(v);
    else if (k == "x") ch.x = Var(v);
    else if (k == "f") ch.fresh = Var(v);
    else if (k == "s") {
      for (const auto& pr : split_on(v, ',')) {
        auto c = pr.find(':');
        if (c != std::string::npos) ch.sigma[Var(pr.substr(0, c))] = Var(pr.substr(c + 1));
      }
    } else if (k == "I") ch.I = dec_sets(v);
    else if (k == "J") ch.J = dec_sets(v);
  }
  return ch;
}

}  // namespace certio

inline std::string write_certificates(const CheckResult& res, const Problem& problem, Strategy strategy) {
  std::string out = "sepentail-cert v1\n";
  out += "problem " + std::to_string(fnv1a(print(problem))) + "\n";
  out += "theory ";
  out += theory_tag_name(problem.theory);
  out += "\nstrategy ";
  out += strategy_name(strategy);
  out += "\n";
  for (const auto& cr : res.cases) {
    for (std::size_t k = 0; k < cr.sequents.size(); ++k) {
      const Verdict& v = cr.verdicts[k];
      if (v.kind != Verdict::Valid || !v.certificate) continue;
      out += "case sequent=" + print(cr.sequents[k]) + "\n";
      for (const auto& nd : v.certificate->nodes) {
        out += "node " + std::to_string(nd.id);
        if (nd.backedge) {
          out += " backedge=" + std::to_string(*nd.backedge);
        } else {
          out += " rule=";
          out += rule_name(nd.rule);
          out += " choice=" + certio::encode_choice(nd.choice);
          out += " children=";
          if (nd.children.empty()) out += "-";
          for (std::size_t c = 0; c < nd.children.size(); ++c) {
            if (c) out += ",";
            out += std::to_string(nd.children[c]);
          }
        }
        out += " sequent=" + print(nd.sequent) + "\n";
      }
      out += "endcase root=" + std::to_string(v.certificate->root) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certificate kernel

struct CertError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadInstance : CertError {
  explicit BadInstance(std::size_t node) : CertError("bad instance at node " + std::to_string(node)) {}
};
struct BadBackedge : CertError {
  explicit BadBackedge(std::size_t node) : CertError("bad backedge at node " + std::to_string(node)) {}
};
struct PremiseMismatch : CertError {
  explicit PremiseMismatch(std::size_t node) : CertError("premise mismatch at node " + std::to_string(node)) {}
};

struct ParsedCertificate {
  std::uint64_t problem_hash = 0;
  TheoryTag theory = TheoryTag::Empty;
  Strategy strategy = Strategy::Terminating;
  struct Case {
    Sequent root_sequent;
    Certificate cert;
  };
  std::vector<Case> cases;
};

inline ParsedCertificate parse_certificate(const std::string& text) {
  ParsedCertificate out;
  std::istringstream in(text);
  std::string line;
  ParsedCertificate::Case* cur = nullptr;
  std::map<std::size_t, std::size_t> idmap;  // file id -> node index
  auto parse_seq = [&](const std::string& s) {
    Parser p(s, /*internal=*/true);
    return p.parse_sequent(nullptr, out.theory);
  };
  while (std::getline(in, line)) {
    if (line.rfind("problem ", 0) == 0) {
      out.problem_hash = std::stoull(line.substr(8));
    } else if (line.rfind("theory ", 0) == 0) {
      std::string t = line.substr(7);
      out.theory = t == "eq" ? TheoryTag::Eq : t == "natorder" ? TheoryTag::NatOrder : TheoryTag::Empty;
    } else if (line.rfind("case sequent=", 0) == 0) {
      out.cases.emplace_back();
      cur = &out.cases.back();
      cur->root_sequent = parse_seq(line.substr(13));
      idmap.clear();
    } else if (line.rfind("node ", 0) == 0) {
      if (!cur) throw CertError("node outside case");
      std::size_t pos = 5;
      std::size_t sp = line.find(' ', pos);
      std::size_t id = std::stoul(line.substr(pos, sp - pos));
      ProofNode nd;
      nd.id = id;
      auto grab = [&](const std::string& k) -> std::optional<std::string> {
        std::string pat = " " + k + "=";
        auto at = line.find(pat);
        if (at == std::string::npos) return std::nullopt;
        std::size_t b = at + pat.size();
        std::size_t e = line.find(' ', b);
        if (k == "sequent") e = std::string::npos;  // to end of line
        return line.substr(b, e == std::string::npos ? e : e - b);
      };
      if (auto be = grab("backedge")) {
        nd.backedge = std::stoul(*be);
      } else {
        auto rn = grab("rule");
        if (!rn) throw CertError("node without rule");
        auto r = rule_by_name(*rn);
        if (!r) throw CertError("unknown rule " + *rn);
        nd.rule = *r;
        if (auto chs = grab("choice")) nd.choice = certio::decode_choice(*chs);
        if (auto cs = grab("children")) {
          if (*cs != "-")
            for (const auto& c : certio::split_on(*cs, ',')) nd.children.push_back(std::stoul(c));
        }
      }
      auto sq = grab("sequent");
      if (!sq) throw CertError("node without sequent");
      nd.sequent = parse_seq(*sq);
      idmap[id] = cur->cert.nodes.size();
      cur->cert.nodes.push_back(std::move(nd));
    } else if (line.rfind("endcase", 0) == 0) {
      if (!cur) throw CertError("endcase outside case");
      auto at = line.find("root=");
      std::size_t root = at == std::string::npos ? 0 : std::stoul(line.substr(at + 5));
      // renumber to indices
      auto fix = [&](std::size_t id) {
        auto it = idmap.find(id);
        if (it == idmap.end()) throw CertError("dangling node id " + std::to_string(id));
        return it->second;
      };
      for (auto& nd : cur->cert.nodes) {
        nd.id = fix(nd.id);
        for (auto& c : nd.children) c = fix(c);
        if (nd.backedge) nd.backedge = fix(*nd.backedge);
      }
      cur->cert.root = fix(root);
      cur = nullptr;
    }
  }
  return out;
}

// Re-derives every node from (sequent, rule, choice) using the calculus
// side-condition checkers only, compares premises with the children up to
// alpha-canonical equality, and validates backedges (canonical equality plus
// reachability from the target through real children edges).
inline bool verify_case(const Certificate& cert, std::size_t& bad_node, std::string& why) {
  const auto& nodes = cert.nodes;
  // ancestry: target must reach the backedge node via children edges
  auto reaches = [&](std::size_t from, std::size_t to) {
    std::set<std::size_t> seen;
    std::vector<std::size_t> work{from};
    while (!work.empty()) {
      std::size_t n = work.back();
      work.pop_back();
      if (n == to) return true;
      if (!seen.insert(n).second) continue;
      for (std::size_t c : nodes[n].children) work.push_back(c);
    }
    return false;
  };
  for (const auto& nd : nodes) {
    if (nd.backedge) {
      std::size_t t = *nd.backedge;
      if (t >= nodes.size() || nodes[t].backedge) {
        bad_node = nd.id;
        why = "backedge";
        return false;
      }
      if (canonical_key(nd.sequent) != canonical_key(nodes[t].sequent) || !reaches(t, nd.id) || t == nd.id) {
        bad_node = nd.id;
        why = "backedge";
        return false;
      }
      continue;
    }
    auto prem = derive_instance(nd.sequent, nd.rule, nd.choice);
    if (!prem) {
      bad_node = nd.id;
      why = "instance";
      return false;
    }
    if (prem->size() != nd.children.size()) {
      bad_node = nd.id;
      why = "premise";
      return false;
    }
    // multiset match up to canonical equality
    std::vector<std::string> want, have;
    for (const auto& p : *prem) want.push_back(canonical_key(p));
    for (std::size_t c : nd.children) {
      if (c >= nodes.size()) {
        bad_node = nd.id;
        why = "premise";
        return false;
      }
      have.push_back(canonical_key(nodes[c].sequent));
    }
    std::sort(want.begin(), want.end());
    std::sort(have.begin(), have.end());
    if (want != have) {
      bad_node = nd.id;
      why = "premise";
      return false;
    }
  }
  return true;
}

struct VerifyOutcome {
  bool accepted = false;
  std::string detail;
};

// Accepts iff every node of every case checks against the pipeline of the
// given problem and the case roots cover exactly the sequents the pipeline
// derives. Each case's sid comes from the pipeline case whose root it
// proves.
inline VerifyOutcome verify_certificate(const ParsedCertificate& cert, const Problem& problem,
                                        const CheckConfig& cfg = {}) {
  VerifyOutcome out;
  // pipeline sequents keyed by canonical form
  std::map<std::string, Sequent> pipeline;
  for (const auto& merge : equivalence_cases(free_vars(Sequent{problem.lhs, problem.rhs, problem.sid, problem.theory}))) {
    Problem prepared = prepare_case(problem, merge, cfg);
    for (const auto& s : to_prenex_dnf(prepared.lhs, prepared.rhs, prepared.sid, prepared.theory))
      pipeline.emplace(canonical_key(s), s);
  }
  std::set<std::string> proved;
  for (const auto& c : cert.cases) {
    std::string rk = canonical_key(c.root_sequent);
    auto it = pipeline.find(rk);
    if (it == pipeline.end()) {
      out.detail = "case proves no pipeline sequent: " + print(c.root_sequent);
      return out;
    }
    Certificate attached = c.cert;
    for (auto& nd : attached.nodes) {
      nd.sequent.sid = it->second.sid;
      nd.sequent.theory = it->second.theory;
    }
    if (canonical_key(attached.nodes[attached.root].sequent) != rk) {
      out.detail = "root sequent mismatch";
      return out;
    }
    std::size_t bad = 0;
    std::string why;
    if (!verify_case(attached, bad, why)) {
      out.detail = why + " at node " + std::to_string(bad);
      return out;
    }
    proved.insert(rk);
  }
  for (const auto& [key, s] : pipeline) {
    if (!proved.count(key)) {
      out.detail = "unproved case: " + print(s);
      return out;
    }
  }
  out.accepted = true;
  return out;
}

// ---------------------------------------------------------------------------
// DOT export

inline std::string export_dot(const Certificate& cert) {
  std::string out = "digraph proof {\n  node [shape=box,fontname=\"monospace\"];\n";
  auto esc = [](std::string s) {
    std::string t;
    for (char c : s) {
      if (c == '"' || c == '\\') t += '\\';
      t += c;
    }
    return t;
  };
  for (const auto& nd : cert.nodes) {
    std::string label = nd.backedge ? "(backedge)" : rule_name(nd.rule);
    out += "  n" + std::to_string(nd.id) + " [label=\"" + esc(print(nd.sequent)) + "\\n[" + label + "]\"];\n";
    for (std::size_t c : nd.children)
      out += "  n" + std::to_string(nd.id) + " -> n" + std::to_string(c) + ";\n";
    if (nd.backedge)
      out += "  n" + std::to_string(nd.id) + " -> n" + std::to_string(*nd.backedge) + " [style=dashed];\n";
  }
  out += "}\n";
  return out;
}

inline std::string export_dot(const CheckResult& res) {
  std::string out;
  for (const auto& cr : res.cases)
    for (const auto& v : cr.verdicts)
      if (v.certificate) out += export_dot(*v.certificate);
  return out;
}

}  // namespace sepentail

#endif  // SEPENTAIL_PIPELINE_HPP
