// Command-line front end: check entailments, run the preprocessing passes,
// query the bounded-model oracle, verify certificates, and fuzz the prover
// against the oracle.
//
// Exit codes: 0 valid/agreement, 1 invalid, 2 unknown, 3 usage or parse
// error, 4 fuzz disagreement.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sepentail/fuzz.hpp"
#include "sepentail/pipeline.hpp"

using namespace sepentail;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string show_structure(const Structure& st) {
  std::string s = "store {";
  bool first = true;
  for (const auto& [v, l] : st.store) {
    if (!first) s += ", ";
    s += v.name + "=" + std::to_string(l);
    first = false;
  }
  s += "} heap {";
  first = true;
  for (const auto& [l, t] : st.heap) {
    if (!first) s += ", ";
    s += std::to_string(l) + "->(";
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(t[i]);
    }
    s += ")";
    first = false;
  }
  return s + "}";
}

std::size_t env_fuel(std::size_t fallback) {
  if (const char* e = std::getenv("SEPENTAIL_FUEL")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(e, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sepentail: entailment checking for separation logic with inductive definitions"};
  app.require_subcommand(1);

  std::string file, out_path, cert_path, dot_path, trace_dir, cert_file;
  std::string strategy_name_opt = "terminating";
  std::size_t fuel = 100000;
  std::size_t locs = 6, heap = 4;
  bool all_models = false;
  bool no_simplify = false;
  bool assume_established = false;
  bool no_backedges = false;
  bool eliminate_eq_flag = false;
  bool alloc_compat_flag = false;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::size_t count = 100;
  long timeout_ms = 0;

  auto* check = app.add_subcommand("check", "decide an entailment problem");
  check->add_option("file", file, "problem file")->required();
  check->add_option("--fuel", fuel, "rule application budget");
  check->add_option("--strategy", strategy_name_opt, "terminating|general");
  check->add_option("--cert", cert_path, "write the certificate here");
  check->add_option("--dot", dot_path, "write a DOT rendering here");
  check->add_option("--locations", locs, "oracle location bound");
  check->add_option("--heap", heap, "oracle heap bound");
  check->add_option("--timeout-ms", timeout_ms, "wall clock budget per sequent");
  check->add_flag("--no-backedges", no_backedges, "disable cyclic closure");
  check->add_flag("--assume-established", assume_established, "waive the establishment check");
  check->add_option("--jobs", jobs, "oracle worker threads");

  auto* pre = app.add_subcommand("preprocess", "run the preprocessing passes");
  pre->add_option("file", file, "problem file")->required();
  pre->add_option("--out", out_path, "write the transformed problem here");
  pre->add_flag("--eliminate-eq", eliminate_eq_flag, "run equality elimination");
  pre->add_flag("--alloc-compat", alloc_compat_flag, "make the system alloc-compatible");
  pre->add_flag("--no-simplify", no_simplify, "keep dead parameters");
  pre->add_option("--trace", trace_dir, "dump the intermediate problems into this directory");
  pre->add_flag("--assume-established", assume_established, "waive the establishment check");

  auto* orc = app.add_subcommand("oracle", "bounded-model entailment check");
  orc->add_option("file", file, "problem file")->required();
  orc->add_option("--locations", locs, "location bound");
  orc->add_option("--heap", heap, "heap bound");
  orc->add_flag("--all-models", all_models, "list the bounded models of the left-hand side");
  orc->add_option("--jobs", jobs, "worker threads");
  orc->add_flag("--assume-established", assume_established, "waive the establishment check");

  auto* ver = app.add_subcommand("verify", "re-check a certificate with the kernel");
  ver->add_option("cert", cert_file, "certificate file")->required();
  ver->add_option("file", file, "problem file")->required();

  auto* fz = app.add_subcommand("fuzz", "differential test of prover vs oracle");
  fz->add_option("--seed", seed, "rng seed");
  fz->add_option("--count", count, "number of instances");
  fz->add_option("--fuel", fuel, "rule application budget");
  fz->add_option("--locations", locs, "oracle location bound");
  fz->add_option("--heap", heap, "oracle heap bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 3 : 3;
  }

  try {
    if (check->parsed()) {
      Problem pb = parse_problem(slurp(file), assume_established);
      CheckConfig cfg;
      cfg.fuel = env_fuel(fuel);
      cfg.strategy = strategy_name_opt == "general" ? Strategy::General : Strategy::Terminating;
      cfg.backedges = !no_backedges;
      cfg.oracle_locs = locs;
      cfg.oracle_heap = heap;
      if (timeout_ms > 0)
        cfg.timeout = std::chrono::milliseconds(timeout_ms);
      else if (pb.theory != TheoryTag::Empty)
        cfg.timeout = std::chrono::milliseconds(8000);
      CheckResult res = check_entailment(pb, cfg);
      const char* word = res.aggregate == Verdict::Valid      ? "VALID"
                         : res.aggregate == Verdict::Invalid ? "INVALID"
                                                             : "UNKNOWN";
      std::size_t cases = 0;
      for (const auto& c : res.cases) cases += c.sequents.size();
      std::cout << word << "\n";
      std::cout << "cases=" << cases << " nodes=" << res.stats.expansions
                << " distinct=" << res.stats.distinct_sequents << " backedges=" << res.stats.backedges
                << " rule-applications=" << res.stats.rule_applications << "\n";
      if (res.witness) std::cout << "countermodel: " << show_structure(*res.witness) << "\n";
      if (!res.note.empty()) std::cout << "note: " << res.note << "\n";
      if (!cert_path.empty() && res.aggregate == Verdict::Valid)
        spit(cert_path, write_certificates(res, pb, cfg.strategy));
      if (!dot_path.empty()) spit(dot_path, export_dot(res));
      return res.aggregate == Verdict::Valid ? 0 : res.aggregate == Verdict::Invalid ? 1 : 2;
    }

    if (pre->parsed()) {
      Problem pb = parse_problem(slurp(file), assume_established);
      Problem out = pb;
      if (eliminate_eq_flag) {
        auto [res, trace] = eliminate_eq(pb, !no_simplify);
        out = res;
        if (!trace_dir.empty()) {
          auto dump = [&](const char* name, const std::optional<Problem>& p) {
            if (p) spit(trace_dir + "/" + name + ".sep", print(*p));
          };
          dump("step1", trace.after_step1);
          dump("step2", trace.after_step2);
          dump("step3", trace.after_step3);
          dump("step4", trace.after_step4);
        }
      }
      if (alloc_compat_flag) out = make_alloc_compatible(out);
      std::string text = print(out);
      if (out_path.empty())
        std::cout << text;
      else
        spit(out_path, text);
      return 0;
    }

    if (orc->parsed()) {
      Problem pb = parse_problem(slurp(file), assume_established);
      if (all_models) {
        auto ms = models_of(pb.lhs, *pb.sid, pb.theory, locs, heap);
        std::cout << ms.size() << " models\n";
        for (const auto& m : ms) std::cout << show_structure(m) << "\n";
        return 0;
      }
      bool all_ok = true;
      std::optional<Structure> cm;
      for (const auto& s : to_prenex_dnf(pb.lhs, pb.rhs, pb.sid, pb.theory)) {
        OracleVerdict v = oracle_entails(s, locs, heap, jobs);
        if (!v.valid_up_to_bound) {
          all_ok = false;
          cm = v.countermodel;
          break;
        }
      }
      if (all_ok) {
        std::cout << "VALID up to bounds L=" << locs << " K=" << heap << "\n";
        return 0;
      }
      std::cout << "INVALID\ncountermodel: " << show_structure(*cm) << "\n";
      return 1;
    }

    if (ver->parsed()) {
      Problem pb = parse_problem(slurp(file), assume_established);
      ParsedCertificate cert = parse_certificate(slurp(cert_file));
      CheckConfig cfg;
      VerifyOutcome out = verify_certificate(cert, pb, cfg);
      if (out.accepted) {
        std::cout << "ACCEPTED\n";
        return 0;
      }
      std::cout << "REJECTED: " << out.detail << "\n";
      return 1;
    }

    if (fz->parsed()) {
      FuzzParams fp;
      CheckConfig cfg;
      cfg.fuel = env_fuel(fuel);
      cfg.oracle_locs = locs;
      cfg.oracle_heap = heap;
      cfg.timeout = std::chrono::milliseconds(5000);
      DifferentialOutcome out = differential_run(seed, count, fp, cfg);
      std::cout << "total=" << out.total << " valid=" << out.prover_valid << " invalid=" << out.prover_invalid
                << " unknown=" << out.prover_unknown << " oracle-countermodels=" << out.oracle_countermodels
                << " disagreements=" << out.disagreements << "\n";
      for (const auto& pb : out.failing) std::cout << "--- disagreement ---\n" << print(pb) << "\n";
      return out.disagreements == 0 ? 0 : 4;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const SidError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
