// Surface syntax: parser and printer for problems, formulas and sequents.
//
//   problem := header* "sid" "{" rule+ "}" "entail" "{" formula "|-" formulalist "}"
//   header  := "theory" ("empty"|"eq"|"natorder")
//   rule    := predatom "<=" formula ";"
//   formula := "emp" | "false" | var "->" "(" varlist ")" | predatom | theoryatom
//            | formula "*" formula | formula "\/" formula
//            | "exists" var+ "." formula | "(" formula ")"
//   theoryatom := var ("="|"!="|"<="|"<") var  |  "0" "<=" var
//
// exists binds weakest, then \/, then *; * and \/ associate to the right.
// Line comments start with '#'. pu-atoms print as
// (frame -* inner)[params <- actuals]; they are internal and only accepted
// when the parser runs in internal mode (certificates).

#ifndef SEPENTAIL_FRONTEND_HPP
#define SEPENTAIL_FRONTEND_HPP

#include <cctype>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepentail/core.hpp"
#include "sepentail/sid.hpp"

namespace sepentail {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& msg, int l, int c)
      : std::runtime_error(msg + " at " + std::to_string(l) + ":" + std::to_string(c)), line(l), col(c) {}
};

namespace detail {

struct Token {
  enum Kind { Ident, Punct, End } kind = End;
  std::string text;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string src) : src_(std::move(src)) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Token::End;
      tok_.text.clear();
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || std::isdigit(static_cast<unsigned char>(c))) {
      std::string s;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '\'') {
          s += take();
        } else if (d == '@') {
          // system-generated names carry @-segments: either @{digits,..} or
          // an alphanumeric run
          s += take();
          if (pos_ < src_.size() && src_[pos_] == '{') {
            while (pos_ < src_.size() && src_[pos_] != '}') s += take();
            if (pos_ < src_.size()) s += take();
          }
        } else {
          break;
        }
      }
      tok_.kind = Token::Ident;
      tok_.text = s;
      return;
    }
    // multi-char punct
    static const char* puncts[] = {"<-", "<=", "!=", "->", "-*", "\\/", "|-", nullptr};
    for (int i = 0; puncts[i]; ++i) {
      std::string p = puncts[i];
      if (src_.compare(pos_, p.size(), p) == 0) {
        for (std::size_t k = 0; k < p.size(); ++k) take();
        tok_.kind = Token::Punct;
        tok_.text = p;
        return;
      }
    }
    tok_.kind = Token::Punct;
    tok_.text = std::string(1, take());
  }

  char take() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        break;
      }
    }
  }

  std::string src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

}  // namespace detail

class Parser {
 public:
  explicit Parser(std::string src, bool internal = false) : lex_(std::move(src)), internal_(internal) {}

  // ------------------------------------------------------------------
  FormulaPtr parse_formula() { return formula(); }

  Sequent parse_sequent(std::shared_ptr<const PcSid> sid, TheoryTag theory) {
    FormulaPtr lhs = formula();
    expect("|-");
    std::vector<FormulaPtr> rhs = formula_list();
    return mk_sequent(lhs, rhs, std::move(sid), theory);
  }

  Problem parse_problem(bool assume_established = false) {
    TheoryTag theory = TheoryTag::Empty;
    while (peek_is("theory")) {
      next();
      detail::Token t = next_ident("theory name");
      if (t.text == "empty")
        theory = TheoryTag::Empty;
      else if (t.text == "eq")
        theory = TheoryTag::Eq;
      else if (t.text == "natorder")
        theory = TheoryTag::NatOrder;
      else
        fail("unknown theory '" + t.text + "'", t);
    }
    theory_ = theory;
    expect_ident("sid");
    expect("{");
    std::vector<Rule> rules;
    while (!peek_is("}")) rules.push_back(rule());
    expect("}");
    expect_ident("entail");
    expect("{");
    FormulaPtr lhs = formula();
    expect("|-");
    std::vector<FormulaPtr> rhs = formula_list();
    expect("}");
    detail::Token t = lex_.peek();
    if (t.kind != detail::Token::End) fail("trailing input", t);
    if (!kappa_) fail("no points-to atom fixes the record width", t);
    Problem pb;
    pb.theory = theory;
    pb.sid = validate_pcsid(std::move(rules), *kappa_, assume_established);
    pb.lhs = lhs;
    pb.rhs = rhs;
    check_formula(pb.lhs, *pb.sid);
    for (const auto& f : pb.rhs) check_formula(f, *pb.sid);
    return pb;
  }

 private:
  void check_formula(const FormulaPtr& f, const PcSid& sid) {
    if (auto* p = f->as<PredAtom>()) {
      if (!sid.declared(p->pred))
        throw ParseError("unknown predicate '" + p->pred + "'", 0, 0);
      if (sid.ar(p->pred) != p->args.size())
        throw ParseError("arity mismatch for '" + p->pred + "'", 0, 0);
    } else if (auto* s = f->as<FSep>()) {
      for (const auto& q : s->parts) check_formula(q, sid);
    } else if (auto* d = f->as<FDis>()) {
      for (const auto& q : d->parts) check_formula(q, sid);
    } else if (auto* e = f->as<FExists>()) {
      check_formula(e->body, sid);
    } else if (auto* pu = f->as<PuAtom>()) {
      check_formula(fpred(pu->inner), sid);
      for (const auto& a : pu->frame) check_formula(fpred(a), sid);
    }
  }

  Rule rule() {
    detail::Token h = next_ident("predicate name");
    Rule r;
    r.head = h.text;
    expect("(");
    r.head_args = var_list(")");
    expect("<=");
    FormulaPtr body = formula();
    expect(";");
    // decompose: exists prefix, then sep conj of atoms with one points-to
    FormulaPtr pf = prenex(body, {});
    PrenexView pv = prenex_view(pf);
    r.exvars = pv.prefix;
    bool have_cell = false;
    auto add_atom = [&](const FormulaPtr& a) {
      if (auto* p = a->as<PointsTo>()) {
        if (have_cell) throw ProgressViolation("rule of '" + r.head + "' has two points-to atoms");
        have_cell = true;
        r.cell = *p;
      } else if (auto* p = a->as<PredAtom>()) {
        r.calls.push_back(*p);
      } else if (auto* t = a->as<TheoryAtom>()) {
        r.theory.push_back(*t);
      } else if (a->is<FEmp>()) {
      } else {
        throw ParseError("rule body of '" + r.head + "' is not a separating conjunction of atoms", h.line, h.col);
      }
    };
    if (pv.conjuncts.empty())
      add_atom(femp());
    else
      for (const auto& c : pv.conjuncts) add_atom(c);
    if (!have_cell) throw ProgressViolation("rule of '" + r.head + "' contains no points-to atom");
    return r;
  }

  std::vector<FormulaPtr> formula_list() {
    std::vector<FormulaPtr> out;
    if (peek_is("}") || lex_.peek().kind == detail::Token::End) return out;  // empty Gamma
    out.push_back(formula());
    while (peek_is(",")) {
      next();
      out.push_back(formula());
    }
    return out;
  }

  // exists-level
  FormulaPtr formula() {
    if (peek_is("exists")) {
      next();
      std::vector<Var> vs;
      while (lex_.peek().kind == detail::Token::Ident) vs.push_back(var(next()));
      if (vs.empty()) fail("exists needs at least one variable", lex_.peek());
      expect(".");
      FormulaPtr body = formula();
      return fexists(vs, body);
    }
    return disj();
  }

  FormulaPtr disj() {
    FormulaPtr l = sep();
    if (peek_is("\\/")) {
      next();
      FormulaPtr r = disj();
      return fdis({l, r});
    }
    return l;
  }

  FormulaPtr sep() {
    FormulaPtr l = atom();
    if (peek_is("*")) {
      next();
      FormulaPtr r = sep();
      return fsep({l, r});
    }
    return l;
  }

  FormulaPtr atom() {
    detail::Token t = lex_.peek();
    if (peek_is("(")) {
      next();
      // either a parenthesized formula or a pu-atom "(frame -* inner)[..]"
      FormulaPtr inside = formula();
      if (peek_is("-*")) {
        if (!internal_) fail("pu-atoms are not allowed in input", t);
        next();
        detail::Token n = next_ident("predicate name");
        expect("(");
        PredAtom inner{n.text, var_list(")")};
        expect(")");
        expect("[");
        std::vector<Var> params;
        params.push_back(var(next_ident("parameter")));
        while (peek_is(",")) {
          next();
          params.push_back(var(next_ident("parameter")));
        }
        expect("<-");
        std::vector<Var> actuals;
        actuals.push_back(var(next_ident("actual")));
        while (peek_is(",")) {
          next();
          actuals.push_back(var(next_ident("actual")));
        }
        expect("]");
        if (params.size() != actuals.size()) fail("pu-atom parameter/actual length mismatch", t);
        std::vector<PredAtom> frame;
        for (const auto& cj : inside->is<FSep>() ? inside->as<FSep>()->parts : std::vector<FormulaPtr>{inside}) {
          if (cj->is<FEmp>()) continue;
          auto* p = cj->as<PredAtom>();
          if (!p) fail("pu-atom frame must be a conjunction of predicate atoms", t);
          frame.push_back(*p);
        }
        return fpu(std::move(frame), std::move(inner), std::move(params), std::move(actuals));
      }
      expect(")");
      return inside;
    }
    if (peek_is("exists")) return formula();
    if (t.kind != detail::Token::Ident) fail("expected a formula", t);
    next();
    if (t.text == "emp") return femp();
    if (t.text == "false") return ftheory(TheoryOp::False, {});
    if (t.text == "0") {
      expect("<=");
      detail::Token v = next_ident("variable");
      if (theory_ && *theory_ != TheoryTag::NatOrder)
        throw ParseError("theory atom not supported by declared theory", t.line, t.col);
      return ftheory(TheoryOp::Ge0, {var(v)});
    }
    if (peek_is("(")) {
      next();
      std::vector<Var> args = var_list(")");
      if (!internal_ && !t.text.empty() && t.text[0] == '_')
        fail("identifiers starting with '_' are reserved", t);
      return fpred(t.text, std::move(args));
    }
    if (peek_is("->")) {
      next();
      expect("(");
      std::vector<Var> tgt = var_list(")");
      if (kappa_ && tgt.size() != *kappa_)
        throw ParseError("record width mismatch (kappa=" + std::to_string(*kappa_) + ")", t.line, t.col);
      if (!kappa_) kappa_ = tgt.size();
      return fpointsto(var(t), std::move(tgt));
    }
    for (const char* op : {"=", "!=", "<=", "<"}) {
      if (peek_is(op)) {
        next();
        detail::Token rhs = next_ident("variable");
        TheoryOp o = op == std::string("=")    ? TheoryOp::Eq
                     : op == std::string("!=") ? TheoryOp::Neq
                     : op == std::string("<=") ? TheoryOp::Le
                                               : TheoryOp::Lt;
        if (theory_) {
          bool ok = (*theory_ == TheoryTag::NatOrder) ||
                    (*theory_ == TheoryTag::Eq && (o == TheoryOp::Eq || o == TheoryOp::Neq));
          if (!ok) throw ParseError("theory atom not supported by declared theory", t.line, t.col);
        }
        return ftheory(o, {var(t), var(rhs)});
      }
    }
    fail("expected an atom", t);
    return femp();
  }

  std::vector<Var> var_list(const std::string& close) {
    std::vector<Var> out;
    if (peek_is(close)) {
      next();
      return out;
    }
    out.push_back(var(next_ident("variable")));
    while (peek_is(",")) {
      next();
      out.push_back(var(next_ident("variable")));
    }
    expect(close);
    return out;
  }

  Var var(const detail::Token& t) {
    if (t.kind != detail::Token::Ident) fail("expected a variable", t);
    if (!internal_) {
      if (!t.text.empty() && t.text[0] == '_') fail("identifiers starting with '_' are reserved", t);
      if (t.text.find('@') != std::string::npos) fail("'@' is reserved in identifiers", t);
    }
    return Var(t.text);
  }

  bool peek_is(const std::string& s) const {
    const detail::Token& t = lex_.peek();
    return t.kind != detail::Token::End && t.text == s;
  }
  detail::Token next() { return lex_.next(); }
  detail::Token next_ident(const std::string& what) {
    detail::Token t = lex_.next();
    if (t.kind != detail::Token::Ident) fail("expected " + what, t);
    return t;
  }
  void expect(const std::string& s) {
    detail::Token t = lex_.next();
    if (t.text != s) fail("expected '" + s + "'", t);
  }
  void expect_ident(const std::string& s) {
    detail::Token t = lex_.next();
    if (t.kind != detail::Token::Ident || t.text != s) fail("expected '" + s + "'", t);
  }
  [[noreturn]] void fail(const std::string& msg, const detail::Token& t) const {
    throw ParseError(msg, t.line, t.col);
  }

  detail::Lexer lex_;
  bool internal_;
  std::optional<std::size_t> kappa_;
  std::optional<TheoryTag> theory_;

 public:
  void set_kappa(std::size_t k) { kappa_ = k; }
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// precedence: 0 formula (exists), 1 disj, 2 sep, 3 atom
inline void print_formula(const FormulaPtr& f, std::string& out, int level);

inline void print_pred(const PredAtom& a, std::string& out) {
  out += a.pred + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    out += a.args[i].name;
  }
  out += ")";
}

inline void print_formula(const FormulaPtr& f, std::string& out, int level) {
  if (f->is<FEmp>()) {
    out += "emp";
    return;
  }
  if (auto* p = f->as<PointsTo>()) {
    out += p->src.name + " -> (";
    for (std::size_t i = 0; i < p->tgt.size(); ++i) {
      if (i) out += ",";
      out += p->tgt[i].name;
    }
    out += ")";
    return;
  }
  if (auto* p = f->as<PredAtom>()) {
    print_pred(*p, out);
    return;
  }
  if (auto* t = f->as<TheoryAtom>()) {
    switch (t->op) {
      case TheoryOp::False: out += "false"; return;
      case TheoryOp::Ge0: out += "0<=" + t->args[0].name; return;
      default:
        out += t->args[0].name + " " + theory_op_name(t->op) + " " + t->args[1].name;
        return;
    }
  }
  if (auto* pu = f->as<PuAtom>()) {
    out += "(";
    if (pu->frame.empty())
      out += "emp";
    else
      for (std::size_t i = 0; i < pu->frame.size(); ++i) {
        if (i) out += " * ";
        print_pred(pu->frame[i], out);
      }
    out += " -* ";
    print_pred(pu->inner, out);
    out += ")[";
    for (std::size_t i = 0; i < pu->params.size(); ++i) {
      if (i) out += ",";
      out += pu->params[i].name;
    }
    out += " <- ";
    for (std::size_t i = 0; i < pu->actuals.size(); ++i) {
      if (i) out += ",";
      out += pu->actuals[i].name;
    }
    out += "]";
    return;
  }
  if (auto* s = f->as<FSep>()) {
    bool paren = level > 2;
    if (paren) out += "(";
    for (std::size_t i = 0; i < s->parts.size(); ++i) {
      if (i) out += " * ";
      print_formula(s->parts[i], out, 3);
    }
    if (paren) out += ")";
    return;
  }
  if (auto* d = f->as<FDis>()) {
    bool paren = level > 1;
    if (paren) out += "(";
    for (std::size_t i = 0; i < d->parts.size(); ++i) {
      if (i) out += " \\/ ";
      print_formula(d->parts[i], out, 2);
    }
    if (paren) out += ")";
    return;
  }
  const auto* e = f->as<FExists>();
  bool paren = level > 0;
  if (paren) out += "(";
  out += "exists";
  FormulaPtr cur = f;
  while (auto* q = cur->as<FExists>()) {
    out += " " + q->v.name;
    cur = q->body;
  }
  out += ". ";
  print_formula(cur, out, 1);
  if (paren) out += ")";
}

}  // namespace detail

inline std::string print(const FormulaPtr& f) {
  std::string out;
  detail::print_formula(f, out, 0);
  return out;
}

inline std::string print(const Sequent& s) {
  std::string out = print(s.lhs) + " |- ";
  for (std::size_t i = 0; i < s.rhs.size(); ++i) {
    if (i) out += ", ";
    out += print(s.rhs[i]);
  }
  return out;
}

inline std::string print(const Problem& p) {
  std::string out = "theory ";
  out += theory_tag_name(p.theory);
  out += "\nsid {\n";
  for (const auto& r : p.sid->rules) {
    out += "  ";
    detail::print_pred(PredAtom{r.head, r.head_args}, out);
    out += " <= " + print(r.body()) + ";\n";
  }
  out += "}\nentail {\n  " + print(p.lhs) + " |- ";
  for (std::size_t i = 0; i < p.rhs.size(); ++i) {
    if (i) out += ", ";
    out += print(p.rhs[i]);
  }
  out += "\n}\n";
  return out;
}

// Renames variables outside the user namespace (leading underscore) to
// fresh user-style names so the problem can be printed and reparsed.
inline Problem sanitize_names(const Problem& in) {
  std::set<Var> all;
  auto collect = [&](const FormulaPtr& f) {
    for (const auto& v : all_vars(f)) all.insert(v);
  };
  collect(in.lhs);
  for (const auto& f : in.rhs) collect(f);
  for (const auto& r : in.sid->rules) {
    for (const auto& v : r.head_args) all.insert(v);
    for (const auto& v : r.exvars) all.insert(v);
  }
  std::map<Var, Var> ren;
  std::size_t counter = 0;
  auto fresh_user = [&]() {
    while (true) {
      Var v("v" + std::to_string(counter++));
      if (!all.count(v)) {
        all.insert(v);
        return v;
      }
    }
  };
  for (const auto& v : all)
    if (!v.name.empty() && v.name[0] == '_') ren.emplace(v, Var(""));
  if (ren.empty()) return in;
  for (auto& [k, v] : ren) v = fresh_user();
  auto ren_of = [&](const Var& v) {
    auto it = ren.find(v);
    return it == ren.end() ? v : it->second;
  };
  std::function<FormulaPtr(const FormulaPtr&)> fix = [&](const FormulaPtr& f) -> FormulaPtr {
    if (f->is<FEmp>()) return f;
    if (auto* p = f->as<PointsTo>()) {
      std::vector<Var> t;
      for (const auto& v : p->tgt) t.push_back(ren_of(v));
      return fpointsto(ren_of(p->src), t);
    }
    if (auto* p = f->as<PredAtom>()) {
      std::vector<Var> as;
      for (const auto& v : p->args) as.push_back(ren_of(v));
      return fpred(p->pred, as);
    }
    if (auto* t = f->as<TheoryAtom>()) {
      std::vector<Var> as;
      for (const auto& v : t->args) as.push_back(ren_of(v));
      return ftheory(t->op, as);
    }
    if (auto* s = f->as<FSep>()) {
      std::vector<FormulaPtr> ps;
      for (const auto& q : s->parts) ps.push_back(fix(q));
      return fsep(std::move(ps));
    }
    if (auto* d = f->as<FDis>()) {
      std::vector<FormulaPtr> ps;
      for (const auto& q : d->parts) ps.push_back(fix(q));
      return fdis(std::move(ps));
    }
    if (auto* e = f->as<FExists>()) return fexists(ren_of(e->v), fix(e->body));
    return f;
  };
  Problem out = in;
  out.lhs = fix(in.lhs);
  std::vector<FormulaPtr> rhs;
  for (const auto& f : in.rhs) rhs.push_back(fix(f));
  out.rhs = std::move(rhs);
  std::vector<Rule> rules;
  for (const auto& r : in.sid->rules) {
    Rule nr = r;
    for (auto& v : nr.head_args) v = ren_of(v);
    for (auto& v : nr.exvars) v = ren_of(v);
    nr.cell.src = ren_of(nr.cell.src);
    for (auto& v : nr.cell.tgt) v = ren_of(v);
    for (auto& c : nr.calls)
      for (auto& v : c.args) v = ren_of(v);
    for (auto& t : nr.theory)
      for (auto& v : t.args) v = ren_of(v);
    rules.push_back(std::move(nr));
  }
  out.sid = validate_pcsid(std::move(rules), in.sid->kappa, /*assume_established=*/true);
  return out;
}

inline Problem parse_problem(const std::string& text, bool assume_established = false) {
  Parser p(text);
  return p.parse_problem(assume_established);
}

inline FormulaPtr parse_formula(const std::string& text, bool internal = false) {
  Parser p(text, internal);
  return p.parse_formula();
}

}  // namespace sepentail

#endif  // SEPENTAIL_FRONTEND_HPP
