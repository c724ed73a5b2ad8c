#pragma once

// Textual formats: dynamic programs, modification sequences, state dumps.
// Parsers produce positioned diagnostics and never throw on user input.

#include "dynrel/dynprog.hpp"

namespace dynrel {

struct SourceDiagnostic {
  int line = 1;
  int col = 1;
  std::string message;
  enum class Severity { Error, Warning } severity = Severity::Error;
};

template <typename T>
struct ParseResult {
  std::optional<T> value;
  std::vector<SourceDiagnostic> diagnostics;

  bool ok() const { return value.has_value(); }
  std::string first_error() const {
    for (const auto& d : diagnostics)
      if (d.severity == SourceDiagnostic::Severity::Error)
        return std::to_string(d.line) + ":" + std::to_string(d.col) + ": " + d.message;
    return {};
  }
};

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

struct Token {
  enum class Kind { Ident, Nat, Punct, End } kind = Kind::End;
  std::string text;
  int line = 1, col = 1;
};

inline bool ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum((unsigned char)c) || c == '_'; }

struct Lexer {
  std::string src;
  size_t pos = 0;
  int line = 1, col = 1;
  std::vector<SourceDiagnostic>* diags = nullptr;
  bool failed = false;

  void error_at(int l, int c, const std::string& msg) {
    if (diags) diags->push_back({l, c, msg, SourceDiagnostic::Severity::Error});
    failed = true;
  }

  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  Token next() {
    while (pos < src.size() && std::isspace((unsigned char)src[pos])) advance();
    Token t;
    t.line = line;
    t.col = col;
    if (pos >= src.size()) {
      t.kind = Token::Kind::End;
      return t;
    }
    char c = src[pos];
    if (ident_start(c)) {
      t.kind = Token::Kind::Ident;
      while (pos < src.size() && ident_char(src[pos])) {
        t.text += src[pos];
        advance();
      }
      return t;
    }
    if (std::isdigit((unsigned char)c)) {
      t.kind = Token::Kind::Nat;
      while (pos < src.size() && std::isdigit((unsigned char)src[pos])) {
        t.text += src[pos];
        advance();
      }
      return t;
    }
    t.kind = Token::Kind::Punct;
    auto two = [&](const char* s) {
      if (pos + 1 < src.size() && src[pos] == s[0] && src[pos + 1] == s[1]) {
        t.text = s;
        advance();
        advance();
        return true;
      }
      return false;
    };
    auto three = [&](const char* s) {
      if (pos + 2 < src.size() && src[pos] == s[0] && src[pos + 1] == s[1] &&
          src[pos + 2] == s[2]) {
        t.text = s;
        advance();
        advance();
        advance();
        return true;
      }
      return false;
    };
    if (three("<->")) return t;
    if (two(":=") || two("!=") || two("&&") || two("||") || two("->")) return t;
    t.text = std::string(1, c);
    advance();
    return t;
  }
};

struct TokenStream {
  std::vector<Token> toks;
  size_t i = 0;
  std::vector<SourceDiagnostic>* diags = nullptr;
  bool failed = false;

  const Token& peek() const { return toks[std::min(i, toks.size() - 1)]; }
  const Token& get() {
    const Token& t = toks[std::min(i, toks.size() - 1)];
    if (i < toks.size() - 1) ++i;
    return t;
  }
  bool at(const std::string& text) const {
    return peek().kind != Token::Kind::End && peek().text == text;
  }
  bool at_ident(const std::string& text) const {
    return peek().kind == Token::Kind::Ident && peek().text == text;
  }
  void error(const std::string& msg) {
    if (!failed && diags)
      diags->push_back({peek().line, peek().col, msg, SourceDiagnostic::Severity::Error});
    failed = true;
  }
  bool expect(const std::string& text) {
    if (at(text)) {
      get();
      return true;
    }
    error("expected '" + text + "'");
    return false;
  }
};

inline TokenStream tokenize(const std::string& src, std::vector<SourceDiagnostic>& diags) {
  Lexer lx;
  lx.src = src;
  lx.diags = &diags;
  TokenStream ts;
  ts.diags = &diags;
  for (;;) {
    Token t = lx.next();
    bool end = t.kind == Token::Kind::End;
    ts.toks.push_back(std::move(t));
    if (end) break;
  }
  return ts;
}

// formula := iff; iff := impl ['<->' iff]; impl := or ['->' impl];
// or := and ('||' and)*; and := unary ('&&' unary)*;
// unary := '!' unary | 'exists' VAR '.' formula | 'forall' VAR '.' formula | primary
inline FormulaPtr parse_formula(TokenStream& ts);

inline FormulaPtr parse_primary(TokenStream& ts) {
  if (ts.failed) return f_false();
  if (ts.at("(")) {
    ts.get();
    FormulaPtr f = parse_formula(ts);
    ts.expect(")");
    return f;
  }
  if (ts.at_ident("true")) {
    ts.get();
    return f_true();
  }
  if (ts.at_ident("false")) {
    ts.get();
    return f_false();
  }
  if (ts.peek().kind != Token::Kind::Ident) {
    ts.error("expected formula");
    return f_false();
  }
  Token head = ts.get();
  if (ts.at("(")) {  // atom
    ts.get();
    std::vector<std::string> args;
    if (!ts.at(")")) {
      for (;;) {
        if (ts.peek().kind != Token::Kind::Ident) {
          ts.error("expected variable");
          return f_false();
        }
        args.push_back(ts.get().text);
        if (ts.at(",")) {
          ts.get();
          continue;
        }
        break;
      }
    }
    ts.expect(")");
    return f_atom(head.text, std::move(args));
  }
  if (ts.at("=")) {
    ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected variable");
      return f_false();
    }
    return f_eq(head.text, ts.get().text);
  }
  if (ts.at("!=")) {
    ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected variable");
      return f_false();
    }
    return f_not(f_eq(head.text, ts.get().text));
  }
  ts.error("expected '(', '=' or '!=' after identifier");
  return f_false();
}

inline FormulaPtr parse_unary(TokenStream& ts) {
  if (ts.failed) return f_false();
  if (ts.at("!")) {
    ts.get();
    return f_not(parse_unary(ts));
  }
  if (ts.at_ident("exists") || ts.at_ident("forall")) {
    bool ex = ts.get().text == "exists";
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected variable after quantifier");
      return f_false();
    }
    std::string v = ts.get().text;
    ts.expect(".");
    FormulaPtr body = parse_formula(ts);  // maximally to the right
    return ex ? f_exists(v, body) : f_forall(v, body);
  }
  return parse_primary(ts);
}

inline FormulaPtr parse_and(TokenStream& ts) {
  FormulaPtr f = parse_unary(ts);
  while (!ts.failed && ts.at("&&")) {
    ts.get();
    f = f_and(f, parse_unary(ts));
  }
  return f;
}

inline FormulaPtr parse_or(TokenStream& ts) {
  FormulaPtr f = parse_and(ts);
  while (!ts.failed && ts.at("||")) {
    ts.get();
    f = f_or(f, parse_and(ts));
  }
  return f;
}

inline FormulaPtr parse_impl(TokenStream& ts) {
  FormulaPtr f = parse_or(ts);
  if (!ts.failed && ts.at("->")) {
    ts.get();
    return f_implies(f, parse_impl(ts));
  }
  return f;
}

inline FormulaPtr parse_formula(TokenStream& ts) {
  FormulaPtr f = parse_impl(ts);
  if (!ts.failed && ts.at("<->")) {
    ts.get();
    return f_iff(f, parse_formula(ts));
  }
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Formula printing with minimal parentheses.

inline int precedence_of(FKind k) {
  switch (k) {
    case FKind::Iff: return 1;
    case FKind::Implies: return 2;
    case FKind::Or: return 3;
    case FKind::And: return 4;
    case FKind::Exists:
    case FKind::Forall: return 0;  // body extends maximally; needs parens inside operators
    default: return 6;
  }
}

inline void print_formula_rec(const FormulaPtr& f, int parent, std::string& out) {
  auto wrap = [&](int mine, auto&& body) {
    bool paren = mine < parent;
    if (paren) out += "(";
    body();
    if (paren) out += ")";
  };
  switch (f->kind) {
    case FKind::True: out += "true"; return;
    case FKind::False: out += "false"; return;
    case FKind::Eq: out += f->var1 + " = " + f->var2; return;
    case FKind::Atom: {
      out += f->sym + "(";
      for (size_t i = 0; i < f->args.size(); ++i) {
        if (i) out += ", ";
        out += f->args[i];
      }
      out += ")";
      return;
    }
    case FKind::Not:
      if (f->kids[0]->kind == FKind::Eq) {
        out += f->kids[0]->var1 + " != " + f->kids[0]->var2;
        return;
      }
      out += "!";
      print_formula_rec(f->kids[0], 5, out);
      return;
    case FKind::And:
      wrap(4, [&] {
        print_formula_rec(f->kids[0], 4, out);
        out += " && ";
        print_formula_rec(f->kids[1], 5, out);
      });
      return;
    case FKind::Or:
      wrap(3, [&] {
        print_formula_rec(f->kids[0], 3, out);
        out += " || ";
        print_formula_rec(f->kids[1], 4, out);
      });
      return;
    case FKind::Implies:
      wrap(2, [&] {
        print_formula_rec(f->kids[0], 3, out);
        out += " -> ";
        print_formula_rec(f->kids[1], 2, out);
      });
      return;
    case FKind::Iff:
      wrap(1, [&] {
        print_formula_rec(f->kids[0], 2, out);
        out += " <-> ";
        print_formula_rec(f->kids[1], 1, out);
      });
      return;
    case FKind::Exists:
    case FKind::Forall:
      wrap(0, [&] {
        out += (f->kind == FKind::Exists ? "exists " : "forall ");
        out += f->var1 + ". ";
        print_formula_rec(f->kids[0], 0, out);
      });
      return;
  }
}

inline std::string print_formula(const FormulaPtr& f) {
  std::string out;
  print_formula_rec(f, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Program parsing

inline ParseResult<DynamicProgram> parse_program(const std::string& src) {
  ParseResult<DynamicProgram> res;
  auto& diags = res.diagnostics;
  detail::TokenStream ts = detail::tokenize(src, diags);
  using detail::Token;

  auto fail = [&]() -> ParseResult<DynamicProgram> { return std::move(res); };

  if (!ts.at_ident("schema")) {
    ts.error("expected 'schema'");
    return fail();
  }
  ts.get();
  if (!ts.expect("{")) return fail();

  std::vector<Symbol> symbols;
  std::set<std::string> seen;
  while (!ts.failed && !ts.at("}")) {
    SymKind kind;
    if (ts.at_ident("input"))
      kind = SymKind::Input;
    else if (ts.at_ident("aux"))
      kind = SymKind::Aux;
    else {
      ts.error("expected 'input' or 'aux'");
      return fail();
    }
    ts.get();
    for (;;) {
      if (ts.peek().kind != Token::Kind::Ident) {
        ts.error("expected relation name");
        return fail();
      }
      Token nameTok = ts.get();
      if (!ts.expect("/")) return fail();
      if (ts.peek().kind != Token::Kind::Nat) {
        ts.error("expected arity");
        return fail();
      }
      int arity = std::stoi(ts.get().text);
      if (!seen.insert(nameTok.text).second) {
        diags.push_back({nameTok.line, nameTok.col, "duplicate declaration of " + nameTok.text,
                         SourceDiagnostic::Severity::Error});
        return fail();
      }
      symbols.push_back({nameTok.text, arity, kind});
      if (ts.at(",")) {
        ts.get();
        continue;
      }
      break;
    }
    if (!ts.expect(";")) return fail();
  }
  if (!ts.expect("}")) return fail();
  if (ts.failed) return fail();

  SchemaPtr schema;
  try {
    schema = make_schema(symbols);
  } catch (const LogicError& e) {
    ts.error(e.what());
    return fail();
  }

  DynamicProgram prog;
  prog.schema = schema;

  // Validate a parsed formula's symbols/arities/free variables in place.
  auto check_formula = [&](const FormulaPtr& f, const std::set<std::string>& allowed,
                           int line, int col, bool inputOnly = false) -> bool {
    bool ok = true;
    std::function<void(const FormulaPtr&, std::set<std::string>)> walk =
        [&](const FormulaPtr& g, std::set<std::string> bound) {
          switch (g->kind) {
            case FKind::Atom: {
              int sym = schema->find(g->sym);
              if (sym < 0) {
                diags.push_back({line, col, "unknown symbol " + g->sym,
                                 SourceDiagnostic::Severity::Error});
                ok = false;
              } else if (inputOnly && schema->at(sym).kind == SymKind::Aux) {
                diags.push_back({line, col,
                                 "init formula may only reference input relations, not " + g->sym,
                                 SourceDiagnostic::Severity::Error});
                ok = false;
              } else if (schema->at(sym).arity != int(g->args.size())) {
                diags.push_back({line, col,
                                 "arity mismatch: " + g->sym + " expects " +
                                     std::to_string(schema->at(sym).arity) + " arguments",
                                 SourceDiagnostic::Severity::Error});
                ok = false;
              }
              for (const auto& v : g->args)
                if (!bound.count(v) && !allowed.count(v)) {
                  diags.push_back({line, col, "free variable " + v + " not bound by rule head",
                                   SourceDiagnostic::Severity::Error});
                  ok = false;
                }
              return;
            }
            case FKind::Eq:
              for (const auto& v : {g->var1, g->var2})
                if (!bound.count(v) && !allowed.count(v)) {
                  diags.push_back({line, col, "free variable " + v + " not bound by rule head",
                                   SourceDiagnostic::Severity::Error});
                  ok = false;
                }
              return;
            case FKind::Exists:
            case FKind::Forall: {
              bound.insert(g->var1);
              walk(g->kids[0], bound);
              return;
            }
            default:
              for (const auto& kid : g->kids) walk(kid, bound);
              return;
          }
        };
    walk(f, {});
    return ok;
  };

  auto parse_head_vars = [&](std::vector<std::string>& vars) -> bool {
    if (!ts.expect("(")) return false;
    if (!ts.at(")")) {
      for (;;) {
        if (ts.peek().kind != Token::Kind::Ident) {
          ts.error("expected variable");
          return false;
        }
        std::string v = ts.get().text;
        if (std::find(vars.begin(), vars.end(), v) != vars.end()) {
          ts.error("duplicate head variable " + v);
          return false;
        }
        vars.push_back(v);
        if (ts.at(",")) {
          ts.get();
          continue;
        }
        break;
      }
    }
    return ts.expect(")");
  };

  // init clauses
  while (!ts.failed && ts.at_ident("init")) {
    Token kw = ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected relation name");
      return fail();
    }
    Token nameTok = ts.get();
    int sym = schema->find(nameTok.text);
    if (sym < 0) {
      diags.push_back({nameTok.line, nameTok.col, "unknown symbol " + nameTok.text,
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (schema->at(sym).kind != SymKind::Aux) {
      diags.push_back({nameTok.line, nameTok.col, "init only allowed for auxiliary relations",
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (prog.init.count(sym)) {
      diags.push_back({nameTok.line, nameTok.col, "duplicate init for " + nameTok.text,
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    std::vector<std::string> yv;
    if (!parse_head_vars(yv)) return fail();
    if (int(yv.size()) != schema->at(sym).arity) {
      diags.push_back({nameTok.line, nameTok.col, "arity mismatch in init head",
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (!ts.expect(":=")) return fail();
    FormulaPtr f = detail::parse_formula(ts);
    if (ts.failed) return fail();
    if (!ts.expect(";")) return fail();
    std::set<std::string> allowed(yv.begin(), yv.end());
    if (!check_formula(f, allowed, kw.line, kw.col, /*inputOnly=*/true)) return fail();
    prog.init[sym] = {yv, f};
  }

  // rules
  std::set<std::pair<bool, int>> ruleSeen;
  while (!ts.failed && ts.at_ident("on")) {
    ts.get();
    bool insert;
    if (ts.at_ident("insert"))
      insert = true;
    else if (ts.at_ident("delete"))
      insert = false;
    else {
      ts.error("expected 'insert' or 'delete'");
      return fail();
    }
    ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected input relation name");
      return fail();
    }
    Token nameTok = ts.get();
    int sym = schema->find(nameTok.text);
    if (sym < 0) {
      diags.push_back({nameTok.line, nameTok.col, "unknown symbol " + nameTok.text,
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (schema->at(sym).kind != SymKind::Input) {
      diags.push_back({nameTok.line, nameTok.col, "rules must target input relations",
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (!ruleSeen.insert({insert, sym}).second) {
      diags.push_back({nameTok.line, nameTok.col,
                       "duplicate rule for this operation on " + nameTok.text,
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    std::vector<std::string> xv;
    if (!parse_head_vars(xv)) return fail();
    if (int(xv.size()) != schema->at(sym).arity) {
      diags.push_back({nameTok.line, nameTok.col, "arity mismatch in rule head",
                       SourceDiagnostic::Severity::Error});
      return fail();
    }
    if (!ts.expect("{")) return fail();
    std::set<int> updSeen;
    while (!ts.failed && !ts.at("}")) {
      if (ts.peek().kind != Token::Kind::Ident) {
        ts.error("expected auxiliary relation name");
        return fail();
      }
      Token updTok = ts.get();
      int aux = schema->find(updTok.text);
      if (aux < 0) {
        diags.push_back({updTok.line, updTok.col, "unknown symbol " + updTok.text,
                         SourceDiagnostic::Severity::Error});
        return fail();
      }
      if (schema->at(aux).kind != SymKind::Aux) {
        diags.push_back({updTok.line, updTok.col, "updates must target auxiliary relations",
                         SourceDiagnostic::Severity::Error});
        return fail();
      }
      if (!updSeen.insert(aux).second) {
        diags.push_back({updTok.line, updTok.col, "duplicate update for " + updTok.text,
                         SourceDiagnostic::Severity::Error});
        return fail();
      }
      std::vector<std::string> yv;
      if (!parse_head_vars(yv)) return fail();
      for (const auto& v : yv)
        if (std::find(xv.begin(), xv.end(), v) != xv.end()) {
          diags.push_back({updTok.line, updTok.col, "update variable " + v + " shadows rule head",
                           SourceDiagnostic::Severity::Error});
          return fail();
        }
      if (int(yv.size()) != schema->at(aux).arity) {
        diags.push_back({updTok.line, updTok.col, "arity mismatch in update head",
                         SourceDiagnostic::Severity::Error});
        return fail();
      }
      if (!ts.expect(":=")) return fail();
      FormulaPtr f = detail::parse_formula(ts);
      if (ts.failed) return fail();
      if (!ts.expect(";")) return fail();
      std::set<std::string> allowed(xv.begin(), xv.end());
      allowed.insert(yv.begin(), yv.end());
      if (!check_formula(f, allowed, updTok.line, updTok.col)) return fail();
      prog.updates[{aux, OpKey{insert, sym}}] = {xv, yv, f};
    }
    if (!ts.expect("}")) return fail();
  }

  if (!ts.at_ident("query")) {
    ts.error("expected 'query'");
    return fail();
  }
  ts.get();
  if (ts.peek().kind != Token::Kind::Ident) {
    ts.error("expected query relation name");
    return fail();
  }
  Token qTok = ts.get();
  int q = schema->find(qTok.text);
  if (q < 0 || schema->at(q).kind != SymKind::Aux) {
    diags.push_back({qTok.line, qTok.col, "query must name an auxiliary relation",
                     SourceDiagnostic::Severity::Error});
    return fail();
  }
  prog.query = q;
  if (!ts.expect(";")) return fail();
  if (ts.peek().kind != detail::Token::Kind::End) {
    ts.error("unexpected trailing input");
    return fail();
  }

  bool hasRealInput = false;
  for (int s : schema->input_syms())
    if (schema->at(s).arity >= 1) hasRealInput = true;
  if (!hasRealInput) {
    diags.push_back({1, 1, "input schema needs at least one relation of arity >= 1",
                     SourceDiagnostic::Severity::Error});
    return fail();
  }

  // totality: missing update rules become frame rules, with a warning
  for (int aux : schema->aux_syms())
    for (const OpKey& op : all_ops(*schema))
      if (!prog.updates.count({aux, op})) {
        diags.push_back({1, 1,
                         "no update rule for " + schema->at(aux).name + " on " +
                             (op.insert ? "insert " : "delete ") + schema->at(op.sym).name +
                             "; assuming frame rule",
                         SourceDiagnostic::Severity::Warning});
      }
  ensure_total_frames(prog);

  try {
    validate_program(prog);
  } catch (const LogicError& e) {
    diags.push_back({1, 1, e.what(), SourceDiagnostic::Severity::Error});
    return fail();
  }
  res.value = std::move(prog);
  return res;
}

// ---------------------------------------------------------------------------
// Program printing (canonical; parse(print(p)) == p)

inline std::string print_program(const DynamicProgram& p) {
  const Schema& sch = *p.schema;
  std::string out = "schema {\n";
  auto decl_line = [&](SymKind kind, const char* kw) {
    std::vector<int> syms = kind == SymKind::Input ? sch.input_syms() : sch.aux_syms();
    if (syms.empty()) return;
    out += "  ";
    out += kw;
    out += " ";
    for (size_t i = 0; i < syms.size(); ++i) {
      if (i) out += ", ";
      out += sch.at(syms[i]).name + "/" + std::to_string(sch.at(syms[i]).arity);
    }
    out += ";\n";
  };
  decl_line(SymKind::Input, "input");
  decl_line(SymKind::Aux, "aux");
  out += "}\n";
  for (const auto& [aux, rule] : p.init) {
    out += "init " + sch.at(aux).name + "(";
    for (size_t i = 0; i < rule.yvars.size(); ++i) {
      if (i) out += ", ";
      out += rule.yvars[i];
    }
    out += ") := " + print_formula(rule.formula) + ";\n";
  }
  for (int sym : sch.input_syms()) {
    for (bool insert : {true, false}) {
      OpKey op{insert, sym};
      // gather updates for this op in aux order
      std::vector<std::pair<int, const UpdateRule*>> upds;
      for (int aux : sch.aux_syms()) {
        auto it = p.updates.find({aux, op});
        if (it != p.updates.end()) upds.emplace_back(aux, &it->second);
      }
      if (upds.empty()) continue;
      out += "on ";
      out += insert ? "insert " : "delete ";
      out += sch.at(sym).name + "(";
      const auto& xv = upds.front().second->xvars;
      for (size_t i = 0; i < xv.size(); ++i) {
        if (i) out += ", ";
        out += xv[i];
      }
      out += ") {\n";
      for (const auto& [aux, rule] : upds) {
        out += "  " + sch.at(aux).name + "(";
        for (size_t i = 0; i < rule->yvars.size(); ++i) {
          if (i) out += ", ";
          out += rule->yvars[i];
        }
        out += ") := " + print_formula(rule->formula) + ";\n";
      }
      out += "}\n";
    }
  }
  out += "query " + sch.at(p.query).name + ";\n";
  return out;
}

// Note: print_program assumes every update rule for one (op, relation) shares
// its head variable list, which parse_program guarantees; programmatic
// constructions should follow the same convention before printing.

// ---------------------------------------------------------------------------
// Modification sequences: "domain N" header, then "+Name(args)" / "-Name(args)".

struct SequenceFile {
  int domainSize = 0;
  ModSeq mods;
};

inline ParseResult<SequenceFile> parse_sequence(const std::string& src, const SchemaPtr& schema) {
  ParseResult<SequenceFile> res;
  detail::TokenStream ts = detail::tokenize(src, res.diagnostics);
  using detail::Token;
  SequenceFile sf;
  if (!ts.at_ident("domain")) {
    ts.error("expected 'domain' header");
    return res;
  }
  ts.get();
  if (ts.peek().kind != Token::Kind::Nat) {
    ts.error("expected domain size");
    return res;
  }
  sf.domainSize = std::stoi(ts.get().text);
  if (sf.domainSize < 1) {
    ts.error("domain must be non-empty");
    return res;
  }
  while (!ts.failed && ts.peek().kind != Token::Kind::End) {
    bool insert;
    if (ts.at("+"))
      insert = true;
    else if (ts.at("-"))
      insert = false;
    else {
      ts.error("expected '+' or '-'");
      return res;
    }
    ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected relation name");
      return res;
    }
    Token nameTok = ts.get();
    int sym = schema->find(nameTok.text);
    if (sym < 0) {
      res.diagnostics.push_back({nameTok.line, nameTok.col, "unknown symbol " + nameTok.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    if (schema->at(sym).kind != SymKind::Input) {
      res.diagnostics.push_back({nameTok.line, nameTok.col,
                                 "modifications must target input relations",
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    if (!ts.expect("(")) return res;
    Tuple t;
    if (!ts.at(")")) {
      for (;;) {
        if (ts.peek().kind != Token::Kind::Nat) {
          ts.error("expected element number");
          return res;
        }
        Token numTok = ts.get();
        int v = std::stoi(numTok.text);
        if (v < 1 || v > sf.domainSize) {
          res.diagnostics.push_back({numTok.line, numTok.col,
                                     "element " + numTok.text + " outside domain 1.." +
                                         std::to_string(sf.domainSize),
                                     SourceDiagnostic::Severity::Error});
          return res;
        }
        t.push_back(v);
        if (ts.at(",")) {
          ts.get();
          continue;
        }
        break;
      }
    }
    if (!ts.expect(")")) return res;
    if (int(t.size()) != schema->at(sym).arity) {
      res.diagnostics.push_back({nameTok.line, nameTok.col, "arity mismatch for " + nameTok.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    sf.mods.push_back({insert, sym, t});
  }
  if (ts.failed) return res;
  res.value = std::move(sf);
  return res;
}

inline std::string print_sequence(const SequenceFile& sf, const SchemaPtr& schema) {
  std::string out = "domain " + std::to_string(sf.domainSize) + "\n";
  for (const auto& m : sf.mods) {
    out += m.insert ? "+" : "-";
    out += schema->at(m.sym).name + "(";
    for (size_t i = 0; i < m.tuple.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(m.tuple[i]);
    }
    out += ")\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// State dumps: byte-stable, relations in schema order, tuples sorted, 0-ary
// relations as booleans.

inline std::string print_state(const Structure& s) {
  std::string out = "domain: " + std::to_string(s.domainSize) + "\n";
  for (int i = 0; i < s.schema->size(); ++i) {
    const Symbol& sym = s.schema->at(i);
    out += sym.name + ": ";
    if (sym.arity == 0) {
      out += s.bit(i) ? "true" : "false";
    } else {
      out += "[";
      bool firstT = true;
      for (const auto& t : s.rel[size_t(i)]) {
        if (!firstT) out += ", ";
        firstT = false;
        out += "[";
        for (size_t j = 0; j < t.size(); ++j) {
          if (j) out += ", ";
          out += std::to_string(t[j]);
        }
        out += "]";
      }
      out += "]";
    }
    out += "\n";
  }
  return out;
}

inline ParseResult<Structure> parse_state(const std::string& src, const SchemaPtr& schema) {
  ParseResult<Structure> res;
  detail::TokenStream ts = detail::tokenize(src, res.diagnostics);
  using detail::Token;
  if (!ts.at_ident("domain")) {
    ts.error("expected 'domain'");
    return res;
  }
  ts.get();
  if (!ts.expect(":")) return res;
  if (ts.peek().kind != Token::Kind::Nat) {
    ts.error("expected domain size");
    return res;
  }
  int n = std::stoi(ts.get().text);
  if (n < 1) {
    ts.error("domain must be non-empty");
    return res;
  }
  Structure s = empty_structure(schema, n);
  while (!ts.failed && ts.peek().kind != Token::Kind::End) {
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected relation name");
      return res;
    }
    Token nameTok = ts.get();
    int sym = schema->find(nameTok.text);
    if (sym < 0) {
      res.diagnostics.push_back({nameTok.line, nameTok.col, "unknown symbol " + nameTok.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    if (!ts.expect(":")) return res;
    if (schema->at(sym).arity == 0) {
      if (ts.at_ident("true")) {
        ts.get();
        s.set_bit(sym, true);
      } else if (ts.at_ident("false")) {
        ts.get();
      } else {
        ts.error("expected true or false");
        return res;
      }
      continue;
    }
    if (!ts.expect("[")) return res;
    while (!ts.failed && !ts.at("]")) {
      if (!ts.expect("[")) return res;
      Tuple t;
      while (!ts.failed && !ts.at("]")) {
        if (ts.peek().kind != Token::Kind::Nat) {
          ts.error("expected element number");
          return res;
        }
        t.push_back(std::stoi(ts.get().text));
        if (ts.at(",")) ts.get();
      }
      if (!ts.expect("]")) return res;
      if (int(t.size()) != schema->at(sym).arity) {
        res.diagnostics.push_back({nameTok.line, nameTok.col, "arity mismatch for " + nameTok.text,
                                   SourceDiagnostic::Severity::Error});
        return res;
      }
      for (int v : t)
        if (v < 1 || v > n) {
          res.diagnostics.push_back({nameTok.line, nameTok.col, "element outside domain",
                                     SourceDiagnostic::Severity::Error});
          return res;
        }
      s.rel[size_t(sym)].insert(t);
      if (ts.at(",")) ts.get();
    }
    if (!ts.expect("]")) return res;
  }
  if (ts.failed) return res;
  res.value = std::move(s);
  return res;
}

}  // namespace dynrel
