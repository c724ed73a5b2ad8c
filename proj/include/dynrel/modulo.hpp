#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynrel/dsl.hpp"
#include "dynrel/dynprog.hpp"

// Modulo-counting queries over set types: |{A : type(A) = gamma}| mod p.
// A strict atom uses every variable of the type, so one modification changes
// the type of at most one k-set and the residues are maintainable with
// quantifier-free bit updates.

namespace dynrel {

struct SetType {
  int k = 0;
  // (relation name, variable map), variables 0-based; canonical form is the
  // lexicographically least permutation image with a sorted atom list
  std::vector<std::pair<std::string, std::vector<int>>> atoms;

  bool operator==(const SetType& o) const { return k == o.k && atoms == o.atoms; }
  bool operator<(const SetType& o) const {
    return std::tie(k, atoms) < std::tie(o.k, o.atoms);
  }
};

namespace detail {

inline std::vector<std::vector<int>> permutation_list(int k) {
  std::vector<int> perm;
  for (int i = 0; i < k; ++i) perm.push_back(i);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline std::vector<std::pair<std::string, std::vector<int>>> apply_perm(
    const std::vector<std::pair<std::string, std::vector<int>>>& atoms,
    const std::vector<int>& perm) {
  auto out = atoms;
  for (auto& [name, vm] : out)
    for (int& v : vm) v = perm[size_t(v)];
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline SetType canonical_set_type(SetType ty) {
  if (ty.atoms.empty()) throw LogicError("set type must contain at least one atom");
  if (ty.k > 8) throw BudgetError("set types beyond 8 variables are not supported");
  for (auto& [name, vm] : ty.atoms) {
    std::set<int> used(vm.begin(), vm.end());
    for (int v : vm)
      if (v < 0 || v >= ty.k) throw LogicError("set type variable out of range in " + name);
    if (int(used.size()) != ty.k)
      throw LogicError("atom " + name + " must use every variable of the set type");
  }
  std::sort(ty.atoms.begin(), ty.atoms.end());
  ty.atoms.erase(std::unique(ty.atoms.begin(), ty.atoms.end()), ty.atoms.end());
  auto best = ty.atoms;
  for (const auto& perm : detail::permutation_list(ty.k)) {
    auto cand = detail::apply_perm(ty.atoms, perm);
    if (cand < best) best = cand;
  }
  ty.atoms = std::move(best);
  return ty;
}

// Canonical type of a concrete element set (given in any order, distinct).
inline SetType set_type(const Structure& s, std::vector<int> elems) {
  std::sort(elems.begin(), elems.end());
  if (std::adjacent_find(elems.begin(), elems.end()) != elems.end())
    throw LogicError("set type needs distinct elements");
  SetType ty;
  ty.k = int(elems.size());
  const Schema& sch = *s.schema;
  for (int sym = 0; sym < sch.size(); ++sym) {
    int ar = sch.at(sym).arity;
    if (ar < ty.k) continue;
    for (const auto& vm : position_maps(ar, ty.k)) {
      std::set<int> used(vm.begin(), vm.end());
      if (int(used.size()) != ty.k) continue;
      Tuple t;
      for (int v : vm) t.push_back(elems[size_t(v)]);
      if (s.holds(sym, t)) ty.atoms.push_back({sch.at(sym).name, vm});
    }
  }
  if (ty.atoms.empty()) {
    SetType atomless;
    atomless.k = ty.k;
    return atomless;  // callers compare against non-atomless types only
  }
  return canonical_set_type(std::move(ty));
}

inline long long count_set_type(const Structure& s, const SetType& gamma) {
  long long cnt = 0;
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int next) {
    if (int(pick.size()) == gamma.k) {
      if (set_type(s, pick) == gamma) ++cnt;
      return;
    }
    for (int e = next; e <= s.domainSize; ++e) {
      pick.push_back(e);
      rec(e + 1);
      pick.pop_back();
    }
  };
  rec(1);
  return cnt;
}

// ---------------------------------------------------------------------------
// Expressions: boolean combinations of residue tests.

struct ModExpr;
using ModExprPtr = std::shared_ptr<ModExpr>;

struct ModExpr {
  enum class Kind { Simple, Not, And, Or } kind = Kind::Simple;
  SetType type;     // Simple
  int mod = 2;      // p >= 2
  int residue = 0;  // 0 <= residue < mod
  std::vector<ModExprPtr> kids;
};

struct ModuloExpression {
  ModExprPtr root;
  SchemaPtr schema;  // inferred input relations, sorted by name
};

inline bool eval_modexpr(const Structure& s, const ModExprPtr& e) {
  switch (e->kind) {
    case ModExpr::Kind::Simple:
      return count_set_type(s, e->type) % e->mod == e->residue;
    case ModExpr::Kind::Not:
      return !eval_modexpr(s, e->kids[0]);
    case ModExpr::Kind::And:
      return eval_modexpr(s, e->kids[0]) && eval_modexpr(s, e->kids[1]);
    case ModExpr::Kind::Or:
      return eval_modexpr(s, e->kids[0]) || eval_modexpr(s, e->kids[1]);
  }
  return false;
}

inline bool eval_modexpr(const Structure& s, const ModuloExpression& me) {
  for (const Symbol& sym : me.schema->symbols) {
    int found = s.schema->find(sym.name);
    if (found < 0 || s.schema->at(found).arity != sym.arity)
      throw LogicError("structure does not provide relation " + sym.name);
  }
  return eval_modexpr(s, me.root);
}

// ---------------------------------------------------------------------------
// Text format:  count { E(1,2); E(2,1) } mod 3 = 1, combined with
// and/or/not and parentheses. Variables are positive naturals; the input
// schema is inferred from the atoms.

namespace detail {

inline ModExprPtr parse_mod_or(TokenStream& ts,
                               std::map<std::string, int>& arities);

inline std::optional<int> small_nat(TokenStream& ts, const Token& t) {
  if (t.text.size() > 9) {
    ts.diags->push_back({t.line, t.col, "number too large",
                         SourceDiagnostic::Severity::Error});
    ts.failed = true;
    return std::nullopt;
  }
  return std::stoi(t.text);
}

inline ModExprPtr parse_mod_primary(TokenStream& ts,
                                    std::map<std::string, int>& arities) {
  if (ts.failed) return nullptr;
  if (ts.at("(")) {
    ts.get();
    ModExprPtr e = parse_mod_or(ts, arities);
    if (!ts.expect(")")) return nullptr;
    return e;
  }
  if (!ts.at_ident("count")) {
    ts.error("expected 'count' or '('");
    return nullptr;
  }
  ts.get();
  if (!ts.expect("{")) return nullptr;
  auto e = std::make_shared<ModExpr>();
  e->kind = ModExpr::Kind::Simple;
  int maxVar = 0;
  std::vector<std::pair<std::string, std::vector<int>>> atoms;
  for (;;) {
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected relation name");
      return nullptr;
    }
    Token nameTok = ts.get();
    if (!ts.expect("(")) return nullptr;
    std::vector<int> vm;
    for (;;) {
      if (ts.peek().kind != Token::Kind::Nat) {
        ts.error("expected variable number");
        return nullptr;
      }
      Token v = ts.get();
      std::optional<int> varOpt = small_nat(ts, v);
      if (!varOpt) return nullptr;
      int var = *varOpt;
      if (var < 1) {
        ts.error("variables are numbered from 1");
        return nullptr;
      }
      vm.push_back(var - 1);
      maxVar = std::max(maxVar, var);
      if (ts.at(",")) {
        ts.get();
        continue;
      }
      break;
    }
    if (!ts.expect(")")) return nullptr;
    auto it = arities.find(nameTok.text);
    if (it == arities.end())
      arities[nameTok.text] = int(vm.size());
    else if (it->second != int(vm.size())) {
      ts.diags->push_back({nameTok.line, nameTok.col,
                           "conflicting arity for " + nameTok.text,
                           SourceDiagnostic::Severity::Error});
      ts.failed = true;
      return nullptr;
    }
    if (std::find(atoms.begin(), atoms.end(), std::make_pair(nameTok.text, vm)) !=
        atoms.end()) {
      ts.diags->push_back({nameTok.line, nameTok.col, "duplicate atom in set type",
                           SourceDiagnostic::Severity::Error});
      ts.failed = true;
      return nullptr;
    }
    atoms.push_back({nameTok.text, vm});
    if (ts.at(";")) {
      ts.get();
      continue;
    }
    break;
  }
  Token closeTok = ts.peek();
  if (!ts.expect("}")) return nullptr;
  e->type.k = maxVar;
  e->type.atoms = std::move(atoms);
  try {
    e->type = canonical_set_type(std::move(e->type));
  } catch (const LogicError& err) {
    ts.diags->push_back({closeTok.line, closeTok.col, err.what(),
                         SourceDiagnostic::Severity::Error});
    ts.failed = true;
    return nullptr;
  }
  if (!ts.at_ident("mod")) {
    ts.error("expected 'mod'");
    return nullptr;
  }
  ts.get();
  if (ts.peek().kind != Token::Kind::Nat) {
    ts.error("expected modulus");
    return nullptr;
  }
  Token pTok = ts.get();
  std::optional<int> pOpt = small_nat(ts, pTok);
  if (!pOpt) return nullptr;
  e->mod = *pOpt;
  if (e->mod < 2) {
    ts.diags->push_back({pTok.line, pTok.col, "modulus must be at least 2",
                         SourceDiagnostic::Severity::Error});
    ts.failed = true;
    return nullptr;
  }
  if (!ts.expect("=")) return nullptr;
  if (ts.peek().kind != Token::Kind::Nat) {
    ts.error("expected residue");
    return nullptr;
  }
  Token qTok = ts.get();
  std::optional<int> qOpt = small_nat(ts, qTok);
  if (!qOpt) return nullptr;
  e->residue = *qOpt;
  if (e->residue >= e->mod) {
    ts.diags->push_back({qTok.line, qTok.col, "residue must be below the modulus",
                         SourceDiagnostic::Severity::Error});
    ts.failed = true;
    return nullptr;
  }
  return e;
}

inline ModExprPtr parse_mod_unary(TokenStream& ts,
                                  std::map<std::string, int>& arities) {
  if (ts.failed) return nullptr;
  if (ts.at_ident("not")) {
    ts.get();
    ModExprPtr kid = parse_mod_unary(ts, arities);
    if (!kid) return nullptr;
    auto e = std::make_shared<ModExpr>();
    e->kind = ModExpr::Kind::Not;
    e->kids.push_back(std::move(kid));
    return e;
  }
  return parse_mod_primary(ts, arities);
}

inline ModExprPtr parse_mod_and(TokenStream& ts,
                                std::map<std::string, int>& arities) {
  ModExprPtr f = parse_mod_unary(ts, arities);
  while (f && !ts.failed && ts.at_ident("and")) {
    ts.get();
    ModExprPtr g = parse_mod_unary(ts, arities);
    if (!g) return nullptr;
    auto e = std::make_shared<ModExpr>();
    e->kind = ModExpr::Kind::And;
    e->kids = {std::move(f), std::move(g)};
    f = std::move(e);
  }
  return f;
}

inline ModExprPtr parse_mod_or(TokenStream& ts,
                               std::map<std::string, int>& arities) {
  ModExprPtr f = parse_mod_and(ts, arities);
  while (f && !ts.failed && ts.at_ident("or")) {
    ts.get();
    ModExprPtr g = parse_mod_and(ts, arities);
    if (!g) return nullptr;
    auto e = std::make_shared<ModExpr>();
    e->kind = ModExpr::Kind::Or;
    e->kids = {std::move(f), std::move(g)};
    f = std::move(e);
  }
  return f;
}

}  // namespace detail

inline ParseResult<ModuloExpression> parse_modexpr(const std::string& src) {
  ParseResult<ModuloExpression> res;
  detail::TokenStream ts = detail::tokenize(src, res.diagnostics);
  std::map<std::string, int> arities;
  ModExprPtr root = detail::parse_mod_or(ts, arities);
  if (!root || ts.failed) return res;
  if (ts.peek().kind != detail::Token::Kind::End) {
    ts.error("unexpected trailing input");
    return res;
  }
  std::vector<Symbol> syms;
  for (const auto& [name, ar] : arities) syms.push_back({name, ar, SymKind::Input});
  ModuloExpression me;
  me.root = std::move(root);
  me.schema = make_schema(std::move(syms));
  res.value = std::move(me);
  return res;
}

namespace detail {

inline void print_modexpr_rec(const ModExprPtr& e, int parentPrec, std::string& out) {
  // or = 1, and = 2, not = 3
  switch (e->kind) {
    case ModExpr::Kind::Simple: {
      out += "count { ";
      for (size_t i = 0; i < e->type.atoms.size(); ++i) {
        if (i) out += "; ";
        out += e->type.atoms[i].first + "(";
        const auto& vm = e->type.atoms[i].second;
        for (size_t j = 0; j < vm.size(); ++j) {
          if (j) out += ", ";
          out += std::to_string(vm[j] + 1);
        }
        out += ")";
      }
      out += " } mod " + std::to_string(e->mod) + " = " + std::to_string(e->residue);
      return;
    }
    case ModExpr::Kind::Not:
      out += "not ";
      print_modexpr_rec(e->kids[0], 3, out);
      return;
    case ModExpr::Kind::And:
    case ModExpr::Kind::Or: {
      int prec = e->kind == ModExpr::Kind::And ? 2 : 1;
      bool paren = prec < parentPrec;
      if (paren) out += "(";
      print_modexpr_rec(e->kids[0], prec, out);
      out += e->kind == ModExpr::Kind::And ? " and " : " or ";
      print_modexpr_rec(e->kids[1], prec + 1, out);  // keep left association
      if (paren) out += ")";
      return;
    }
  }
}

}  // namespace detail

inline std::string print_modexpr(const ModuloExpression& me) {
  std::string out;
  detail::print_modexpr_rec(me.root, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Compilation to a dynamic program with one-hot residue bits per simple
// subexpression and a query bit evaluated without delay.

namespace detail {

struct SimpleInfo {
  const ModExpr* expr = nullptr;
  std::vector<std::string> bitNames;  // residue r -> aux name
};

inline void collect_simples(const ModExprPtr& e, std::vector<const ModExpr*>& out) {
  if (e->kind == ModExpr::Kind::Simple) {
    out.push_back(e.get());
    return;
  }
  for (const auto& kid : e->kids) collect_simples(kid, out);
}

// Exact-type condition on class representatives: every strict atom of the
// schema holds or fails exactly as the target set prescribes. `subst` rewrites
// a literal for the modified fact at compile time.
inline FormulaPtr exact_type_formula(
    const std::vector<std::pair<std::string, std::vector<int>>>& allStrict,
    const std::vector<std::pair<std::string, std::vector<int>>>& target,
    const std::vector<std::string>& repVar,
    const std::optional<std::pair<std::string, std::vector<int>>>& modified,
    std::optional<bool> modifiedValue) {
  std::vector<FormulaPtr> lits;
  for (const auto& atom : allStrict) {
    bool positive = std::binary_search(target.begin(), target.end(), atom);
    if (modified && atom == *modified) {
      if (*modifiedValue != positive) return f_false();
      continue;
    }
    std::vector<std::string> args;
    for (int v : atom.second) args.push_back(repVar[size_t(v)]);
    FormulaPtr lit = f_atom(atom.first, std::move(args));
    lits.push_back(positive ? lit : f_not(lit));
  }
  return f_and_all(std::move(lits));
}

inline std::vector<std::vector<std::pair<std::string, std::vector<int>>>> type_orbit(
    const SetType& ty) {
  std::set<std::vector<std::pair<std::string, std::vector<int>>>> orbit;
  for (const auto& perm : permutation_list(ty.k)) orbit.insert(apply_perm(ty.atoms, perm));
  return {orbit.begin(), orbit.end()};
}

}  // namespace detail

inline DynamicProgram compile_modexpr(const ModuloExpression& me) {
  const SchemaPtr& in = me.schema;
  std::vector<const ModExpr*> simples;
  detail::collect_simples(me.root, simples);

  std::set<std::string> taken;
  for (const Symbol& s : in->symbols) taken.insert(s.name);
  auto fresh = [&](std::string base) {
    while (taken.count(base)) base += "_";
    taken.insert(base);
    return base;
  };

  long long totalBits = 0;
  for (const ModExpr* e : simples) totalBits += e->mod;
  if (totalBits > 4096) throw BudgetError("too many residue bits to compile");

  std::vector<Symbol> symbols = in->symbols;  // inputs first, same order
  std::vector<detail::SimpleInfo> info;
  for (size_t j = 0; j < simples.size(); ++j) {
    detail::SimpleInfo si;
    si.expr = simples[j];
    for (int r = 0; r < simples[j]->mod; ++r) {
      std::string nm = fresh("B" + std::to_string(j) + "_" + std::to_string(r));
      si.bitNames.push_back(nm);
      symbols.push_back({nm, 0, SymKind::Aux});
    }
    info.push_back(std::move(si));
  }
  std::string queryName = fresh("Q");
  symbols.push_back({queryName, 0, SymKind::Aux});

  DynamicProgram prog;
  prog.schema = make_schema(symbols);
  prog.query = prog.schema->find(queryName);

  // strict atoms of the input schema per type arity
  auto all_strict = [&](int k) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (const Symbol& s : in->symbols) {
      if (s.arity < k) continue;
      for (const auto& vm : position_maps(s.arity, k)) {
        std::set<int> used(vm.begin(), vm.end());
        if (int(used.size()) == k) out.push_back({s.name, vm});
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  for (const Symbol& s : in->symbols) {
    int sym = prog.schema->find(s.name);
    std::vector<std::string> xv;
    for (int i = 0; i < s.arity; ++i) xv.push_back("x" + std::to_string(i + 1));
    for (bool insert : {true, false}) {
      OpKey op{insert, sym};
      FormulaPtr modAtom = f_atom(s.name, xv);
      FormulaPtr genuine = insert ? f_not(modAtom) : modAtom;

      // residue-shift formulas per simple subexpression, then the query bit
      std::vector<std::vector<FormulaPtr>> bitUpdates(info.size());
      for (size_t j = 0; j < info.size(); ++j) {
        const SetType& gamma = info[j].expr->type;
        int k = gamma.k;
        auto allStrict = all_strict(k);
        auto orbit = detail::type_orbit(gamma);
        std::vector<FormulaPtr> incs, decs;
        std::vector<std::vector<int>> patterns;
        if (s.arity > 0) {
          std::vector<int> cur;
          all_partitions(s.arity, cur, -1, patterns);
        }
        for (const auto& e : patterns) {
          int classes = 0;
          for (int c : e) classes = std::max(classes, c + 1);
          if (classes != k) continue;
          std::vector<FormulaPtr> guard;
          for (size_t a = 0; a < e.size(); ++a)
            for (size_t b = a + 1; b < e.size(); ++b)
              guard.push_back(e[a] == e[b] ? f_eq(xv[a], xv[b])
                                           : f_not(f_eq(xv[a], xv[b])));
          std::vector<std::string> repVar(static_cast<size_t>(k), std::string());
          for (size_t a = 0; a < e.size(); ++a)
            if (repVar[size_t(e[a])].empty()) repVar[size_t(e[a])] = xv[a];
          // the modified fact as a strict atom over this pattern's classes
          std::pair<std::string, std::vector<int>> modified{s.name, e};
          std::vector<FormulaPtr> oldIn, newIn;
          for (const auto& target : orbit) {
            oldIn.push_back(detail::exact_type_formula(allStrict, target, repVar,
                                                       std::nullopt, std::nullopt));
            newIn.push_back(detail::exact_type_formula(allStrict, target, repVar,
                                                       modified, insert));
          }
          FormulaPtr oldF = f_or_all(std::move(oldIn));
          FormulaPtr newF = f_or_all(std::move(newIn));
          FormulaPtr base = f_and_all({f_and_all(guard), genuine});
          incs.push_back(f_and_all({base, f_not(oldF), newF}));
          decs.push_back(f_and_all({base, oldF, f_not(newF)}));
        }
        FormulaPtr inc = f_or_all(std::move(incs));
        FormulaPtr dec = f_or_all(std::move(decs));
        int p = info[j].expr->mod;
        for (int r = 0; r < p; ++r) {
          FormulaPtr stay = f_and_all({f_not(inc), f_not(dec),
                                       f_atom(info[j].bitNames[size_t(r)], {})});
          FormulaPtr up = f_and_all(
              {inc, f_atom(info[j].bitNames[size_t((r + p - 1) % p)], {})});
          FormulaPtr down =
              f_and_all({dec, f_atom(info[j].bitNames[size_t((r + 1) % p)], {})});
          FormulaPtr upd = f_or_all({stay, up, down});
          bitUpdates[j].push_back(upd);
          int aux = prog.schema->find(info[j].bitNames[size_t(r)]);
          prog.updates[{aux, op}] = {xv, {}, upd};
        }
      }

      // query bit: substitute each simple by its post-state residue bit update
      std::function<FormulaPtr(const ModExprPtr&)> combo =
          [&](const ModExprPtr& e) -> FormulaPtr {
        switch (e->kind) {
          case ModExpr::Kind::Simple: {
            for (size_t j = 0; j < info.size(); ++j)
              if (info[j].expr == e.get())
                return bitUpdates[j][size_t(e->residue)];
            throw LogicError("simple subexpression not collected");
          }
          case ModExpr::Kind::Not:
            return f_not(combo(e->kids[0]));
          case ModExpr::Kind::And:
            return f_and(combo(e->kids[0]), combo(e->kids[1]));
          case ModExpr::Kind::Or:
            return f_or(combo(e->kids[0]), combo(e->kids[1]));
        }
        throw LogicError("unreachable");
      };
      prog.updates[{prog.query, op}] = {xv, {}, combo(me.root)};
    }
  }

  // empty database: every count is zero
  for (size_t j = 0; j < info.size(); ++j)
    for (int r = 0; r < info[j].expr->mod; ++r) {
      int aux = prog.schema->find(info[j].bitNames[size_t(r)]);
      prog.init[aux] = {{}, r == 0 ? f_true() : f_false()};
    }
  std::function<FormulaPtr(const ModExprPtr&)> initCombo =
      [&](const ModExprPtr& e) -> FormulaPtr {
    switch (e->kind) {
      case ModExpr::Kind::Simple:
        return e->residue == 0 ? f_true() : f_false();
      case ModExpr::Kind::Not:
        return f_not(initCombo(e->kids[0]));
      case ModExpr::Kind::And:
        return f_and(initCombo(e->kids[0]), initCombo(e->kids[1]));
      case ModExpr::Kind::Or:
        return f_or(initCombo(e->kids[0]), initCombo(e->kids[1]));
    }
    throw LogicError("unreachable");
  };
  prog.init[prog.query] = {{}, initCombo(me.root)};
  validate_program(prog);
  return prog;
}

// Compare the compiled program's query bit with direct counting over every
// reachable state within the bounds. Returns a counterexample if any.
inline std::optional<std::pair<int, ModSeq>> equivalence_check_bounded(
    const ModuloExpression& me, int nMax, int lenMax, SeqMode mode = SeqMode::All,
    uint64_t stateBudget = 2000000) {
  DynamicProgram prog = compile_modexpr(me);
  std::optional<std::pair<int, ModSeq>> bad;
  for (int n = 1; n <= nMax && !bad; ++n) {
    reachable_states(
        prog, n, lenMax,
        [&](const ProgramState& st, const ModSeq& seq) {
          if (query_nonempty(prog, st) != eval_modexpr(st, me)) {
            bad = {n, seq};
            return false;
          }
          return true;
        },
        mode, stateBudget);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Normal-form insertion sequences realizing a multiset of set types on fresh,
// pairwise disjoint element blocks: larger types first, ties in canonical
// order, each block inserting exactly its type's atoms.

struct SetPlan {
  SetType type;
  int copies = 1;
};

inline std::pair<int, ModSeq> settype_normal_sequence(const SchemaPtr& schema,
                                                      std::vector<SetPlan> plans) {
  for (auto& pl : plans) {
    pl.type = canonical_set_type(std::move(pl.type));
    if (pl.copies < 1) throw LogicError("plan copies must be positive");
    for (const auto& [name, vm] : pl.type.atoms) {
      int sym = schema->find(name);
      if (sym < 0 || schema->at(sym).arity != int(vm.size()))
        throw LogicError("plan atom does not match the schema: " + name);
      if (schema->at(sym).kind != SymKind::Input)
        throw LogicError("plan atoms must target input relations: " + name);
    }
  }
  std::sort(plans.begin(), plans.end(), [](const SetPlan& a, const SetPlan& b) {
    if (a.type.k != b.type.k) return a.type.k > b.type.k;
    return a.type.atoms < b.type.atoms;
  });
  ModSeq seq;
  int next = 1;
  for (const auto& pl : plans) {
    for (int c = 0; c < pl.copies; ++c) {
      std::vector<int> elems;
      for (int i = 0; i < pl.type.k; ++i) elems.push_back(next++);
      for (const auto& [name, vm] : pl.type.atoms) {
        Tuple t;
        for (int v : vm) t.push_back(elems[size_t(v)]);
        seq.push_back({true, schema->find(name), t});
      }
    }
  }
  return {std::max(next - 1, 1), std::move(seq)};
}

// A sequence is in set-type normal form when it could have been produced by
// settype_normal_sequence: contiguous fresh blocks, one exact strict type per
// block, blocks ordered canonically.
inline bool is_settype_normal_form(const SchemaPtr& schema, const ModSeq& seq) {
  std::vector<SetPlan> plans;
  size_t i = 0;
  int maxUsed = 0;
  while (i < seq.size()) {
    if (!seq[i].insert || seq[i].tuple.empty()) return false;
    std::set<int> elems(seq[i].tuple.begin(), seq[i].tuple.end());
    size_t j = i;
    while (j < seq.size() &&
           std::set<int>(seq[j].tuple.begin(), seq[j].tuple.end()) == elems) {
      if (!seq[j].insert) return false;
      ++j;
    }
    // fresh contiguous block
    int lo = *elems.begin(), hi = *elems.rbegin();
    if (lo != maxUsed + 1 || hi - lo + 1 != int(elems.size())) return false;
    maxUsed = hi;
    SetType ty;
    ty.k = int(elems.size());
    std::vector<int> order(elems.begin(), elems.end());
    for (size_t a = i; a < j; ++a) {
      std::vector<int> vm;
      for (int v : seq[a].tuple) {
        auto it = std::find(order.begin(), order.end(), v);
        vm.push_back(int(it - order.begin()));
      }
      if (seq[a].sym < 0 || seq[a].sym >= schema->size()) return false;
      ty.atoms.push_back({schema->at(seq[a].sym).name, vm});
    }
    // merge consecutive identical types into one plan
    if (!plans.empty() && plans.back().type.k == ty.k &&
        plans.back().type.atoms == ty.atoms)
      plans.back().copies++;
    else
      plans.push_back({ty, 1});
    i = j;
  }
  try {
    auto [n, regen] = settype_normal_sequence(schema, plans);
    (void)n;
    return regen == seq;
  } catch (const LogicError&) {
    return false;
  }
}

}  // namespace dynrel
