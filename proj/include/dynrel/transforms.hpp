#pragma once

// Reductions between the decision problems and compilers from two-counter
// machines into dynamic programs of prescribed fragments.  Every operation
// returns the image program together with a ReductionReport naming the fresh
// relations and stating the guarantee the construction carries; the report's
// outputFragment is recomputed with classify() so callers can check it against
// the claimed fragment.

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dynrel/counter.hpp"
#include "dynrel/dynprog.hpp"

namespace dynrel {

struct ReductionReport {
  FragmentProfile inputFragment;   // meaningful for program-to-program reductions
  FragmentProfile outputFragment;
  // source relation / machine component -> relations representing it
  std::vector<std::pair<std::string, std::vector<std::string>>> schemaMapping;
  std::string guarantee;
};

namespace detail {

inline std::string fresh_name(std::string base, std::set<std::string>& taken) {
  while (taken.count(base)) base += "_";
  taken.insert(base);
  return base;
}

inline std::vector<std::string> head_vars(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
  return v;
}

inline std::vector<std::string> fresh_vars(const std::string& base, int n,
                                           const std::set<std::string>& avoid) {
  std::vector<std::string> v;
  int ctr = 1;
  while (int(v.size()) < n) {
    std::string s = base + std::to_string(ctr++);
    if (!avoid.count(s)) v.push_back(s);
  }
  return v;
}

inline std::vector<std::string> body_vars(int arity, const std::vector<std::string>& xv) {
  return fresh_vars("y", arity, std::set<std::string>(xv.begin(), xv.end()));
}

inline void collect_idents(const FormulaPtr& f, std::set<std::string>& out) {
  if (!f) return;
  switch (f->kind) {
    case FKind::Eq:
      out.insert(f->var1);
      out.insert(f->var2);
      break;
    case FKind::Atom:
      for (const auto& a : f->args) out.insert(a);
      break;
    case FKind::Exists:
    case FKind::Forall:
      out.insert(f->var1);
      break;
    default:
      break;
  }
  for (const auto& k : f->kids) collect_idents(k, out);
}

inline FormulaPtr rename_symbols(const FormulaPtr& f,
                                 const std::map<std::string, std::string>& m) {
  if (!f) return f;
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
    case FKind::Eq:
      return f;
    case FKind::Atom: {
      auto it = m.find(f->sym);
      return it == m.end() ? f : f_atom(it->second, f->args);
    }
    case FKind::Not:
      return f_not(rename_symbols(f->kids[0], m));
    case FKind::Exists:
      return f_exists(f->var1, rename_symbols(f->kids[0], m));
    case FKind::Forall:
      return f_forall(f->var1, rename_symbols(f->kids[0], m));
    default:
      return f_bin(f->kind, rename_symbols(f->kids[0], m),
                   rename_symbols(f->kids[1], m));
  }
}

// Simultaneous renaming of free variables.  Quantifiers shadow the map; a
// bound variable that would capture a renaming target is alpha-renamed first.
inline FormulaPtr rename_free_vars(const FormulaPtr& f,
                                   const std::map<std::string, std::string>& m) {
  if (!f || m.empty()) return f;
  auto look = [&](const std::string& v) {
    auto it = m.find(v);
    return it == m.end() ? v : it->second;
  };
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
      return f;
    case FKind::Eq: {
      std::string a = look(f->var1), b = look(f->var2);
      if (a == f->var1 && b == f->var2) return f;
      return f_eq(a, b);
    }
    case FKind::Atom: {
      bool changed = false;
      std::vector<std::string> args = f->args;
      for (auto& a : args) {
        std::string r = look(a);
        if (r != a) {
          a = r;
          changed = true;
        }
      }
      return changed ? f_atom(f->sym, args) : f;
    }
    case FKind::Not:
      return f_not(rename_free_vars(f->kids[0], m));
    case FKind::Exists:
    case FKind::Forall: {
      std::map<std::string, std::string> inner = m;
      inner.erase(f->var1);
      std::string v = f->var1;
      std::set<std::string> targets;
      for (const auto& [from, to] : inner) targets.insert(to);
      if (targets.count(v)) {
        std::set<std::string> used = targets;
        collect_idents(f->kids[0], used);
        for (const auto& [from, to] : inner) used.insert(from);
        std::string nv = v;
        do nv += "_";
        while (used.count(nv));
        inner[v] = nv;
        v = nv;
      }
      FormulaPtr body = rename_free_vars(f->kids[0], inner);
      return f->kind == FKind::Exists ? f_exists(v, body) : f_forall(v, body);
    }
    default:
      return f_bin(f->kind, rename_free_vars(f->kids[0], m),
                   rename_free_vars(f->kids[1], m));
  }
}

using AtomRewrite =
    std::function<FormulaPtr(const std::string&, const std::vector<std::string>&)>;

// Replaces atoms by formulas over the same argument variables; the rewrite
// returns nullptr to keep an atom.  The replacement may mention additional
// free variables only when no quantifier of f can capture them (all uses
// below rewrite quantifier-free formulas or introduce head variables that
// never occur bound).
inline FormulaPtr map_atoms(const FormulaPtr& f, const AtomRewrite& rw) {
  if (!f) return f;
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
    case FKind::Eq:
      return f;
    case FKind::Atom: {
      FormulaPtr r = rw(f->sym, f->args);
      return r ? r : f;
    }
    case FKind::Not:
      return f_not(map_atoms(f->kids[0], rw));
    case FKind::Exists:
      return f_exists(f->var1, map_atoms(f->kids[0], rw));
    case FKind::Forall:
      return f_forall(f->var1, map_atoms(f->kids[0], rw));
    default:
      return f_bin(f->kind, map_atoms(f->kids[0], rw), map_atoms(f->kids[1], rw));
  }
}

inline FormulaPtr tuple_eq(const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw LogicError("tuple equality arity mismatch");
  std::vector<FormulaPtr> eqs;
  for (size_t i = 0; i < a.size(); ++i) eqs.push_back(f_eq(a[i], b[i]));
  return f_and_all(eqs);
}

inline FormulaPtr f_xor(const FormulaPtr& a, const FormulaPtr& b) {
  return f_and(f_or(a, b), f_not(f_and(a, b)));
}

// Update formula of r with head variables renamed to xv / yv.
inline FormulaPtr instantiate(const UpdateRule& r, const std::vector<std::string>& xv,
                              const std::vector<std::string>& yv) {
  if (r.xvars.size() != xv.size() || r.yvars.size() != yv.size())
    throw LogicError("rule instantiation arity mismatch");
  std::map<std::string, std::string> m;
  for (size_t i = 0; i < xv.size(); ++i) m[r.xvars[i]] = xv[i];
  for (size_t i = 0; i < yv.size(); ++i) m[r.yvars[i]] = yv[i];
  return rename_free_vars(r.formula, m);
}

inline FormulaPtr bit(const std::string& name) { return f_atom(name, {}); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Emptiness -> Consistency.  A fresh relation latches everything the query
// ever contained (read from the pre-state, so it trails by one step).  The
// image is consistent iff the source query stays empty on every sequence:
// latching is order-blind on empty queries, and any witness tuple survives
// undoing the input modifications while the empty history never shows it.
// ---------------------------------------------------------------------------

inline std::pair<DynamicProgram, ReductionReport> emptiness_to_consistency(
    const DynamicProgram& p) {
  validate_program(p);
  std::set<std::string> taken;
  for (int i = 0; i < p.schema->size(); ++i) taken.insert(p.schema->at(i).name);
  const Symbol& q = p.schema->at(p.query);
  std::string ever = detail::fresh_name("Ever" + q.name, taken);

  std::vector<Symbol> syms;
  for (int i = 0; i < p.schema->size(); ++i) syms.push_back(p.schema->at(i));
  syms.push_back({ever, q.arity, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.updates = p.updates;  // existing indices are unchanged
  out.init = p.init;
  int everIdx = out.schema->find(ever);
  for (const OpKey& op : all_ops(*out.schema)) {
    const UpdateRule& any = p.update_for(p.schema->aux_syms().front(), op);
    std::vector<std::string> yv = detail::body_vars(q.arity, any.xvars);
    out.updates[{everIdx, op}] = {any.xvars, yv,
                                  f_or(f_atom(ever, yv), f_atom(q.name, yv))};
  }
  out.init[everIdx] = {detail::body_vars(q.arity, {}), f_false()};
  out.query = everIdx;
  validate_program(out);

  ReductionReport rep;
  rep.inputFragment = classify(p);
  rep.outputFragment = classify(out);
  rep.schemaMapping.push_back({q.name, {q.name, ever}});
  rep.guarantee =
      "the query of the source stays empty on every modification sequence iff "
      "the image is consistent; arities and quantifier-freeness are preserved";
  if (rep.outputFragment.maxInputArity != rep.inputFragment.maxInputArity ||
      rep.outputFragment.maxAuxArity != rep.inputFragment.maxAuxArity ||
      rep.outputFragment.quantifierFreeUpdates != rep.inputFragment.quantifierFreeUpdates)
    throw LogicError("internal: emptiness_to_consistency changed the fragment");
  return {out, rep};
}

// ---------------------------------------------------------------------------
// Consistency -> Emptiness, first-order image.  The schema is doubled; each
// copy evolves under its own half of the input vocabulary, and after every
// step a fresh query latches any tuple on which the copies' queries disagree
// while their (virtual) databases coincide.  The equality test needs
// universal quantifiers, so the image leaves the quantifier-free fragment but
// keeps both arity bounds.
// ---------------------------------------------------------------------------

inline std::pair<DynamicProgram, ReductionReport> consistency_to_emptiness_fo(
    const DynamicProgram& p) {
  validate_program(p);
  std::set<std::string> taken;
  for (int i = 0; i < p.schema->size(); ++i) taken.insert(p.schema->at(i).name);

  std::map<std::string, std::string> primed;  // every source symbol -> its copy
  for (int i = 0; i < p.schema->size(); ++i) {
    const std::string& n = p.schema->at(i).name;
    primed[n] = detail::fresh_name(n + "_p", taken);
  }
  std::string qstar = detail::fresh_name("QStar", taken);
  const Symbol& qsym = p.schema->at(p.query);

  std::vector<Symbol> syms;
  for (int s : p.schema->input_syms()) syms.push_back(p.schema->at(s));
  for (int s : p.schema->input_syms())
    syms.push_back({primed[p.schema->at(s).name], p.schema->at(s).arity, SymKind::Input});
  for (int s : p.schema->aux_syms()) syms.push_back(p.schema->at(s));
  for (int s : p.schema->aux_syms())
    syms.push_back({primed[p.schema->at(s).name], p.schema->at(s).arity, SymKind::Aux});
  syms.push_back({qstar, qsym.arity, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(qstar);

  // Query update for the operation `insert`/`delete` on source input S,
  // applied on the plain (primedSide=false) or primed copy of S.
  auto qstar_rule = [&](int srcS, bool insert, bool primedSide) {
    int k = p.schema->at(srcS).arity;
    std::vector<std::string> xv = detail::head_vars(k);
    std::vector<std::string> yv = detail::body_vars(qsym.arity, xv);
    std::set<std::string> avoid(xv.begin(), xv.end());
    avoid.insert(yv.begin(), yv.end());

    std::vector<FormulaPtr> eqs;
    for (int t : p.schema->input_syms()) {
      const Symbol& tsym = p.schema->at(t);
      std::vector<std::string> zv = detail::fresh_vars("z", tsym.arity, avoid);
      auto post = [&](bool primedCopy) -> FormulaPtr {
        std::string name = primedCopy ? primed[tsym.name] : tsym.name;
        FormulaPtr atom = f_atom(name, zv);
        if (t != srcS || primedCopy != primedSide) return atom;
        // this copy receives the modification
        return insert ? f_or(atom, detail::tuple_eq(zv, xv))
                      : f_and(atom, f_not(detail::tuple_eq(zv, xv)));
      };
      FormulaPtr body = f_iff(post(false), post(true));
      for (int i = int(zv.size()) - 1; i >= 0; --i) body = f_forall(zv[size_t(i)], body);
      eqs.push_back(body);
    }
    FormulaPtr dbEqual = f_and_all(eqs);

    const UpdateRule& qrule = p.update_for(p.query, {insert, srcS});
    FormulaPtr stepped = detail::instantiate(qrule, xv, yv);
    FormulaPtr q1 = primedSide ? f_atom(qsym.name, yv) : stepped;
    FormulaPtr q2 = primedSide ? detail::rename_symbols(stepped, primed)
                               : f_atom(primed[qsym.name], yv);
    FormulaPtr upd =
        f_or(f_atom(qstar, yv), f_and(dbEqual, detail::f_xor(q1, q2)));
    return UpdateRule{xv, yv, upd};
  };

  for (int srcS : p.schema->input_syms()) {
    const std::string& sName = p.schema->at(srcS).name;
    int plainS = out.schema->find(sName);
    int primeS = out.schema->find(primed[sName]);
    std::vector<std::string> xv = detail::head_vars(p.schema->at(srcS).arity);
    for (bool insert : {true, false}) {
      OpKey inOp{insert, srcS};
      for (int srcR : p.schema->aux_syms()) {
        const UpdateRule& r = p.update_for(srcR, inOp);
        const std::string& rName = p.schema->at(srcR).name;
        int plainR = out.schema->find(rName);
        int primeR = out.schema->find(primed[rName]);
        std::vector<std::string> yv = detail::body_vars(p.schema->at(srcR).arity, xv);
        FormulaPtr body = detail::instantiate(r, xv, yv);
        // plain copy steps on plain operations, the primed copy on primed ones
        out.updates[{plainR, {insert, plainS}}] = {xv, yv, body};
        out.updates[{primeR, {insert, primeS}}] = {
            xv, yv, detail::rename_symbols(body, primed)};
        out.updates[{plainR, {insert, primeS}}] = {xv, yv, f_atom(rName, yv)};
        out.updates[{primeR, {insert, plainS}}] = {xv, yv,
                                                   f_atom(primed[rName], yv)};
      }
      out.updates[{out.query, {insert, plainS}}] = qstar_rule(srcS, insert, false);
      out.updates[{out.query, {insert, primeS}}] = qstar_rule(srcS, insert, true);
    }
  }
  for (const auto& [aux, rule] : p.init) {
    const std::string& rName = p.schema->at(aux).name;
    out.init[out.schema->find(rName)] = rule;
    out.init[out.schema->find(primed[rName])] = {
        rule.yvars, detail::rename_symbols(rule.formula, primed)};
  }
  out.init[out.query] = {detail::body_vars(qsym.arity, {}), f_false()};
  validate_program(out);

  ReductionReport rep;
  rep.inputFragment = classify(p);
  rep.outputFragment = classify(out);
  for (int s : p.schema->input_syms()) {
    const std::string& n = p.schema->at(s).name;
    rep.schemaMapping.push_back({n, {n, primed[n]}});
  }
  for (int s : p.schema->aux_syms()) {
    const std::string& n = p.schema->at(s).name;
    if (s == p.query)
      rep.schemaMapping.push_back({n, {n, primed[n], qstar}});
    else
      rep.schemaMapping.push_back({n, {n, primed[n]}});
  }
  rep.guarantee =
      "the source is consistent iff the image query stays empty on every "
      "modification sequence; arity bounds are preserved, the database "
      "equality test adds universal quantifiers";
  if (rep.outputFragment.maxInputArity != rep.inputFragment.maxInputArity ||
      rep.outputFragment.maxAuxArity != rep.inputFragment.maxAuxArity)
    throw LogicError("internal: consistency_to_emptiness_fo changed an arity bound");
  return {out, rep};
}

// ---------------------------------------------------------------------------
// Consistency -> Emptiness, quantifier-free image.  Two auxiliary copies of
// the source program run side by side.  The first copy always follows the raw
// input history.  The second copy reorders or inserts one local event,
// signalled through fresh input relations:
//
//   TIns_S / TDel_S  open a swap window on a genuinely insertable/removable
//                    tuple: announce, then the announced modification itself,
//                    then one other modification (which the second copy
//                    performs first, reading announce-corrected views), then
//                    the closing delete of the announce performs the deferred
//                    step for the second copy;
//   U_S              one spurious modification (insert of a present tuple /
//                    delete of an absent one) seen only by the second copy;
//   I_S              insert-then-delete of an absent tuple, composed into a
//                    single step of the second copy.
//
// A two-bit phase counter paces the window, Done limits each history to one
// event, Err latches every protocol violation, and the fresh query latches a
// disagreement of the copies' queries once the histories have converged
// again (phase 0, Done, pre-state reads).  Quantifier-freeness and both
// arity bounds are preserved.
// ---------------------------------------------------------------------------

inline std::pair<DynamicProgram, ReductionReport> consistency_to_emptiness_qf(
    const DynamicProgram& p) {
  validate_program(p);
  FragmentProfile fin = classify(p);
  if (!fin.quantifierFreeUpdates)
    throw LogicError("quantifier-free reduction needs quantifier-free updates");
  std::set<std::string> taken;
  for (int i = 0; i < p.schema->size(); ++i) taken.insert(p.schema->at(i).name);

  std::map<std::string, std::string> tIns, tDel, uRel, iRel;  // per input S
  for (int s : p.schema->input_syms()) {
    const std::string& n = p.schema->at(s).name;
    tIns[n] = detail::fresh_name("TIns_" + n, taken);
    tDel[n] = detail::fresh_name("TDel_" + n, taken);
    uRel[n] = detail::fresh_name("U_" + n, taken);
    iRel[n] = detail::fresh_name("I_" + n, taken);
  }
  std::map<std::string, std::string> copyA, copyB;  // per aux R
  for (int s : p.schema->aux_syms()) {
    const std::string& n = p.schema->at(s).name;
    copyA[n] = detail::fresh_name(n + "_a", taken);
    copyB[n] = detail::fresh_name(n + "_b", taken);
  }
  std::string ph0 = detail::fresh_name("Ph0", taken);
  std::string ph1 = detail::fresh_name("Ph1", taken);
  std::string ph2 = detail::fresh_name("Ph2", taken);
  std::string ph3 = detail::fresh_name("Ph3", taken);
  std::string done = detail::fresh_name("Done", taken);
  std::string err = detail::fresh_name("Err", taken);
  std::string qstar = detail::fresh_name("QStar", taken);
  const Symbol& qsym = p.schema->at(p.query);

  std::vector<Symbol> syms;
  for (int s : p.schema->input_syms()) syms.push_back(p.schema->at(s));
  for (int s : p.schema->input_syms()) {
    const Symbol& in = p.schema->at(s);
    syms.push_back({tIns[in.name], in.arity, SymKind::Input});
    syms.push_back({tDel[in.name], in.arity, SymKind::Input});
    syms.push_back({uRel[in.name], in.arity, SymKind::Input});
    syms.push_back({iRel[in.name], in.arity, SymKind::Input});
  }
  for (int s : p.schema->aux_syms()) {
    const Symbol& ax = p.schema->at(s);
    syms.push_back({copyA[ax.name], ax.arity, SymKind::Aux});
    syms.push_back({copyB[ax.name], ax.arity, SymKind::Aux});
  }
  for (const std::string& b : {ph0, ph1, ph2, ph3, done, err})
    syms.push_back({b, 0, SymKind::Aux});
  syms.push_back({qstar, qsym.arity, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(qstar);
  using detail::bit;

  // second copy's announce-corrected view of the inputs
  detail::AtomRewrite correction = [&](const std::string& sym,
                                       const std::vector<std::string>& args) -> FormulaPtr {
    auto it = tIns.find(sym);
    if (it == tIns.end()) return nullptr;
    return f_or(f_and(f_atom(sym, args), f_not(f_atom(it->second, args))),
                f_atom(tDel.at(sym), args));
  };
  auto stepA = [&](int auxR, bool insert, int srcS, const std::vector<std::string>& xv,
                   const std::vector<std::string>& yv) {
    return detail::rename_symbols(
        detail::instantiate(p.update_for(auxR, {insert, srcS}), xv, yv), copyA);
  };
  auto stepB = [&](int auxR, bool insert, int srcS, const std::vector<std::string>& xv,
                   const std::vector<std::string>& yv, bool corrected) {
    FormulaPtr f = detail::rename_symbols(
        detail::instantiate(p.update_for(auxR, {insert, srcS}), xv, yv), copyB);
    return corrected ? detail::map_atoms(f, correction) : f;
  };
  // delete-after-insert of the same absent tuple, composed into one step of
  // the second copy: the outer delete reads the inner insert's auxiliaries
  // and sees the tuple inside its input relation
  auto stepB_insdel = [&](int auxR, int srcS, const std::vector<std::string>& xv,
                          const std::vector<std::string>& yv) {
    const std::string& sName = p.schema->at(srcS).name;
    FormulaPtr outer = detail::instantiate(p.update_for(auxR, {false, srcS}), xv, yv);
    detail::AtomRewrite rw = [&](const std::string& sym,
                                 const std::vector<std::string>& args) -> FormulaPtr {
      int sIdx = p.schema->find(sym);
      if (sIdx >= 0 && p.schema->at(sIdx).kind == SymKind::Aux) {
        const UpdateRule& inner = p.update_for(sIdx, {true, srcS});
        return detail::rename_symbols(detail::instantiate(inner, xv, args), copyB);
      }
      if (sym == sName) return f_or(f_atom(sym, args), detail::tuple_eq(args, xv));
      return nullptr;
    };
    return detail::map_atoms(outer, rw);
  };

  auto qstar_latch = [&](const std::vector<std::string>& xv) {
    std::vector<std::string> yv = detail::body_vars(qsym.arity, xv);
    FormulaPtr diff = detail::f_xor(f_atom(copyA[qsym.name], yv), f_atom(copyB[qsym.name], yv));
    FormulaPtr f = f_or(f_atom(qstar, yv),
                        f_and_all({f_not(bit(err)), bit(done), bit(ph0), diff}));
    return UpdateRule{xv, yv, f};
  };

  auto set_bits = [&](const OpKey& op, const std::vector<std::string>& xv,
                      FormulaPtr p0, FormulaPtr p1, FormulaPtr p2, FormulaPtr p3,
                      FormulaPtr dn, FormulaPtr er) {
    auto put = [&](const std::string& name, FormulaPtr f) {
      out.updates[{out.schema->find(name), op}] = {xv, {}, f};
    };
    put(ph0, p0);
    put(ph1, p1);
    put(ph2, p2);
    put(ph3, p3);
    put(done, dn);
    put(err, er);
  };
  auto frameA = [&](const OpKey& op, const std::vector<std::string>& xv) {
    for (int s : p.schema->aux_syms()) {
      const std::string& n = copyA[p.schema->at(s).name];
      std::vector<std::string> yv = detail::body_vars(p.schema->at(s).arity, xv);
      out.updates[{out.schema->find(n), op}] = {xv, yv, f_atom(n, yv)};
    }
  };
  // second copy: step with `make` when `valid` holds, keep otherwise; a null
  // `make` keeps unconditionally
  auto setB = [&](const OpKey& op, const std::vector<std::string>& xv, FormulaPtr valid,
                  const std::function<FormulaPtr(int, const std::vector<std::string>&)>& make) {
    for (int s : p.schema->aux_syms()) {
      const std::string& n = copyB[p.schema->at(s).name];
      std::vector<std::string> yv = detail::body_vars(p.schema->at(s).arity, xv);
      FormulaPtr keep = f_atom(n, yv);
      FormulaPtr f = !make ? keep
                           : f_or(f_and(valid, make(s, yv)), f_and(f_not(valid), keep));
      out.updates[{out.schema->find(n), op}] = {xv, yv, f};
    }
  };

  for (int srcS : p.schema->input_syms()) {
    const Symbol& in = p.schema->at(srcS);
    std::vector<std::string> xv = detail::head_vars(in.arity);
    int imgS = out.schema->find(in.name);
    FormulaPtr sx = f_atom(in.name, xv);
    FormulaPtr annIns = f_atom(tIns[in.name], xv);
    FormulaPtr annDel = f_atom(tDel[in.name], xv);

    for (bool insert : {true, false}) {
      // raw modification: first copy always steps; second copy steps at
      // phase 0 (raw) and phase 2 (corrected view), defers the announced
      // step at phase 1
      OpKey op{insert, imgS};
      for (int s : p.schema->aux_syms()) {
        const Symbol& ax = p.schema->at(s);
        std::vector<std::string> yv = detail::body_vars(ax.arity, xv);
        out.updates[{out.schema->find(copyA[ax.name]), op}] = {
            xv, yv, stepA(s, insert, srcS, xv, yv)};
        FormulaPtr keep = f_atom(copyB[ax.name], yv);
        FormulaPtr fb = f_or_all({f_and(bit(ph0), stepB(s, insert, srcS, xv, yv, false)),
                                  f_and(f_or(bit(ph1), bit(ph3)), keep),
                                  f_and(bit(ph2), stepB(s, insert, srcS, xv, yv, true))});
        out.updates[{out.schema->find(copyB[ax.name]), op}] = {xv, yv, fb};
      }
      FormulaPtr match = insert ? annIns : annDel;
      set_bits(op, xv, bit(ph0), f_false(), bit(ph1), f_or(bit(ph2), bit(ph3)),
               bit(done),
               f_or_all({bit(err), f_and(bit(ph1), f_not(match)),
                         f_and(bit(ph2), f_or(annIns, annDel)), bit(ph3)}));
      out.updates[{out.query, op}] = qstar_latch(xv);
    }

    // announce opens: genuine change required, window starts
    for (bool insAnnounce : {true, false}) {
      OpKey op{true, out.schema->find(insAnnounce ? tIns[in.name] : tDel[in.name])};
      FormulaPtr valid = f_and_all(
          {bit(ph0), f_not(bit(done)), insAnnounce ? f_not(sx) : sx});
      frameA(op, xv);
      setB(op, xv, nullptr, nullptr);
      set_bits(op, xv, f_false(), bit(ph0), bit(ph2), bit(ph3), bit(done),
               f_or(bit(err), f_not(valid)));
      out.updates[{out.query, op}] = qstar_latch(xv);
    }
    // announce closes: the deferred step reaches the second copy
    for (bool insAnnounce : {true, false}) {
      OpKey op{false, out.schema->find(insAnnounce ? tIns[in.name] : tDel[in.name])};
      FormulaPtr valid = f_and(bit(ph3), insAnnounce ? annIns : annDel);
      frameA(op, xv);
      setB(op, xv, valid, [&](int s, const std::vector<std::string>& yv) {
        return stepB(s, insAnnounce, srcS, xv, yv, true);
      });
      set_bits(op, xv, f_or(bit(ph0), bit(ph3)), f_false(), f_false(), f_false(),
               f_or(bit(done), valid), f_or(bit(err), f_not(valid)));
      out.updates[{out.query, op}] = qstar_latch(xv);
    }
    // spurious modification, second copy only
    for (bool insert : {true, false}) {
      OpKey op{insert, out.schema->find(uRel[in.name])};
      FormulaPtr valid =
          f_and_all({bit(ph0), f_not(bit(done)), insert ? sx : f_not(sx)});
      frameA(op, xv);
      setB(op, xv, valid, [&](int s, const std::vector<std::string>& yv) {
        return stepB(s, insert, srcS, xv, yv, false);
      });
      set_bits(op, xv, bit(ph0), bit(ph1), bit(ph2), bit(ph3), f_or(bit(done), valid),
               f_or(bit(err), f_not(valid)));
      out.updates[{out.query, op}] = qstar_latch(xv);
    }
    // insert-then-delete of an absent tuple, second copy only
    {
      OpKey op{true, out.schema->find(iRel[in.name])};
      FormulaPtr valid = f_and_all({bit(ph0), f_not(bit(done)), f_not(sx)});
      frameA(op, xv);
      setB(op, xv, valid, [&](int s, const std::vector<std::string>& yv) {
        return stepB_insdel(s, srcS, xv, yv);
      });
      set_bits(op, xv, bit(ph0), bit(ph1), bit(ph2), bit(ph3), f_or(bit(done), valid),
               f_or(bit(err), f_not(valid)));
      out.updates[{out.query, op}] = qstar_latch(xv);
    }
    {
      OpKey op{false, out.schema->find(iRel[in.name])};
      frameA(op, xv);
      setB(op, xv, nullptr, nullptr);
      set_bits(op, xv, bit(ph0), bit(ph1), bit(ph2), bit(ph3), bit(done), f_true());
      out.updates[{out.query, op}] = qstar_latch(xv);
    }
  }

  for (const auto& [aux, rule] : p.init) {
    const std::string& n = p.schema->at(aux).name;
    out.init[out.schema->find(copyA[n])] = rule;
    out.init[out.schema->find(copyB[n])] = rule;
  }
  out.init[out.schema->find(ph0)] = {{}, f_true()};
  for (const std::string& b : {ph1, ph2, ph3, done, err})
    out.init[out.schema->find(b)] = {{}, f_false()};
  out.init[out.query] = {detail::body_vars(qsym.arity, {}), f_false()};
  validate_program(out);

  ReductionReport rep;
  rep.inputFragment = fin;
  rep.outputFragment = classify(out);
  for (int s : p.schema->input_syms()) {
    const std::string& n = p.schema->at(s).name;
    rep.schemaMapping.push_back({n, {n, tIns[n], tDel[n], uRel[n], iRel[n]}});
  }
  for (int s : p.schema->aux_syms()) {
    const std::string& n = p.schema->at(s).name;
    if (s == p.query)
      rep.schemaMapping.push_back({n, {copyA[n], copyB[n], qstar}});
    else
      rep.schemaMapping.push_back({n, {copyA[n], copyB[n]}});
  }
  rep.schemaMapping.push_back({"protocol", {ph0, ph1, ph2, ph3, done, err}});
  rep.guarantee =
      "the source is consistent iff the image query stays empty on every "
      "modification sequence; quantifier-freeness and both arity bounds are "
      "preserved";
  if (!rep.outputFragment.quantifierFreeUpdates ||
      rep.outputFragment.maxInputArity != fin.maxInputArity ||
      rep.outputFragment.maxAuxArity != fin.maxAuxArity)
    throw LogicError("internal: consistency_to_emptiness_qf changed the fragment");
  return {out, rep};
}

// ---------------------------------------------------------------------------
// Two-counter machine compilers.  All three expect a semi-deterministic
// machine with exactly two counters and reject anything else.
// ---------------------------------------------------------------------------

namespace detail {

inline void require_2ca(const CounterAutomaton& m) {
  validate_ca(m);
  if (m.counters != 2)
    throw LogicError("two-counter compilation needs exactly two counters");
  if (!is_semi_deterministic(m))
    throw LogicError(
        "machine is not semi-deterministic: each state may carry at most one "
        "out-transition, or exactly a decrement/zero-test pair on one counter");
}

inline std::vector<const CATransition*> ca_trans(const CounterAutomaton& m, CAAct act,
                                                 int counter) {
  std::vector<const CATransition*> v;
  for (const auto& t : m.transitions)
    if (t.act == act && t.counter == counter) v.push_back(&t);
  return v;
}

inline std::vector<int> ca_states_without(const CounterAutomaton& m, CAAct act,
                                          int counter) {
  std::vector<int> v;
  for (int s = 0; s < int(m.states.size()); ++s) {
    bool has = false;
    for (const auto& t : m.transitions)
      if (t.from == s && t.act == act && t.counter == counter) has = true;
    if (!has) v.push_back(s);
  }
  return v;
}

}  // namespace detail

// Counters as unary input relations, zero-tests as nullary toggles, one
// auxiliary bit per state.  Updates are first-order (the zero-test reads
// emptiness of a counter relation) with nullary auxiliaries only.
inline std::pair<DynamicProgram, ReductionReport> compile_2ca_fo10(
    const CounterAutomaton& m) {
  detail::require_2ca(m);
  std::set<std::string> taken = {"C_1", "C_2", "Z_1", "Z_2"};
  std::vector<Symbol> syms = {{"C_1", 1, SymKind::Input},
                              {"C_2", 1, SymKind::Input},
                              {"Z_1", 0, SymKind::Input},
                              {"Z_2", 0, SymKind::Input}};
  std::vector<std::string> rq;
  for (const std::string& st : m.states)
    rq.push_back(detail::fresh_name("R_" + st, taken));
  std::string re = detail::fresh_name("R_e", taken);
  std::string acc = detail::fresh_name("Acc", taken);
  for (const std::string& b : rq) syms.push_back({b, 0, SymKind::Aux});
  syms.push_back({re, 0, SymKind::Aux});
  syms.push_back({acc, 0, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(acc);
  using detail::bit;

  for (int ci = 0; ci < 2; ++ci) {
    std::string cRel = ci == 0 ? "C_1" : "C_2";
    std::string zRel = ci == 0 ? "Z_1" : "Z_2";
    int cIdx = out.schema->find(cRel), zIdx = out.schema->find(zRel);

    auto emit = [&](const OpKey& op, const std::vector<std::string>& xv,
                    FormulaPtr applied, CAAct act) {
      // applied: the operation really changed the simulated counter and the
      // simulation has not failed before
      for (int q = 0; q < int(m.states.size()); ++q) {
        std::vector<FormulaPtr> into;
        for (const auto* t : detail::ca_trans(m, act, ci))
          if (t->to == q) into.push_back(bit(rq[size_t(t->from)]));
        out.updates[{out.schema->find(rq[size_t(q)]), op}] = {
            xv, {}, f_and_all({applied, f_not(bit(re)), f_or_all(into)})};
      }
      std::vector<FormulaPtr> errs = {bit(re), f_not(applied)};
      for (int s : detail::ca_states_without(m, act, ci))
        errs.push_back(bit(rq[size_t(s)]));
      out.updates[{out.schema->find(re), op}] = {xv, {}, f_or_all(errs)};
      std::vector<FormulaPtr> accIn;
      for (const auto* t : detail::ca_trans(m, act, ci))
        if (m.accepting.count(t->to)) accIn.push_back(bit(rq[size_t(t->from)]));
      out.updates[{out.schema->find(acc), op}] = {
          xv, {}, f_and_all({applied, f_not(bit(re)), f_or_all(accIn)})};
    };

    std::vector<std::string> xv = {"x1"};
    emit({true, cIdx}, xv, f_not(f_atom(cRel, xv)), CAAct::Inc);
    emit({false, cIdx}, xv, f_atom(cRel, xv), CAAct::Dec);
    FormulaPtr empty = f_not(f_exists("z", f_atom(cRel, {"z"})));
    emit({true, zIdx}, {}, empty, CAAct::IfZero);
    emit({false, zIdx}, {}, empty, CAAct::IfZero);
  }

  for (int q = 0; q < int(m.states.size()); ++q)
    out.init[out.schema->find(rq[size_t(q)])] = {{}, q == m.init ? f_true() : f_false()};
  out.init[out.schema->find(re)] = {{}, f_false()};
  out.init[out.schema->find(acc)] = {{},
                                     m.accepting.count(m.init) ? f_true() : f_false()};
  validate_program(out);

  ReductionReport rep;
  rep.outputFragment = classify(out);
  rep.schemaMapping.push_back({"counter 1", {"C_1", "Z_1"}});
  rep.schemaMapping.push_back({"counter 2", {"C_2", "Z_2"}});
  for (int q = 0; q < int(m.states.size()); ++q)
    rep.schemaMapping.push_back({m.states[size_t(q)], {rq[size_t(q)]}});
  rep.schemaMapping.push_back({"failure", {re}});
  rep.schemaMapping.push_back({"acceptance", {acc}});
  rep.guarantee =
      "the query is nonempty after a modification sequence iff the sequence "
      "replays an accepting run (genuine counter changes, zero-test toggles "
      "on empty counters); any deviation latches the failure bit";
  if (rep.outputFragment.maxInputArity != 1 || rep.outputFragment.maxAuxArity != 0 ||
      rep.outputFragment.quantifierFreeUpdates)
    throw LogicError("internal: compile_2ca_fo10 fragment mismatch");
  return {out, rep};
}

// Same input vocabulary, but the zero-test is decided by a maintained
// nonemptiness bit backed by insertion-ordered list relations, making every
// update quantifier-free at auxiliary arity two.
inline std::pair<DynamicProgram, ReductionReport> compile_2ca_prop12(
    const CounterAutomaton& m) {
  detail::require_2ca(m);
  std::set<std::string> taken = {"C_1", "C_2", "Z_1", "Z_2"};
  std::vector<Symbol> syms = {{"C_1", 1, SymKind::Input},
                              {"C_2", 1, SymKind::Input},
                              {"Z_1", 0, SymKind::Input},
                              {"Z_2", 0, SymKind::Input}};
  std::vector<std::string> rq, first(2), last(2), list(2), nb(2);
  for (const std::string& st : m.states)
    rq.push_back(detail::fresh_name("R_" + st, taken));
  std::string re = detail::fresh_name("R_e", taken);
  std::string acc = detail::fresh_name("Acc", taken);
  for (int i = 0; i < 2; ++i) {
    std::string n = std::to_string(i + 1);
    first[size_t(i)] = detail::fresh_name("First_" + n, taken);
    last[size_t(i)] = detail::fresh_name("Last_" + n, taken);
    list[size_t(i)] = detail::fresh_name("List_" + n, taken);
    nb[size_t(i)] = detail::fresh_name("B_" + n, taken);
  }
  for (const std::string& b : rq) syms.push_back({b, 0, SymKind::Aux});
  syms.push_back({re, 0, SymKind::Aux});
  syms.push_back({acc, 0, SymKind::Aux});
  for (int i = 0; i < 2; ++i) {
    syms.push_back({first[size_t(i)], 1, SymKind::Aux});
    syms.push_back({last[size_t(i)], 1, SymKind::Aux});
    syms.push_back({list[size_t(i)], 2, SymKind::Aux});
    syms.push_back({nb[size_t(i)], 0, SymKind::Aux});
  }

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(acc);
  using detail::bit;

  for (int ci = 0; ci < 2; ++ci) {
    std::string cRel = ci == 0 ? "C_1" : "C_2";
    std::string zRel = ci == 0 ? "Z_1" : "Z_2";
    int cIdx = out.schema->find(cRel), zIdx = out.schema->find(zRel);
    const std::string &fi = first[size_t(ci)], &la = last[size_t(ci)],
                      &li = list[size_t(ci)], &bi = nb[size_t(ci)];

    auto emit = [&](const OpKey& op, const std::vector<std::string>& xv,
                    FormulaPtr applied, CAAct act) {
      for (int q = 0; q < int(m.states.size()); ++q) {
        std::vector<FormulaPtr> into;
        for (const auto* t : detail::ca_trans(m, act, ci))
          if (t->to == q) into.push_back(bit(rq[size_t(t->from)]));
        out.updates[{out.schema->find(rq[size_t(q)]), op}] = {
            xv, {}, f_and_all({applied, f_not(bit(re)), f_or_all(into)})};
      }
      std::vector<FormulaPtr> errs = {bit(re), f_not(applied)};
      for (int s : detail::ca_states_without(m, act, ci))
        errs.push_back(bit(rq[size_t(s)]));
      out.updates[{out.schema->find(re), op}] = {xv, {}, f_or_all(errs)};
      std::vector<FormulaPtr> accIn;
      for (const auto* t : detail::ca_trans(m, act, ci))
        if (m.accepting.count(t->to)) accIn.push_back(bit(rq[size_t(t->from)]));
      out.updates[{out.schema->find(acc), op}] = {
          xv, {}, f_and_all({applied, f_not(bit(re)), f_or_all(accIn)})};
    };

    std::vector<std::string> xv = {"u"};
    emit({true, cIdx}, xv, f_not(f_atom(cRel, xv)), CAAct::Inc);
    emit({false, cIdx}, xv, f_atom(cRel, xv), CAAct::Dec);
    emit({true, zIdx}, {}, f_not(bit(bi)), CAAct::IfZero);
    emit({false, zIdx}, {}, f_not(bit(bi)), CAAct::IfZero);

    // insertion-ordered list over the counter's elements
    auto atom1 = [&](const std::string& r, const std::string& v) {
      return f_atom(r, {v});
    };
    OpKey insC{true, cIdx}, delC{false, cIdx};
    out.updates[{out.schema->find(fi), insC}] = {
        xv,
        {"y1"},
        f_or(f_and(f_not(bit(bi)), f_eq("u", "y1")), f_and(bit(bi), atom1(fi, "y1")))};
    out.updates[{out.schema->find(la), insC}] = {xv, {"y1"}, f_eq("u", "y1")};
    out.updates[{out.schema->find(li), insC}] = {
        xv,
        {"y1", "y2"},
        f_or(f_atom(li, {"y1", "y2"}), f_and(atom1(la, "y1"), f_eq("u", "y2")))};
    out.updates[{out.schema->find(bi), insC}] = {xv, {}, f_true()};
    out.updates[{out.schema->find(fi), delC}] = {
        xv,
        {"y1"},
        f_or(f_and(atom1(fi, "y1"), f_not(f_eq("y1", "u"))),
             f_and(atom1(fi, "u"), f_atom(li, {"u", "y1"})))};
    out.updates[{out.schema->find(la), delC}] = {
        xv,
        {"y1"},
        f_or(f_and(atom1(la, "y1"), f_not(f_eq("y1", "u"))),
             f_and(atom1(la, "u"), f_atom(li, {"y1", "u"})))};
    out.updates[{out.schema->find(li), delC}] = {
        xv,
        {"y1", "y2"},
        f_and_all({f_not(f_eq("y1", "u")), f_not(f_eq("y2", "u")),
                   f_or(f_atom(li, {"y1", "y2"}),
                        f_and(f_atom(li, {"y1", "u"}), f_atom(li, {"u", "y2"})))})};
    out.updates[{out.schema->find(bi), delC}] = {
        xv, {}, f_not(f_and(atom1(fi, "u"), atom1(la, "u")))};
  }
  ensure_total_frames(out);  // list relations of the other counter, zero-test ops

  for (int q = 0; q < int(m.states.size()); ++q)
    out.init[out.schema->find(rq[size_t(q)])] = {{}, q == m.init ? f_true() : f_false()};
  out.init[out.schema->find(re)] = {{}, f_false()};
  out.init[out.schema->find(acc)] = {{},
                                     m.accepting.count(m.init) ? f_true() : f_false()};
  for (int i = 0; i < 2; ++i) {
    out.init[out.schema->find(first[size_t(i)])] = {{"y1"}, f_false()};
    out.init[out.schema->find(last[size_t(i)])] = {{"y1"}, f_false()};
    out.init[out.schema->find(list[size_t(i)])] = {{"y1", "y2"}, f_false()};
    out.init[out.schema->find(nb[size_t(i)])] = {{}, f_false()};
  }
  validate_program(out);

  ReductionReport rep;
  rep.outputFragment = classify(out);
  rep.schemaMapping.push_back({"counter 1", {"C_1", "Z_1", first[0], last[0], list[0], nb[0]}});
  rep.schemaMapping.push_back({"counter 2", {"C_2", "Z_2", first[1], last[1], list[1], nb[1]}});
  for (int q = 0; q < int(m.states.size()); ++q)
    rep.schemaMapping.push_back({m.states[size_t(q)], {rq[size_t(q)]}});
  rep.schemaMapping.push_back({"failure", {re}});
  rep.schemaMapping.push_back({"acceptance", {acc}});
  rep.guarantee =
      "quantifier-free variant of the state-bit compilation: a maintained "
      "nonemptiness bit replaces the zero-test quantifier; the query is "
      "nonempty exactly on sequences replaying accepting runs";
  if (rep.outputFragment.maxInputArity != 1 || rep.outputFragment.maxAuxArity != 2 ||
      !rep.outputFragment.quantifierFreeUpdates)
    throw LogicError("internal: compile_2ca_prop12 fragment mismatch");
  return {out, rep};
}

// Counters as externally maintained list structures (binary inputs), nullary
// auxiliaries only.  The sequence must first boot both lists (head element =
// zero marker), then drive each counter change through a fixed six-step
// window; zero-tests toggle the nullary inputs Z_1/Z_2.  Any deviation
// latches an error bit that keeps the query empty forever.
inline std::pair<DynamicProgram, ReductionReport> compile_2ca_prop20(
    const CounterAutomaton& m) {
  detail::require_2ca(m);
  std::set<std::string> taken;
  std::vector<Symbol> syms;
  std::vector<std::string> liR(2), inR(2), miR(2), laR(2), nlR(2), zR(2);
  for (int i = 0; i < 2; ++i) {
    std::string n = std::to_string(i + 1);
    liR[size_t(i)] = detail::fresh_name("List_" + n, taken);
    inR[size_t(i)] = detail::fresh_name("In_" + n, taken);
    miR[size_t(i)] = detail::fresh_name("Min_" + n, taken);
    laR[size_t(i)] = detail::fresh_name("Last_" + n, taken);
    nlR[size_t(i)] = detail::fresh_name("NextLast_" + n, taken);
    syms.push_back({liR[size_t(i)], 2, SymKind::Input});
    syms.push_back({inR[size_t(i)], 1, SymKind::Input});
    syms.push_back({miR[size_t(i)], 1, SymKind::Input});
    syms.push_back({laR[size_t(i)], 1, SymKind::Input});
    syms.push_back({nlR[size_t(i)], 1, SymKind::Input});
  }
  for (int i = 0; i < 2; ++i) {
    zR[size_t(i)] = detail::fresh_name("Z_" + std::to_string(i + 1), taken);
    syms.push_back({zR[size_t(i)], 0, SymKind::Input});
  }
  std::vector<std::string> boot(6);
  for (int i = 0; i < 6; ++i)
    boot[size_t(i)] = detail::fresh_name("P" + std::to_string(i), taken);
  std::string ready = detail::fresh_name("Ready", taken);
  std::vector<std::array<std::string, 5>> wph(2), dph(2);
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 5; ++s) {
      wph[size_t(i)][size_t(s)] = detail::fresh_name(
          "W" + std::to_string(i + 1) + "_" + std::to_string(s + 1), taken);
      dph[size_t(i)][size_t(s)] = detail::fresh_name(
          "D" + std::to_string(i + 1) + "_" + std::to_string(s + 1), taken);
    }
  std::vector<std::string> ne(2);
  for (int i = 0; i < 2; ++i)
    ne[size_t(i)] = detail::fresh_name("NE_" + std::to_string(i + 1), taken);
  std::vector<std::string> rq;
  for (const std::string& st : m.states)
    rq.push_back(detail::fresh_name("R_" + st, taken));
  std::string err = detail::fresh_name("Err", taken);
  std::string acc = detail::fresh_name("Acc", taken);

  std::vector<std::string> allBits;
  for (const std::string& b : boot) allBits.push_back(b);
  allBits.push_back(ready);
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 5; ++s) {
      allBits.push_back(wph[size_t(i)][size_t(s)]);
      allBits.push_back(dph[size_t(i)][size_t(s)]);
    }
  for (const std::string& b : ne) allBits.push_back(b);
  for (const std::string& b : rq) allBits.push_back(b);
  allBits.push_back(err);
  allBits.push_back(acc);
  for (const std::string& b : allBits) syms.push_back({b, 0, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(acc);
  using detail::bit;

  struct Edge {
    std::string from, to;
    FormulaPtr guard;
  };
  std::map<std::pair<bool, std::string>, std::vector<Edge>> edges;
  auto a1 = [](const std::string& r, const std::string& v) { return f_atom(r, {v}); };

  auto hasAct = [&](CAAct act, int ci) {
    std::vector<FormulaPtr> v;
    for (const auto* t : detail::ca_trans(m, act, ci))
      v.push_back(bit(rq[size_t(t->from)]));
    return f_or_all(v);
  };

  // boot: head of list 1, then head of list 2
  edges[{true, miR[0]}].push_back({boot[0], boot[1], f_true()});
  edges[{true, laR[0]}].push_back({boot[1], boot[2], a1(miR[0], "x1")});
  edges[{true, inR[0]}].push_back({boot[2], boot[3], a1(laR[0], "x1")});
  edges[{true, miR[1]}].push_back({boot[3], boot[4], f_true()});
  edges[{true, laR[1]}].push_back({boot[4], boot[5], a1(miR[1], "x1")});
  edges[{true, inR[1]}].push_back({boot[5], ready, a1(laR[1], "x1")});

  for (int i = 0; i < 2; ++i) {
    const std::string &li = liR[size_t(i)], &in = inR[size_t(i)], &la = laR[size_t(i)],
                      &nl = nlR[size_t(i)];
    const auto &w = wph[size_t(i)], &d = dph[size_t(i)];
    // increment window: append a fresh element behind the current last
    edges[{true, nl}].push_back(
        {ready, w[0], f_and(f_not(a1(in, "x1")), hasAct(CAAct::Inc, i))});
    edges[{true, li}].push_back({w[0], w[1], f_and(a1(la, "x1"), a1(nl, "x2"))});
    edges[{false, la}].push_back({w[1], w[2], a1(la, "x1")});
    edges[{true, in}].push_back({w[2], w[3], f_and(a1(nl, "x1"), f_not(a1(in, "x1")))});
    edges[{true, la}].push_back({w[3], w[4], f_and(a1(nl, "x1"), a1(in, "x1"))});
    edges[{false, nl}].push_back(
        {w[4], ready, f_and_all({a1(nl, "x1"), a1(in, "x1"), a1(la, "x1")})});
    // decrement window: retire the last element, its predecessor takes over
    edges[{true, nl}].push_back(
        {ready, d[0],
         f_and_all({a1(in, "x1"), bit(ne[size_t(i)]), hasAct(CAAct::Dec, i)})});
    edges[{false, li}].push_back(
        {d[0], d[1],
         f_and_all({a1(nl, "x1"), a1(la, "x2"), f_atom(li, {"x1", "x2"})})});
    edges[{false, in}].push_back({d[1], d[2], f_and(a1(la, "x1"), a1(in, "x1"))});
    edges[{false, la}].push_back({d[2], d[3], f_and(a1(la, "x1"), f_not(a1(in, "x1")))});
    edges[{true, la}].push_back({d[3], d[4], f_and(a1(nl, "x1"), a1(in, "x1"))});
    edges[{false, nl}].push_back({d[4], ready, f_and(a1(nl, "x1"), a1(la, "x1"))});
    // zero-test toggles, only when the list carries no counter element
    for (bool insert : {true, false})
      edges[{insert, zR[size_t(i)]}].push_back(
          {ready, ready, f_and(f_not(bit(ne[size_t(i)])), hasAct(CAAct::IfZero, i))});
  }

  for (const OpKey& op : all_ops(*out.schema)) {
    const Symbol& in = out.schema->at(op.sym);
    std::vector<std::string> xv = detail::head_vars(in.arity);
    const std::vector<Edge>& es = edges[{op.insert, in.name}];

    std::vector<FormulaPtr> cases;
    for (const Edge& e : es) cases.push_back(f_and(bit(e.from), e.guard));
    FormulaPtr errF = f_or(bit(err), f_not(f_or_all(cases)));

    auto put = [&](const std::string& name, FormulaPtr f) {
      out.updates[{out.schema->find(name), op}] = {xv, {}, f};
    };
    // phase bits collect their incoming edges
    for (const std::string& b : boot) {
      std::vector<FormulaPtr> into;
      for (const Edge& e : es)
        if (e.to == b) into.push_back(f_and(bit(e.from), e.guard));
      put(b, f_or_all(into));
    }
    for (int i = 0; i < 2; ++i)
      for (int s = 0; s < 5; ++s)
        for (const std::string& b : {wph[size_t(i)][size_t(s)], dph[size_t(i)][size_t(s)]}) {
          std::vector<FormulaPtr> into;
          for (const Edge& e : es)
            if (e.to == b) into.push_back(f_and(bit(e.from), e.guard));
          put(b, f_or_all(into));
        }
    std::vector<FormulaPtr> intoReady;
    for (const Edge& e : es)
      if (e.to == ready) intoReady.push_back(f_and(bit(e.from), e.guard));
    FormulaPtr readyF = f_or_all(intoReady);
    put(ready, readyF);

    // state bits: transferred on window completion and zero-tests, kept
    // otherwise; nonemptiness flips on completion
    int compI = -1, zI = -1;
    for (int i = 0; i < 2; ++i) {
      if (!op.insert && in.name == nlR[size_t(i)]) compI = i;
      if (in.name == zR[size_t(i)]) zI = i;
    }
    std::map<std::string, FormulaPtr> rqF;
    FormulaPtr neF[2] = {bit(ne[0]), bit(ne[1])};
    if (compI >= 0) {
      const auto &w = wph[size_t(compI)], &d = dph[size_t(compI)];
      FormulaPtr gW, gD;
      for (const Edge& e : es) {
        if (e.from == w[4]) gW = e.guard;
        if (e.from == d[4]) gD = e.guard;
      }
      FormulaPtr incSide = f_and(bit(w[4]), gW), decSide = f_and(bit(d[4]), gD);
      FormulaPtr fired = f_or(f_and(incSide, hasAct(CAAct::Inc, compI)),
                              f_and(decSide, hasAct(CAAct::Dec, compI)));
      for (int q = 0; q < int(m.states.size()); ++q) {
        std::vector<FormulaPtr> into;
        for (const auto* t : detail::ca_trans(m, CAAct::Inc, compI))
          if (t->to == q) into.push_back(f_and(incSide, bit(rq[size_t(t->from)])));
        for (const auto* t : detail::ca_trans(m, CAAct::Dec, compI))
          if (t->to == q) into.push_back(f_and(decSide, bit(rq[size_t(t->from)])));
        rqF[rq[size_t(q)]] =
            f_or(f_or_all(into), f_and(f_not(fired), bit(rq[size_t(q)])));
      }
      neF[compI] =
          f_or_all({incSide, f_and(decSide, f_not(a1(miR[size_t(compI)], "x1"))),
                    f_and(f_not(f_or(incSide, decSide)), bit(ne[size_t(compI)]))});
    } else if (zI >= 0) {
      FormulaPtr firedAll =
          f_and_all({bit(ready), f_not(bit(ne[size_t(zI)])), hasAct(CAAct::IfZero, zI)});
      for (int q = 0; q < int(m.states.size()); ++q) {
        std::vector<FormulaPtr> into;
        for (const auto* t : detail::ca_trans(m, CAAct::IfZero, zI))
          if (t->to == q)
            into.push_back(f_and_all({bit(ready), f_not(bit(ne[size_t(zI)])),
                                      bit(rq[size_t(t->from)])}));
        rqF[rq[size_t(q)]] =
            f_or(f_or_all(into), f_and(f_not(firedAll), bit(rq[size_t(q)])));
      }
    }
    if (op.insert && in.name == inR[1]) {
      // boot completion raises the initial state bit
      FormulaPtr e = f_and(bit(boot[5]), a1(laR[1], "x1"));
      FormulaPtr cur = rqF.count(rq[size_t(m.init)]) ? rqF[rq[size_t(m.init)]]
                                                     : bit(rq[size_t(m.init)]);
      rqF[rq[size_t(m.init)]] = f_or(cur, e);
    }
    for (int q = 0; q < int(m.states.size()); ++q) {
      const std::string& b = rq[size_t(q)];
      put(b, rqF.count(b) ? rqF[b] : bit(b));
    }
    put(ne[0], neF[0]);
    put(ne[1], neF[1]);
    put(err, errF);

    std::vector<FormulaPtr> accIn;
    for (int q : m.accepting) {
      const std::string& b = rq[size_t(q)];
      accIn.push_back(rqF.count(b) ? rqF[b] : bit(b));
    }
    put(acc, f_and_all({f_not(errF), readyF, f_or_all(accIn)}));
  }

  for (const std::string& b : allBits) out.init[out.schema->find(b)] = {{}, f_false()};
  out.init[out.schema->find(boot[0])] = {{}, f_true()};
  out.init[out.schema->find(acc)] = {{},
                                     m.accepting.count(m.init) ? f_true() : f_false()};
  validate_program(out);

  ReductionReport rep;
  rep.outputFragment = classify(out);
  for (int i = 0; i < 2; ++i)
    rep.schemaMapping.push_back(
        {"counter " + std::to_string(i + 1),
         {liR[size_t(i)], inR[size_t(i)], miR[size_t(i)], laR[size_t(i)],
          nlR[size_t(i)], zR[size_t(i)], ne[size_t(i)]}});
  for (int q = 0; q < int(m.states.size()); ++q)
    rep.schemaMapping.push_back({m.states[size_t(q)], {rq[size_t(q)]}});
  rep.schemaMapping.push_back({"failure", {err}});
  rep.schemaMapping.push_back({"acceptance", {acc}});
  rep.guarantee =
      "counters live in externally driven list relations; after booting both "
      "lists the query is nonempty exactly when a correctly driven sequence "
      "replays an accepting run, and every protocol deviation latches the "
      "failure bit";
  if (rep.outputFragment.maxInputArity != 2 || rep.outputFragment.maxAuxArity != 0 ||
      !rep.outputFragment.quantifierFreeUpdates)
    throw LogicError("internal: compile_2ca_prop20 fragment mismatch");
  return {out, rep};
}

// Single unary input, consistent image.  The program orders the ever-inserted
// elements, counts |U| against the high-water mark, and advances one machine
// step per fresh high-water insertion; acceptance is recorded as the level it
// happened at, making the query a function of |U| alone.
inline std::pair<DynamicProgram, ReductionReport> compile_2ca_consistent_fo12(
    const CounterAutomaton& m) {
  detail::require_2ca(m);
  std::set<std::string> taken = {"U"};
  std::vector<Symbol> syms = {{"U", 1, SymKind::Input}};
  std::string ord = detail::fresh_name("Ord", taken);
  std::string cur = detail::fresh_name("UCur", taken);
  std::string mx = detail::fresh_name("UMax", taken);
  std::string uac = detail::fresh_name("UAcc", taken);
  std::vector<std::string> cRel = {detail::fresh_name("C_1", taken),
                                   detail::fresh_name("C_2", taken)};
  std::vector<std::string> qb;
  for (const std::string& st : m.states)
    qb.push_back(detail::fresh_name("Q_" + st, taken));
  std::string acc = detail::fresh_name("Acc", taken);
  syms.push_back({ord, 2, SymKind::Aux});
  syms.push_back({cur, 1, SymKind::Aux});
  syms.push_back({mx, 1, SymKind::Aux});
  syms.push_back({uac, 1, SymKind::Aux});
  syms.push_back({cRel[0], 1, SymKind::Aux});
  syms.push_back({cRel[1], 1, SymKind::Aux});
  for (const std::string& b : qb) syms.push_back({b, 0, SymKind::Aux});
  syms.push_back({acc, 0, SymKind::Aux});

  DynamicProgram out;
  out.schema = make_schema(syms);
  out.query = out.schema->find(acc);
  using detail::bit;
  bool initAccepts = m.accepting.count(m.init) > 0;

  auto uAtom = [&](const std::string& v) { return f_atom("U", {v}); };
  auto ordA = [&](const std::string& a, const std::string& b) {
    return f_atom(ord, {a, b});
  };
  // post-insertion field and order ("u" is being inserted)
  auto fldP = [&](const std::string& t) { return f_or(ordA(t, t), f_eq(t, "u")); };
  auto ordP = [&](const std::string& s, const std::string& t) {
    return f_or(ordA(s, t),
                f_and_all({f_not(ordA("u", "u")), f_eq(t, "u"), fldP(s)}));
  };
  // v is the least element of the post-insertion field outside `rel`
  auto growInto = [&](const std::string& rel, const std::string& v) {
    return f_and(fldP(v), f_forall("w", f_or_all({f_atom(rel, {"w"}), ordP(v, "w"),
                                                  f_not(fldP("w"))})));
  };
  FormulaPtr eqCM = f_forall("w", f_iff(f_atom(cur, {"w"}), f_atom(mx, {"w"})));
  FormulaPtr live = f_and(f_not(uAtom("u")), eqCM);  // genuine high-water insert

  auto enabled = [&](const CATransition& t) -> FormulaPtr {
    FormulaPtr some = f_exists("w", f_atom(cRel[size_t(t.counter)], {"w"}));
    switch (t.act) {
      case CAAct::Inc:
        return f_true();
      case CAAct::Dec:
        return some;
      case CAAct::IfZero:
        return f_not(some);
    }
    return f_false();
  };

  std::vector<FormulaPtr> accFires;
  for (const auto& t : m.transitions)
    if (m.accepting.count(t.to))
      accFires.push_back(f_and(bit(qb[size_t(t.from)]), enabled(t)));
  FormulaPtr accFire = f_and(live, f_or_all(accFires));

  FormulaPtr curPostIns =
      f_or(f_atom(cur, {"y1"}), f_and(f_not(uAtom("u")), growInto(cur, "y1")));
  FormulaPtr curPostDel =
      f_and(f_atom(cur, {"y1"}),
            f_or(f_not(uAtom("u")),
                 f_exists("w", f_and_all({f_atom(cur, {"w"}), ordA("y1", "w"),
                                          f_not(f_eq("y1", "w"))}))));
  auto curPostInsAt = [&](const std::string& v) {
    return detail::rename_free_vars(curPostIns, {{"y1", v}});
  };
  auto curPostDelAt = [&](const std::string& v) {
    return detail::rename_free_vars(curPostDel, {{"y1", v}});
  };

  int uIdx = out.schema->find("U");
  OpKey insU{true, uIdx}, delU{false, uIdx};
  std::vector<std::string> xv = {"u"};
  auto put = [&](const std::string& name, const OpKey& op,
                 std::vector<std::string> yv, FormulaPtr f) {
    out.updates[{out.schema->find(name), op}] = {xv, std::move(yv), f};
  };

  put(ord, insU, {"y1", "y2"},
      f_or(ordA("y1", "y2"),
           f_and_all({f_not(ordA("u", "u")), f_eq("y2", "u"), fldP("y1")})));
  put(ord, delU, {"y1", "y2"}, ordA("y1", "y2"));
  put(cur, insU, {"y1"}, curPostIns);
  put(cur, delU, {"y1"}, curPostDel);
  put(mx, insU, {"y1"},
      f_or(f_atom(mx, {"y1"}), f_and(live, growInto(cur, "y1"))));
  put(mx, delU, {"y1"}, f_atom(mx, {"y1"}));

  for (int j = 0; j < 2; ++j) {
    std::vector<FormulaPtr> keepGuard = {uAtom("u"), f_not(eqCM)};
    for (const auto& t : m.transitions)
      if (t.counter != j) keepGuard.push_back(bit(qb[size_t(t.from)]));
    std::vector<FormulaPtr> sims;
    for (const auto& t : m.transitions) {
      if (t.counter != j) continue;
      if (t.act == CAAct::Inc)
        sims.push_back(f_and(bit(qb[size_t(t.from)]), growInto(cRel[size_t(j)], "y1")));
      else if (t.act == CAAct::Dec)
        sims.push_back(f_and_all(
            {bit(qb[size_t(t.from)]), f_atom(cRel[size_t(j)], {"y1"}),
             f_exists("w", f_and_all({f_atom(cRel[size_t(j)], {"w"}),
                                      ordA("y1", "w"), f_not(f_eq("y1", "w"))}))}));
    }
    FormulaPtr f = f_or(f_and(f_or_all(keepGuard), f_atom(cRel[size_t(j)], {"y1"})),
                        f_and(live, f_or_all(sims)));
    put(cRel[size_t(j)], insU, {"y1"}, f);
    put(cRel[size_t(j)], delU, {"y1"}, f_atom(cRel[size_t(j)], {"y1"}));
  }

  for (int q = 0; q < int(m.states.size()); ++q) {
    std::vector<FormulaPtr> fires;
    for (const auto& t : m.transitions)
      if (t.to == q) fires.push_back(f_and(bit(qb[size_t(t.from)]), enabled(t)));
    put(qb[size_t(q)], insU, {},
        f_or(f_and(f_or(uAtom("u"), f_not(eqCM)), bit(qb[size_t(q)])),
             f_and(live, f_or_all(fires))));
    put(qb[size_t(q)], delU, {}, bit(qb[size_t(q)]));
  }

  put(uac, insU, {"y1"},
      f_or(f_atom(uac, {"y1"}),
           f_and_all({f_forall("w", f_not(f_atom(uac, {"w"}))), accFire, curPostIns})));
  put(uac, delU, {"y1"}, f_atom(uac, {"y1"}));

  FormulaPtr someAcc = f_exists("w", f_atom(uac, {"w"}));
  if (initAccepts) {
    put(acc, insU, {}, f_true());
    put(acc, delU, {}, f_true());
  } else {
    put(acc, insU, {},
        f_or(accFire, f_and(someAcc, f_forall("w", f_implies(f_atom(uac, {"w"}),
                                                             curPostInsAt("w"))))));
    put(acc, delU, {},
        f_and(someAcc,
              f_forall("w", f_implies(f_atom(uac, {"w"}), curPostDelAt("w")))));
  }

  for (int i = 0; i < out.schema->size(); ++i) {
    if (out.schema->at(i).kind != SymKind::Aux) continue;
    std::vector<std::string> yv = detail::body_vars(out.schema->at(i).arity, {});
    out.init[i] = {yv, f_false()};
  }
  out.init[out.schema->find(qb[size_t(m.init)])] = {{}, f_true()};
  out.init[out.schema->find(acc)] = {{}, initAccepts ? f_true() : f_false()};
  validate_program(out);

  ReductionReport rep;
  rep.outputFragment = classify(out);
  rep.schemaMapping.push_back({"level", {"U", ord, cur, mx}});
  rep.schemaMapping.push_back({"counter 1", {cRel[0]}});
  rep.schemaMapping.push_back({"counter 2", {cRel[1]}});
  for (int q = 0; q < int(m.states.size()); ++q)
    rep.schemaMapping.push_back({m.states[size_t(q)], {qb[size_t(q)]}});
  rep.schemaMapping.push_back({"acceptance", {uac, acc}});
  rep.guarantee =
      "the image is consistent (the query depends only on the current size "
      "of U) and its query can become nonempty iff the machine has an "
      "accepting run";
  if (rep.outputFragment.maxInputArity != 1 || rep.outputFragment.maxAuxArity != 2)
    throw LogicError("internal: compile_2ca_consistent_fo12 fragment mismatch");
  return {out, rep};
}

// ---------------------------------------------------------------------------
// Run translation.  Both translators walk the run, validate enabledness, and
// allocate the smallest usable domain element for every insertion so the
// output is deterministic.
// ---------------------------------------------------------------------------

inline ModSeq run_to_sequence(const CounterAutomaton& m, const Run& run,
                              int domainSize, const SchemaPtr& schema) {
  detail::require_2ca(m);
  int cIdx[2] = {schema->find("C_1"), schema->find("C_2")};
  int zIdx[2] = {schema->find("Z_1"), schema->find("Z_2")};
  for (int i = 0; i < 2; ++i)
    if (cIdx[i] < 0 || zIdx[i] < 0)
      throw LogicError("schema lacks the counter relations C_1, C_2, Z_1, Z_2");

  std::set<int> content[2];
  bool zOn[2] = {false, false};
  int state = m.init;
  ModSeq seq;
  for (int ti : run.transitions) {
    if (ti < 0 || ti >= int(m.transitions.size()))
      throw LogicError("run references an unknown transition");
    const CATransition& t = m.transitions[size_t(ti)];
    if (t.from != state) throw LogicError("run transitions do not chain");
    int ci = t.counter;
    switch (t.act) {
      case CAAct::Inc: {
        int d = 0;
        for (int e = 1; e <= domainSize; ++e)
          if (!content[ci].count(e)) {
            d = e;
            break;
          }
        if (d == 0) throw LogicError("domain too small for the run");
        content[ci].insert(d);
        seq.push_back({true, cIdx[ci], {d}});
        break;
      }
      case CAAct::Dec: {
        if (content[ci].empty()) throw LogicError("run decrements an empty counter");
        int d = *content[ci].begin();
        content[ci].erase(d);
        seq.push_back({false, cIdx[ci], {d}});
        break;
      }
      case CAAct::IfZero: {
        if (!content[ci].empty()) throw LogicError("run zero-tests a nonzero counter");
        seq.push_back({!zOn[ci], zIdx[ci], {}});
        zOn[ci] = !zOn[ci];
        break;
      }
    }
    state = t.to;
  }
  return seq;
}

inline ModSeq run_to_sequence_prop20(const CounterAutomaton& m, const Run& run,
                                     int domainSize, const SchemaPtr& schema) {
  detail::require_2ca(m);
  int li[2], in[2], mi[2], la[2], nl[2], zi[2];
  for (int i = 0; i < 2; ++i) {
    std::string n = std::to_string(i + 1);
    li[i] = schema->find("List_" + n);
    in[i] = schema->find("In_" + n);
    mi[i] = schema->find("Min_" + n);
    la[i] = schema->find("Last_" + n);
    nl[i] = schema->find("NextLast_" + n);
    zi[i] = schema->find("Z_" + n);
    if (li[i] < 0 || in[i] < 0 || mi[i] < 0 || la[i] < 0 || nl[i] < 0 || zi[i] < 0)
      throw LogicError("schema lacks the list-counter relations");
  }
  if (domainSize < 2) throw LogicError("domain too small for the run");

  ModSeq seq;
  std::vector<int> chain[2];  // list contents, head first
  std::set<int> members[2];
  bool zOn[2] = {false, false};
  for (int i = 0; i < 2; ++i) {
    int h = i + 1;
    chain[i] = {h};
    members[i] = {h};
    seq.push_back({true, mi[i], {h}});
    seq.push_back({true, la[i], {h}});
    seq.push_back({true, in[i], {h}});
  }

  int state = m.init;
  for (int ti : run.transitions) {
    if (ti < 0 || ti >= int(m.transitions.size()))
      throw LogicError("run references an unknown transition");
    const CATransition& t = m.transitions[size_t(ti)];
    if (t.from != state) throw LogicError("run transitions do not chain");
    int ci = t.counter;
    switch (t.act) {
      case CAAct::Inc: {
        int a = 0;
        for (int e = 1; e <= domainSize; ++e)
          if (!members[ci].count(e)) {
            a = e;
            break;
          }
        if (a == 0) throw LogicError("domain too small for the run");
        int b = chain[ci].back();
        seq.push_back({true, nl[ci], {a}});
        seq.push_back({true, li[ci], {b, a}});
        seq.push_back({false, la[ci], {b}});
        seq.push_back({true, in[ci], {a}});
        seq.push_back({true, la[ci], {a}});
        seq.push_back({false, nl[ci], {a}});
        chain[ci].push_back(a);
        members[ci].insert(a);
        break;
      }
      case CAAct::Dec: {
        if (chain[ci].size() < 2) throw LogicError("run decrements an empty counter");
        int a = chain[ci].back();
        int b = chain[ci][chain[ci].size() - 2];
        seq.push_back({true, nl[ci], {b}});
        seq.push_back({false, li[ci], {b, a}});
        seq.push_back({false, in[ci], {a}});
        seq.push_back({false, la[ci], {a}});
        seq.push_back({true, la[ci], {b}});
        seq.push_back({false, nl[ci], {b}});
        chain[ci].pop_back();
        members[ci].erase(a);
        break;
      }
      case CAAct::IfZero: {
        if (chain[ci].size() != 1) throw LogicError("run zero-tests a nonzero counter");
        seq.push_back({!zOn[ci], zi[ci], {}});
        zOn[ci] = !zOn[ci];
        break;
      }
    }
    state = t.to;
  }
  return seq;
}

}  // namespace dynrel
