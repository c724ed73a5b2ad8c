#pragma once

// Dynamic programs: update formulas per (auxiliary relation, modification
// kind), FO initialization on empty databases, pre-state update semantics.

#include <functional>
#include <unordered_set>

#include "dynrel/logic.hpp"

namespace dynrel {

// One program state is a single structure over the full schema (input and
// auxiliary relations side by side).
using ProgramState = Structure;

struct Modification {
  bool insert = true;
  int sym = -1;  // schema index of an input symbol
  Tuple tuple;

  bool operator==(const Modification& o) const {
    return insert == o.insert && sym == o.sym && tuple == o.tuple;
  }
  bool operator<(const Modification& o) const {
    return std::tie(insert, sym, tuple) < std::tie(o.insert, o.sym, o.tuple);
  }
};

using ModSeq = std::vector<Modification>;

struct UpdateRule {
  std::vector<std::string> xvars;  // modified tuple variables
  std::vector<std::string> yvars;  // updated relation variables
  FormulaPtr formula;
};

struct OpKey {
  bool insert = true;
  int sym = -1;

  bool operator<(const OpKey& o) const {
    return std::tie(insert, sym) < std::tie(o.insert, o.sym);
  }
  bool operator==(const OpKey& o) const { return insert == o.insert && sym == o.sym; }
};

struct InitRule {
  std::vector<std::string> yvars;
  FormulaPtr formula;
};

struct DynamicProgram {
  SchemaPtr schema;
  std::map<std::pair<int, OpKey>, UpdateRule> updates;  // (aux sym, op) -> rule
  std::map<int, InitRule> init;                         // aux sym -> init formula
  int query = -1;                                       // aux schema index

  const UpdateRule& update_for(int aux, const OpKey& op) const {
    auto it = updates.find({aux, op});
    if (it == updates.end()) throw LogicError("missing update rule");
    return it->second;
  }
};

inline std::vector<OpKey> all_ops(const Schema& schema) {
  std::vector<OpKey> ops;
  for (int s : schema.input_syms()) {
    ops.push_back({true, s});
    ops.push_back({false, s});
  }
  return ops;
}

// Add frame rules R(y...) := R(y...) for any missing (aux, op) pair.
inline void ensure_total_frames(DynamicProgram& p) {
  for (const OpKey& op : all_ops(*p.schema)) {
    // Reuse head variables of any existing rule for this operation so that a
    // partially written block keeps a single consistent head.
    std::vector<std::string> xv;
    bool found = false;
    for (int aux : p.schema->aux_syms()) {
      auto it = p.updates.find({aux, op});
      if (it != p.updates.end()) {
        xv = it->second.xvars;
        found = true;
        break;
      }
    }
    if (!found) {
      int inAr = p.schema->at(op.sym).arity;
      for (int i = 0; i < inAr; ++i) xv.push_back("x" + std::to_string(i + 1));
    }
    for (int aux : p.schema->aux_syms()) {
      if (p.updates.count({aux, op})) continue;
      int ar = p.schema->at(aux).arity;
      std::vector<std::string> yv;
      for (int i = 0; i < ar; ++i) {
        std::string v = "y" + std::to_string(i + 1);
        while (std::find(xv.begin(), xv.end(), v) != xv.end()) v += "_";
        yv.push_back(v);
      }
      p.updates[{aux, op}] = {xv, yv, f_atom(p.schema->at(aux).name, yv)};
    }
  }
}

struct FragmentProfile {
  int maxInputArity = 0;   // l
  int maxAuxArity = 0;     // m
  bool quantifierFreeUpdates = true;
  int queryArity = 0;
};

inline FragmentProfile classify(const DynamicProgram& p) {
  FragmentProfile fp;
  for (int s : p.schema->input_syms())
    fp.maxInputArity = std::max(fp.maxInputArity, p.schema->at(s).arity);
  for (int s : p.schema->aux_syms())
    fp.maxAuxArity = std::max(fp.maxAuxArity, p.schema->at(s).arity);
  for (const auto& [key, rule] : p.updates)
    if (!quantifier_free(rule.formula)) fp.quantifierFreeUpdates = false;
  // initialization is exempt from the quantifier-free requirement
  fp.queryArity = p.schema->at(p.query).arity;
  return fp;
}

// Max quantifier depth over update AND init formulas.
inline int program_quantifier_depth(const DynamicProgram& p) {
  int q = 0;
  for (const auto& [key, rule] : p.updates)
    q = std::max(q, quantifier_depth(rule.formula));
  for (const auto& [sym, rule] : p.init) q = std::max(q, quantifier_depth(rule.formula));
  return q;
}

inline void validate_program(const DynamicProgram& p) {
  if (!p.schema) throw LogicError("program without schema");
  if (p.query < 0 || p.query >= p.schema->size() ||
      p.schema->at(p.query).kind != SymKind::Aux)
    throw LogicError("query symbol must be an auxiliary relation");
  bool hasRealInput = false;
  for (int s : p.schema->input_syms())
    if (p.schema->at(s).arity >= 1) hasRealInput = true;
  if (!hasRealInput)
    throw LogicError("input schema needs at least one relation of arity >= 1");
  for (int aux : p.schema->aux_syms()) {
    for (const OpKey& op : all_ops(*p.schema)) {
      auto it = p.updates.find({aux, op});
      if (it == p.updates.end()) throw LogicError("update rules not total");
      const UpdateRule& r = it->second;
      if (int(r.xvars.size()) != p.schema->at(op.sym).arity ||
          int(r.yvars.size()) != p.schema->at(aux).arity)
        throw LogicError("update rule variable arity mismatch");
      std::set<std::string> allowed(r.xvars.begin(), r.xvars.end());
      allowed.insert(r.yvars.begin(), r.yvars.end());
      for (const auto& v : free_vars(r.formula))
        if (!allowed.count(v)) throw LogicError("free variable leak: " + v);
    }
  }
  for (const auto& [aux, rule] : p.init) {
    if (p.schema->at(aux).kind != SymKind::Aux) throw LogicError("init for non-aux");
    std::set<std::string> allowed(rule.yvars.begin(), rule.yvars.end());
    for (const auto& v : free_vars(rule.formula))
      if (!allowed.count(v)) throw LogicError("free variable leak in init: " + v);
    // Init maps the (empty) input database to the auxiliary relations; letting
    // it read other auxiliary relations would make that map circular.
    std::function<void(const FormulaPtr&)> noAux = [&](const FormulaPtr& f) {
      if (f->kind == FKind::Atom) {
        int s = p.schema->find(f->sym);
        if (s >= 0 && p.schema->at(s).kind == SymKind::Aux)
          throw LogicError("init formula may only reference input relations: " + f->sym);
      }
      for (const auto& kid : f->kids) noAux(kid);
    };
    noAux(rule.formula);
  }
}

inline void all_tuples(int arity, int n, Tuple& cur, const std::function<void(const Tuple&)>& fn) {
  if (int(cur.size()) == arity) {
    fn(cur);
    return;
  }
  for (int e = 1; e <= n; ++e) {
    cur.push_back(e);
    all_tuples(arity, n, cur, fn);
    cur.pop_back();
  }
}

inline std::vector<Tuple> tuples_over(int arity, int n) {
  std::vector<Tuple> out;
  Tuple cur;
  all_tuples(arity, n, cur, [&](const Tuple& t) { out.push_back(t); });
  return out;
}

// Initial state: empty input database over a non-empty domain, auxiliary
// relations set by the init formulas (missing init = empty relation).
inline ProgramState init_state(const DynamicProgram& p, int n) {
  ProgramState s = empty_structure(p.schema, n);
  for (int aux : p.schema->aux_syms()) {
    auto it = p.init.find(aux);
    if (it == p.init.end()) continue;
    const InitRule& rule = it->second;
    Env env;
    for (const Tuple& t : tuples_over(p.schema->at(aux).arity, n)) {
      env.binds.clear();
      for (size_t i = 0; i < rule.yvars.size(); ++i) env.push(rule.yvars[i], t[i]);
      if (eval(s, rule.formula, env)) s.rel[size_t(aux)].insert(t);
    }
  }
  return s;
}

// Apply one modification: every auxiliary relation is recomputed from the
// pre-state simultaneously, then the input relation is updated with set
// semantics (spurious modifications are legal and may still change aux).
inline ProgramState apply(const DynamicProgram& p, const ProgramState& s,
                          const Modification& mod) {
  if (mod.sym < 0 || mod.sym >= p.schema->size() ||
      p.schema->at(mod.sym).kind != SymKind::Input)
    throw LogicError("modification must target an input relation");
  if (int(mod.tuple.size()) != p.schema->at(mod.sym).arity)
    throw LogicError("modification arity mismatch");
  for (int v : mod.tuple)
    if (v < 1 || v > s.domainSize) throw LogicError("modification element out of domain");

  ProgramState next = s;
  OpKey op{mod.insert, mod.sym};
  Env env;
  for (int aux : p.schema->aux_syms()) {
    const UpdateRule& rule = p.update_for(aux, op);
    Relation newRel;
    for (const Tuple& t : tuples_over(p.schema->at(aux).arity, s.domainSize)) {
      env.binds.clear();
      for (size_t i = 0; i < rule.xvars.size(); ++i) env.push(rule.xvars[i], mod.tuple[i]);
      for (size_t i = 0; i < rule.yvars.size(); ++i) env.push(rule.yvars[i], t[i]);
      if (eval(s, rule.formula, env)) newRel.insert(t);
    }
    next.rel[size_t(aux)] = std::move(newRel);
  }
  if (mod.insert)
    next.rel[size_t(mod.sym)].insert(mod.tuple);
  else
    next.rel[size_t(mod.sym)].erase(mod.tuple);
  return next;
}

inline ProgramState apply_sequence(const DynamicProgram& p, ProgramState s,
                                   const ModSeq& seq) {
  for (const auto& m : seq) s = apply(p, s, m);
  return s;
}

inline bool query_nonempty(const DynamicProgram& p, const ProgramState& s) {
  return !s.rel[size_t(p.query)].empty();
}

// ---------------------------------------------------------------------------
// Sequence enumeration

enum class SeqMode { InsertionsOnly, All };

// Enumerates every modification sequence (including the empty one) up to
// maxLen, depth-first with shared prefixes. InsertionsOnly additionally keeps
// insertions pairwise distinct and excludes deletions.
inline void enumerate_sequences(const DynamicProgram& p, int n, int maxLen, SeqMode mode,
                                const std::function<bool(const ModSeq&)>& fn) {
  std::vector<Modification> mods;
  for (int s : p.schema->input_syms())
    for (bool ins : {true, false}) {
      if (mode == SeqMode::InsertionsOnly && !ins) continue;
      for (const Tuple& t : tuples_over(p.schema->at(s).arity, n))
        mods.push_back({ins, s, t});
    }
  ModSeq cur;
  std::function<bool()> rec = [&]() -> bool {
    if (!fn(cur)) return false;
    if (int(cur.size()) == maxLen) return true;
    for (const auto& m : mods) {
      if (mode == SeqMode::InsertionsOnly &&
          std::find(cur.begin(), cur.end(), m) != cur.end())
        continue;
      cur.push_back(m);
      if (!rec()) return false;
      cur.pop_back();
    }
    return true;
  };
  rec();
}

inline std::vector<ModSeq> enumerate_sequences(const DynamicProgram& p, int n, int maxLen,
                                               SeqMode mode) {
  std::vector<ModSeq> out;
  enumerate_sequences(p, n, maxLen, mode, [&](const ModSeq& s) {
    out.push_back(s);
    return true;
  });
  return out;
}

// BFS over reachable program states with a visited set. Every final state of
// any modification sequence of length <= maxLen from init_state(p, n) is
// visited exactly once; visitor returns false to stop. The provenance sequence
// passed along is one shortest witness for the state.
inline void reachable_states(const DynamicProgram& p, int n, int maxLen,
                             const std::function<bool(const ProgramState&, const ModSeq&)>& fn,
                             SeqMode mode = SeqMode::All,
                             uint64_t stateBudget = UINT64_MAX) {
  std::vector<Modification> mods;
  for (int s : p.schema->input_syms())
    for (bool ins : {true, false}) {
      if (mode == SeqMode::InsertionsOnly && !ins) continue;
      for (const Tuple& t : tuples_over(p.schema->at(s).arity, n))
        mods.push_back({ins, s, t});
    }
  ProgramState start = init_state(p, n);
  std::unordered_set<std::string> seen;
  std::vector<std::pair<ProgramState, ModSeq>> frontier{{start, {}}};
  seen.insert(encode_structure(start));
  if (!fn(start, {})) return;
  for (int depth = 1; depth <= maxLen && !frontier.empty(); ++depth) {
    std::vector<std::pair<ProgramState, ModSeq>> next;
    for (const auto& [st, seq] : frontier) {
      for (const auto& m : mods) {
        if (mode == SeqMode::InsertionsOnly &&
            std::find(seq.begin(), seq.end(), m) != seq.end())
          continue;
        ProgramState ns = apply(p, st, m);
        std::string key = encode_structure(ns);
        if (!seen.insert(std::move(key)).second) continue;
        if (seen.size() > stateBudget) throw BudgetError("state sweep over budget");
        ModSeq nseq = seq;
        nseq.push_back(m);
        if (!fn(ns, nseq)) return;
        next.emplace_back(std::move(ns), std::move(nseq));
      }
    }
    frontier = std::move(next);
  }
}

// ---------------------------------------------------------------------------
// Normal form insertion sequences (unary input schemas). A sequence is in
// normal form when every element receives all its insertions contiguously
// (N1) and elements ending up with the same input color share one operation
// order (N2). The sorted flag additionally orders blocks by color (the
// history-independence refinement).

using ColorOrders = std::map<int, std::vector<int>>;  // color mask -> input sym order

inline std::vector<int> proper_color_syms(const Schema&, int mask,
                                          const std::vector<int>& unaryIn) {
  std::vector<int> syms;
  for (size_t i = 0; i < unaryIn.size(); ++i)
    if (mask & (1 << i)) syms.push_back(unaryIn[i]);
  return syms;
}

inline std::vector<ModSeq> normal_form_sequences(const SchemaPtr& schema, int n,
                                                 const std::vector<int>& colorTargets,
                                                 const ColorOrders& orders,
                                                 bool colorSorted = false) {
  std::vector<int> unaryIn = unary_syms(*schema, schema->input_syms());
  for (int s : schema->input_syms())
    if (schema->at(s).arity > 1)
      throw LogicError("normal form sequences need a unary input schema");
  if (int(colorTargets.size()) > n) throw LogicError("more color targets than elements");
  for (int mask : colorTargets) {
    if (mask == 0) throw LogicError("color targets must be proper colors");
    auto it = orders.find(mask);
    if (it == orders.end()) throw LogicError("missing order for color");
    std::vector<int> expect = proper_color_syms(*schema, mask, unaryIn);
    std::vector<int> got = it->second;
    std::sort(got.begin(), got.end());
    if (got != expect) throw LogicError("order does not match color relations");
  }
  // distinct arrangements of the target multiset; sorted mode keeps one
  std::vector<int> base = colorTargets;
  std::sort(base.begin(), base.end());
  std::vector<std::vector<int>> arrangements;
  if (colorSorted) {
    arrangements.push_back(base);
  } else {
    do {
      arrangements.push_back(base);
    } while (std::next_permutation(base.begin(), base.end()));
  }
  std::vector<ModSeq> out;
  for (const auto& arr : arrangements) {
    ModSeq seq;
    int elem = 1;
    for (int mask : arr) {
      for (int sym : orders.at(mask)) seq.push_back({true, sym, {elem}});
      ++elem;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::vector<std::vector<int>> permutations_of(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::vector<int>> out;
  do {
    out.push_back(v);
  } while (std::next_permutation(v.begin(), v.end()));
  return out;
}

// Enumerate all normal-form insertion sequences for domains of size n:
// color multiplicities for every proper color, per-color operation orders,
// and (unless colorSorted) all block arrangements.
inline void for_each_normal_form(const SchemaPtr& schema, int n, bool colorSorted,
                                 const std::function<bool(const ModSeq&)>& fn) {
  std::vector<int> unaryIn = unary_syms(*schema, schema->input_syms());
  int colors = color_count(unaryIn);
  std::vector<int> masks;
  for (int m = 1; m < colors; ++m) masks.push_back(m);
  // counts per proper color, total <= n
  std::vector<int> counts(masks.size(), 0);
  bool stop = false;
  std::function<void(size_t, int)> recCounts = [&](size_t i, int used) {
    if (stop) return;
    if (i == masks.size()) {
      std::vector<int> targets;
      for (size_t j = 0; j < masks.size(); ++j)
        for (int c = 0; c < counts[j]; ++c) targets.push_back(masks[j]);
      // per-color order choices for colors in use
      std::vector<int> used_masks;
      for (size_t j = 0; j < masks.size(); ++j)
        if (counts[j] > 0) used_masks.push_back(masks[j]);
      std::function<void(size_t, ColorOrders&)> recOrders = [&](size_t k, ColorOrders& ord) {
        if (stop) return;
        if (k == used_masks.size()) {
          for (auto& seq : normal_form_sequences(schema, n, targets, ord, colorSorted))
            if (!fn(seq)) {
              stop = true;
              return;
            }
          return;
        }
        int mask = used_masks[k];
        for (auto& perm : permutations_of(proper_color_syms(*schema, mask, unaryIn))) {
          ord[mask] = perm;
          recOrders(k + 1, ord);
          ord.erase(mask);
          if (stop) return;
        }
      };
      ColorOrders ord;
      recOrders(0, ord);
      return;
    }
    for (int c = 0; used + c <= n; ++c) {
      counts[i] = c;
      recCounts(i + 1, used + c);
      if (stop) return;
    }
    counts[i] = 0;
  };
  recCounts(0, 0);
}

// N1/N2 checker used by the generator tests: insertions only, per-element
// contiguous blocks, fresh elements, consistent per-color orders.
inline bool is_normal_form(const SchemaPtr& schema, const ModSeq& seq,
                           bool requireColorSorted = false) {
  std::vector<int> unaryIn = unary_syms(*schema, schema->input_syms());
  std::map<int, std::vector<int>> blocks;  // element -> input syms in order
  std::vector<int> order;                  // element first-touch order
  for (const auto& m : seq) {
    if (!m.insert || m.tuple.size() != 1) return false;
    int e = m.tuple[0];
    if (!blocks.count(e)) {
      blocks[e] = {};
      order.push_back(e);
    } else if (order.back() != e) {
      return false;  // block not contiguous
    }
    auto& b = blocks[e];
    if (std::find(b.begin(), b.end(), m.sym) != b.end()) return false;  // repeat
    b.push_back(m.sym);
  }
  auto mask_of = [&](const std::vector<int>& syms) {
    int mask = 0;
    for (int s : syms)
      for (size_t i = 0; i < unaryIn.size(); ++i)
        if (unaryIn[i] == s) mask |= 1 << i;
    return mask;
  };
  std::map<int, std::vector<int>> colorOrder;
  for (const auto& [e, b] : blocks) {
    int mask = mask_of(b);
    auto it = colorOrder.find(mask);
    if (it == colorOrder.end())
      colorOrder[mask] = b;
    else if (it->second != b)
      return false;  // N2 violated
  }
  if (requireColorSorted) {
    int prev = -1;
    for (int e : order) {
      int mask = mask_of(blocks[e]);
      if (prev > mask) return false;
      prev = mask;
    }
  }
  return true;
}

}  // namespace dynrel
