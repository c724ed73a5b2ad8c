#pragma once

// History independence and consistency analysis. A state is locally history
// independent when insertions commute (H1), inserting and deleting an absent
// tuple is a round trip (H2) and spurious modifications are no-ops (H3); full
// history independence reduces to local checks over insertion sequences. For
// unary-input FO programs a small-model bound turns the sweep into a decision
// procedure; for quantifier-free programs with unary auxiliaries a
// sunflower-style tuple bound plays the same role. Consistency is checked
// either by bounded search over innocuous transformations or exactly, for
// quantifier-free unary programs, through the emptiness reduction.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dynrel/dynprog.hpp"
#include "dynrel/emptiness.hpp"
#include "dynrel/logic.hpp"
#include "dynrel/transforms.hpp"

namespace dynrel {

// ---------------------------------------------------------------------------
// Homogeneity and type functions.

inline std::vector<int> positive_arity_syms(const Schema& schema, const std::vector<int>& syms) {
  std::vector<int> out;
  for (int s : syms)
    if (schema.at(s).arity >= 1) out.push_back(s);
  return out;
}

// Tuple width used by the type machinery: the maximal positive auxiliary
// arity, at least one.
inline int aux_width(const Schema& schema) {
  int m = 1;
  for (int s : schema.aux_syms()) m = std::max(m, schema.at(s).arity);
  return m;
}

// Maps every realized atomic input m-type of a state to the atomic auxiliary
// m-type shared by all tuples of that input type. Unrealized input types are
// simply absent (the explicit bottom).
struct TypeFunction {
  int m = 1;
  std::map<AtomicType, AtomicType> map;

  std::optional<AtomicType> at(const AtomicType& in) const {
    auto it = map.find(in);
    if (it == map.end()) return std::nullopt;
    return it->second;
  }
  bool operator==(const TypeFunction& o) const { return m == o.m && map == o.map; }
  bool operator!=(const TypeFunction& o) const { return !(*this == o); }
};

struct Homogeneity {
  bool homogeneous = true;
  std::optional<TypeFunction> typeFunction;  // set iff homogeneous
  Tuple tupleA, tupleB;  // same input type, different aux type otherwise
};

// A state is homogeneous when all m-tuples with the same atomic input type
// share their atomic auxiliary type. 0-ary relations are global and cannot
// split tuple types, so only positive arities participate.
inline Homogeneity is_homogeneous(const Structure& s) {
  const Schema& sc = *s.schema;
  int m = aux_width(sc);
  std::vector<int> in = positive_arity_syms(sc, sc.input_syms());
  std::vector<int> aux = positive_arity_syms(sc, sc.aux_syms());
  Homogeneity h;
  std::map<AtomicType, std::pair<AtomicType, Tuple>> seen;
  for (const Tuple& t : tuples_over(m, s.domainSize)) {
    AtomicType ti = atomic_type(s, t, in);
    AtomicType ta = atomic_type(s, t, aux);
    auto it = seen.find(ti);
    if (it == seen.end()) {
      seen.emplace(std::move(ti), std::make_pair(std::move(ta), t));
    } else if (!(it->second.first == ta)) {
      h.homogeneous = false;
      h.tupleA = it->second.second;
      h.tupleB = t;
      return h;
    }
  }
  TypeFunction f;
  f.m = m;
  for (auto& [ti, pr] : seen) f.map.emplace(ti, pr.first);
  h.typeFunction = std::move(f);
  return h;
}

// ---------------------------------------------------------------------------
// Local history independence.

enum class HIKind { H1, H2, H3, Inhomogeneous };

inline std::string hi_kind_name(HIKind k) {
  switch (k) {
    case HIKind::H1: return "H1";
    case HIKind::H2: return "H2";
    case HIKind::H3: return "H3";
    default: return "inhomogeneous";
  }
}

struct HIViolation {
  HIKind kind = HIKind::H1;
  int domainSize = 1;
  ModSeq reach;  // insertion sequence from the empty database to the state
  std::vector<Modification> mods;  // H1: both orders of these; H2: the pair; H3: one
  std::string relation;            // relation whose value differs
  Relation lhs, rhs;               // the two differing instances
  Tuple tupleA, tupleB;            // inhomogeneity evidence
};

namespace detail {

inline int first_diff_sym(const Structure& a, const Structure& b) {
  for (size_t i = 0; i < a.rel.size(); ++i)
    if (a.rel[i] != b.rel[i]) return int(i);
  return -1;
}

inline HIViolation state_diff_violation(const DynamicProgram& p, HIKind kind,
                                        std::vector<Modification> mods, const Structure& lhs,
                                        const Structure& rhs) {
  HIViolation v;
  v.kind = kind;
  v.domainSize = lhs.domainSize;
  v.mods = std::move(mods);
  int d = first_diff_sym(lhs, rhs);
  v.relation = p.schema->at(d).name;
  v.lhs = lhs.rel[size_t(d)];
  v.rhs = rhs.rel[size_t(d)];
  return v;
}

}  // namespace detail

// Checks H1 over all pairs of insertions, then H2 over all absent tuples,
// then H3 over all tuples, and returns the first violation with evidence.
// The reach field is left for the caller, who knows how the state was built.
inline std::optional<HIViolation> is_locally_hi(const DynamicProgram& p, const ProgramState& s) {
  const Schema& sc = *p.schema;
  std::vector<Modification> ins;
  for (int r : sc.input_syms())
    for (const Tuple& t : tuples_over(sc.at(r).arity, s.domainSize))
      ins.push_back(Modification{true, r, t});
  std::vector<ProgramState> post;  // one-insertion successors, shared by H1 and H2
  post.reserve(ins.size());
  for (const Modification& m : ins) post.push_back(apply(p, s, m));
  for (size_t i = 0; i < ins.size(); ++i)
    for (size_t j = i + 1; j < ins.size(); ++j) {
      ProgramState a = apply(p, post[i], ins[j]);
      ProgramState b = apply(p, post[j], ins[i]);
      if (!(a == b)) return detail::state_diff_violation(p, HIKind::H1, {ins[i], ins[j]}, a, b);
    }
  for (size_t i = 0; i < ins.size(); ++i) {
    if (s.holds(ins[i].sym, ins[i].tuple)) continue;
    Modification out{false, ins[i].sym, ins[i].tuple};
    ProgramState b = apply(p, post[i], out);
    if (!(b == s)) return detail::state_diff_violation(p, HIKind::H2, {ins[i], out}, s, b);
  }
  for (int r : sc.input_syms())
    for (const Tuple& t : tuples_over(sc.at(r).arity, s.domainSize)) {
      Modification noop{s.holds(r, t), r, t};
      ProgramState b = apply(p, s, noop);
      if (!(b == s)) return detail::state_diff_violation(p, HIKind::H3, {noop}, s, b);
    }
  return std::nullopt;
}

// Re-runs the evidence; throws when it does not reproduce.
inline void assert_hi_violation(const DynamicProgram& p, const HIViolation& v) {
  ProgramState s = apply_sequence(p, init_state(p, v.domainSize), v.reach);
  int sym = v.relation.empty() ? -1 : p.schema->find(v.relation);
  auto check_pair = [&](const ProgramState& a, const ProgramState& b) {
    if (a == b) throw LogicError("violation does not replay: states agree");
    if (sym >= 0 && (a.rel[size_t(sym)] != v.lhs || b.rel[size_t(sym)] != v.rhs))
      throw LogicError("violation evidence does not match the replay");
  };
  switch (v.kind) {
    case HIKind::H1: {
      if (v.mods.size() != 2 || !v.mods[0].insert || !v.mods[1].insert)
        throw LogicError("H1 violation needs two insertions");
      check_pair(apply(p, apply(p, s, v.mods[0]), v.mods[1]),
                 apply(p, apply(p, s, v.mods[1]), v.mods[0]));
      break;
    }
    case HIKind::H2: {
      if (v.mods.size() != 2 || !v.mods[0].insert || v.mods[1].insert ||
          v.mods[0].sym != v.mods[1].sym || v.mods[0].tuple != v.mods[1].tuple)
        throw LogicError("H2 violation needs an insert/delete pair on one tuple");
      if (s.holds(v.mods[0].sym, v.mods[0].tuple))
        throw LogicError("H2 violation needs an absent tuple");
      check_pair(s, apply(p, apply(p, s, v.mods[0]), v.mods[1]));
      break;
    }
    case HIKind::H3: {
      if (v.mods.size() != 1) throw LogicError("H3 violation needs one modification");
      if (v.mods[0].insert != s.holds(v.mods[0].sym, v.mods[0].tuple))
        throw LogicError("H3 violation needs a spurious modification");
      check_pair(s, apply(p, s, v.mods[0]));
      break;
    }
    case HIKind::Inhomogeneous: {
      std::vector<int> in = positive_arity_syms(*p.schema, p.schema->input_syms());
      std::vector<int> aux = positive_arity_syms(*p.schema, p.schema->aux_syms());
      if (!(atomic_type(s, v.tupleA, in) == atomic_type(s, v.tupleB, in)))
        throw LogicError("inhomogeneity tuples have different input types");
      if (atomic_type(s, v.tupleA, aux) == atomic_type(s, v.tupleB, aux))
        throw LogicError("inhomogeneity does not replay");
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Normal form insertion sequences over unary input schemas: the insertions
// for each element are contiguous (N1) and elements receiving the same color
// share the order of their insertions (N2).

inline bool is_normal_form_unary(const ModSeq& seq, const Schema& schema) {
  std::set<std::pair<int, Tuple>> seen;  // insertion sequences are duplicate-free
  for (const Modification& m : seq) {
    if (!m.insert || m.tuple.size() != 1) return false;
    if (schema.at(m.sym).kind != SymKind::Input || schema.at(m.sym).arity != 1) return false;
    if (!seen.emplace(m.sym, m.tuple).second) return false;
  }
  std::map<int, size_t> last;  // element -> last position seen
  std::map<int, std::vector<int>> proj;
  for (size_t i = 0; i < seq.size(); ++i) {
    int a = seq[i].tuple[0];
    auto it = last.find(a);
    if (it != last.end() && it->second + 1 != i) return false;
    last[a] = i;
    proj[a].push_back(seq[i].sym);
  }
  std::map<std::set<int>, std::vector<int>> byColor;
  for (const auto& [a, ops] : proj) {
    std::set<int> color(ops.begin(), ops.end());
    auto it = byColor.find(color);
    if (it == byColor.end())
      byColor.emplace(std::move(color), ops);
    else if (it->second != ops)
      return false;
  }
  return true;
}

namespace detail {

inline bool nf_blocks(const std::vector<int>& unaryIn, int n, uint32_t fromMask, int nextElem,
                      ModSeq& cur, const std::function<bool(const ModSeq&)>& cb) {
  if (nextElem > n) return true;
  uint32_t top = uint32_t(1) << unaryIn.size();
  for (uint32_t mask = fromMask; mask < top; ++mask) {
    std::vector<int> members;
    for (size_t i = 0; i < unaryIn.size(); ++i)
      if (mask & (uint32_t(1) << i)) members.push_back(unaryIn[i]);
    do {
      size_t save = cur.size();
      bool keep = true;
      for (int a = nextElem; a <= n && keep; ++a) {
        for (int s : members) cur.push_back(Modification{true, s, {a}});
        keep = cb(cur) && nf_blocks(unaryIn, n, mask + 1, a + 1, cur, cb);
      }
      cur.resize(save);
      if (!keep) return false;
    } while (std::next_permutation(members.begin(), members.end()));
  }
  return true;
}

}  // namespace detail

// Enumerates the refined normal form sequences over {1..n}: blocks of equally
// colored elements in ascending color order, one shared insertion order per
// block, elements taken in ascending id order. Up to isomorphism this reaches
// every normal form state. The callback sees each sequence (including the
// empty one) and may return false to stop.
inline void normal_form_sequences(const Schema& schema, int n,
                                  const std::function<bool(const ModSeq&)>& cb) {
  std::vector<int> unaryIn;
  for (int s : schema.input_syms()) {
    if (schema.at(s).arity != 1)
      throw LogicError("normal form enumeration needs unary input relations");
    unaryIn.push_back(s);
  }
  if (unaryIn.size() > 20) throw BudgetError("too many input relations");
  std::sort(unaryIn.begin(), unaryIn.end());
  ModSeq cur;
  if (!cb(cur)) return;
  if (n >= 1) detail::nf_blocks(unaryIn, n, 1, 1, cur, cb);
}

// ---------------------------------------------------------------------------
// Bit elimination and the small-model bounds.

// Replaces every 0-ary auxiliary relation by a unary one holding either all
// elements or none; reads become universally quantified. The type machinery
// assumes positive arities, and reachable states of the image correspond
// one-to-one to states of the source.
inline DynamicProgram debitify(const DynamicProgram& p) {
  const Schema& sc = *p.schema;
  std::vector<int> bits;
  for (int s : sc.aux_syms())
    if (sc.at(s).arity == 0) bits.push_back(s);
  if (bits.empty()) return p;

  std::set<std::string> names;
  for (int i = 0; i < sc.size(); ++i) names.insert(sc.at(i).name);
  std::map<int, std::string> unaryName;
  std::vector<Symbol> syms;
  for (int i = 0; i < sc.size(); ++i) {
    Symbol s = sc.at(i);
    if (s.kind == SymKind::Aux && s.arity == 0) {
      s.name = detail::fresh_name(s.name + "_u", names);
      s.arity = 1;
      unaryName.emplace(i, s.name);
    }
    syms.push_back(std::move(s));
  }
  SchemaPtr ns = make_schema(std::move(syms));

  std::set<std::string> idents;
  for (const auto& [key, rule] : p.updates) {
    detail::collect_idents(rule.formula, idents);
    idents.insert(rule.xvars.begin(), rule.xvars.end());
    idents.insert(rule.yvars.begin(), rule.yvars.end());
  }
  for (const auto& [sym, rule] : p.init) {
    detail::collect_idents(rule.formula, idents);
    idents.insert(rule.yvars.begin(), rule.yvars.end());
  }
  std::string z = detail::fresh_name("z", idents);
  std::string yb = detail::fresh_name("y", idents);

  detail::AtomRewrite rw = [&](const std::string& sym,
                               const std::vector<std::string>& args) -> FormulaPtr {
    int id = sc.find(sym);
    auto it = id < 0 ? unaryName.end() : unaryName.find(id);
    if (it == unaryName.end()) return nullptr;
    if (!args.empty()) throw LogicError("0-ary relation used with arguments");
    return f_forall(z, f_atom(it->second, {z}));
  };

  DynamicProgram q;
  q.schema = ns;
  q.query = p.query;  // indices are stable, only names and arities moved
  for (const auto& [key, rule] : p.updates) {
    UpdateRule r = rule;
    r.formula = detail::map_atoms(rule.formula, rw);
    if (unaryName.count(key.first)) r.yvars = {yb};
    q.updates.emplace(key, std::move(r));
  }
  for (const auto& [sym, rule] : p.init) {
    InitRule r = rule;
    r.formula = detail::map_atoms(rule.formula, rw);
    if (unaryName.count(sym)) r.yvars = {yb};
    q.init.emplace(sym, std::move(r));
  }
  validate_program(q);
  return q;
}

// Small-model data for the unary-input sweep. All fields derive from the
// program (in bit-free form); none are user inputs. T counts type functions
// exactly as (#aux m-types + 1)^(#input m-types); when a quantity leaves the
// 64-bit range the overflow flag is set and N is meaningless.
struct HIBounds {
  int q = 0;        // quantifier depth
  int l = 0;        // number of input relations
  int m = 1;        // auxiliary tuple width
  uint64_t L = 0;   // proper colors: 2^l - 1
  uint64_t K = 0;   // 3 + 2m + (l+1)q
  uint64_t T = 0;   // number of type functions
  uint64_t N = 0;   // (2K + T)(L + 1)
  bool overflow = false;
};

inline HIBounds compute_hi_bounds(const DynamicProgram& p0) {
  DynamicProgram p = debitify(p0);
  const Schema& sc = *p.schema;
  HIBounds b;
  for (int s : sc.input_syms()) {
    if (sc.at(s).arity != 1) throw LogicError("small-model bounds need unary input relations");
    ++b.l;
  }
  b.m = aux_width(sc);
  b.q = program_quantifier_depth(p);
  const uint64_t cap = UINT64_MAX / 4;
  if (b.l >= 62) {
    b.L = cap;
    b.overflow = true;
  } else {
    b.L = (uint64_t(1) << b.l) - 1;
  }
  b.K = uint64_t(3 + 2 * b.m + (b.l + 1) * b.q);
  uint64_t inT = count_atomic_types(p.schema, positive_arity_syms(sc, sc.input_syms()), b.m);
  uint64_t auxT = count_atomic_types(p.schema, positive_arity_syms(sc, sc.aux_syms()), b.m);
  uint64_t T = 1;
  if (inT >= cap || auxT >= cap) {
    T = cap;
    b.overflow = true;
  } else {
    for (uint64_t i = 0; i < inT; ++i) {
      if (T > cap / (auxT + 1)) {
        T = cap;
        b.overflow = true;
        break;
      }
      T *= auxT + 1;
    }
  }
  b.T = T;
  b.N = sat_mul(sat_add(2 * b.K, b.T), sat_add(b.L, 1));
  if (b.N >= cap) {
    b.N = cap;
    b.overflow = true;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Deciding history independence for unary-input programs.

enum class HIStatus { HI, NotHI, Unknown };

inline std::string hi_status_name(HIStatus s) {
  switch (s) {
    case HIStatus::HI: return "history-independent";
    case HIStatus::NotHI: return "not-history-independent";
    default: return "unknown";
  }
}

struct HIReport {
  HIStatus status = HIStatus::Unknown;
  std::optional<HIViolation> violation;  // NotHI
  std::optional<HIBounds> bounds;        // unary-input procedure
  std::optional<UnknownReason> reason;   // Unknown
  bool reconstructedBound = false;       // verdict rests on a reconstructed bound
  uint64_t sweptDomain = 0;              // largest domain size fully swept
  std::string detail;
};

// Sweeps all refined normal form insertion sequences over domains up to
// min(N, domainBudget), rejecting on the first inhomogeneous or not locally
// history independent state. A full sweep to N proves history independence;
// a clean sweep short of N is only a bounded result. The sweep runs on the
// original program; the bounds come from its bit-free form, whose states
// correspond one-to-one.
inline HIReport check_hi(const DynamicProgram& p, uint64_t domainBudget = 64,
                         uint64_t stateBudget = 200000) {
  HIReport rep;
  const Schema& sc = *p.schema;
  for (int s : sc.input_syms()) {
    if (sc.at(s).arity != 1) {
      rep.reason = UnknownReason::Fragment;
      rep.detail = sc.at(s).arity == 0
                       ? "0-ary input relations have no color semantics"
                       : "input relations must be unary";
      return rep;
    }
  }
  HIBounds b = compute_hi_bounds(p);
  rep.bounds = b;
  uint64_t cap = b.overflow ? domainBudget : std::min(b.N, domainBudget);
  uint64_t seen = 0;
  for (uint64_t n = 1; n <= cap; ++n) {
    std::vector<ProgramState> stack{init_state(p, int(n))};
    ModSeq prev;
    std::optional<HIViolation> hit;
    bool outOfBudget = false;
    normal_form_sequences(sc, int(n), [&](const ModSeq& seq) {
      if (++seen > stateBudget) {
        outOfBudget = true;
        return false;
      }
      size_t common = 0;
      while (common < seq.size() && common < prev.size() && seq[common] == prev[common]) ++common;
      stack.resize(common + 1);
      for (size_t i = common; i < seq.size(); ++i)
        stack.push_back(apply(p, stack.back(), seq[i]));
      prev = seq;
      const ProgramState& st = stack.back();
      Homogeneity h = is_homogeneous(st);
      if (!h.homogeneous) {
        HIViolation v;
        v.kind = HIKind::Inhomogeneous;
        v.domainSize = int(n);
        v.reach = seq;
        v.tupleA = h.tupleA;
        v.tupleB = h.tupleB;
        hit = std::move(v);
        return false;
      }
      if (auto v = is_locally_hi(p, st)) {
        v->reach = seq;
        hit = std::move(*v);
        return false;
      }
      return true;
    });
    if (hit) {
      assert_hi_violation(p, *hit);
      rep.status = HIStatus::NotHI;
      rep.violation = std::move(hit);
      return rep;
    }
    if (outOfBudget) {
      rep.reason = UnknownReason::Budget;
      rep.detail = "state budget exhausted at domain size " + std::to_string(n);
      return rep;
    }
    rep.sweptDomain = n;
  }
  if (!b.overflow && cap >= b.N) {
    rep.status = HIStatus::HI;
    rep.detail = "full sweep to N=" + std::to_string(b.N);
  } else {
    rep.reason = UnknownReason::Budget;
    rep.detail = b.overflow ? "bound N exceeds the representable range; swept n<=" +
                                  std::to_string(cap)
                            : "swept n<=" + std::to_string(cap) + " of N=" + std::to_string(b.N);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// History independence for quantifier-free programs with unary auxiliaries.
// The decidability bound is not explicit in the underlying argument; the
// implemented bound mirrors the sunflower machinery of the emptiness
// procedure and every verdict that relies on it is flagged as reconstructed.

inline HIReport check_hi_prop_aux1(const DynamicProgram& p, uint64_t stateBudget = 5000) {
  HIReport rep;
  FragmentProfile fp = classify(p);
  if (!fp.quantifierFreeUpdates || fp.maxAuxArity > 1) {
    rep.reason = UnknownReason::Fragment;
    rep.detail = "needs quantifier-free updates with auxiliary arity <= 1";
    return rep;
  }
  bool allFrames = true;
  for (const auto& [key, rule] : p.updates) {
    const FormulaPtr& f = rule.formula;
    if (!(f->kind == FKind::Atom && p.schema->find(f->sym) == key.first &&
          f->args == rule.yvars)) {
      allFrames = false;
      break;
    }
  }
  if (allFrames) {
    rep.status = HIStatus::HI;
    rep.detail = "auxiliary relations are constant";
    return rep;
  }
  rep.reconstructedBound = true;
  int leff = std::max(1, fp.maxInputArity);
  uint64_t M = count_atomic_types(p.schema, p.schema->all_syms(), 2 * leff);
  uint64_t petals = sat_add(sat_mul(M, M), 1);
  uint64_t tupleBound =
      tuple_sunflower_bound(2 * leff, int(std::min<uint64_t>(petals, 1000000)));
  uint64_t nNeeded = sat_add(sat_mul(tupleBound, uint64_t(leff)), uint64_t(2 * leff));
  std::string boundNote = "reconstructed bound: " + std::to_string(tupleBound) +
                          " tuples, domains up to " + std::to_string(nNeeded);
  uint64_t left = stateBudget;
  for (uint64_t n = 1; n <= nNeeded; ++n) {
    std::optional<HIViolation> hit;
    bool outOfBudget = false;
    reachable_states(
        p, int(n), INT32_MAX,
        [&](const ProgramState& st, const ModSeq& seq) {
          if (left == 0) {
            outOfBudget = true;
            return false;
          }
          --left;
          if (auto v = is_locally_hi(p, st)) {
            v->reach = seq;
            hit = std::move(*v);
            return false;
          }
          return true;
        },
        SeqMode::InsertionsOnly, UINT64_MAX);
    if (hit) {
      assert_hi_violation(p, *hit);
      rep.status = HIStatus::NotHI;
      rep.violation = std::move(hit);
      return rep;
    }
    if (outOfBudget) {
      rep.reason = UnknownReason::Budget;
      rep.detail = "state budget exhausted at domain size " + std::to_string(n) + "; " + boundNote;
      return rep;
    }
    rep.sweptDomain = n;
  }
  rep.status = HIStatus::HI;
  rep.detail = boundNote;
  return rep;
}

// ---------------------------------------------------------------------------
// Innocuous transformations: minimal sequence edits that keep the final input
// database. Applicability of the conditional kinds is judged against the
// input database right before the touched position.

enum class ThetaKind { Swap, RemoveInsDelPair, RemoveNoop, InsertInsDelPair, InsertNoop };

inline std::string theta_kind_name(ThetaKind k) {
  switch (k) {
    case ThetaKind::Swap: return "swap";
    case ThetaKind::RemoveInsDelPair: return "remove-ins-del-pair";
    case ThetaKind::RemoveNoop: return "remove-noop";
    case ThetaKind::InsertInsDelPair: return "insert-ins-del-pair";
    default: return "insert-noop";
  }
}

struct InnocuousTransformation {
  ThetaKind kind = ThetaKind::Swap;
  size_t pos = 0;
  Modification payload{};  // insert kinds only; InsertInsDelPair stores the insertion
};

namespace detail {

inline bool db_has(const ModSeq& seq, size_t pos, int sym, const Tuple& t) {
  bool in = false;
  for (size_t i = 0; i < pos && i < seq.size(); ++i)
    if (seq[i].sym == sym && seq[i].tuple == t) in = seq[i].insert;
  return in;
}

}  // namespace detail

inline bool theta_applicable(const ModSeq& seq, const InnocuousTransformation& th) {
  switch (th.kind) {
    case ThetaKind::Swap: {
      if (th.pos + 1 >= seq.size()) return false;
      const Modification& a = seq[th.pos];
      const Modification& b = seq[th.pos + 1];
      return !(a.sym == b.sym && a.tuple == b.tuple && a.insert != b.insert);
    }
    case ThetaKind::RemoveInsDelPair: {
      if (th.pos + 1 >= seq.size()) return false;
      const Modification& a = seq[th.pos];
      const Modification& b = seq[th.pos + 1];
      return a.insert && !b.insert && a.sym == b.sym && a.tuple == b.tuple &&
             !detail::db_has(seq, th.pos, a.sym, a.tuple);
    }
    case ThetaKind::RemoveNoop: {
      if (th.pos >= seq.size()) return false;
      const Modification& a = seq[th.pos];
      return a.insert == detail::db_has(seq, th.pos, a.sym, a.tuple);
    }
    case ThetaKind::InsertInsDelPair:
      return th.pos <= seq.size() && th.payload.insert &&
             !detail::db_has(seq, th.pos, th.payload.sym, th.payload.tuple);
    case ThetaKind::InsertNoop:
      return th.pos <= seq.size() &&
             th.payload.insert == detail::db_has(seq, th.pos, th.payload.sym, th.payload.tuple);
  }
  return false;
}

inline ModSeq theta_apply(const Schema& schema, const ModSeq& seq,
                          const InnocuousTransformation& th) {
  if (!theta_applicable(seq, th)) throw LogicError("transformation is not applicable");
  ModSeq out = seq;
  switch (th.kind) {
    case ThetaKind::Swap:
      std::swap(out[th.pos], out[th.pos + 1]);
      break;
    case ThetaKind::RemoveInsDelPair:
      out.erase(out.begin() + long(th.pos), out.begin() + long(th.pos) + 2);
      break;
    case ThetaKind::RemoveNoop:
      out.erase(out.begin() + long(th.pos));
      break;
    case ThetaKind::InsertInsDelPair: {
      Modification del = th.payload;
      del.insert = false;
      out.insert(out.begin() + long(th.pos), {th.payload, del});
      break;
    }
    case ThetaKind::InsertNoop:
      out.insert(out.begin() + long(th.pos), th.payload);
      break;
  }
  auto final_db = [&](const ModSeq& s) {
    std::vector<Relation> db(size_t(schema.size()));
    for (const Modification& m : s) {
      if (m.insert)
        db[size_t(m.sym)].insert(m.tuple);
      else
        db[size_t(m.sym)].erase(m.tuple);
    }
    return db;
  };
  if (final_db(seq) != final_db(out))
    throw LogicError("internal: transformation changed the database");
  return out;
}

// ---------------------------------------------------------------------------
// Consistency checking.

struct ConsistencyWitness {
  int domainSize = 1;
  ModSeq alpha;
  InnocuousTransformation theta;
  ModSeq beta;  // theta(alpha)
};

inline void assert_consistency_witness(const DynamicProgram& p, const ConsistencyWitness& w) {
  if (theta_apply(*p.schema, w.alpha, w.theta) != w.beta)
    throw LogicError("inconsistency witness: beta is not theta(alpha)");
  ProgramState a = apply_sequence(p, init_state(p, w.domainSize), w.alpha);
  ProgramState b = apply_sequence(p, init_state(p, w.domainSize), w.beta);
  for (int s : p.schema->input_syms())
    if (a.rel[size_t(s)] != b.rel[size_t(s)])
      throw LogicError("inconsistency witness: input databases differ");
  if (a.rel[size_t(p.query)] == b.rel[size_t(p.query)])
    throw LogicError("inconsistency witness does not replay");
}

enum class ConsStatus { Consistent, Inconsistent, NoViolationFound, Unknown };

inline std::string cons_status_name(ConsStatus s) {
  switch (s) {
    case ConsStatus::Consistent: return "consistent";
    case ConsStatus::Inconsistent: return "inconsistent";
    case ConsStatus::NoViolationFound: return "no-violation-found";
    default: return "unknown";
  }
}

struct ConsistencyReport {
  ConsStatus status = ConsStatus::Unknown;
  std::optional<ConsistencyWitness> witness;
  std::optional<UnknownReason> reason;
  std::string detail;
};

// Depth-first enumeration of modification sequences with the removal and swap
// transformations tried at the tail of every prefix. A transformation whose
// variant state has not yet converged back to the main one is carried along,
// so differences that surface only later are still caught; this makes the
// tail-only generation complete for every pair (alpha, theta) within bounds.
inline ConsistencyReport check_consistency_bounded(const DynamicProgram& p, int nMax, int lenMax,
                                                   uint64_t nodeBudget = 2000000) {
  ConsistencyReport rep;
  uint64_t nodes = 0;
  bool truncated = false;
  for (int n = 1; n <= nMax; ++n) {
    std::vector<Modification> mods;
    for (int s : p.schema->input_syms())
      for (bool ins : {true, false})
        for (const Tuple& t : tuples_over(p.schema->at(s).arity, n))
          mods.push_back({ins, s, t});
    struct Live {
      InnocuousTransformation theta;
      ProgramState state;
    };
    ModSeq cur;
    std::vector<ProgramState> st{init_state(p, n)};
    std::optional<ConsistencyWitness> found;

    auto inputs_equal = [&](const ProgramState& a, const ProgramState& b) {
      for (int s : p.schema->input_syms())
        if (a.rel[size_t(s)] != b.rel[size_t(s)]) return false;
      return true;
    };
    auto take = [&](const InnocuousTransformation& th, const ProgramState& bstate) {
      if (!inputs_equal(st.back(), bstate))
        throw LogicError("internal: transformation changed the database");
      ConsistencyWitness w;
      w.domainSize = n;
      w.alpha = cur;
      w.theta = th;
      w.beta = theta_apply(*p.schema, cur, th);
      found = std::move(w);
    };

    std::function<bool(std::vector<Live>)> rec = [&](std::vector<Live> live) -> bool {
      if (++nodes > nodeBudget) {
        truncated = true;
        return false;
      }
      size_t k = cur.size();
      auto consider = [&](const InnocuousTransformation& th, ProgramState bstate) -> bool {
        if (st.back().rel[size_t(p.query)] != bstate.rel[size_t(p.query)]) {
          take(th, bstate);
          return false;
        }
        if (!(bstate == st.back())) live.push_back(Live{th, std::move(bstate)});
        return true;
      };
      if (k >= 1) {
        InnocuousTransformation th{ThetaKind::RemoveNoop, k - 1, {}};
        if (theta_applicable(cur, th) && !consider(th, st[k - 1])) return false;
      }
      if (k >= 2) {
        InnocuousTransformation tp{ThetaKind::RemoveInsDelPair, k - 2, {}};
        if (theta_applicable(cur, tp) && !consider(tp, st[k - 2])) return false;
        InnocuousTransformation ts{ThetaKind::Swap, k - 2, {}};
        if (theta_applicable(cur, ts) &&
            !consider(ts, apply(p, apply(p, st[k - 2], cur[k - 1]), cur[k - 2])))
          return false;
      }
      if (int(k) == lenMax) return true;
      for (const Modification& m : mods) {
        cur.push_back(m);
        st.push_back(apply(p, st.back(), m));
        std::vector<Live> next;
        bool stop = false;
        for (const Live& lv : live) {
          ProgramState ns = apply(p, lv.state, m);
          if (st.back().rel[size_t(p.query)] != ns.rel[size_t(p.query)]) {
            take(lv.theta, ns);
            stop = true;
            break;
          }
          if (!(ns == st.back())) next.push_back(Live{lv.theta, std::move(ns)});
        }
        bool keep = !stop && rec(std::move(next));
        st.pop_back();
        cur.pop_back();
        if (!keep) return false;
      }
      return true;
    };
    rec({});
    if (found) {
      assert_consistency_witness(p, *found);
      rep.status = ConsStatus::Inconsistent;
      rep.witness = std::move(found);
      return rep;
    }
    if (truncated) break;
  }
  rep.status = ConsStatus::NoViolationFound;
  rep.detail = truncated ? "node budget exhausted" : "swept the full bounded space";
  return rep;
}

// Exact consistency for quantifier-free programs with unary input and
// auxiliary relations: the quantifier-free reduction turns the question into
// emptiness inside the same fragment, which the coverability procedure
// decides.
inline ConsistencyReport check_consistency_exact_prop11(const DynamicProgram& p,
                                                        uint64_t basisCap = 200000,
                                                        uint64_t sizeCap = 8000000) {
  ConsistencyReport rep;
  FragmentProfile fp = classify(p);
  if (!fp.quantifierFreeUpdates || fp.maxInputArity > 1 || fp.maxAuxArity > 1) {
    rep.reason = UnknownReason::Fragment;
    rep.detail = "needs quantifier-free updates with input and aux arity <= 1";
    return rep;
  }
  DynamicProgram img = consistency_to_emptiness_qf(p).first;
  FragmentProfile fi = classify(img);
  if (!fi.quantifierFreeUpdates || fi.maxInputArity > 1 || fi.maxAuxArity > 1)
    throw LogicError("internal: the reduction left the fragment");
  Verdict v = emptiness_prop11(img, basisCap, sizeCap);
  switch (v.kind) {
    case VerdictKind::Empty:
      rep.status = ConsStatus::Consistent;
      break;
    case VerdictKind::NonEmpty:
      rep.status = ConsStatus::Inconsistent;
      break;
    default:
      rep.reason = v.reason;
      break;
  }
  rep.detail = v.detail.empty() ? std::string("via the emptiness reduction")
                                : "reduction image: " + v.detail;
  return rep;
}

// ---------------------------------------------------------------------------
// Brute-force fuzzing. Deterministic for a fixed seed; absence of a witness
// proves nothing. LocalHI mode walks insertion sequences and applies the
// local checks at every state, Consistency mode walks modification sequences
// and tries every applicable removal or swap.

enum class FuzzMode { LocalHI, Consistency };

struct FuzzBudgets {
  int maxDomain = 3;
  int maxLen = 6;
  int iterations = 64;
};

using FuzzWitness = std::variant<HIViolation, ConsistencyWitness>;

inline std::optional<FuzzWitness> fuzz(const DynamicProgram& p, FuzzMode mode, uint64_t seed,
                                       FuzzBudgets budgets = {}) {
  // systematic warm-up over tiny instances, identical for every seed
  if (mode == FuzzMode::LocalHI) {
    for (int n = 1; n <= std::min(2, budgets.maxDomain); ++n) {
      std::optional<HIViolation> hit;
      reachable_states(
          p, n, std::min(2, budgets.maxLen),
          [&](const ProgramState& st, const ModSeq& seq) {
            if (auto v = is_locally_hi(p, st)) {
              v->reach = seq;
              hit = std::move(*v);
              return false;
            }
            return true;
          },
          SeqMode::InsertionsOnly, 10000);
      if (hit) {
        assert_hi_violation(p, *hit);
        return FuzzWitness{std::move(*hit)};
      }
    }
  } else {
    ConsistencyReport r =
        check_consistency_bounded(p, std::min(2, budgets.maxDomain), std::min(2, budgets.maxLen));
    if (r.status == ConsStatus::Inconsistent) return FuzzWitness{std::move(*r.witness)};
  }

  std::mt19937_64 rng(seed);
  for (int it = 0; it < budgets.iterations; ++it) {
    int n = 1 + int(rng() % uint64_t(std::max(1, budgets.maxDomain)));
    std::vector<Modification> mods;
    for (int s : p.schema->input_syms())
      for (bool ins : {true, false}) {
        if (mode == FuzzMode::LocalHI && !ins) continue;
        for (const Tuple& t : tuples_over(p.schema->at(s).arity, n))
          mods.push_back({ins, s, t});
      }
    if (mods.empty()) continue;
    ModSeq seq;
    std::vector<ProgramState> trail{init_state(p, n)};
    if (mode == FuzzMode::LocalHI) {
      if (auto v = is_locally_hi(p, trail.back())) {
        v->reach = seq;
        assert_hi_violation(p, *v);
        return FuzzWitness{std::move(*v)};
      }
    }
    int len = int(rng() % uint64_t(budgets.maxLen + 1));
    for (int step = 0; step < len; ++step) {
      seq.push_back(mods[size_t(rng() % mods.size())]);
      trail.push_back(apply(p, trail.back(), seq.back()));
      if (mode == FuzzMode::LocalHI) {
        if (auto v = is_locally_hi(p, trail.back())) {
          v->reach = seq;
          assert_hi_violation(p, *v);
          return FuzzWitness{std::move(*v)};
        }
        continue;
      }
      for (size_t pos = 0; pos < seq.size(); ++pos)
        for (ThetaKind kind :
             {ThetaKind::RemoveNoop, ThetaKind::RemoveInsDelPair, ThetaKind::Swap}) {
          InnocuousTransformation th{kind, pos, {}};
          if (!theta_applicable(seq, th)) continue;
          ModSeq beta = theta_apply(*p.schema, seq, th);
          ProgramState bs = apply_sequence(p, init_state(p, n), beta);
          if (bs.rel[size_t(p.query)] != trail.back().rel[size_t(p.query)]) {
            ConsistencyWitness w{n, seq, th, std::move(beta)};
            assert_consistency_witness(p, w);
            return FuzzWitness{std::move(w)};
          }
        }
    }
  }
  return std::nullopt;
}

}  // namespace dynrel
