#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynrel/dynprog.hpp"
#include "dynrel/wsts.hpp"

// Emptiness: is the query relation empty in every state reachable from every
// initially empty database? One decision procedure per supported fragment;
// everything else degrades to Unknown with an explicit reason.

namespace dynrel {

enum class VerdictKind { Empty, NonEmpty, Unknown };
enum class UnknownReason { Budget, Fragment, Promise };

struct Witness {
  int domainSize = 1;
  ModSeq mods;
};

struct Verdict {
  VerdictKind kind = VerdictKind::Unknown;
  std::optional<Witness> witness;       // NonEmpty; absent when extraction was cut short
  std::optional<UnknownReason> reason;  // Unknown only
  bool consistencyPromise = false;      // verdict conditional on promised consistency
  std::string detail;
};

inline Verdict verdict_empty(std::string detail = "", bool promise = false) {
  Verdict v;
  v.kind = VerdictKind::Empty;
  v.detail = std::move(detail);
  v.consistencyPromise = promise;
  return v;
}

inline Verdict verdict_nonempty(std::optional<Witness> w, std::string detail = "",
                                bool promise = false) {
  Verdict v;
  v.kind = VerdictKind::NonEmpty;
  v.witness = std::move(w);
  v.detail = std::move(detail);
  v.consistencyPromise = promise;
  return v;
}

inline Verdict verdict_unknown(UnknownReason r, std::string detail = "", bool promise = false) {
  Verdict v;
  v.kind = VerdictKind::Unknown;
  v.reason = r;
  v.detail = std::move(detail);
  v.consistencyPromise = promise;
  return v;
}

inline std::string verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Empty: return "empty";
    case VerdictKind::NonEmpty: return "non-empty";
    default: return "unknown";
  }
}

inline std::string reason_name(UnknownReason r) {
  switch (r) {
    case UnknownReason::Budget: return "budget";
    case UnknownReason::Fragment: return "fragment";
    default: return "promise";
  }
}

// Hard check before returning NonEmpty from a construction that guarantees it.
inline void assert_witness(const DynamicProgram& p, const Witness& w) {
  ProgramState s = apply_sequence(p, init_state(p, w.domainSize), w.mods);
  if (!query_nonempty(p, s)) throw LogicError("emptiness witness does not replay");
}

// ---------------------------------------------------------------------------
// Exhaustive forward search, the oracle all fragment procedures are tested
// against. `exhausted` is only set when the whole bounded sweep completed.

struct SearchResult {
  std::optional<Witness> witness;  // a shortest one (BFS order) if any
  bool exhausted = false;
};

inline SearchResult exhaustive_nonempty_search(const DynamicProgram& p, int nMax, int lenMax,
                                               uint64_t stateBudget = 2000000) {
  SearchResult res;
  res.exhausted = true;
  for (int n = 1; n <= nMax && !res.witness; ++n) {
    try {
      reachable_states(
          p, n, lenMax,
          [&](const ProgramState& s, const ModSeq& seq) {
            if (query_nonempty(p, s)) {
              res.witness = Witness{n, seq};
              return false;
            }
            return true;
          },
          SeqMode::All, stateBudget);
    } catch (const BudgetError&) {
      res.exhausted = false;
    }
  }
  if (res.witness) assert_witness(p, *res.witness);
  return res;
}

// ---------------------------------------------------------------------------
// Sunflowers for tuples.

inline uint64_t sat_mul(uint64_t a, uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > UINT64_MAX / b) return UINT64_MAX;
  return a * b;
}

inline uint64_t sat_add(uint64_t a, uint64_t b) {
  return a > UINT64_MAX - b ? UINT64_MAX : a + b;
}

inline uint64_t sat_pow(uint64_t base, int exp) {
  uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r = sat_mul(r, base);
  return r;
}

inline uint64_t sat_factorial(int n) {
  uint64_t r = 1;
  for (int i = 2; i <= n; ++i) r = sat_mul(r, uint64_t(i));
  return r;
}

// Classic set version: families of >= l!(p-1)^l sets of size <= l contain a
// p-petal sunflower.
inline uint64_t erdos_rado_bound(int l, int p) {
  return sat_mul(sat_factorial(l), sat_pow(uint64_t(std::max(p - 1, 0)), l));
}

// Tuple version: l^l p^l (l!)^2.
inline uint64_t tuple_sunflower_bound(int l, int p) {
  uint64_t f = sat_factorial(l);
  return sat_mul(sat_mul(sat_pow(uint64_t(l), l), sat_pow(uint64_t(p), l)), sat_mul(f, f));
}

struct Sunflower {
  std::vector<Tuple> petals;
  std::vector<int> corePositions;  // J, sorted position indices
  Tuple coreValues;                // aligned with corePositions
};

inline std::vector<int> equality_pattern(const Tuple& t) {
  std::vector<int> cls(t.size());
  std::vector<int> reps;
  for (size_t i = 0; i < t.size(); ++i) {
    int c = -1;
    for (size_t j = 0; j < reps.size(); ++j)
      if (reps[j] == t[i]) c = int(j);
    if (c < 0) {
      c = int(reps.size());
      reps.push_back(t[i]);
    }
    cls[i] = c;
  }
  return cls;
}

// Conditions (i) same equality type, (ii) agreement on the core positions,
// (iii) pairwise disjoint off-core value sets.
inline bool check_sunflower(const Sunflower& sf) {
  if (sf.petals.empty()) return true;
  size_t ell = sf.petals[0].size();
  if (sf.corePositions.size() != sf.coreValues.size()) return false;
  std::vector<int> pat = equality_pattern(sf.petals[0]);
  std::vector<std::set<int>> offs;
  for (const Tuple& t : sf.petals) {
    if (t.size() != ell) return false;
    if (equality_pattern(t) != pat) return false;
    for (size_t j = 0; j < sf.corePositions.size(); ++j) {
      int pos = sf.corePositions[j];
      if (pos < 0 || pos >= int(ell) || t[size_t(pos)] != sf.coreValues[j]) return false;
    }
    std::set<int> off;
    for (size_t i = 0; i < ell; ++i)
      if (std::find(sf.corePositions.begin(), sf.corePositions.end(), int(i)) ==
          sf.corePositions.end())
        off.insert(t[i]);
    offs.push_back(std::move(off));
  }
  for (size_t a = 0; a < offs.size(); ++a)
    for (size_t b = a + 1; b < offs.size(); ++b)
      for (int v : offs[a])
        if (offs[b].count(v)) return false;
  return true;
}

namespace detail {

// Greedy maximal disjoint family; on failure branch over (position, value)
// pairs from the greedy family's off-core values, which must join the core.
// Guaranteed to succeed on groups larger than (l!)^2 (p-1)^l; the bucket
// recursion shrinks by at most a (l-|J|)^2 (p-1) factor per level and a
// singleton group at full core would contradict the size.
inline std::optional<Sunflower> sunflower_in_group(const std::vector<Tuple>& group,
                                                   std::vector<int> J, int p) {
  if (group.empty() || int(group.size()) < p) return std::nullopt;
  int ell = int(group[0].size());
  auto offvals = [&](const Tuple& t) {
    std::set<int> vs;
    for (int i = 0; i < ell; ++i)
      if (std::find(J.begin(), J.end(), i) == J.end()) vs.insert(t[size_t(i)]);
    return vs;
  };
  std::vector<size_t> chosen;
  std::set<int> usedVals;
  for (size_t i = 0; i < group.size() && int(chosen.size()) < p; ++i) {
    std::set<int> vs = offvals(group[i]);
    bool disjoint = true;
    for (int v : vs)
      if (usedVals.count(v)) {
        disjoint = false;
        break;
      }
    if (disjoint) {
      chosen.push_back(i);
      usedVals.insert(vs.begin(), vs.end());
    }
  }
  if (int(chosen.size()) >= p) {
    Sunflower sf;
    sf.corePositions = J;
    std::sort(sf.corePositions.begin(), sf.corePositions.end());
    for (int j = 0; j < p; ++j) sf.petals.push_back(group[chosen[size_t(j)]]);
    for (int pos : sf.corePositions) sf.coreValues.push_back(sf.petals[0][size_t(pos)]);
    return sf;
  }
  for (int v : usedVals) {
    for (int i = 0; i < ell; ++i) {
      if (std::find(J.begin(), J.end(), i) != J.end()) continue;
      std::vector<Tuple> sub;
      for (const Tuple& t : group)
        if (t[size_t(i)] == v) sub.push_back(t);
      if (int(sub.size()) < p) continue;
      std::vector<int> J2 = J;
      J2.push_back(i);
      if (auto sf = sunflower_in_group(sub, std::move(J2), p)) return sf;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline std::optional<Sunflower> sunflower_find(const std::vector<Tuple>& R, int p) {
  if (p <= 0) return Sunflower{};
  std::vector<Tuple> tuples = R;
  std::sort(tuples.begin(), tuples.end());
  tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
  std::map<std::vector<int>, std::vector<Tuple>> groups;
  for (const Tuple& t : tuples) groups[equality_pattern(t)].push_back(t);
  for (auto& [pat, group] : groups) {
    if (auto sf = detail::sunflower_in_group(group, {}, p)) {
      if (!check_sunflower(*sf)) throw LogicError("sunflower conditions violated");
      return sf;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Quantifier-free (1,1) programs: emptiness via coverability of a transfer
// multicounter automaton. Counters hold the color histogram of the simulated
// state (one counter per color over all unary symbols); the control state
// holds the valuation of all 0-ary symbols. Phase one guesses the domain size
// and initializes, phase two simulates one modification as dec/transfer/inc.

struct TmcaEncoding {
  TMCA m;
  std::vector<int> unaryAll;  // color bit order: all unary symbols
  std::vector<int> bitAll;    // all 0-ary symbols, schema order
  int p0 = -1, f = -1;
  int q = 0;                    // domain guesses run 1..q+1
  std::vector<int> betaState;   // bit-valuation mask -> state index
  struct Ann {
    enum class Kind { GuessInc, GuessEnter, OpDec, OpTransfer, OpInc, OpBit, Accept };
    Kind kind = Kind::GuessInc;
    int guess = 0;  // phase-1 chain index
    bool insert = true;
    int sym = -1;   // modified input symbol
    int color = -1; // OpDec: color of the touched element; OpInc: its new color
  };
  std::vector<Ann> ann;  // parallel to m.transitions
};

namespace detail {

inline int beta_of(const Structure& s, const std::vector<int>& bitAll) {
  int mask = 0;
  for (size_t i = 0; i < bitAll.size(); ++i)
    if (s.holds(bitAll[i], {})) mask |= 1 << i;
  return mask;
}

// One element per entry of colorOf (element i+1 gets colorOf[i]), bits per
// beta mask. Quantifier-free updates make co-resident colors independent.
inline Structure materialize_colors(const SchemaPtr& schema, const std::vector<int>& unaryAll,
                                    const std::vector<int>& bitAll,
                                    const std::vector<int>& colorOf, int beta) {
  Structure s = empty_structure(schema, int(colorOf.size()));
  for (size_t e = 0; e < colorOf.size(); ++e)
    for (size_t ci = 0; ci < unaryAll.size(); ++ci)
      if (colorOf[e] & (1 << ci)) s.rel[size_t(unaryAll[ci])].insert({int(e) + 1});
  for (size_t bi = 0; bi < bitAll.size(); ++bi)
    if (beta & (1 << bi)) s.rel[size_t(bitAll[bi])].insert(Tuple{});
  return s;
}

}  // namespace detail

inline TmcaEncoding build_emptiness_tmca(const DynamicProgram& p, uint64_t sizeCap = 400000) {
  FragmentProfile fp = classify(p);
  if (fp.maxInputArity > 1 || fp.maxAuxArity > 1 || !fp.quantifierFreeUpdates)
    throw LogicError("tmca construction needs quantifier-free updates and arity <= 1");
  TmcaEncoding enc;
  const SchemaPtr& schema = p.schema;
  enc.unaryAll = unary_syms(*schema, schema->all_syms());
  for (int s : schema->all_syms())
    if (schema->at(s).arity == 0) enc.bitAll.push_back(s);
  int u = int(enc.unaryAll.size());
  int b = int(enc.bitAll.size());
  if (u > 14 || b > 14) throw BudgetError("tmca color space over cap");
  int colors = 1 << u;
  int betas = 1 << b;
  enc.q = program_quantifier_depth(p);
  std::vector<int> unaryIn, zeroIn;
  for (int s : schema->input_syms())
    (schema->at(s).arity == 1 ? unaryIn : zeroIn).push_back(s);
  // rough count of ints stored across all transfer vectors
  uint64_t est = sat_mul(sat_mul(uint64_t(betas) * 2, unaryIn.size() + zeroIn.size() + 1),
                         sat_mul(uint64_t(colors), uint64_t(colors) + 2));
  est = sat_add(est, uint64_t(enc.q + 2) * uint64_t(enc.q + 2));
  if (est > sizeCap) throw BudgetError("tmca state space over cap");

  TMCA& m = enc.m;
  m.counters = colors;
  enc.p0 = m.add_state("p0");
  enc.betaState.assign(size_t(betas), -1);
  for (int beta = 0; beta < betas; ++beta)
    enc.betaState[size_t(beta)] = m.add_state("b" + std::to_string(beta));
  enc.f = m.add_state("f");

  auto push = [&](TMCATransition t, TmcaEncoding::Ann a) {
    m.transitions.push_back(std::move(t));
    enc.ann.push_back(a);
  };
  std::vector<int> identity(static_cast<size_t>(colors), 0);
  for (int c = 0; c < colors; ++c) identity[size_t(c)] = c;

  // Phase 1: guess the domain size. Chain i adds i elements of the uniform
  // initialization color for domain i; the last chain self-loops because the
  // initialization is stable beyond quantifier depth.
  for (int i = 1; i <= enc.q + 1; ++i) {
    ProgramState si = init_state(p, i);
    int gamma = color_of(si, 1, enc.unaryAll);
    for (int e = 2; e <= i; ++e)
      if (color_of(si, e, enc.unaryAll) != gamma)
        throw LogicError("initialization is not color-uniform");
    int beta = detail::beta_of(si, enc.bitAll);
    int prev = enc.p0;
    for (int j = 1; j <= i; ++j) {
      int st = m.add_state("g" + std::to_string(i) + "_" + std::to_string(j));
      push({prev, TAct::Inc, gamma, {}, st},
           {TmcaEncoding::Ann::Kind::GuessInc, i, true, -1, gamma});
      prev = st;
    }
    if (i == enc.q + 1)
      push({prev, TAct::Inc, gamma, {}, prev},
           {TmcaEncoding::Ann::Kind::GuessInc, i, true, -1, gamma});
    push({prev, TAct::Transfer, -1, identity, enc.betaState[size_t(beta)]},
         {TmcaEncoding::Ann::Kind::GuessEnter, i, true, -1, -1});
  }

  // Phase 2: simulate one modification per dec/transfer/inc triple (unary
  // symbols) or one transfer (0-ary symbols). The touched element's color is
  // guessed as gamma; everybody else moves along the quantifier-free color map
  // read off a materialized representative.
  for (int beta = 0; beta < betas; ++beta) {
    for (int sym : unaryIn) {
      for (bool insert : {true, false}) {
        for (int gamma = 0; gamma < colors; ++gamma) {
          std::vector<int> colorOf;
          colorOf.push_back(gamma);
          for (int d = 0; d < colors; ++d) colorOf.push_back(d);
          Structure s = detail::materialize_colors(schema, enc.unaryAll, enc.bitAll, colorOf, beta);
          ProgramState after = apply(p, s, {insert, sym, {1}});
          int beta2 = detail::beta_of(after, enc.bitAll);
          int gamma2 = color_of(after, 1, enc.unaryAll);
          std::vector<int> tr(static_cast<size_t>(colors), 0);
          for (int d = 0; d < colors; ++d) tr[size_t(d)] = color_of(after, 2 + d, enc.unaryAll);
          std::string tag = "o" + std::to_string(beta) + "_" + std::to_string(gamma) + "_" +
                            (insert ? "i" : "d") + std::to_string(sym);
          int q1 = m.add_state(tag + "_1");
          int q2 = m.add_state(tag + "_2");
          push({enc.betaState[size_t(beta)], TAct::Dec, gamma, {}, q1},
               {TmcaEncoding::Ann::Kind::OpDec, 0, insert, sym, gamma});
          push({q1, TAct::Transfer, -1, tr, q2},
               {TmcaEncoding::Ann::Kind::OpTransfer, 0, insert, sym, -1});
          push({q2, TAct::Inc, gamma2, {}, enc.betaState[size_t(beta2)]},
               {TmcaEncoding::Ann::Kind::OpInc, 0, insert, sym, gamma2});
        }
      }
    }
    for (int sym : zeroIn) {
      for (bool insert : {true, false}) {
        std::vector<int> colorOf;
        for (int d = 0; d < colors; ++d) colorOf.push_back(d);
        Structure s = detail::materialize_colors(schema, enc.unaryAll, enc.bitAll, colorOf, beta);
        ProgramState after = apply(p, s, {insert, sym, {}});
        int beta2 = detail::beta_of(after, enc.bitAll);
        std::vector<int> tr(static_cast<size_t>(colors), 0);
        for (int d = 0; d < colors; ++d) tr[size_t(d)] = color_of(after, 1 + d, enc.unaryAll);
        push({enc.betaState[size_t(beta)], TAct::Transfer, -1, tr, enc.betaState[size_t(beta2)]},
             {TmcaEncoding::Ann::Kind::OpBit, 0, insert, sym, -1});
      }
    }
  }

  // Accepting moves witness a non-empty query relation.
  int queryArity = schema->at(p.query).arity;
  if (queryArity == 0) {
    int qi = -1;
    for (size_t i = 0; i < enc.bitAll.size(); ++i)
      if (enc.bitAll[i] == p.query) qi = int(i);
    if (qi < 0) throw LogicError("query bit missing from the 0-ary symbol list");
    for (int beta = 0; beta < betas; ++beta)
      if (beta & (1 << qi))
        push({enc.betaState[size_t(beta)], TAct::Transfer, -1, identity, enc.f},
             {TmcaEncoding::Ann::Kind::Accept, 0, true, -1, -1});
  } else {
    int qi = -1;
    for (size_t i = 0; i < enc.unaryAll.size(); ++i)
      if (enc.unaryAll[i] == p.query) qi = int(i);
    if (qi < 0) throw LogicError("query symbol missing from the unary symbol list");
    for (int beta = 0; beta < betas; ++beta)
      for (int gamma = 0; gamma < colors; ++gamma)
        if (gamma & (1 << qi))
          push({enc.betaState[size_t(beta)], TAct::Dec, gamma, {}, enc.f},
               {TmcaEncoding::Ann::Kind::Accept, 0, true, -1, gamma});
  }
  validate_tmca(m);
  return enc;
}

// Map a covering run back to a modification sequence by guided replay: the
// phase-1 increments fix the domain size, every simulated modification picks
// some element of the guessed color (same-color elements are interchangeable
// over a unary schema).
inline std::optional<Witness> tmca_run_to_witness(const TmcaEncoding& enc,
                                                  const DynamicProgram& p,
                                                  const std::vector<int>& run) {
  using Kind = TmcaEncoding::Ann::Kind;
  size_t i = 0;
  int n = 0;
  while (i < run.size() && enc.ann[size_t(run[i])].kind == Kind::GuessInc) {
    ++n;
    ++i;
  }
  if (n == 0 || i >= run.size() || enc.ann[size_t(run[i])].kind != Kind::GuessEnter)
    return std::nullopt;
  ++i;
  Witness w;
  w.domainSize = n;
  ProgramState s = init_state(p, n);
  for (; i < run.size(); ++i) {
    const auto& a = enc.ann[size_t(run[i])];
    if (a.kind == Kind::OpDec) {
      int elem = -1;
      for (int e = 1; e <= n && elem < 0; ++e)
        if (color_of(s, e, enc.unaryAll) == a.color) elem = e;
      if (elem < 0) return std::nullopt;
      Modification mod{a.insert, a.sym, {elem}};
      s = apply(p, s, mod);
      w.mods.push_back(mod);
    } else if (a.kind == Kind::OpBit) {
      Modification mod{a.insert, a.sym, {}};
      s = apply(p, s, mod);
      w.mods.push_back(mod);
    } else if (a.kind == Kind::Accept) {
      break;
    } else if (a.kind != Kind::OpTransfer && a.kind != Kind::OpInc) {
      return std::nullopt;
    }
  }
  if (!query_nonempty(p, s)) return std::nullopt;
  return w;
}

// Drive the TMCA along a concrete run of the program, asserting in lock step
// that the counter vector equals the color histogram. Test support.
inline Configuration tmca_lockstep(const TmcaEncoding& enc, const DynamicProgram& p, int n,
                                   const ModSeq& seq) {
  using Kind = TmcaEncoding::Ann::Kind;
  if (n < 1) throw LogicError("lockstep needs n >= 1");
  ProgramState s = init_state(p, n);
  int beta = detail::beta_of(s, enc.bitAll);
  Configuration c{enc.betaState[size_t(beta)], std::vector<long long>(size_t(enc.m.counters), 0)};
  auto check = [&]() {
    if (color_histogram(s, enc.unaryAll).counts != c.counts)
      throw LogicError("lockstep histogram mismatch");
  };
  for (int e = 1; e <= n; ++e) c.counts[size_t(color_of(s, e, enc.unaryAll))]++;
  check();
  for (const Modification& mod : seq) {
    bool zeroary = mod.tuple.empty();
    int gamma = zeroary ? -1 : color_of(s, mod.tuple[0], enc.unaryAll);
    bool stepped = false;
    for (size_t t = 0; t < enc.m.transitions.size() && !stepped; ++t) {
      const auto& a = enc.ann[t];
      const auto& tr = enc.m.transitions[t];
      if (tr.from != c.state || a.insert != mod.insert || a.sym != mod.sym) continue;
      if (zeroary && a.kind == Kind::OpBit) {
        c = tmca_apply(tr, c);
        stepped = true;
      } else if (!zeroary && a.kind == Kind::OpDec && a.color == gamma) {
        c = tmca_apply(tr, c);  // dec
        // follow the unique transfer and inc out of the intermediates
        for (size_t t2 = 0; t2 < enc.m.transitions.size(); ++t2)
          if (enc.m.transitions[t2].from == c.state &&
              enc.ann[t2].kind == Kind::OpTransfer) {
            c = tmca_apply(enc.m.transitions[t2], c);
            break;
          }
        for (size_t t3 = 0; t3 < enc.m.transitions.size(); ++t3)
          if (enc.m.transitions[t3].from == c.state && enc.ann[t3].kind == Kind::OpInc) {
            c = tmca_apply(enc.m.transitions[t3], c);
            break;
          }
        stepped = true;
      }
    }
    if (!stepped) throw LogicError("lockstep found no matching transition");
    s = apply(p, s, mod);
    if (c.state != enc.betaState[size_t(detail::beta_of(s, enc.bitAll))])
      throw LogicError("lockstep control state mismatch");
    check();
  }
  return c;
}

inline Verdict emptiness_prop11(const DynamicProgram& p, uint64_t basisCap = 100000,
                                uint64_t sizeCap = 400000) {
  FragmentProfile fp = classify(p);
  if (fp.maxInputArity > 1 || fp.maxAuxArity > 1 || !fp.quantifierFreeUpdates)
    return verdict_unknown(UnknownReason::Fragment,
                           "needs quantifier-free updates with input and aux arity <= 1");
  // cheap forward probe: most non-empty programs have a short small-domain
  // witness, which skips the coverability saturation entirely
  {
    SearchResult probe = exhaustive_nonempty_search(p, 2, 6);
    if (probe.witness) {
      assert_witness(p, *probe.witness);
      return verdict_nonempty(std::move(probe.witness));
    }
  }
  TmcaEncoding enc;
  try {
    enc = build_emptiness_tmca(p, sizeCap);
  } catch (const BudgetError& e) {
    return verdict_unknown(UnknownReason::Budget, e.what());
  }
  std::vector<Configuration> initials{
      {enc.p0, std::vector<long long>(size_t(enc.m.counters), 0)}};
  UpwardSet target;
  target.add(enc.f, std::vector<long long>(size_t(enc.m.counters), 0));
  CoverResult cover;
  try {
    cover = coverable(enc.m, initials, target, basisCap);
  } catch (const BudgetError& e) {
    return verdict_unknown(UnknownReason::Budget, e.what());
  }
  if (!cover.covered)
    return verdict_empty("coverability basis of size " + std::to_string(cover.iterations) +
                         " excludes the accepting state");
  if (cover.witnessFound) {
    if (auto w = tmca_run_to_witness(enc, p, cover.witness)) {
      assert_witness(p, *w);
      return verdict_nonempty(std::move(w));
    }
  }
  return verdict_nonempty(std::nullopt, "covered; witness extraction curtailed");
}

// ---------------------------------------------------------------------------
// Consistent FO (1,1) programs: NFA over proper input colors whose states are
// capped color histograms plus bit valuations. Cap k = (number of unary input
// relations) * quantifier depth + 1.

struct AbstractClass {
  std::vector<long long> hist;  // per color over all unary symbols, k caps as ">= k"
  std::vector<bool> bits;      // all 0-ary symbols, schema order

  bool operator==(const AbstractClass& o) const { return hist == o.hist && bits == o.bits; }
  bool operator<(const AbstractClass& o) const {
    return std::tie(hist, bits) < std::tie(o.hist, o.bits);
  }
};

namespace detail {

struct Fo11Setup {
  std::vector<int> unaryAll, unaryIn, bitAll;
  long long k = 1;
  int E = 2;  // domain guesses run 1..E, E standing in for every larger size
  int queryBit = -1, queryColorBit = -1;
};

inline AbstractClass abstract_state(const Structure& s, const Fo11Setup& su) {
  AbstractClass c;
  ColorHistogram h = color_histogram(s, su.unaryAll, su.k);
  c.hist = h.counts;
  for (int b : su.bitAll) c.bits.push_back(s.holds(b, {}));
  return c;
}

inline int input_part(int color, const Fo11Setup& su) {
  int mask = 0;
  for (size_t i = 0; i < su.unaryAll.size(); ++i)
    if (color & (1 << i)) {
      if (std::find(su.unaryIn.begin(), su.unaryIn.end(), su.unaryAll[i]) != su.unaryIn.end())
        mask |= 1 << i;
    }
  return mask;
}

inline void add_capped(long long& dst, long long v, long long k) {
  dst = std::min(dst + v, k);
}

// The color image of one coloring block on a representative: which color each
// old color moves to, the touched element's final color, and the new bits.
struct BlockImage {
  std::vector<int> g;  // old color -> new color, -1 for absent colors
  int aColor = -1;
  std::vector<bool> bits;
  bool operator==(const BlockImage& o) const {
    return g == o.g && aColor == o.aColor && bits == o.bits;
  }
};

inline BlockImage block_image(const DynamicProgram& p, const Fo11Setup& su,
                              const AbstractClass& cls, int untouched,
                              const std::vector<int>& order, long long cappedAs) {
  int colors = int(cls.hist.size());
  std::vector<int> colorOf;
  int aElem = -1;
  for (int c = 0; c < colors; ++c) {
    long long cnt = cls.hist[size_t(c)] == su.k ? cappedAs : cls.hist[size_t(c)];
    for (long long i = 0; i < cnt; ++i) {
      colorOf.push_back(c);
      if (c == untouched && aElem < 0) aElem = int(colorOf.size());
    }
  }
  int beta = 0;
  for (size_t i = 0; i < su.bitAll.size(); ++i)
    if (cls.bits[i]) beta |= 1 << int(i);
  Structure s = materialize_colors(p.schema, su.unaryAll, su.bitAll, colorOf, beta);
  for (int sym : order) s = apply(p, s, {true, sym, {aElem}});
  BlockImage img;
  img.g.assign(size_t(colors), -1);
  for (size_t e = 0; e < colorOf.size(); ++e) {
    if (int(e) + 1 == aElem) continue;
    int nc = color_of(s, int(e) + 1, su.unaryAll);
    int oc = colorOf[e];
    if (img.g[size_t(oc)] == -1)
      img.g[size_t(oc)] = nc;
    else if (img.g[size_t(oc)] != nc)
      throw LogicError("same-color elements diverged under a block");
  }
  img.aColor = color_of(s, aElem, su.unaryAll);
  for (int b : su.bitAll) img.bits.push_back(s.holds(b, {}));
  return img;
}

}  // namespace detail

inline Verdict emptiness_consistent_fo11(const DynamicProgram& p, bool consistencyPromise = true,
                                         uint64_t classBudget = 100000) {
  FragmentProfile fp = classify(p);
  if (fp.maxInputArity > 1 || fp.maxAuxArity > 1)
    return verdict_unknown(UnknownReason::Fragment, "needs input and aux arity <= 1",
                           consistencyPromise);
  detail::Fo11Setup su;
  const SchemaPtr& schema = p.schema;
  su.unaryAll = unary_syms(*schema, schema->all_syms());
  for (int s : schema->input_syms()) {
    if (schema->at(s).arity == 0)
      return verdict_unknown(UnknownReason::Fragment,
                             "0-ary input symbols break the insertion normal form",
                             consistencyPromise);
    su.unaryIn.push_back(s);
  }
  for (int s : schema->all_syms())
    if (schema->at(s).arity == 0) su.bitAll.push_back(s);
  if (su.unaryAll.size() > 12 || su.unaryIn.size() > 6)
    return verdict_unknown(UnknownReason::Budget, "color space too large", consistencyPromise);
  int q = program_quantifier_depth(p);
  su.k = std::max<long long>(1, (long long)su.unaryIn.size() * q + 1);
  su.E = int(std::max<long long>(su.k, q + 2));
  int colors = color_count(su.unaryAll);
  if (p.schema->at(p.query).arity == 0) {
    for (size_t i = 0; i < su.bitAll.size(); ++i)
      if (su.bitAll[i] == p.query) su.queryBit = int(i);
  } else {
    for (size_t i = 0; i < su.unaryAll.size(); ++i)
      if (su.unaryAll[i] == p.query) su.queryColorBit = int(i);
  }

  auto accepting = [&](const AbstractClass& c) {
    if (su.queryBit >= 0) return bool(c.bits[size_t(su.queryBit)]);
    for (int col = 0; col < colors; ++col)
      if ((col & (1 << su.queryColorBit)) && c.hist[size_t(col)] > 0) return true;
    return false;
  };

  struct Parent {
    bool initial = false;
    int n0 = 0;  // initial guess; n0 == E stands for all larger domains
    AbstractClass from;
    std::vector<int> order;  // block operation order
  };
  std::map<AbstractClass, Parent> seen;
  std::vector<AbstractClass> queue;
  for (int n = 1; n <= su.E; ++n) {
    ProgramState s0 = init_state(p, n);
    int c0 = color_of(s0, 1, su.unaryAll);
    for (int e = 2; e <= n; ++e)
      if (color_of(s0, e, su.unaryAll) != c0)
        throw LogicError("initialization is not color-uniform");
    AbstractClass cls = detail::abstract_state(s0, su);
    if (!seen.count(cls)) {
      Parent par;
      par.initial = true;
      par.n0 = n;
      seen.emplace(cls, std::move(par));
      queue.push_back(cls);
    }
  }

  // proper input colors as op-sym lists
  std::vector<std::vector<int>> blockSets;
  for (int mask = 1; mask < (1 << int(su.unaryIn.size())); ++mask) {
    std::vector<int> syms;
    for (size_t i = 0; i < su.unaryIn.size(); ++i)
      if (mask & (1 << i)) syms.push_back(su.unaryIn[i]);
    blockSets.push_back(std::move(syms));
  }

  std::optional<AbstractClass> accept;
  for (size_t head = 0; head < queue.size() && !accept; ++head) {
    AbstractClass cls = queue[head];
    if (accepting(cls)) {
      accept = cls;
      break;
    }
    // unique untouched color
    int untouched = -1;
    for (int col = 0; col < colors; ++col) {
      if (cls.hist[size_t(col)] > 0 && detail::input_part(col, su) == 0) {
        if (untouched >= 0) throw LogicError("two untouched colors in one class");
        untouched = col;
      }
    }
    if (untouched < 0) continue;
    for (const auto& syms : blockSets) {
      for (const auto& order : permutations_of(syms)) {
        detail::BlockImage img = detail::block_image(p, su, cls, untouched, order, su.k);
        detail::BlockImage img2 = detail::block_image(p, su, cls, untouched, order, su.k + 1);
        // Representative independence: the larger representative defines the
        // color map on a superset of colors; any overlap must agree.
        bool agree = img.bits == img2.bits && img.aColor == img2.aColor;
        for (int col = 0; agree && col < colors; ++col)
          if (img.g[size_t(col)] >= 0 && img2.g[size_t(col)] >= 0 &&
              img.g[size_t(col)] != img2.g[size_t(col)])
            agree = false;
        if (!agree)
          return verdict_unknown(UnknownReason::Promise,
                                 "successor class depends on the representative",
                                 consistencyPromise);
        const std::vector<int>& gmap = img2.g;
        long long cu = cls.hist[size_t(untouched)];
        std::vector<long long> remainders;
        if (cu == su.k) {
          remainders = {su.k, su.k - 1};  // still >= k, or exactly k-1
        } else {
          remainders = {cu - 1};
        }
        for (long long rem : remainders) {
          AbstractClass nxt;
          nxt.hist.assign(size_t(colors), 0);
          nxt.bits = img.bits;
          for (int col = 0; col < colors; ++col) {
            long long cnt = col == untouched ? rem : cls.hist[size_t(col)];
            if (cnt <= 0) continue;
            if (gmap[size_t(col)] < 0) throw LogicError("missing color image");
            detail::add_capped(nxt.hist[size_t(gmap[size_t(col)])], cnt, su.k);
          }
          detail::add_capped(nxt.hist[size_t(img.aColor)], 1, su.k);
          if (!seen.count(nxt)) {
            if (seen.size() >= classBudget)
              return verdict_unknown(UnknownReason::Budget, "class budget exhausted",
                                     consistencyPromise);
            Parent par;
            par.from = cls;
            par.order = order;
            seen.emplace(nxt, std::move(par));
            queue.push_back(nxt);
            if (accepting(nxt)) accept = nxt;
          }
          if (accept) break;
        }
        if (accept) break;
      }
      if (accept) break;
    }
  }

  std::string bounds = "cap k=" + std::to_string(su.k) + ", classes=" + std::to_string(seen.size());
  if (!accept) return verdict_empty(bounds, consistencyPromise);

  // Reconstruct the block word and replay it concretely over a small sweep of
  // domain sizes; capped branch choices make the exact size ambiguous.
  std::vector<std::vector<int>> blocks;
  AbstractClass cur = *accept;
  int n0 = 0;
  for (;;) {
    const Parent& par = seen.at(cur);
    if (par.initial) {
      n0 = par.n0;
      break;
    }
    blocks.push_back(par.order);
    cur = par.from;
  }
  std::reverse(blocks.begin(), blocks.end());
  int B = int(blocks.size());
  std::vector<int> tryNs;
  if (n0 < su.E) tryNs.push_back(n0);
  for (int n = std::max(B, 1); n <= B + su.E + int(su.k) + 2; ++n) tryNs.push_back(n);
  for (int n : tryNs) {
    if (n < B || n < 1) continue;
    ProgramState s = init_state(p, n);
    Witness w;
    w.domainSize = n;
    int elem = 1;
    for (const auto& order : blocks) {
      for (int sym : order) {
        Modification mod{true, sym, {elem}};
        s = apply(p, s, mod);
        w.mods.push_back(mod);
      }
      ++elem;
    }
    if (query_nonempty(p, s)) return verdict_nonempty(std::move(w), bounds, consistencyPromise);
  }
  return verdict_unknown(UnknownReason::Promise,
                         "accepted block word failed concrete replay; the consistency "
                         "promise appears violated",
                         consistencyPromise);
}

// ---------------------------------------------------------------------------
// Consistent quantifier-free programs with unary inputs. Boolean queries run a
// deterministic color automaton whose state is the bit valuation plus the
// uniform atomic type of untouched tuples per equality pattern; k-ary queries
// fall back to a pumping-bounded sweep of normal-form insertion sequences.

namespace detail {

struct InOneState {
  int remaining = -1;  // untouched elements; -1 for "unbounded"
  std::vector<bool> bits;
  // equality pattern -> atoms of the canonical untouched tuple; nullopt when
  // the pattern needs more untouched elements than remain
  std::map<std::vector<int>, std::optional<std::vector<std::pair<int, std::vector<int>>>>> typeFn;

  bool operator<(const InOneState& o) const {
    return std::tie(remaining, bits, typeFn) < std::tie(o.remaining, o.bits, o.typeFn);
  }
  bool operator==(const InOneState& o) const {
    return remaining == o.remaining && bits == o.bits && typeFn == o.typeFn;
  }
};

struct InOneSetup {
  std::vector<int> bitAll, posSyms;  // 0-ary symbols; arity >= 1 symbols readable on tuples
  std::vector<std::vector<int>> patterns;  // all patterns of arity 1..tstar
  int tstar = 0;
  int queryBit = -1;
};

inline InOneState read_in1_state(const Structure& s, const InOneSetup& su, int firstUntouched,
                                 int untouchedCount, int remaining) {
  InOneState st;
  st.remaining = remaining;
  for (int b : su.bitAll) st.bits.push_back(s.holds(b, {}));
  for (const auto& pat : su.patterns) {
    int d = 0;
    for (int c : pat) d = std::max(d, c + 1);
    int avail = remaining == -1 ? untouchedCount : std::min(untouchedCount, remaining);
    if (d > avail) {
      st.typeFn[pat] = std::nullopt;
      continue;
    }
    Tuple t;
    for (int c : pat) t.push_back(firstUntouched + c);
    st.typeFn[pat] = atomic_type(s, t, su.posSyms).atoms;
  }
  return st;
}

// Realize `count` untouched elements with the state's uniform types.
inline Structure realize_in1(const DynamicProgram& p, const InOneSetup& su, const InOneState& st,
                             int count) {
  Structure s = empty_structure(p.schema, count);
  for (size_t bi = 0; bi < su.bitAll.size(); ++bi)
    if (st.bits[bi]) s.rel[size_t(su.bitAll[bi])].insert(Tuple{});
  for (int sym : su.posSyms) {
    if (p.schema->at(sym).kind == SymKind::Input) continue;  // untouched: no input facts
    int ar = p.schema->at(sym).arity;
    for (const Tuple& t : tuples_over(ar, count)) {
      std::vector<int> pat = equality_pattern(t);
      auto it = st.typeFn.find(pat);
      if (it == st.typeFn.end() || !it->second) continue;
      // atom present iff (sym, class map) is in the pattern's atom list
      if (std::find(it->second->begin(), it->second->end(),
                    std::make_pair(sym, pat)) != it->second->end())
        s.rel[size_t(sym)].insert(t);
    }
  }
  return s;
}

}  // namespace detail

inline Verdict emptiness_consistent_prop_in1(const DynamicProgram& p, uint64_t budget = 100000,
                                             bool consistencyPromise = true) {
  FragmentProfile fp = classify(p);
  if (fp.maxInputArity > 1 || !fp.quantifierFreeUpdates)
    return verdict_unknown(UnknownReason::Fragment,
                           "needs quantifier-free updates over a unary input schema",
                           consistencyPromise);
  for (int s : p.schema->input_syms())
    if (p.schema->at(s).arity == 0)
      return verdict_unknown(UnknownReason::Fragment,
                             "0-ary input symbols break the insertion normal form",
                             consistencyPromise);
  const SchemaPtr& schema = p.schema;
  std::vector<int> unaryIn = schema->input_syms();
  if (unaryIn.size() > 12)
    return verdict_unknown(UnknownReason::Budget, "too many input relations",
                           consistencyPromise);
  int q = program_quantifier_depth(p);

  if (fp.queryArity == 0) {
    // deterministic color automaton
    detail::InOneSetup su;
    su.tstar = fp.maxAuxArity;
    for (int s : schema->all_syms()) {
      if (schema->at(s).arity == 0)
        su.bitAll.push_back(s);
      else if (schema->at(s).arity <= std::max(su.tstar, 1))
        su.posSyms.push_back(s);
    }
    // all aux symbols have arity <= tstar; wider input symbols cannot exist here
    for (int r = 1; r <= su.tstar; ++r) {
      std::vector<std::vector<int>> pats;
      std::vector<int> cur;
      all_partitions(r, cur, -1, pats);
      for (auto& pt : pats) su.patterns.push_back(std::move(pt));
    }
    for (size_t i = 0; i < su.bitAll.size(); ++i)
      if (su.bitAll[i] == p.query) su.queryBit = int(i);
    int E = std::max(2, su.tstar + q + 2);

    struct Parent {
      bool initial = false;
      int n0 = 0;
      detail::InOneState from;
      std::vector<int> order;
    };
    std::map<detail::InOneState, Parent> seen;
    std::vector<detail::InOneState> queue;
    for (int n = 1; n <= E; ++n) {
      ProgramState s0 = init_state(p, n);
      detail::InOneState st = detail::read_in1_state(s0, su, 1, n, n == E ? -1 : n);
      if (!seen.count(st)) {
        Parent par;
        par.initial = true;
        par.n0 = n;
        seen.emplace(st, std::move(par));
        queue.push_back(st);
      }
    }
    std::vector<std::vector<int>> blockSets;
    for (int mask = 1; mask < (1 << int(unaryIn.size())); ++mask) {
      std::vector<int> syms;
      for (size_t i = 0; i < unaryIn.size(); ++i)
        if (mask & (1 << i)) syms.push_back(unaryIn[i]);
      blockSets.push_back(std::move(syms));  // canonical sorted order only
    }
    std::optional<detail::InOneState> accept;
    for (size_t head = 0; head < queue.size() && !accept; ++head) {
      detail::InOneState st = queue[head];
      if (st.bits[size_t(su.queryBit)]) {
        accept = st;
        break;
      }
      if (st.remaining == 0) continue;
      int u = st.remaining == -1 ? su.tstar + 1 : std::min(st.remaining, su.tstar + 1);
      for (const auto& syms : blockSets) {
        Structure s = detail::realize_in1(p, su, st, u);
        for (int sym : syms) s = apply(p, s, {true, sym, {1}});
        int newRemaining = st.remaining == -1 ? -1 : st.remaining - 1;
        detail::InOneState nxt = detail::read_in1_state(s, su, 2, u - 1, newRemaining);
        if (!seen.count(nxt)) {
          if (seen.size() >= budget)
            return verdict_unknown(UnknownReason::Budget, "state budget exhausted",
                                   consistencyPromise);
          Parent par;
          par.from = st;
          par.order = syms;
          seen.emplace(nxt, std::move(par));
          queue.push_back(nxt);
          if (nxt.bits[size_t(su.queryBit)]) accept = nxt;
        }
        if (accept) break;
      }
    }
    std::string bounds = "type states=" + std::to_string(seen.size());
    if (!accept) return verdict_empty(bounds, consistencyPromise);
    std::vector<std::vector<int>> blocks;
    detail::InOneState cur = *accept;
    int n0 = 0;
    for (;;) {
      const Parent& par = seen.at(cur);
      if (par.initial) {
        n0 = par.n0;
        break;
      }
      blocks.push_back(par.order);
      cur = par.from;
    }
    std::reverse(blocks.begin(), blocks.end());
    int B = int(blocks.size());
    std::vector<int> tryNs;
    if (n0 < E) tryNs.push_back(n0);
    for (int n = std::max(B, 1); n <= B + E + su.tstar + 2; ++n) tryNs.push_back(n);
    for (int n : tryNs) {
      if (n < B || n < 1) continue;
      ProgramState s = init_state(p, n);
      Witness w;
      w.domainSize = n;
      int elem = 1;
      for (const auto& order : blocks) {
        for (int sym : order) {
          Modification mod{true, sym, {elem}};
          s = apply(p, s, mod);
          w.mods.push_back(mod);
        }
        ++elem;
      }
      if (query_nonempty(p, s)) return verdict_nonempty(std::move(w), bounds, consistencyPromise);
    }
    return verdict_unknown(UnknownReason::Promise,
                           "accepted block word failed concrete replay; the consistency "
                           "promise appears violated",
                           consistencyPromise);
  }

  // k-ary query: pumping-bounded exhaustive sweep of color-sorted normal-form
  // insertion sequences. Untouched tuples of one atomic type repeat once the
  // block count passes the number of types, so witnesses fit in the bound.
  int tstar = std::max({fp.queryArity, fp.maxAuxArity, 1});
  uint64_t M = count_atomic_types(schema, schema->all_syms(), tstar);
  uint64_t Bmax = sat_add(M, uint64_t(fp.queryArity));
  uint64_t Nstar =
      sat_add(Bmax, uint64_t(fp.queryArity) + uint64_t(tstar) + uint64_t(q) + 1);
  std::string bounds = "blocks<=" + std::to_string(Bmax) + ", domain<=" + std::to_string(Nstar) +
                       ", types=" + std::to_string(M);
  uint64_t left = budget;
  int colorMax = (1 << int(unaryIn.size())) - 1;
  for (uint64_t n64 = 1; n64 <= Nstar; ++n64) {
    if (n64 > uint64_t(INT32_MAX)) return verdict_unknown(UnknownReason::Budget, bounds);
    int n = int(n64);
    uint64_t maxBlocks = std::min<uint64_t>(uint64_t(n), Bmax);
    // DFS over non-decreasing proper-color block sequences, canonical orders
    ProgramState s0 = init_state(p, n);
    if (left == 0) return verdict_unknown(UnknownReason::Budget, bounds, consistencyPromise);
    --left;
    if (query_nonempty(p, s0)) {
      Witness w;
      w.domainSize = n;
      assert_witness(p, w);
      return verdict_nonempty(std::move(w), bounds, consistencyPromise);
    }
    std::function<std::optional<Witness>(const ProgramState&, int, uint64_t, ModSeq&)> dfs =
        [&](const ProgramState& s, int lastMask, uint64_t depth,
            ModSeq& seq) -> std::optional<Witness> {
      if (depth >= maxBlocks) return std::nullopt;
      int elem = int(depth) + 1;
      for (int mask = lastMask; mask <= colorMax; ++mask) {
        ProgramState t = s;
        size_t before = seq.size();
        for (size_t i = 0; i < unaryIn.size(); ++i)
          if (mask & (1 << i)) {
            Modification mod{true, unaryIn[i], {elem}};
            if (left == 0) throw BudgetError("normal form sweep over budget");
            --left;
            t = apply(p, t, mod);
            seq.push_back(mod);
          }
        if (query_nonempty(p, t)) {
          Witness w;
          w.domainSize = n;
          w.mods = seq;
          return w;
        }
        if (auto w = dfs(t, mask, depth + 1, seq)) return w;
        seq.resize(before);
      }
      return std::nullopt;
    };
    ModSeq seq;
    try {
      if (auto w = dfs(s0, 1, 0, seq)) {
        assert_witness(p, *w);
        return verdict_nonempty(std::move(*w), bounds, consistencyPromise);
      }
    } catch (const BudgetError&) {
      return verdict_unknown(UnknownReason::Budget, bounds, consistencyPromise);
    }
  }
  return verdict_empty(bounds, consistencyPromise);
}

// ---------------------------------------------------------------------------
// Consistent quantifier-free programs with unary auxiliaries. Sunflower
// pumping bounds the tuple count per input relation; canonical databases are
// enumerated small-first under one canonical insertion order.

inline Verdict emptiness_consistent_prop_aux1(const DynamicProgram& p, uint64_t budget = 100000,
                                              bool consistencyPromise = true) {
  FragmentProfile fp = classify(p);
  if (fp.maxAuxArity > 1 || !fp.quantifierFreeUpdates)
    return verdict_unknown(UnknownReason::Fragment,
                           "needs quantifier-free updates with unary auxiliaries",
                           consistencyPromise);
  const SchemaPtr& schema = p.schema;
  int q = program_quantifier_depth(p);
  int maxAr = std::max(fp.maxInputArity, fp.maxAuxArity);
  int teff = maxAr + (fp.queryArity == 1 ? 1 : 0);
  teff = std::max(teff, 1);

  // Quick soundness check: a query that no update formula and no
  // initialization can ever satisfy stays empty, whatever is reachable.
  bool provablyEmpty = true;
  for (int n = 1; n <= teff + q + 2 && provablyEmpty; ++n)
    if (query_nonempty(p, init_state(p, n))) provablyEmpty = false;
  if (provablyEmpty) {
    try {
      for (const OpKey& op : all_ops(*schema)) {
        const UpdateRule& rule = p.update_for(p.query, op);
        int arity = int(rule.xvars.size() + rule.yvars.size());
        for (const AtomicType& ty :
             enumerate_atomic_types(schema, schema->all_syms(), arity, 200000)) {
          auto [st, tup] = realize_type(schema, ty);
          Env env;
          for (size_t i = 0; i < rule.xvars.size(); ++i) env.push(rule.xvars[i], tup[i]);
          for (size_t i = 0; i < rule.yvars.size(); ++i)
            env.push(rule.yvars[i], tup[rule.xvars.size() + i]);
          if (eval(st, rule.formula, env)) {
            provablyEmpty = false;
            break;
          }
        }
        if (!provablyEmpty) break;
      }
      if (provablyEmpty)
        return verdict_empty("query updates and initialization are unsatisfiable",
                             consistencyPromise);
    } catch (const BudgetError&) {
      // fall through to the bounded sweep
    }
  }

  uint64_t M = count_atomic_types(schema, schema->all_syms(), teff);
  uint64_t petals = sat_add(sat_mul(M, M), 1);
  std::vector<int> inputs = schema->input_syms();
  std::vector<uint64_t> boundPer;
  uint64_t totalBound = 0;
  std::string bounds = "per-relation tuple bounds:";
  for (int s : inputs) {
    uint64_t b = tuple_sunflower_bound(schema->at(s).arity, int(std::min<uint64_t>(petals, 1000000)));
    if (petals > 1000000) b = UINT64_MAX;
    if (schema->at(s).arity == 0) b = 1;
    boundPer.push_back(b);
    totalBound = sat_add(totalBound, b);
    bounds += " " + schema->at(s).name + "<=" + std::to_string(b);
  }

  // Small-first sweep over canonical databases: total tuple count, then the
  // per-relation split, then sorted tuple sets over a contiguous element
  // prefix, finally a few spare untouched elements for initialization.
  uint64_t left = budget;
  int spareMax = q + teff + 1;
  for (uint64_t total = 0; total <= totalBound; ++total) {
    if (total > uint64_t(INT32_MAX) / std::max(maxAr, 1))
      return verdict_unknown(UnknownReason::Budget, bounds, consistencyPromise);
    // split `total` among the relations, respecting per-relation bounds
    std::vector<uint64_t> counts(inputs.size(), 0);
    std::optional<Witness> found;
    bool over = false;
    auto charge = [&](uint64_t amount) {
      if (left < amount) {
        over = true;
        return false;
      }
      left -= amount;
      return true;
    };
    std::function<void(size_t, uint64_t)> split = [&](size_t i, uint64_t rest) {
      if (found || over || !charge(1)) return;
      if (i == inputs.size()) {
        if (rest != 0) return;
        // enumerate sorted tuple sets per relation
        int amax = 0;
        for (size_t j = 0; j < inputs.size(); ++j)
          amax += int(counts[j]) * schema->at(inputs[j]).arity;
        std::vector<std::vector<Tuple>> chosen(inputs.size());
        std::function<void(size_t)> pick = [&](size_t j) {
          if (found || over || !charge(1)) return;
          if (j == inputs.size()) {
            // contiguity: elements used must be exactly 1..a
            std::set<int> used;
            for (const auto& ts : chosen)
              for (const Tuple& t : ts)
                for (int v : t) used.insert(v);
            int a = int(used.size());
            for (int v : used)
              if (v < 1 || v > a) return;
            for (int spare = 0; spare <= spareMax; ++spare) {
              int n = a + spare;
              if (n < 1) continue;
              ModSeq seq;
              for (size_t jj = 0; jj < inputs.size(); ++jj)
                for (const Tuple& t : chosen[jj]) seq.push_back({true, inputs[jj], t});
              if (!charge(seq.size() + 1)) return;
              ProgramState s = apply_sequence(p, init_state(p, n), seq);
              if (query_nonempty(p, s)) {
                found = Witness{n, seq};
                return;
              }
            }
            return;
          }
          int ar = schema->at(inputs[j]).arity;
          uint64_t want = counts[j];
          if (want == 0) {
            pick(j + 1);
            return;
          }
          if (ar == 0) {
            if (want == 1) {
              chosen[j] = {Tuple{}};
              pick(j + 1);
              chosen[j].clear();
            }
            return;
          }
          if (sat_pow(uint64_t(amax == 0 ? 1 : amax), ar) > sat_add(left, 1)) {
            over = true;
            return;
          }
          std::vector<Tuple> all = tuples_over(ar, amax == 0 ? 1 : amax);
          std::vector<Tuple> setv;
          std::function<void(size_t)> comb = [&](size_t idx) {
            if (found || over || !charge(1)) return;
            if (setv.size() == want) {
              chosen[j] = setv;
              pick(j + 1);
              return;
            }
            if (idx >= all.size()) return;
            if (all.size() - idx < want - setv.size()) return;
            setv.push_back(all[idx]);
            comb(idx + 1);
            setv.pop_back();
            comb(idx + 1);
          };
          comb(0);
        };
        pick(0);
        return;
      }
      uint64_t cap = std::min<uint64_t>(boundPer[i], rest);
      for (uint64_t c = 0; c <= cap; ++c) {
        counts[i] = c;
        split(i + 1, rest - c);
        if (found || over) return;
      }
    };
    split(0, total);
    if (found) {
      assert_witness(p, *found);
      return verdict_nonempty(std::move(*found), bounds, consistencyPromise);
    }
    if (over) return verdict_unknown(UnknownReason::Budget, bounds, consistencyPromise);
  }
  return verdict_empty(bounds, consistencyPromise);
}

}  // namespace dynrel
