#pragma once

// First-order logic over finite relational structures: schemas, structures,
// formulas with naive evaluation, atomic types, colors and color histograms.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dynrel {

using Tuple = std::vector<int>;
using Relation = std::set<Tuple>;

struct LogicError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SymKind { Input, Aux };

struct Symbol {
  std::string name;
  int arity = 0;
  SymKind kind = SymKind::Input;
};

struct Schema {
  std::vector<Symbol> symbols;
  std::unordered_map<std::string, int> index;

  int find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
  }
  const Symbol& at(int i) const { return symbols.at(size_t(i)); }
  int size() const { return int(symbols.size()); }

  std::vector<int> input_syms() const {
    std::vector<int> r;
    for (int i = 0; i < size(); ++i)
      if (symbols[size_t(i)].kind == SymKind::Input) r.push_back(i);
    return r;
  }
  std::vector<int> aux_syms() const {
    std::vector<int> r;
    for (int i = 0; i < size(); ++i)
      if (symbols[size_t(i)].kind == SymKind::Aux) r.push_back(i);
    return r;
  }
  std::vector<int> all_syms() const {
    std::vector<int> r;
    for (int i = 0; i < size(); ++i) r.push_back(i);
    return r;
  }
};

using SchemaPtr = std::shared_ptr<const Schema>;

inline SchemaPtr make_schema(std::vector<Symbol> symbols) {
  auto s = std::make_shared<Schema>();
  s->symbols = std::move(symbols);
  for (int i = 0; i < s->size(); ++i) {
    const Symbol& sym = s->symbols[size_t(i)];
    if (sym.arity < 0) throw LogicError("negative arity for " + sym.name);
    if (!s->index.emplace(sym.name, i).second)
      throw LogicError("duplicate symbol " + sym.name);
  }
  return s;
}

// Domain elements are 1..domainSize. There are no constants.
struct Structure {
  SchemaPtr schema;
  int domainSize = 0;
  std::vector<Relation> rel;

  bool holds(int sym, const Tuple& t) const { return rel[size_t(sym)].count(t) > 0; }
  bool bit(int sym) const { return holds(sym, {}); }
  void set_bit(int sym, bool v) {
    if (v)
      rel[size_t(sym)].insert(Tuple{});  // not {}: that is an empty list, not a 0-ary tuple
    else
      rel[size_t(sym)].clear();
  }

  bool operator==(const Structure& o) const {
    return domainSize == o.domainSize && rel == o.rel;
  }
  bool operator<(const Structure& o) const {
    if (domainSize != o.domainSize) return domainSize < o.domainSize;
    return rel < o.rel;
  }
};

inline Structure empty_structure(SchemaPtr schema, int n) {
  if (n < 1) throw LogicError("domain must be non-empty");
  Structure s;
  s.schema = std::move(schema);
  s.domainSize = n;
  s.rel.resize(size_t(s.schema->size()));
  return s;
}

// Compact stable encoding, usable as a hash key for visited-state sets.
inline std::string encode_structure(const Structure& s) {
  std::string out = std::to_string(s.domainSize);
  for (const auto& r : s.rel) {
    out += '|';
    for (const auto& t : r) {
      for (int v : t) {
        out += std::to_string(v);
        out += ',';
      }
      out += ';';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Formulas

enum class FKind { True, False, Eq, Atom, Not, And, Or, Implies, Iff, Exists, Forall };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FKind kind;
  std::string var1, var2;             // Eq operands; var1 also quantified variable
  std::string sym;                    // Atom relation name
  std::vector<std::string> args;      // Atom arguments
  std::vector<FormulaPtr> kids;
};

inline FormulaPtr f_true() {
  static FormulaPtr t = std::make_shared<Formula>(Formula{FKind::True, {}, {}, {}, {}, {}});
  return t;
}
inline FormulaPtr f_false() {
  static FormulaPtr f = std::make_shared<Formula>(Formula{FKind::False, {}, {}, {}, {}, {}});
  return f;
}
inline FormulaPtr f_eq(std::string a, std::string b) {
  return std::make_shared<Formula>(Formula{FKind::Eq, std::move(a), std::move(b), {}, {}, {}});
}
inline FormulaPtr f_atom(std::string sym, std::vector<std::string> args) {
  return std::make_shared<Formula>(
      Formula{FKind::Atom, {}, {}, std::move(sym), std::move(args), {}});
}
inline FormulaPtr f_not(FormulaPtr a) {
  return std::make_shared<Formula>(Formula{FKind::Not, {}, {}, {}, {}, {std::move(a)}});
}
inline FormulaPtr f_bin(FKind k, FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(
      Formula{k, {}, {}, {}, {}, {std::move(a), std::move(b)}});
}
inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) { return f_bin(FKind::And, std::move(a), std::move(b)); }
inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) { return f_bin(FKind::Or, std::move(a), std::move(b)); }
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) { return f_bin(FKind::Implies, std::move(a), std::move(b)); }
inline FormulaPtr f_iff(FormulaPtr a, FormulaPtr b) { return f_bin(FKind::Iff, std::move(a), std::move(b)); }
inline FormulaPtr f_exists(std::string v, FormulaPtr body) {
  return std::make_shared<Formula>(
      Formula{FKind::Exists, std::move(v), {}, {}, {}, {std::move(body)}});
}
inline FormulaPtr f_forall(std::string v, FormulaPtr body) {
  return std::make_shared<Formula>(
      Formula{FKind::Forall, std::move(v), {}, {}, {}, {std::move(body)}});
}

inline FormulaPtr f_and_all(std::vector<FormulaPtr> fs) {
  if (fs.empty()) return f_true();
  FormulaPtr r = fs[0];
  for (size_t i = 1; i < fs.size(); ++i) r = f_and(r, fs[i]);
  return r;
}
inline FormulaPtr f_or_all(std::vector<FormulaPtr> fs) {
  if (fs.empty()) return f_false();
  FormulaPtr r = fs[0];
  for (size_t i = 1; i < fs.size(); ++i) r = f_or(r, fs[i]);
  return r;
}

inline bool formula_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->var1 != b->var1 || a->var2 != b->var2 ||
      a->sym != b->sym || a->args != b->args || a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!formula_equal(a->kids[i], b->kids[i])) return false;
  return true;
}

inline int quantifier_depth(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
    case FKind::Eq:
    case FKind::Atom:
      return 0;
    case FKind::Not:
      return quantifier_depth(f->kids[0]);
    case FKind::And:
    case FKind::Or:
    case FKind::Implies:
    case FKind::Iff:
      return std::max(quantifier_depth(f->kids[0]), quantifier_depth(f->kids[1]));
    case FKind::Exists:
    case FKind::Forall:
      return 1 + quantifier_depth(f->kids[0]);
  }
  return 0;
}

inline bool quantifier_free(const FormulaPtr& f) { return quantifier_depth(f) == 0; }

inline void collect_free_vars(const FormulaPtr& f, std::set<std::string>& bound,
                              std::set<std::string>& out) {
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
      return;
    case FKind::Eq:
      if (!bound.count(f->var1)) out.insert(f->var1);
      if (!bound.count(f->var2)) out.insert(f->var2);
      return;
    case FKind::Atom:
      for (const auto& v : f->args)
        if (!bound.count(v)) out.insert(v);
      return;
    case FKind::Not:
      collect_free_vars(f->kids[0], bound, out);
      return;
    case FKind::And:
    case FKind::Or:
    case FKind::Implies:
    case FKind::Iff:
      collect_free_vars(f->kids[0], bound, out);
      collect_free_vars(f->kids[1], bound, out);
      return;
    case FKind::Exists:
    case FKind::Forall: {
      bool fresh = bound.insert(f->var1).second;
      collect_free_vars(f->kids[0], bound, out);
      if (fresh) bound.erase(f->var1);
      return;
    }
  }
}

inline std::set<std::string> free_vars(const FormulaPtr& f) {
  std::set<std::string> bound, out;
  collect_free_vars(f, bound, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation. Unknown symbols, arity mismatches and unbound variables are
// construction/lookup-time errors, never silently false.

struct Env {
  std::vector<std::pair<std::string, int>> binds;

  int lookup(const std::string& v) const {
    for (auto it = binds.rbegin(); it != binds.rend(); ++it)
      if (it->first == v) return it->second;
    throw LogicError("unbound variable " + v);
  }
  void push(const std::string& v, int e) { binds.emplace_back(v, e); }
  void pop() { binds.pop_back(); }
};

inline bool eval(const Structure& s, const FormulaPtr& f, Env& env) {
  switch (f->kind) {
    case FKind::True:
      return true;
    case FKind::False:
      return false;
    case FKind::Eq:
      return env.lookup(f->var1) == env.lookup(f->var2);
    case FKind::Atom: {
      int sym = s.schema->find(f->sym);
      if (sym < 0) throw LogicError("unknown symbol " + f->sym);
      if (s.schema->at(sym).arity != int(f->args.size()))
        throw LogicError("arity mismatch for " + f->sym);
      Tuple t(f->args.size());
      for (size_t i = 0; i < f->args.size(); ++i) t[i] = env.lookup(f->args[i]);
      return s.holds(sym, t);
    }
    case FKind::Not:
      return !eval(s, f->kids[0], env);
    case FKind::And:
      return eval(s, f->kids[0], env) && eval(s, f->kids[1], env);
    case FKind::Or:
      return eval(s, f->kids[0], env) || eval(s, f->kids[1], env);
    case FKind::Implies:
      return !eval(s, f->kids[0], env) || eval(s, f->kids[1], env);
    case FKind::Iff:
      return eval(s, f->kids[0], env) == eval(s, f->kids[1], env);
    case FKind::Exists: {
      for (int e = 1; e <= s.domainSize; ++e) {
        env.push(f->var1, e);
        bool r = eval(s, f->kids[0], env);
        env.pop();
        if (r) return true;
      }
      return false;
    }
    case FKind::Forall: {
      for (int e = 1; e <= s.domainSize; ++e) {
        env.push(f->var1, e);
        bool r = eval(s, f->kids[0], env);
        env.pop();
        if (!r) return false;
      }
      return true;
    }
  }
  return false;
}

inline bool eval(const Structure& s, const FormulaPtr& f,
                 const std::vector<std::pair<std::string, int>>& assignment = {}) {
  Env env;
  env.binds = assignment;
  for (const auto& [v, e] : assignment)
    if (e < 1 || e > s.domainSize) throw LogicError("assignment out of domain");
  return eval(s, f, env);
}

// ---------------------------------------------------------------------------
// Substitution utilities (used heavily by program transformations).

// Rename free variables via map; bound variables that would capture a new name
// are alpha-renamed first.
inline FormulaPtr subst_vars(const FormulaPtr& f,
                             const std::map<std::string, std::string>& m,
                             int* fresh = nullptr) {
  static int freshFallback = 0;
  int* counter = fresh ? fresh : &freshFallback;
  auto ren = [&](const std::string& v) {
    auto it = m.find(v);
    return it == m.end() ? v : it->second;
  };
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
      return f;
    case FKind::Eq:
      return f_eq(ren(f->var1), ren(f->var2));
    case FKind::Atom: {
      std::vector<std::string> args;
      args.reserve(f->args.size());
      for (const auto& a : f->args) args.push_back(ren(a));
      return f_atom(f->sym, std::move(args));
    }
    case FKind::Not:
      return f_not(subst_vars(f->kids[0], m, counter));
    case FKind::And:
    case FKind::Or:
    case FKind::Implies:
    case FKind::Iff:
      return f_bin(f->kind, subst_vars(f->kids[0], m, counter),
                   subst_vars(f->kids[1], m, counter));
    case FKind::Exists:
    case FKind::Forall: {
      std::string bv = f->var1;
      FormulaPtr body = f->kids[0];
      bool capture = false;
      for (const auto& [from, to] : m)
        if (to == bv && from != bv) capture = true;
      std::map<std::string, std::string> m2 = m;
      if (capture) {
        std::string nv = bv + "_r" + std::to_string((*counter)++);
        std::map<std::string, std::string> rename{{bv, nv}};
        body = subst_vars(body, rename, counter);
        bv = nv;
      }
      m2.erase(bv);
      FormulaPtr nb = subst_vars(body, m2, counter);
      return f->kind == FKind::Exists ? f_exists(bv, nb) : f_forall(bv, nb);
    }
  }
  return f;
}

// Replace every Atom node by fn(symbolName, args); fn returns a formula whose
// free variables should be among args (caller's responsibility otherwise).
template <typename Fn>
inline FormulaPtr map_atoms(const FormulaPtr& f, Fn&& fn) {
  switch (f->kind) {
    case FKind::True:
    case FKind::False:
    case FKind::Eq:
      return f;
    case FKind::Atom:
      return fn(f->sym, f->args);
    case FKind::Not:
      return f_not(map_atoms(f->kids[0], fn));
    case FKind::And:
    case FKind::Or:
    case FKind::Implies:
    case FKind::Iff:
      return f_bin(f->kind, map_atoms(f->kids[0], fn), map_atoms(f->kids[1], fn));
    case FKind::Exists:
      return f_exists(f->var1, map_atoms(f->kids[0], fn));
    case FKind::Forall:
      return f_forall(f->var1, map_atoms(f->kids[0], fn));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Atomic types. The type of a k-tuple over a sub-schema records the equality
// pattern of the positions plus every atom (symbol applied to positions) that
// holds. Positions are canonicalized to equality-class ids in first-occurrence
// order, so tuples with matching facts and pattern compare equal.

struct AtomicType {
  int k = 0;
  std::vector<int> eqClass;  // size k, class ids 0..d-1 in first-occurrence order
  std::vector<int> subSyms;  // schema symbol indices this type ranges over
  // atoms over class ids; sorted, deduplicated
  std::vector<std::pair<int, std::vector<int>>> atoms;

  int classes() const {
    int d = 0;
    for (int c : eqClass) d = std::max(d, c + 1);
    return d;
  }
  bool operator==(const AtomicType& o) const {
    return k == o.k && eqClass == o.eqClass && subSyms == o.subSyms && atoms == o.atoms;
  }
  bool operator<(const AtomicType& o) const {
    return std::tie(k, eqClass, subSyms, atoms) <
           std::tie(o.k, o.eqClass, o.subSyms, o.atoms);
  }
  std::string encode() const {
    std::string s = std::to_string(k) + "/";
    for (int c : eqClass) s += std::to_string(c) + ".";
    s += "/";
    for (const auto& [sym, pos] : atoms) {
      s += std::to_string(sym) + "(";
      for (int p : pos) s += std::to_string(p) + ",";
      s += ")";
    }
    return s;
  }
};

inline void all_maps(int arity, int d, std::vector<int>& cur,
                     std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == arity) {
    out.push_back(cur);
    return;
  }
  for (int i = 0; i < d; ++i) {
    cur.push_back(i);
    all_maps(arity, d, cur, out);
    cur.pop_back();
  }
}

inline std::vector<std::vector<int>> position_maps(int arity, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  all_maps(arity, d, cur, out);
  return out;
}

inline AtomicType atomic_type(const Structure& s, const Tuple& t,
                              std::vector<int> subSyms) {
  for (int v : t)
    if (v < 1 || v > s.domainSize) throw LogicError("tuple element out of domain");
  std::sort(subSyms.begin(), subSyms.end());
  AtomicType ty;
  ty.k = int(t.size());
  ty.subSyms = subSyms;
  // equality classes, first occurrence order
  std::vector<int> reps;  // class -> element value
  ty.eqClass.resize(t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    int cls = -1;
    for (size_t j = 0; j < reps.size(); ++j)
      if (reps[j] == t[i]) cls = int(j);
    if (cls < 0) {
      cls = int(reps.size());
      reps.push_back(t[i]);
    }
    ty.eqClass[i] = cls;
  }
  int d = int(reps.size());
  for (int sym : subSyms) {
    int ar = s.schema->at(sym).arity;
    for (const auto& pm : position_maps(ar, d)) {
      Tuple fact(static_cast<size_t>(ar), 0);
      for (int i = 0; i < ar; ++i) fact[size_t(i)] = reps[size_t(pm[size_t(i)])];
      if (s.holds(sym, fact)) ty.atoms.emplace_back(sym, pm);
    }
  }
  std::sort(ty.atoms.begin(), ty.atoms.end());
  return ty;
}

// All restricted-growth strings of length k = equality patterns.
inline void all_partitions(int k, std::vector<int>& cur, int maxUsed,
                           std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int c = 0; c <= maxUsed + 1; ++c) {
    cur.push_back(c);
    all_partitions(k, cur, std::max(maxUsed, c), out);
    cur.pop_back();
  }
}

// Realize a candidate type as a concrete structure plus witness tuple.
inline std::pair<Structure, Tuple> realize_type(const SchemaPtr& schema,
                                                const AtomicType& ty) {
  int d = std::max(ty.classes(), 1);
  Structure s = empty_structure(schema, d);
  for (const auto& [sym, pm] : ty.atoms) {
    Tuple fact(pm.size());
    for (size_t i = 0; i < pm.size(); ++i) fact[i] = pm[i] + 1;
    s.rel[size_t(sym)].insert(fact);
  }
  Tuple t(size_t(ty.k));
  for (int i = 0; i < ty.k; ++i) t[size_t(i)] = ty.eqClass[size_t(i)] + 1;
  return {s, t};
}

// Every combination of equality pattern and atom subset is realizable (facts
// are independent), so enumeration is purely combinatorial; the budget guards
// the count before materialization.
inline std::vector<AtomicType> enumerate_atomic_types(const SchemaPtr& schema,
                                                      std::vector<int> subSyms, int k,
                                                      uint64_t budget = 2000000) {
  std::sort(subSyms.begin(), subSyms.end());
  std::vector<std::vector<int>> partitions;
  if (k == 0) {
    partitions.push_back({});
  } else {
    std::vector<int> cur;
    all_partitions(k, cur, -1, partitions);
  }
  // count first
  uint64_t total = 0;
  for (const auto& part : partitions) {
    int d = 0;
    for (int c : part) d = std::max(d, c + 1);
    uint64_t slots = 0;
    for (int sym : subSyms) {
      uint64_t cnt = 1;
      for (int i = 0; i < schema->at(sym).arity; ++i) {
        cnt *= uint64_t(std::max(d, 0));
        if (cnt > budget) throw BudgetError("atomic type enumeration over budget");
      }
      slots += cnt;
      if (slots > 62) throw BudgetError("atomic type enumeration over budget");
    }
    uint64_t combos = uint64_t(1) << slots;
    total += combos;
    if (total > budget) throw BudgetError("atomic type enumeration over budget");
  }
  std::vector<AtomicType> out;
  out.reserve(size_t(total));
  for (const auto& part : partitions) {
    int d = 0;
    for (int c : part) d = std::max(d, c + 1);
    std::vector<std::pair<int, std::vector<int>>> slots;
    for (int sym : subSyms)
      for (const auto& pm : position_maps(schema->at(sym).arity, d))
        slots.emplace_back(sym, pm);
    uint64_t combos = uint64_t(1) << slots.size();
    for (uint64_t mask = 0; mask < combos; ++mask) {
      AtomicType ty;
      ty.k = k;
      ty.eqClass = part;
      ty.subSyms = subSyms;
      for (size_t i = 0; i < slots.size(); ++i)
        if (mask & (uint64_t(1) << i)) ty.atoms.push_back(slots[i]);
      std::sort(ty.atoms.begin(), ty.atoms.end());
      out.push_back(std::move(ty));
    }
  }
  return out;
}

// Count without materializing; saturates at the sentinel instead of throwing,
// so callers can size budgets around astronomically large type counts.
inline uint64_t count_atomic_types(const SchemaPtr& schema, const std::vector<int>& subSyms,
                                   int k, uint64_t saturate = UINT64_MAX / 4) {
  std::vector<std::vector<int>> partitions;
  if (k == 0) {
    partitions.push_back({});
  } else {
    std::vector<int> cur;
    all_partitions(k, cur, -1, partitions);
  }
  uint64_t total = 0;
  for (const auto& part : partitions) {
    int d = 0;
    for (int c : part) d = std::max(d, c + 1);
    uint64_t slots = 0;
    for (int sym : subSyms) {
      uint64_t cnt = 1;  // d^arity position maps; arity-0 atoms contribute one slot
      for (int i = 0; i < schema->at(sym).arity && cnt <= saturate; ++i) cnt *= uint64_t(d);
      slots += cnt;
      if (slots > 62) return saturate;
    }
    total += uint64_t(1) << slots;
    if (total > saturate) return saturate;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Colors: a color over a sub-schema is the set of its unary symbols an element
// belongs to, encoded as a bitmask over the sub-schema's unary symbols in
// schema order. c_0 = 0 is the uncolored color.

inline std::vector<int> unary_syms(const Schema& schema, const std::vector<int>& subSyms) {
  std::vector<int> u;
  for (int s : subSyms)
    if (schema.at(s).arity == 1) u.push_back(s);
  std::sort(u.begin(), u.end());
  return u;
}

inline int color_of(const Structure& s, int elem, const std::vector<int>& unarySyms) {
  int mask = 0;
  for (size_t i = 0; i < unarySyms.size(); ++i)
    if (s.holds(unarySyms[i], {elem})) mask |= 1 << i;
  return mask;
}

inline int color_count(const std::vector<int>& unarySyms) {
  return 1 << unarySyms.size();
}

struct ColorHistogram {
  std::vector<long long> counts;  // indexed by color mask, c_0 first
  std::optional<long long> cap;

  bool operator==(const ColorHistogram& o) const {
    return counts == o.counts && cap == o.cap;
  }
};

inline ColorHistogram color_histogram(const Structure& s,
                                      const std::vector<int>& unarySyms,
                                      std::optional<long long> cap = std::nullopt) {
  ColorHistogram h;
  h.counts.assign(size_t(color_count(unarySyms)), 0);
  h.cap = cap;
  for (int e = 1; e <= s.domainSize; ++e) h.counts[size_t(color_of(s, e, unarySyms))]++;
  if (cap)
    for (auto& c : h.counts) c = std::min(c, *cap);
  return h;
}

// Componentwise "equal or both at least k".
inline bool simeq_k(const std::vector<long long>& a, const std::vector<long long>& b,
                    long long k) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i] && (a[i] < k || b[i] < k)) return false;
  return true;
}

}  // namespace dynrel
