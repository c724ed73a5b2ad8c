#pragma once

// Transfer multicounter automata and backward coverability over upward-closed
// sets (antichain bases). Transfers move counter contents simultaneously:
// n'_c = sum of n_d over all d with t(d) = c.

#include "dynrel/logic.hpp"

namespace dynrel {

enum class TAct { Inc, Dec, Transfer };

struct TMCATransition {
  int from = 0;
  TAct act = TAct::Inc;
  int counter = 0;            // Inc/Dec
  std::vector<int> transfer;  // Transfer: counter d moves into transfer[d]
  int to = 0;
};

struct TMCA {
  std::vector<std::string> states;
  std::unordered_map<std::string, int> stateIndex;
  int counters = 0;
  int init = 0;
  int accept = 0;
  std::vector<TMCATransition> transitions;

  int add_state(const std::string& name) {
    auto it = stateIndex.find(name);
    if (it != stateIndex.end()) return it->second;
    stateIndex[name] = int(states.size());
    states.push_back(name);
    return int(states.size()) - 1;
  }
};

inline void validate_tmca(const TMCA& m) {
  if (m.states.empty()) throw LogicError("TMCA needs at least one state");
  if (m.counters < 0) throw LogicError("negative counter count");
  auto chk_state = [&](int s) {
    if (s < 0 || s >= int(m.states.size())) throw LogicError("TMCA references undeclared state");
  };
  chk_state(m.init);
  chk_state(m.accept);
  for (const auto& t : m.transitions) {
    chk_state(t.from);
    chk_state(t.to);
    if (t.act == TAct::Transfer) {
      if (int(t.transfer.size()) != m.counters) throw LogicError("transfer map not total");
      for (int c : t.transfer)
        if (c < 0 || c >= m.counters) throw LogicError("transfer map targets undeclared counter");
    } else if (t.counter < 0 || t.counter >= m.counters) {
      throw LogicError("transition references undeclared counter");
    }
  }
}

struct Configuration {
  int state = 0;
  std::vector<long long> counts;

  bool operator==(const Configuration& o) const {
    return state == o.state && counts == o.counts;
  }
  bool operator<(const Configuration& o) const {
    if (state != o.state) return state < o.state;
    return counts < o.counts;
  }
};

inline bool tmca_enabled(const TMCATransition& t, const Configuration& c) {
  return t.act != TAct::Dec || c.counts[size_t(t.counter)] > 0;
}

inline Configuration tmca_apply(const TMCATransition& t, const Configuration& c) {
  Configuration r = c;
  r.state = t.to;
  switch (t.act) {
    case TAct::Inc: ++r.counts[size_t(t.counter)]; break;
    case TAct::Dec: --r.counts[size_t(t.counter)]; break;
    case TAct::Transfer: {
      std::vector<long long> moved(c.counts.size(), 0);
      for (size_t d = 0; d < c.counts.size(); ++d)
        moved[size_t(t.transfer[d])] += c.counts[d];
      r.counts = std::move(moved);
      break;
    }
  }
  return r;
}

inline std::vector<Configuration> tmca_step(const TMCA& m, const Configuration& c) {
  std::vector<Configuration> out;
  for (const auto& t : m.transitions)
    if (t.from == c.state && tmca_enabled(t, c)) out.push_back(tmca_apply(t, c));
  return out;
}

// ---------------------------------------------------------------------------
// Upward-closed sets as per-state antichains of minimal vectors.

inline bool leq_vec(const std::vector<long long>& a, const std::vector<long long>& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

struct UpwardSet {
  std::map<int, std::vector<std::vector<long long>>> basis;  // state -> antichain

  bool contains(const Configuration& c) const {
    auto it = basis.find(c.state);
    if (it == basis.end()) return false;
    for (const auto& b : it->second)
      if (leq_vec(b, c.counts)) return true;
    return false;
  }

  // Inserts v unless dominated; prunes newly dominated elements. Returns
  // true iff v became a new minimal element.
  bool add(int state, const std::vector<long long>& v) {
    auto& vec = basis[state];
    for (const auto& b : vec)
      if (leq_vec(b, v)) return false;
    vec.erase(std::remove_if(vec.begin(), vec.end(),
                             [&](const std::vector<long long>& b) { return leq_vec(v, b); }),
              vec.end());
    vec.push_back(v);
    return true;
  }

  size_t size() const {
    size_t n = 0;
    for (const auto& [s, vec] : basis) n += vec.size();
    return n;
  }
};

// Exact minimal basis of { c | tmca_apply(tr, c) covers some target basis
// vector at tr.to }. For transfers, minimal solutions are assembled per
// target counter from compositions over the preimage of each counter; the
// preimages partition the counters, so the product stays an antichain.
inline UpwardSet pre_basis(const TMCA& m, const UpwardSet& target, const TMCATransition& tr) {
  UpwardSet out;
  auto it = target.basis.find(tr.to);
  if (it == target.basis.end()) return out;
  for (const auto& v : it->second) {
    switch (tr.act) {
      case TAct::Inc: {
        std::vector<long long> w = v;
        auto& x = w[size_t(tr.counter)];
        if (x > 0) --x;
        out.add(tr.from, w);
        break;
      }
      case TAct::Dec: {
        std::vector<long long> w = v;
        ++w[size_t(tr.counter)];
        out.add(tr.from, w);
        break;
      }
      case TAct::Transfer: {
        std::vector<std::vector<int>> pre(size_t(m.counters));
        for (int d = 0; d < m.counters; ++d) pre[size_t(tr.transfer[d])].push_back(d);
        bool feasible = true;
        for (int c = 0; c < m.counters; ++c)
          if (pre[size_t(c)].empty() && v[size_t(c)] > 0) feasible = false;
        if (!feasible) break;
        // enumerate, per counter c, all compositions of v_c over pre[c]
        std::vector<long long> w(size_t(m.counters), 0);
        std::function<void(int)> rec = [&](int c) {
          if (c == m.counters) {
            out.add(tr.from, w);
            return;
          }
          const auto& slots = pre[size_t(c)];
          long long total = v[size_t(c)];
          if (slots.empty()) {  // total == 0 here
            rec(c + 1);
            return;
          }
          std::function<void(size_t, long long)> comp = [&](size_t i, long long rest) {
            if (i + 1 == slots.size()) {
              w[size_t(slots[i])] = rest;
              rec(c + 1);
              w[size_t(slots[i])] = 0;
              return;
            }
            for (long long take = 0; take <= rest; ++take) {
              w[size_t(slots[i])] = take;
              comp(i + 1, rest - take);
              w[size_t(slots[i])] = 0;
            }
          };
          comp(0, total);
        };
        rec(0);
        break;
      }
    }
  }
  return out;
}

struct CoverResult {
  bool covered = false;
  bool witnessFound = false;
  int witnessInitial = -1;       // index into initials
  std::vector<int> witness;      // transition indices, valid when witnessFound
  UpwardSet invariant;           // closed backward fixpoint (certificate when !covered)
  uint64_t iterations = 0;
};

// Backward coverability: fixpoint of target under pre_basis, then membership
// of the initials. On success the witness is recovered from provenance links;
// monotonicity of inc/dec/transfer makes the recovered sequence replayable
// from any dominating initial configuration.
inline CoverResult coverable(const TMCA& m, const std::vector<Configuration>& initials,
                             const UpwardSet& target, uint64_t basisCap = 100000) {
  validate_tmca(m);
  CoverResult res;

  // Control-abstracted forward reachability from the initials. A covering run
  // only visits reachable control states, so transitions from elsewhere can be
  // dropped before the backward fixpoint; exact, and it keeps the basis from
  // sprawling over dead parts of large automata.
  std::vector<char> fwd(m.states.size(), 0);
  {
    std::vector<std::vector<int>> out(m.states.size());
    for (const auto& t : m.transitions) out[size_t(t.from)].push_back(t.to);
    std::vector<int> stack;
    for (const auto& c : initials)
      if (!fwd[size_t(c.state)]) {
        fwd[size_t(c.state)] = 1;
        stack.push_back(c.state);
      }
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (int to : out[size_t(s)])
        if (!fwd[size_t(to)]) {
          fwd[size_t(to)] = 1;
          stack.push_back(to);
        }
    }
  }
  std::vector<std::vector<int>> byTo(m.states.size());
  for (size_t ti = 0; ti < m.transitions.size(); ++ti)
    if (fwd[size_t(m.transitions[ti].from)]) byTo[size_t(m.transitions[ti].to)].push_back(int(ti));

  UpwardSet B = target;

  struct Prov {
    int transition;  // -1 for target seeds
    Configuration next;
  };
  std::map<Configuration, Prov> prov;
  std::vector<Configuration> work;
  for (const auto& [s, vec] : target.basis)
    for (const auto& v : vec) {
      Configuration c{s, v};
      prov[c] = {-1, {}};
      if (fwd[size_t(s)]) work.push_back(c);
    }

  // provenance walk + replay validation once some initial is dominated
  auto recover = [&](size_t ii) {
    res.covered = true;
    res.witnessInitial = int(ii);
    Configuration cur{initials[ii].state, {}};
    for (const auto& b : B.basis.at(initials[ii].state))
      if (leq_vec(b, initials[ii].counts)) {
        cur.counts = b;
        break;
      }
    std::vector<int> path;
    while (true) {
      auto it = prov.find(cur);
      if (it == prov.end()) break;  // pruned provenance never wins: entries persist
      if (it->second.transition < 0) break;
      path.push_back(it->second.transition);
      cur = it->second.next;
    }
    // validate by replay from the actual initial configuration
    Configuration c = initials[ii];
    bool ok = true;
    for (int ti : path) {
      const auto& t = m.transitions[size_t(ti)];
      if (t.from != c.state || !tmca_enabled(t, c)) {
        ok = false;
        break;
      }
      c = tmca_apply(t, c);
    }
    if (ok && target.contains(c)) {
      res.witnessFound = true;
      res.witness = std::move(path);
    }
  };

  for (size_t ii = 0; ii < initials.size(); ++ii)
    if (B.contains(initials[ii])) {
      recover(ii);
      res.invariant = B;
      return res;
    }

  while (!work.empty()) {
    Configuration cur = work.back();
    work.pop_back();
    // skip elements pruned from the antichain since queueing
    {
      auto it = B.basis.find(cur.state);
      if (it == B.basis.end() ||
          std::find(it->second.begin(), it->second.end(), cur.counts) == it->second.end())
        continue;
    }
    UpwardSet curOnly;
    curOnly.basis[cur.state] = {cur.counts};
    for (int ti : byTo[size_t(cur.state)]) {
      UpwardSet pres = pre_basis(m, curOnly, m.transitions[size_t(ti)]);
      for (const auto& [s, vec] : pres.basis)
        for (const auto& v : vec) {
          ++res.iterations;
          if (B.add(s, v)) {
            Configuration c{s, v};
            prov[c] = {int(ti), cur};
            work.push_back(c);
            if (B.size() > basisCap)
              throw BudgetError("coverability basis exceeded cap of " +
                                std::to_string(basisCap));
            // early exit: every basis element lies in pre*(target), so a
            // dominated initial decides coverability without saturating
            for (size_t ii = 0; ii < initials.size(); ++ii)
              if (initials[ii].state == s && leq_vec(v, initials[ii].counts)) {
                recover(ii);
                res.invariant = B;
                return res;
              }
          }
        }
    }
  }

  res.invariant = B;
  for (size_t ii = 0; ii < initials.size(); ++ii)
    if (B.contains(initials[ii])) {
      recover(ii);
      break;
    }
  return res;
}

// Forward BFS oracle with a per-counter cap; the result is only conclusive
// when nothing was pruned (or a covering configuration was found).
inline std::optional<bool> bounded_cover_forward(const TMCA& m,
                                                 const std::vector<Configuration>& initials,
                                                 const UpwardSet& target, long long counterCap,
                                                 int maxDepth) {
  std::set<Configuration> seen;
  std::vector<Configuration> frontier;
  bool pruned = false;
  for (const auto& c : initials) {
    if (target.contains(c)) return true;
    if (seen.insert(c).second) frontier.push_back(c);
  }
  for (int depth = 0; depth < maxDepth && !frontier.empty(); ++depth) {
    std::vector<Configuration> next;
    for (const auto& c : frontier)
      for (const auto& s : tmca_step(m, c)) {
        if (target.contains(s)) return true;
        bool over = false;
        for (long long v : s.counts)
          if (v > counterCap) over = true;
        if (over) {
          pruned = true;
          continue;
        }
        if (seen.insert(s).second) next.push_back(s);
      }
    frontier = std::move(next);
  }
  if (!frontier.empty()) pruned = true;  // depth budget cut live branches
  if (pruned) return std::nullopt;
  return false;
}

}  // namespace dynrel
