#pragma once

// Counter automata with inc/dec/ifzero transitions, a semi-determinism check,
// and a bounded accepting-run search used as an oracle by the compilers.

#include "dynrel/dsl.hpp"

namespace dynrel {

enum class CAAct { Inc, Dec, IfZero };

struct CATransition {
  int from = 0;
  CAAct act = CAAct::Inc;
  int counter = 0;
  int to = 0;
};

struct CounterAutomaton {
  std::vector<std::string> states;
  std::unordered_map<std::string, int> stateIndex;
  int init = 0;
  std::set<int> accepting;
  int counters = 0;
  std::vector<CATransition> transitions;

  int add_state(const std::string& name) {
    auto it = stateIndex.find(name);
    if (it != stateIndex.end()) return it->second;
    stateIndex[name] = int(states.size());
    states.push_back(name);
    return int(states.size()) - 1;
  }
  int state_index(const std::string& name) const {
    auto it = stateIndex.find(name);
    return it == stateIndex.end() ? -1 : it->second;
  }
};

inline void validate_ca(const CounterAutomaton& m) {
  if (m.states.empty()) throw LogicError("counter automaton needs at least one state");
  if (m.counters < 1) throw LogicError("counter automaton needs at least one counter");
  if (m.init < 0 || m.init >= int(m.states.size())) throw LogicError("initial state undeclared");
  for (int f : m.accepting)
    if (f < 0 || f >= int(m.states.size())) throw LogicError("accepting state undeclared");
  for (const auto& t : m.transitions) {
    if (t.from < 0 || t.from >= int(m.states.size()) || t.to < 0 ||
        t.to >= int(m.states.size()))
      throw LogicError("transition references undeclared state");
    if (t.counter < 0 || t.counter >= m.counters)
      throw LogicError("transition references undeclared counter");
  }
}

// Each state has at most one out-transition, or exactly two forming a
// dec/ifzero pair on the same counter.
inline bool is_semi_deterministic(const CounterAutomaton& m) {
  std::map<int, std::vector<const CATransition*>> out;
  for (const auto& t : m.transitions) out[t.from].push_back(&t);
  for (const auto& [st, ts] : out) {
    if (ts.size() <= 1) continue;
    if (ts.size() != 2) return false;
    const CATransition *a = ts[0], *b = ts[1];
    if (a->act == CAAct::IfZero) std::swap(a, b);
    if (a->act != CAAct::Dec || b->act != CAAct::IfZero) return false;
    if (a->counter != b->counter) return false;
  }
  return true;
}

struct CAConfig {
  int state = 0;
  std::vector<long long> counts;

  bool operator==(const CAConfig& o) const { return state == o.state && counts == o.counts; }
  bool operator<(const CAConfig& o) const {
    if (state != o.state) return state < o.state;
    return counts < o.counts;
  }
};

inline bool ca_enabled(const CATransition& t, const CAConfig& c) {
  switch (t.act) {
    case CAAct::Inc: return true;
    case CAAct::Dec: return c.counts[size_t(t.counter)] > 0;
    case CAAct::IfZero: return c.counts[size_t(t.counter)] == 0;
  }
  return false;
}

inline CAConfig ca_apply(const CATransition& t, const CAConfig& c) {
  CAConfig r = c;
  r.state = t.to;
  if (t.act == CAAct::Inc) ++r.counts[size_t(t.counter)];
  if (t.act == CAAct::Dec) --r.counts[size_t(t.counter)];
  return r;
}

// All enabled one-step moves, as (transition index, successor).
inline std::vector<std::pair<int, CAConfig>> ca_step(const CounterAutomaton& m,
                                                     const CAConfig& c) {
  std::vector<std::pair<int, CAConfig>> out;
  for (size_t i = 0; i < m.transitions.size(); ++i)
    if (m.transitions[i].from == c.state && ca_enabled(m.transitions[i], c))
      out.emplace_back(int(i), ca_apply(m.transitions[i], c));
  return out;
}

struct Run {
  std::vector<int> transitions;  // indices into m.transitions
};

inline CAConfig ca_initial(const CounterAutomaton& m) {
  return {m.init, std::vector<long long>(size_t(m.counters), 0)};
}

// Replays a run from the initial configuration; nullopt on any disabled step.
inline std::optional<std::vector<CAConfig>> replay_run(const CounterAutomaton& m, const Run& r) {
  std::vector<CAConfig> trace{ca_initial(m)};
  for (int ti : r.transitions) {
    if (ti < 0 || ti >= int(m.transitions.size())) return std::nullopt;
    const CATransition& t = m.transitions[size_t(ti)];
    if (t.from != trace.back().state || !ca_enabled(t, trace.back())) return std::nullopt;
    trace.push_back(ca_apply(t, trace.back()));
  }
  return trace;
}

// BFS over configurations with counters capped. A found run is genuine
// (re-validated); none is inconclusive whenever the cap pruned anything.
inline std::optional<Run> bounded_accepting_run(const CounterAutomaton& m, int maxLen,
                                                long long counterCap) {
  CAConfig start = ca_initial(m);
  if (m.accepting.count(start.state)) return Run{};
  std::map<CAConfig, std::pair<CAConfig, int>> parent;  // config -> (pred, transition)
  std::vector<CAConfig> frontier{start};
  std::set<CAConfig> seen{start};
  for (int depth = 0; depth < maxLen && !frontier.empty(); ++depth) {
    std::vector<CAConfig> next;
    for (const auto& c : frontier) {
      for (const auto& [ti, succ] : ca_step(m, c)) {
        bool capped = false;
        for (long long v : succ.counts)
          if (v > counterCap) capped = true;
        if (capped || seen.count(succ)) continue;
        seen.insert(succ);
        parent[succ] = {c, ti};
        if (m.accepting.count(succ.state)) {
          Run run;
          CAConfig cur = succ;
          while (!(cur == start)) {
            auto& [pred, tr] = parent.at(cur);
            run.transitions.push_back(tr);
            cur = pred;
          }
          std::reverse(run.transitions.begin(), run.transitions.end());
          auto trace = replay_run(m, run);
          if (!trace || !m.accepting.count(trace->back().state))
            throw LogicError("internal: bounded run failed replay");
          return run;
        }
        next.push_back(succ);
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Textual format:
//   states p q f;
//   init p;
//   accept f;
//   counters 2;
//   p inc c1 -> q
//   q dec c1 -> f

inline ParseResult<CounterAutomaton> parse_ca(const std::string& src) {
  ParseResult<CounterAutomaton> res;
  detail::TokenStream ts = detail::tokenize(src, res.diagnostics);
  using detail::Token;
  CounterAutomaton m;

  if (!ts.at_ident("states")) {
    ts.error("expected 'states'");
    return res;
  }
  ts.get();
  while (!ts.failed && ts.peek().kind == Token::Kind::Ident) {
    Token t = ts.get();
    if (m.state_index(t.text) >= 0) {
      res.diagnostics.push_back({t.line, t.col, "duplicate state " + t.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    m.add_state(t.text);
  }
  if (!ts.expect(";")) return res;

  if (!ts.at_ident("init")) {
    ts.error("expected 'init'");
    return res;
  }
  ts.get();
  if (ts.peek().kind != Token::Kind::Ident) {
    ts.error("expected state name");
    return res;
  }
  Token initTok = ts.get();
  m.init = m.state_index(initTok.text);
  if (m.init < 0) {
    res.diagnostics.push_back({initTok.line, initTok.col, "undeclared state " + initTok.text,
                               SourceDiagnostic::Severity::Error});
    return res;
  }
  if (!ts.expect(";")) return res;

  if (!ts.at_ident("accept")) {
    ts.error("expected 'accept'");
    return res;
  }
  ts.get();
  while (!ts.failed && ts.peek().kind == Token::Kind::Ident) {
    Token t = ts.get();
    int s = m.state_index(t.text);
    if (s < 0) {
      res.diagnostics.push_back({t.line, t.col, "undeclared state " + t.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    m.accepting.insert(s);
  }
  if (!ts.expect(";")) return res;

  if (!ts.at_ident("counters")) {
    ts.error("expected 'counters'");
    return res;
  }
  ts.get();
  if (ts.peek().kind != Token::Kind::Nat) {
    ts.error("expected counter count");
    return res;
  }
  m.counters = std::stoi(ts.get().text);
  if (m.counters < 1) {
    ts.error("need at least one counter");
    return res;
  }
  if (!ts.expect(";")) return res;

  auto parse_counter = [&](const Token& t) -> int {
    // counter names are c1..cN
    if (t.text.size() >= 2 && t.text[0] == 'c') {
      bool digits = true;
      for (size_t i = 1; i < t.text.size(); ++i)
        if (!std::isdigit((unsigned char)t.text[i])) digits = false;
      if (digits) {
        int k = std::stoi(t.text.substr(1));
        if (k >= 1 && k <= m.counters) return k - 1;
      }
    }
    res.diagnostics.push_back({t.line, t.col, "undeclared counter " + t.text,
                               SourceDiagnostic::Severity::Error});
    return -1;
  };

  while (!ts.failed && ts.peek().kind != Token::Kind::End) {
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected state name");
      return res;
    }
    Token fromTok = ts.get();
    int from = m.state_index(fromTok.text);
    if (from < 0) {
      res.diagnostics.push_back({fromTok.line, fromTok.col, "undeclared state " + fromTok.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    CAAct act;
    if (ts.at_ident("inc"))
      act = CAAct::Inc;
    else if (ts.at_ident("dec"))
      act = CAAct::Dec;
    else if (ts.at_ident("ifzero"))
      act = CAAct::IfZero;
    else {
      ts.error("expected 'inc', 'dec' or 'ifzero'");
      return res;
    }
    ts.get();
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected counter name");
      return res;
    }
    int counter = parse_counter(ts.get());
    if (counter < 0) return res;
    if (!ts.expect("->")) return res;
    if (ts.peek().kind != Token::Kind::Ident) {
      ts.error("expected state name");
      return res;
    }
    Token toTok = ts.get();
    int to = m.state_index(toTok.text);
    if (to < 0) {
      res.diagnostics.push_back({toTok.line, toTok.col, "undeclared state " + toTok.text,
                                 SourceDiagnostic::Severity::Error});
      return res;
    }
    m.transitions.push_back({from, act, counter, to});
  }
  if (ts.failed) return res;
  try {
    validate_ca(m);
  } catch (const LogicError& e) {
    ts.error(e.what());
    return res;
  }
  res.value = std::move(m);
  return res;
}

inline std::string print_ca(const CounterAutomaton& m) {
  std::string out = "states";
  for (const auto& s : m.states) out += " " + s;
  out += ";\ninit " + m.states[size_t(m.init)] + ";\naccept";
  for (int f : m.accepting) out += " " + m.states[size_t(f)];
  out += ";\ncounters " + std::to_string(m.counters) + ";\n";
  for (const auto& t : m.transitions) {
    out += m.states[size_t(t.from)];
    out += t.act == CAAct::Inc ? " inc " : t.act == CAAct::Dec ? " dec " : " ifzero ";
    out += "c" + std::to_string(t.counter + 1) + " -> " + m.states[size_t(t.to)] + "\n";
  }
  return out;
}

}  // namespace dynrel
