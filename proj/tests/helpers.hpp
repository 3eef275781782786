// Shared test utilities: an evaluation oracle that walks diagrams through the
// introspection API only (independent of DiagramStore::evaluate and of the
// memoized operations), plus random diagram builders for property tests.

#pragma once

#include <symdp/add.hpp>

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <vector>

namespace testutil {

using symdp::DiagramRef;
using symdp::DiagramStore;
using symdp::VarId;

// Assignment encoded as a bit mask over ordering positions.
inline double oracle_eval(const DiagramStore& s, DiagramRef f, std::uint64_t bits) {
  while (!s.is_terminal(f)) {
    bool val = (bits >> s.node_var(f).position()) & 1;
    f = val ? s.then_child(f) : s.else_child(f);
  }
  return s.terminal_value(f);
}

inline std::vector<std::int8_t> assignment_vector(std::uint64_t bits, std::size_t positions) {
  std::vector<std::int8_t> out(positions);
  for (std::size_t p = 0; p < positions; ++p) out[p] = (bits >> p) & 1;
  return out;
}

inline bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

// Independent path counter (tree-unfolded leaf count).
inline std::uint64_t oracle_path_count(const DiagramStore& s, DiagramRef f) {
  if (s.is_terminal(f)) return 1;
  return oracle_path_count(s, s.then_child(f)) + oracle_path_count(s, s.else_child(f));
}

// Collects every reachable node handle exactly once.
inline void collect_nodes(const DiagramStore& s, DiagramRef f,
                          std::set<std::uint32_t>& seen, std::vector<DiagramRef>& out) {
  if (!seen.insert(f.index()).second) return;
  out.push_back(f);
  if (!s.is_terminal(f)) {
    collect_nodes(s, s.then_child(f), seen, out);
    collect_nodes(s, s.else_child(f), seen, out);
  }
}

inline std::vector<DiagramRef> reachable_nodes(const DiagramStore& s, DiagramRef f) {
  std::set<std::uint32_t> seen;
  std::vector<DiagramRef> out;
  collect_nodes(s, f, seen, out);
  return out;
}

// Random diagram over the given variables, built with ite so any variable
// order in the recursion is legal. Terminal pool includes both zero signs
// and exact one to exercise the identity shortcuts.
inline DiagramRef random_diagram(DiagramStore& s, std::mt19937_64& rng,
                                 std::span<const VarId> vars, int depth) {
  static const double pool[] = {0.0, -0.0, 1.0, 0.5, 2.25, -3.5, 10.0, 7.125};
  if (depth == 0 || vars.empty() || rng() % 4 == 0)
    return s.terminal(pool[rng() % 8]);
  VarId v = vars[rng() % vars.size()];
  DiagramRef t = random_diagram(s, rng, vars, depth - 1);
  DiagramRef e = random_diagram(s, rng, vars, depth - 1);
  return s.ite(v, t, e);
}

} // namespace testutil
