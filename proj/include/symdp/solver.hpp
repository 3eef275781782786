/// @file  solver.hpp
/// @brief Diagram-based value iteration: regression through (blocks of)
///        complete action diagrams, discounted Bellman backups, the
///        sup-norm stopping rule, and argmax policy extraction.

#pragma once

#include <symdp/add.hpp>
#include <symdp/flat.hpp>
#include <symdp/mdp.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace symdp {

struct SolveConfig {
  double epsilon = 0.01;
  std::uint64_t node_limit = UINT64_MAX;  // block-product size cap
  std::uint64_t max_iterations = 100000;
  /// Transient nodes tolerated beyond the solve-entry watermark before the
  /// store is swept back down to the live roots.
  std::uint64_t sweep_node_budget = 1ull << 20;
};

struct IterationStats {
  std::uint64_t internal_nodes = 0; // of the new value diagram
  std::uint64_t leaves = 0;
  double delta = 0.0;               // sup-norm change this round
};

struct SolveResult {
  DiagramRef value;
  std::uint64_t iterations = 0;
  std::vector<IterationStats> trace;
  bool converged = false;
};

struct Policy {
  DiagramRef diagram; // terminal = index into action_sets
  std::vector<std::vector<std::string>> action_sets; // each sorted, nonempty
};

/// Expected next-stage value as a function of the current state:
/// multiplies in each block's complete diagram and immediately sums out that
/// block's primed variables, walking blocks from the deepest variables up so
/// intermediates stay near node_limit plus the value diagram's size.
inline DiagramRef regress(DiagramStore& s, DiagramRef v_primed,
                          const ActionPartition& partition) {
  for (VarId v : s.support(v_primed))
    if (!v.is_primed())
      throw Error("regression input mentions pre-action variable " + s.name(v));
  DiagramRef acc = v_primed;
  for (auto block = partition.blocks.rbegin(); block != partition.blocks.rend(); ++block) {
    acc = s.apply(ApplyOp::Multiply, acc, block->complete);
    for (auto var = block->vars.rbegin(); var != block->vars.rend(); ++var)
      acc = s.sum_out(acc, var->counterpart());
  }
  return acc;
}

/// One action's backup: R + beta * E[V(next)]. A zero discount short-circuits
/// to the reward itself.
inline DiagramRef bellman_backup(DiagramStore& s, const MdpSpec& spec,
                                 DiagramRef v, const ActionPartition& partition) {
  if (spec.discount == 0.0) return spec.reward;
  DiagramRef expected = regress(s, s.swap_primed(v), partition);
  return s.apply(ApplyOp::Add, spec.reward, s.scale(expected, spec.discount));
}

namespace solver_detail {

inline std::map<std::string, ActionPartition>
build_all_partitions(DiagramStore& s, const MdpSpec& spec, std::uint64_t node_limit) {
  std::map<std::string, ActionPartition> parts;
  for (const auto& [name, action] : spec.actions)
    parts.emplace(name, build_partitions(s, action, node_limit));
  return parts;
}

inline void check_config(const SolveConfig& config) {
  if (!(config.epsilon > 0.0)) throw Error("epsilon must be positive");
  if (config.max_iterations < 1) throw Error("max_iterations must be at least 1");
  if (config.node_limit < 1) throw Error("node limit must be at least 1");
}

inline void check_model(const DiagramStore& s, const MdpSpec& spec) {
  auto issues = validate(s, spec);
  if (!issues.empty())
    throw Error("invalid model: " + issues.front().where + ": " + issues.front().message);
}

} // namespace solver_detail

/// Value iteration from V^0 = R. Each round backs up every action and takes
/// the pointwise maximum; stops when the sup-norm change drops below
/// stopping_threshold (exact zero when the discount is zero). Transient
/// nodes above the entry watermark are swept whenever they outgrow
/// sweep_node_budget, so refs created before the call stay valid.
inline SolveResult value_iteration(DiagramStore& s, const MdpSpec& spec,
                                   const SolveConfig& config = {}) {
  solver_detail::check_config(config);
  solver_detail::check_model(s, spec);
  const double threshold = stopping_threshold(config.epsilon, spec.discount);

  auto partitions = solver_detail::build_all_partitions(s, spec, config.node_limit);
  const std::size_t watermark = s.watermark();

  SolveResult result;
  result.value = spec.reward;
  while (result.iterations < config.max_iterations) {
    DiagramRef next;
    for (const auto& [name, partition] : partitions) {
      DiagramRef backed = bellman_backup(s, spec, result.value, partition);
      next = next.is_null() ? backed : s.apply(ApplyOp::Max, next, backed);
    }
    double delta = s.sup_norm_diff(next, result.value);
    result.value = next;
    ++result.iterations;
    auto st = s.stats(next);
    result.trace.push_back({st.internal_nodes, st.leaves, delta});
    if (spec.discount == 0.0 ? delta == 0.0 : delta < threshold) {
      result.converged = true;
      break;
    }
    if (s.node_count() > watermark + config.sweep_node_budget) {
      std::vector<DiagramRef> roots{result.value};
      result.value = s.sweep_above(watermark, roots)[0];
    }
  }
  return result;
}

/// Argmax extraction: one more backup per action against the converged
/// value; a state's set holds every action whose backup is within
/// tie_tolerance of the per-state maximum. Terminals index an intern table
/// of sorted action-name sets.
inline Policy extract_policy(DiagramStore& s, const MdpSpec& spec, DiagramRef v,
                             const SolveConfig& config = {}) {
  solver_detail::check_config(config);
  solver_detail::check_model(s, spec);
  if (spec.actions.size() > 52)
    throw Error("policy extraction supports at most 52 actions");

  auto partitions = solver_detail::build_all_partitions(s, spec, config.node_limit);
  std::vector<std::string> names;
  std::vector<DiagramRef> backups;
  DiagramRef best;
  for (const auto& [name, partition] : partitions) {
    DiagramRef backed = bellman_backup(s, spec, v, partition);
    names.push_back(name);
    backups.push_back(backed);
    best = best.is_null() ? backed : s.apply(ApplyOp::Max, best, backed);
  }

  // Bitmask diagram of qualifying actions per state; exact because masks are
  // small integers.
  DiagramRef mask = s.terminal(0.0);
  for (std::size_t a = 0; a < backups.size(); ++a) {
    DiagramRef member = s.combine(backups[a], best, [](double q, double m) {
      return q >= m - tie_tolerance(m) ? 1.0 : 0.0;
    });
    mask = s.apply(ApplyOp::Add, mask, s.scale(member, static_cast<double>(1ull << a)));
  }

  Policy policy;
  std::map<double, std::size_t> intern; // mask value -> set index, ascending
  for (double m : s.terminal_values(mask)) {
    intern.emplace(m, policy.action_sets.size());
    std::vector<std::string> set;
    auto bits = static_cast<std::uint64_t>(m);
    for (std::size_t a = 0; a < names.size(); ++a)
      if (bits >> a & 1) set.push_back(names[a]);
    if (set.empty()) throw Error("internal: empty action set in policy");
    policy.action_sets.push_back(std::move(set)); // names already sorted
  }
  policy.diagram = s.combine(mask, s.terminal(0.0), [&](double m, double) {
    return static_cast<double>(intern.at(m));
  });
  return policy;
}

} // namespace symdp
