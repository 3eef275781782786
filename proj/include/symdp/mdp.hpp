/// @file  mdp.hpp
/// @brief Factored MDP model: per-action probability diagrams over current
///        state, dual/complete action diagrams for regression, reward and
///        discount, plus non-aborting validation.

#pragma once

#include <symdp/add.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace symdp {

/// One action's transition model. cpts[b] gives the probability that state
/// variable b is true after the action, as a diagram over unprimed variables
/// only (no correlations among post-action variables). A fully built spec
/// carries an entry for every declared variable; variables an input model
/// does not mention are filled with identity persistence.
struct ActionSpec {
  std::map<std::uint32_t, DiagramRef> cpts;
};

struct MdpSpec {
  std::vector<VarId> variables; // unprimed, in declaration order
  std::map<std::string, ActionSpec> actions;
  DiagramRef reward;            // over unprimed variables
  double discount = 0.0;        // in [0, 1)
};

/// CPT of a variable that keeps its current value.
inline DiagramRef persistence_cpt(DiagramStore& s, VarId var) {
  return s.indicator(var);
}

/// Diagram rooted (logically) at the primed copy of a variable: the
/// probability of each joint (primed, unprimed) assignment. Then-branch is
/// the CPT, else-branch its complement, so summing out the primed variable
/// yields constant one.
struct DualActionDiagram {
  VarId base;
  DiagramRef diagram;
};

inline DualActionDiagram build_dual_diagram(DiagramStore& s, DiagramRef cpt, VarId base_var) {
  for (VarId v : s.support(cpt))
    if (v.is_primed())
      throw Error("transition probability diagram mentions post-action variable " + s.name(v));
  for (double t : s.terminal_values(cpt))
    if (!(t >= 0.0 && t <= 1.0))
      throw Error("transition probability outside [0, 1]: " + format_double(t));
  DiagramRef d = s.ite(base_var.counterpart(), cpt, s.complement_one(cpt));
  return {base_var, d};
}

/// A run of consecutive variables whose dual diagrams have been
/// pre-multiplied into one joint factor.
struct PartitionBlock {
  std::vector<VarId> vars; // ascending ordering positions
  DiagramRef complete;     // product of the block's dual diagrams
};

/// Blocks cover the action's variables in order; each block's product stays
/// within node_limit internal nodes unless the block is a single variable.
struct ActionPartition {
  std::vector<PartitionBlock> blocks;
  std::uint64_t node_limit = UINT64_MAX;
};

/// Greedy size-capped grouping: duals are multiplied into the current block
/// until the running product would exceed node_limit internal nodes. A limit
/// of 1 degenerates to one block per variable; an unbounded limit yields the
/// single full product.
inline ActionPartition build_partitions(DiagramStore& s, const ActionSpec& action,
                                        std::uint64_t node_limit) {
  if (node_limit == 0) throw Error("partition node limit must be at least 1");
  ActionPartition part;
  part.node_limit = node_limit;
  for (const auto& [base, cpt] : action.cpts) {
    VarId var = VarId::unprimed(base);
    DiagramRef dual = build_dual_diagram(s, cpt, var).diagram;
    if (!part.blocks.empty()) {
      DiagramRef grown = s.apply(ApplyOp::Multiply, part.blocks.back().complete, dual);
      if (s.stats(grown).internal_nodes <= node_limit) {
        part.blocks.back().complete = grown;
        part.blocks.back().vars.push_back(var);
        continue;
      }
    }
    part.blocks.push_back(PartitionBlock{{var}, dual});
  }
  return part;
}

struct ValidationIssue {
  std::string where;
  std::string message;
};

/// Collects every model defect without aborting: missing or surplus CPTs,
/// out-of-range probabilities, primed variables where only current-state
/// variables belong, non-finite rewards, discount outside [0, 1).
inline std::vector<ValidationIssue> validate(const DiagramStore& s, const MdpSpec& spec) {
  std::vector<ValidationIssue> issues;
  auto flag = [&](std::string where, std::string message) {
    issues.push_back({std::move(where), std::move(message)});
  };

  if (spec.variables.empty()) flag("variables", "no state variables declared");
  if (spec.actions.empty()) flag("actions", "no actions declared");
  if (!(spec.discount >= 0.0 && spec.discount < 1.0))
    flag("discount", "discount " + format_double(spec.discount) + " outside [0, 1)");

  if (spec.reward.is_null()) {
    flag("reward", "missing reward diagram");
  } else {
    for (double v : s.terminal_values(spec.reward))
      if (!std::isfinite(v)) flag("reward", "non-finite reward value");
    for (VarId v : s.support(spec.reward))
      if (v.is_primed()) flag("reward", "reward mentions post-action variable " + s.name(v));
  }

  for (const auto& [name, action] : spec.actions) {
    for (VarId var : spec.variables)
      if (!action.cpts.count(var.base()))
        flag("action " + name, "missing transition entry for variable " + s.name(var));
    for (const auto& [base, cpt] : action.cpts) {
      std::string where = "action " + name + ", variable " +
                          s.name(VarId::unprimed(base));
      bool declared = false;
      for (VarId var : spec.variables) declared = declared || var.base() == base;
      if (!declared) flag(where, "transition entry for undeclared variable");
      if (cpt.is_null()) { flag(where, "missing probability diagram"); continue; }
      for (double t : s.terminal_values(cpt))
        if (!(t >= 0.0 && t <= 1.0))
          flag(where, "probability " + format_double(t) + " outside [0, 1]");
      for (VarId v : s.support(cpt))
        if (v.is_primed())
          flag(where, "probability diagram mentions post-action variable " + s.name(v));
    }
  }
  return issues;
}

} // namespace symdp
