/// @file  flat.hpp
/// @brief Explicit-state value iteration over all 2^n states, used as ground
///        truth for the diagram-based solver. State index bit b holds the
///        value of the b-th declared variable.

#pragma once

#include <symdp/add.hpp>
#include <symdp/mdp.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace symdp {

/// Tolerance for calling two action values a tie, shared by diagram-based
/// and explicit-state policy extraction so argmax sets are comparable.
inline double tie_tolerance(double max_value) {
  return 1e-9 * (1.0 + std::fabs(max_value));
}

/// Convergence threshold of the stopping rule: eps * (1 - beta) / (2 * beta).
/// A zero discount makes only an exact fixed point acceptable.
inline double stopping_threshold(double epsilon, double discount) {
  if (discount == 0.0) return 0.0;
  return epsilon * (1.0 - discount) / (2.0 * discount);
}

struct FlatMdp {
  std::size_t var_count = 0;
  std::uint64_t state_count = 0;
  std::vector<std::string> action_names;          // ascending
  std::vector<std::vector<DiagramRef>> cpts;      // [action][variable]
  std::vector<double> reward;                     // [state]
  double discount = 0.0;
};

namespace flat_detail {

/// Assignment vector for a state: variable b at ordering position 2b, primed
/// positions left unset.
inline void state_assignment(std::uint64_t state, std::size_t var_count,
                             std::vector<std::int8_t>& out) {
  out.assign(2 * var_count, -1);
  for (std::size_t b = 0; b < var_count; ++b) out[2 * b] = (state >> b) & 1;
}

} // namespace flat_detail

/// Enumerates the state space; rejects models beyond the cap.
inline FlatMdp build_flat(const DiagramStore& s, const MdpSpec& spec,
                          std::uint64_t state_cap = 1ull << 20) {
  FlatMdp flat;
  flat.var_count = spec.variables.size();
  if (flat.var_count >= 64 || (1ull << flat.var_count) > state_cap)
    throw Error("state space 2^" + std::to_string(flat.var_count) +
                " exceeds the explicit enumeration cap of " + std::to_string(state_cap));
  flat.state_count = 1ull << flat.var_count;
  flat.discount = spec.discount;

  for (const auto& [name, action] : spec.actions) {
    flat.action_names.push_back(name);
    std::vector<DiagramRef> row;
    for (VarId v : spec.variables) row.push_back(action.cpts.at(v.base()));
    flat.cpts.push_back(std::move(row));
  }

  std::vector<std::int8_t> assign;
  flat.reward.resize(flat.state_count);
  for (std::uint64_t st = 0; st < flat.state_count; ++st) {
    flat_detail::state_assignment(st, flat.var_count, assign);
    flat.reward[st] = s.evaluate(spec.reward, assign);
  }
  return flat;
}

/// P(t | s, a): product over variables of the per-variable probability of
/// t's bit.
inline double transition_prob(const DiagramStore& s, const FlatMdp& flat,
                              std::uint64_t from, std::size_t action, std::uint64_t to) {
  std::vector<std::int8_t> assign;
  flat_detail::state_assignment(from, flat.var_count, assign);
  double p = 1.0;
  for (std::size_t b = 0; b < flat.var_count; ++b) {
    double pt = s.evaluate(flat.cpts[action][b], assign);
    p *= (to >> b & 1) ? pt : 1.0 - pt;
  }
  return p;
}

namespace flat_detail {

/// Expected next value from `state` under `action`: successors are
/// enumerated only over variables whose outcome is uncertain at this state.
inline double expected_next(const DiagramStore& s, const FlatMdp& flat,
                            std::span<const double> values, std::uint64_t state,
                            std::size_t action, std::vector<std::int8_t>& assign) {
  state_assignment(state, flat.var_count, assign);
  std::uint64_t det_base = 0;
  // (bit index, probability of true) for the uncertain variables
  std::vector<std::pair<std::size_t, double>> uncertain;
  for (std::size_t b = 0; b < flat.var_count; ++b) {
    double p = s.evaluate(flat.cpts[action][b], assign);
    if (p == 1.0) det_base |= 1ull << b;
    else if (p != 0.0) uncertain.emplace_back(b, p);
  }
  double sum = 0.0;
  for (std::uint64_t combo = 0; combo < (1ull << uncertain.size()); ++combo) {
    std::uint64_t t = det_base;
    double prob = 1.0;
    for (std::size_t k = 0; k < uncertain.size(); ++k) {
      if (combo >> k & 1) { t |= 1ull << uncertain[k].first; prob *= uncertain[k].second; }
      else prob *= 1.0 - uncertain[k].second;
    }
    sum += prob * values[t];
  }
  return sum;
}

} // namespace flat_detail

struct FlatSolveResult {
  std::vector<double> values;                       // [state]
  std::vector<std::vector<std::size_t>> argmax;     // [state] -> action indices, ascending
  std::uint64_t iterations = 0;
  bool converged = false;
  std::vector<double> deltas;                       // sup-norm change per iteration
};

/// Value iteration from V^0 = R until the stopping rule. Argmax sets use
/// tie_tolerance around the per-state maximum of a final round of backups.
inline FlatSolveResult flat_value_iteration(const DiagramStore& s, const FlatMdp& flat,
                                            double epsilon,
                                            std::uint64_t max_iterations = 100000) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (max_iterations < 1) throw Error("max_iterations must be at least 1");
  const double threshold = stopping_threshold(epsilon, flat.discount);
  const std::size_t num_actions = flat.action_names.size();

  FlatSolveResult result;
  result.values = flat.reward;
  std::vector<double> next(flat.state_count);
  std::vector<std::int8_t> assign;

  while (result.iterations < max_iterations) {
    double delta = 0.0;
    for (std::uint64_t st = 0; st < flat.state_count; ++st) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < num_actions; ++a) {
        double q = flat.reward[st] + flat.discount *
                   flat_detail::expected_next(s, flat, result.values, st, a, assign);
        if (q > best) best = q;
      }
      next[st] = best;
      delta = std::max(delta, std::fabs(best - result.values[st]));
    }
    result.values.swap(next);
    result.deltas.push_back(delta);
    ++result.iterations;
    if (flat.discount == 0.0 ? delta == 0.0 : delta < threshold) {
      result.converged = true;
      break;
    }
  }

  result.argmax.resize(flat.state_count);
  for (std::uint64_t st = 0; st < flat.state_count; ++st) {
    std::vector<double> q(num_actions);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < num_actions; ++a) {
      q[a] = flat.reward[st] + flat.discount *
             flat_detail::expected_next(s, flat, result.values, st, a, assign);
      best = std::max(best, q[a]);
    }
    double tol = tie_tolerance(best);
    for (std::size_t a = 0; a < num_actions; ++a)
      if (q[a] >= best - tol) result.argmax[st].push_back(a);
  }
  return result;
}

/// Largest absolute gap between a value diagram and an explicit value vector.
inline double compare(const DiagramStore& s, DiagramRef v_diagram,
                      std::span<const double> v_flat, std::size_t var_count) {
  if (v_flat.size() != (1ull << var_count))
    throw Error("value vector size does not match the state space");
  std::vector<std::int8_t> assign;
  double worst = 0.0;
  for (std::uint64_t st = 0; st < v_flat.size(); ++st) {
    flat_detail::state_assignment(st, var_count, assign);
    worst = std::max(worst, std::fabs(s.evaluate(v_diagram, assign) - v_flat[st]));
  }
  return worst;
}

} // namespace symdp
