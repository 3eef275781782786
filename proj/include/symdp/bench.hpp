/// @file  bench.hpp
/// @brief Model generators: the binary-counter worst case, the prefix-chain
///        best case, the bolt worked example, and seeded random models for
///        oracle fuzzing. All generators fill persistence entries so the
///        resulting specs validate as complete.

#pragma once

#include <symdp/add.hpp>
#include <symdp/mdp.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace symdp {

namespace bench_detail {

inline std::string padded(const std::string& prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  while (digits.size() < width) digits.insert(digits.begin(), '0');
  return prefix + digits;
}

inline std::size_t digits_of(std::size_t n) { return std::to_string(n).size(); }

inline void fill_persistence(DiagramStore& s, MdpSpec& spec) {
  for (auto& [name, action] : spec.actions)
    for (VarId var : spec.variables)
      if (!action.cpts.count(var.base()))
        action.cpts[var.base()] = persistence_cpt(s, var);
}

} // namespace bench_detail

/// Binary-counter domain: action a_i turns variable i on when every lower
/// variable is on, and turns all lower variables off; reward only when all n
/// are on. The only way up is counting through all 2^n states, so every
/// state ends at a different value.
inline MdpSpec gen_expon(DiagramStore& s, std::size_t n, double reward = 1e16,
                         double discount = 0.99) {
  if (n < 1) throw Error("need at least one variable");
  const std::size_t width = bench_detail::digits_of(n);
  MdpSpec spec;
  spec.discount = discount;
  for (std::size_t i = 1; i <= n; ++i)
    spec.variables.push_back(s.add_variable(bench_detail::padded("x", i, width)));

  for (std::size_t i = 1; i <= n; ++i) {
    ActionSpec action;
    // target: on iff the whole lower prefix is on, else unchanged
    DiagramRef persist = s.indicator(spec.variables[i - 1]);
    DiagramRef set = s.terminal(1.0);
    for (std::size_t j = i - 1; j >= 1; --j)
      set = s.ite(spec.variables[j - 1], set, persist);
    action.cpts[spec.variables[i - 1].base()] = set;
    for (std::size_t j = 1; j < i; ++j) // lower variables reset
      action.cpts[spec.variables[j - 1].base()] = s.terminal(0.0);
    spec.actions.emplace(bench_detail::padded("a", i, width), std::move(action));
  }

  DiagramRef all_on = s.terminal(reward);
  for (std::size_t j = n; j >= 1; --j)
    all_on = s.ite(spec.variables[j - 1], all_on, s.terminal(0.0));
  spec.reward = all_on;
  bench_detail::fill_persistence(s, spec);
  return spec;
}

/// Prefix-chain domain: action a_i turns variable i on when variable i-1 is
/// on (a_1 unconditionally); nothing ever turns off; reward while variable n
/// is on. The value depends only on the highest variable already on, giving
/// n+1 distinct values. Variables are declared from x_n down to x_1 so the
/// value diagram is a single chain of n nodes.
inline MdpSpec gen_linear(DiagramStore& s, std::size_t n, double reward = 10.0,
                          double discount = 0.9) {
  if (n < 1) throw Error("need at least one variable");
  const std::size_t width = bench_detail::digits_of(n);
  MdpSpec spec;
  spec.discount = discount;
  std::vector<VarId> by_index(n); // by_index[i-1] = variable x_i
  for (std::size_t i = n; i >= 1; --i) {
    VarId v = s.add_variable(bench_detail::padded("x", i, width));
    spec.variables.push_back(v);
    by_index[i - 1] = v;
  }

  for (std::size_t i = 1; i <= n; ++i) {
    ActionSpec action;
    DiagramRef cpt = i == 1 ? s.terminal(1.0)
                            : s.ite(by_index[i - 2], s.terminal(1.0),
                                    s.indicator(by_index[i - 1]));
    action.cpts[by_index[i - 1].base()] = cpt;
    spec.actions.emplace(bench_detail::padded("a", i, width), std::move(action));
  }

  spec.reward = s.ite(by_index[n - 1], s.terminal(reward), s.terminal(0.0));
  bench_detail::fill_persistence(s, spec);
  return spec;
}

/// The bolt worked example: connecting depends on planing/punching or
/// drilling plus bolt availability, punching persists explicitly, painting
/// gates the reward, and one spare variable never matters.
inline MdpSpec gen_factory_mini(DiagramStore& s) {
  MdpSpec spec;
  spec.discount = 0.9;
  for (const char* name : {"C", "P", "PL", "APU", "BPU", "ADR", "BDR", "BO", "spare"})
    spec.variables.push_back(s.add_variable(name));
  VarId C = spec.variables[0], P = spec.variables[1], PL = spec.variables[2],
        APU = spec.variables[3], BPU = spec.variables[4], ADR = spec.variables[5],
        BDR = spec.variables[6], BO = spec.variables[7];

  DiagramRef one = s.terminal(1.0), zero = s.terminal(0.0);
  // (PL and not APU, or not PL) and ADR and BDR — the drilled route
  DiagramRef needs_drill = s.ite(PL, s.ite(APU, zero, one), one);
  DiagramRef drilled = s.apply(ApplyOp::Multiply, needs_drill,
                               s.apply(ApplyOp::Multiply, s.indicator(ADR), s.indicator(BDR)));
  // PL and APU and BPU — the punched route
  DiagramRef punched = s.apply(ApplyOp::Multiply, s.indicator(PL),
                               s.apply(ApplyOp::Multiply, s.indicator(APU), s.indicator(BPU)));
  DiagramRef connectable =
      s.apply(ApplyOp::Multiply, s.apply(ApplyOp::Add, drilled, punched), s.indicator(BO));
  DiagramRef c_cpt = s.scale(s.ite(C, one, connectable), 0.9);

  ActionSpec bolt;
  bolt.cpts[C.base()] = c_cpt;
  bolt.cpts[APU.base()] = s.indicator(APU); // explicit: punched stays punched
  spec.actions.emplace("bolt", std::move(bolt));

  spec.reward = s.ite(C, s.ite(P, s.terminal(10.0), s.terminal(5.0)), zero);
  bench_detail::fill_persistence(s, spec);
  return spec;
}

/// Seeded random model for oracle fuzzing. Exactly one variable per action
/// gets a genuinely probabilistic table; every other table is 0/1-valued.
/// Keeping at most one uncertain factor per action makes block-product
/// arithmetic exact, so partitioned backups agree bit for bit.
inline MdpSpec gen_random(DiagramStore& s, std::size_t n, std::size_t actions,
                          std::uint64_t seed) {
  if (n < 1 || n > 12) throw Error("random models support 1..12 variables");
  if (actions < 1 || actions > 10) throw Error("random models support 1..10 actions");
  std::mt19937_64 rng(seed);
  MdpSpec spec;
  spec.discount = 0.9;
  for (std::size_t i = 0; i < n; ++i)
    spec.variables.push_back(s.add_variable(bench_detail::padded("v", i, 2)));

  // leaves drawn from the tenth grid; shallow random parent structure
  auto tree = [&](int depth, auto&& leaf) -> DiagramRef {
    auto rec = [&](auto&& self, int d) -> DiagramRef {
      if (d == 0 || rng() % 3 == 0) return leaf();
      VarId v = spec.variables[rng() % n];
      DiagramRef t = self(self, d - 1);
      DiagramRef e = self(self, d - 1);
      return s.ite(v, t, e);
    };
    return rec(rec, depth);
  };

  for (std::size_t a = 0; a < actions; ++a) {
    ActionSpec action;
    std::size_t stochastic = rng() % n;
    for (std::size_t i = 0; i < n; ++i) {
      DiagramRef cpt;
      if (i == stochastic) {
        cpt = tree(3, [&] { return s.terminal(double(rng() % 11) / 10.0); });
      } else {
        switch (rng() % 4) {
          case 0: cpt = persistence_cpt(s, spec.variables[i]); break;
          case 1: cpt = s.terminal(double(rng() % 2)); break;
          case 2: cpt = s.indicator(spec.variables[rng() % n]); break;
          default: cpt = tree(2, [&] { return s.terminal(double(rng() % 2)); }); break;
        }
      }
      action.cpts[spec.variables[i].base()] = cpt;
    }
    spec.actions.emplace(bench_detail::padded("act", a, 1), std::move(action));
  }

  spec.reward = tree(3, [&] { return s.terminal(double(rng() % 11)); });
  return spec;
}

} // namespace symdp
