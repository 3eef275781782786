// Command-line driver: parse or generate a model, solve it symbolically or
// with the explicit-state method, print a deterministic key: value report,
// and optionally export value/policy diagrams as DOT.
//
// Exit codes: 0 solved, 2 invalid model, 3 iteration cap hit, 64 bad usage.

#include <CLI11.hpp>

#include <symdp/bench.hpp>
#include <symdp/flat.hpp>
#include <symdp/parser.hpp>
#include <symdp/solver.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidModel = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitUsage = 64;

struct Options {
  std::string input;
  std::string gen;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string method = "spudd";
  double epsilon = 0.01;
  std::string bigadd = "inf";
  std::uint64_t max_iters = 100000;
  bool check_oracle = false;
  std::string dump_value;
  std::string dump_policy;
  std::uint64_t stats_every = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw symdp::Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw symdp::Error("cannot open " + path + " for writing");
  out << bytes;
}

std::uint64_t parse_bigadd(const std::string& text) {
  if (text == "inf") return UINT64_MAX;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0)
    throw CLI::ValidationError("--bigadd", "expected a positive count or 'inf'");
  return value;
}

// Model construction: either a file or a named generator family.
symdp::MdpSpec load_model(symdp::DiagramStore& store, const Options& opt,
                          std::string& label) {
  using namespace symdp;
  if (!opt.input.empty()) {
    label = opt.input;
    return parse_mdp(store, read_file(opt.input));
  }
  if (opt.gen == "factory_mini") {
    label = "factory_mini";
    return gen_factory_mini(store);
  }
  if (opt.n == 0)
    throw CLI::ValidationError("--gen", "family '" + opt.gen + "' needs --n");
  std::ostringstream name;
  if (opt.gen == "expon") {
    name << "expon(n=" << opt.n << ")";
    label = name.str();
    return gen_expon(store, opt.n);
  }
  if (opt.gen == "linear") {
    name << "linear(n=" << opt.n << ")";
    label = name.str();
    return gen_linear(store, opt.n);
  }
  if (opt.gen == "random") {
    name << "random(n=" << opt.n << ",seed=" << opt.seed << ")";
    label = name.str();
    return gen_random(store, opt.n, 3, opt.seed);
  }
  throw CLI::ValidationError("--gen", "unknown family '" + opt.gen +
                             "' (expon, linear, factory_mini, random)");
}

// Distinct values of a flat vector, matching terminal_values' exact-compare.
std::size_t distinct_count(const std::vector<double>& values) {
  std::set<double> seen(values.begin(), values.end());
  return seen.size();
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

// True when the symbolic policy names the same action set as the flat argmax
// at every state.
bool argmax_sets_agree(const symdp::DiagramStore& store, const symdp::FlatMdp& flat,
                       const symdp::FlatSolveResult& ref, const symdp::Policy& policy) {
  std::vector<std::int8_t> assign;
  for (std::uint64_t st = 0; st < flat.state_count; ++st) {
    symdp::flat_detail::state_assignment(st, flat.var_count, assign);
    auto set_index = static_cast<std::size_t>(store.evaluate(policy.diagram, assign));
    std::vector<std::string> expect;
    for (std::size_t a : ref.argmax[st]) expect.push_back(flat.action_names[a]);
    if (policy.action_sets.at(set_index) != expect) return false;
  }
  return true;
}

int run(const Options& opt) {
  using namespace symdp;
  using clock = std::chrono::steady_clock;

  DiagramStore store;
  std::string label;
  MdpSpec spec;
  try {
    spec = load_model(store, opt, label);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidModel;
  }

  auto issues = validate(store, spec);
  if (!issues.empty()) {
    for (const auto& issue : issues)
      std::cerr << "invalid model: " << issue.where << ": " << issue.message << "\n";
    return kExitInvalidModel;
  }

  if (opt.check_oracle && spec.variables.size() > 20) {
    std::cerr << "error: --check-oracle supports at most 20 variables\n";
    return kExitUsage;
  }

  SolveConfig config;
  config.epsilon = opt.epsilon;
  config.node_limit = parse_bigadd(opt.bigadd);
  config.max_iterations = opt.max_iters;

  std::vector<std::string> report;
  auto field = [&](const std::string& key, const std::string& value) {
    report.push_back(key + ": " + value);
  };
  field("model", label);
  field("method", opt.method);
  field("variables", std::to_string(spec.variables.size()));
  field("actions", std::to_string(spec.actions.size()));
  field("epsilon", format_double(opt.epsilon));
  field("bigadd", opt.bigadd == "inf" ? "inf" : std::to_string(config.node_limit));

  const auto started = clock::now();
  bool converged = false;

  if (opt.method == "spudd") {
    auto result = value_iteration(store, spec, config);
    converged = result.converged;
    field("iterations", std::to_string(result.iterations));
    field("converged", result.converged ? "true" : "false");
    field("final_delta", format_double(result.trace.back().delta));
    auto vstats = store.stats(result.value);
    field("value_internal_nodes", std::to_string(vstats.internal_nodes));
    field("value_leaves", std::to_string(vstats.leaves));
    field("value_equivalent_tree_leaves", std::to_string(vstats.equivalent_tree_leaves));
    field("distinct_values", std::to_string(store.terminal_values(result.value).size()));

    Policy policy = extract_policy(store, spec, result.value, config);
    auto pstats = store.stats(policy.diagram);
    field("policy_internal_nodes", std::to_string(pstats.internal_nodes));
    field("policy_leaves", std::to_string(pstats.leaves));
    field("policy_action_sets", std::to_string(policy.action_sets.size()));

    if (opt.check_oracle) {
      FlatMdp flat = build_flat(store, spec);
      auto ref = flat_value_iteration(store, flat, opt.epsilon, opt.max_iters);
      field("supnorm_vs_flat",
            format_double(compare(store, result.value, ref.values, flat.var_count)));
      field("argmax_agree", argmax_sets_agree(store, flat, ref, policy) ? "true" : "false");
    }

    if (!opt.dump_value.empty())
      write_file(opt.dump_value, store.to_dot(result.value));
    if (!opt.dump_policy.empty())
      write_file(opt.dump_policy, store.to_dot(policy.diagram, [&](double v) {
        return join(policy.action_sets.at(static_cast<std::size_t>(v)), ',');
      }));

    if (opt.stats_every > 0)
      for (std::size_t i = opt.stats_every - 1; i < result.trace.size(); i += opt.stats_every)
        report.push_back("trace[" + std::to_string(i + 1) + "]: internal_nodes=" +
                         std::to_string(result.trace[i].internal_nodes) + " leaves=" +
                         std::to_string(result.trace[i].leaves) + " delta=" +
                         format_double(result.trace[i].delta));
  } else if (opt.method == "flat") {
    FlatMdp flat = build_flat(store, spec);
    auto result = flat_value_iteration(store, flat, opt.epsilon, opt.max_iters);
    converged = result.converged;
    field("states", std::to_string(flat.state_count));
    field("iterations", std::to_string(result.iterations));
    field("converged", result.converged ? "true" : "false");
    field("final_delta", format_double(result.deltas.back()));
    field("distinct_values", std::to_string(distinct_count(result.values)));

    if (opt.check_oracle) {
      auto sym = value_iteration(store, spec, config);
      field("supnorm_vs_flat",
            format_double(compare(store, sym.value, result.values, flat.var_count)));
      Policy policy = extract_policy(store, spec, sym.value, config);
      field("argmax_agree", argmax_sets_agree(store, flat, result, policy) ? "true" : "false");
    }

    if (opt.stats_every > 0)
      for (std::size_t i = opt.stats_every - 1; i < result.deltas.size(); i += opt.stats_every)
        report.push_back("trace[" + std::to_string(i + 1) +
                         "]: delta=" + format_double(result.deltas[i]));
  } else {
    std::cerr << "error: --method must be spudd or flat\n";
    return kExitUsage;
  }

  const auto elapsed =
      std::chrono::duration<double, std::milli>(clock::now() - started).count();
  for (const auto& line : report) std::cout << line << "\n";
  std::cout << "wall_ms: " << elapsed << "\n";
  return converged ? kExitOk : kExitNoConvergence;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-diagram MDP solver"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* solve = app.add_subcommand("solve", "Solve a factored MDP");
  auto* input = solve->add_option("--input", opt.input, "Model file to solve");
  auto* gen = solve->add_option("--gen", opt.gen,
                                "Generator family: expon, linear, factory_mini, random");
  input->excludes(gen);
  gen->excludes(input);
  solve->add_option("--n", opt.n, "Generator size");
  solve->add_option("--seed", opt.seed, "Generator seed (random family)");
  solve->add_option("--method", opt.method, "spudd or flat")
      ->check(CLI::IsMember({"spudd", "flat"}));
  solve->add_option("--epsilon", opt.epsilon, "Stopping precision")
      ->check(CLI::PositiveNumber);
  solve->add_option("--bigadd", opt.bigadd, "Partition block node cap, or 'inf'");
  solve->add_option("--max-iters", opt.max_iters, "Iteration safety cap")
      ->check(CLI::PositiveNumber);
  solve->add_flag("--check-oracle", opt.check_oracle,
                  "Also run the other method and compare (at most 20 variables)");
  solve->add_option("--dump-value", opt.dump_value, "Write value diagram DOT here");
  solve->add_option("--dump-policy", opt.dump_policy, "Write policy diagram DOT here");
  solve->add_option("--stats-every", opt.stats_every, "Report every Ith iteration");

  try {
    app.parse(argc, argv);
    if (opt.input.empty() && opt.gen.empty())
      throw CLI::ValidationError("solve", "one of --input or --gen is required");
    parse_bigadd(opt.bigadd);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return run(opt);
  } catch (const CLI::Error& e) { // generator family/size problems
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const symdp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidModel;
  }
}
