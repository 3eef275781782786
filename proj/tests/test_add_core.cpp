#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "property_suite.hpp"

#include <symdp/add.hpp>

using namespace symdp;
using testutil::oracle_eval;
using testutil::same_bits;

TEST_CASE("variable registry assigns interleaved positions") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  CHECK(a.position() == 0);
  CHECK(b.position() == 2);
  CHECK(a.counterpart().position() == 1);
  CHECK(a.counterpart().is_primed());
  CHECK(a.counterpart().base() == 0);
  CHECK(a.counterpart().counterpart() == a);
  CHECK(s.variable_count() == 2);
  CHECK(s.name(a) == "a");
  CHECK(s.name(a.counterpart()) == "a'");
  CHECK(s.find_variable("b") == b);
  CHECK_FALSE(s.find_variable("c").has_value());
  CHECK_THROWS_AS(s.add_variable("a"), Error);
  CHECK_THROWS_AS(s.add_variable(""), Error);
}

TEST_CASE("terminals are canonical by bit pattern") {
  DiagramStore s;
  CHECK(s.terminal(0.5) == s.terminal(0.5));
  CHECK(s.terminal(0.1 + 0.2) == s.terminal(0.1 + 0.2));
  CHECK_FALSE(s.terminal(0.1 + 0.2) == s.terminal(0.3)); // differ in the last ulp
  CHECK_FALSE(s.terminal(0.0) == s.terminal(-0.0));      // distinct bit patterns
  CHECK(s.terminal_value(s.terminal(7.25)) == 7.25);
  CHECK(s.is_terminal(s.terminal(1.0)));
  CHECK_THROWS_AS(s.terminal(std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(s.terminal(std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("internal node construction enforces reduction and ordering") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef t1 = s.terminal(1.0), t0 = s.terminal(0.0);

  SECTION("equal children collapse") {
    CHECK(s.internal(a, t1, t1) == t1);
  }
  SECTION("identical triples share one node") {
    DiagramRef n1 = s.internal(b, t1, t0);
    DiagramRef n2 = s.internal(b, t1, t0);
    CHECK(n1 == n2);
  }
  SECTION("a variable must precede its children") {
    DiagramRef on_a = s.internal(a, t1, t0);
    CHECK_THROWS_AS(s.internal(b, on_a, t0), Error);       // b comes after a
    CHECK_THROWS_AS(s.internal(a, on_a, t0), Error);       // repeat of the same variable
    DiagramRef on_primed = s.internal(a.counterpart(), t1, t0);
    CHECK_THROWS_AS(s.internal(a.counterpart(), on_primed, t0), Error);
    // unprimed a precedes its primed copy, so this direction is fine
    CHECK_NOTHROW(s.internal(a, on_primed, t0));
  }
}

TEST_CASE("indicator has one internal node over 1 and 0") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  DiagramRef f = s.indicator(a);
  auto st = s.stats(f);
  CHECK(st.internal_nodes == 1);
  CHECK(st.leaves == 2);
  CHECK(st.equivalent_tree_leaves == 2);
  CHECK(oracle_eval(s, f, 0b1) == 1.0);
  CHECK(oracle_eval(s, f, 0b0) == 0.0);
}

TEST_CASE("apply computes pointwise arithmetic") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.ite(a, s.terminal(2.0), s.terminal(5.0));
  DiagramRef g = s.ite(b, s.terminal(-1.5), s.terminal(4.0));

  struct Case { ApplyOp op; double (*fn)(double, double); };
  auto sum = [](double x, double y) { return x + y; };
  auto dif = [](double x, double y) { return x - y; };
  auto mul = [](double x, double y) { return x * y; };
  auto mx = [](double x, double y) { return x > y ? x : y; };
  Case cases[] = {{ApplyOp::Add, +sum}, {ApplyOp::Subtract, +dif},
                  {ApplyOp::Multiply, +mul}, {ApplyOp::Max, +mx}};
  for (auto [op, fn] : cases) {
    DiagramRef r = s.apply(op, f, g);
    for (std::uint64_t bits = 0; bits < 16; ++bits) {
      CAPTURE(static_cast<int>(op), bits);
      CHECK(same_bits(oracle_eval(s, r, bits),
                      fn(oracle_eval(s, f, bits), oracle_eval(s, g, bits))));
    }
  }
  // terminal-only operands stay terminal
  CHECK(s.apply(ApplyOp::Add, s.terminal(2.0), s.terminal(0.25)) == s.terminal(2.25));
  CHECK_THROWS_AS( // overflow to infinity is rejected, not stored
      s.apply(ApplyOp::Multiply, s.terminal(1e308), s.terminal(1e308)), Error);
}

TEST_CASE("exact identities hold bitwise") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  std::mt19937_64 rng(42);
  std::vector<VarId> vars{a, a.counterpart(), b, b.counterpart()};
  for (int i = 0; i < 50; ++i) {
    DiagramRef f = testutil::random_diagram(s, rng, vars, 4);
    CHECK(s.apply(ApplyOp::Max, f, f) == f);
    DiagramRef z = s.apply(ApplyOp::Subtract, f, f);
    REQUIRE(s.is_terminal(z));
    CHECK(same_bits(s.terminal_value(z), 0.0)); // positive zero even if f holds -0
    CHECK(s.scale(f, 1.0) == f);
    CHECK(s.apply(ApplyOp::Multiply, f, s.terminal(1.0)) == f);
  }
  // complement against one is exact on representable probabilities
  CHECK(s.terminal_value(s.complement_one(s.terminal(0.3))) == 1.0 - 0.3);
  CHECK(s.terminal_value(s.complement_one(s.terminal(1.0))) == 0.0);
}

TEST_CASE("restrict fixes a variable and removes it") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  // f = a ? (b ? 2 : 5) : 5
  DiagramRef inner = s.ite(b, s.terminal(2.0), s.terminal(5.0));
  DiagramRef f = s.ite(a, inner, s.terminal(5.0));

  CHECK(s.restrict_var(f, a, true) == inner);
  CHECK(s.restrict_var(f, a, false) == s.terminal(5.0));
  DiagramRef rb = s.restrict_var(f, b, true); // a ? 2 : 5
  CHECK_FALSE(s.mentions(rb, b));
  CHECK(oracle_eval(s, rb, 0b01) == 2.0);
  CHECK(oracle_eval(s, rb, 0b00) == 5.0);
  // restricting an absent variable is the identity
  CHECK(s.restrict_var(f, a.counterpart(), true) == f);
}

TEST_CASE("sum_out adds both cofactors and drops the variable") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.apply(ApplyOp::Add, s.indicator(a), s.scale(s.indicator(b), 2.0));
  DiagramRef g = s.sum_out(f, b); // (a + 2) + (a + 0) = 2a + 2
  CHECK_FALSE(s.mentions(g, b));
  CHECK(oracle_eval(s, g, 0b01) == 4.0);
  CHECK(oracle_eval(s, g, 0b00) == 2.0);
  // summing out an absent variable doubles the function
  DiagramRef h = s.sum_out(s.terminal(3.0), a);
  CHECK(s.terminal_value(h) == 6.0);
}

TEST_CASE("swap_primed relabels cleanly and rejects mixed diagrams") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.ite(a, s.ite(b, s.terminal(1.0), s.terminal(2.0)), s.terminal(3.0));
  DiagramRef fp = s.swap_primed(f);
  auto sup = s.support(fp);
  REQUIRE(sup.size() == 2);
  CHECK(sup[0] == a.counterpart());
  CHECK(sup[1] == b.counterpart());
  CHECK(s.swap_primed(fp) == f);
  CHECK(oracle_eval(s, fp, 0b1010) == 1.0); // a'=1, b'=1
  CHECK(oracle_eval(s, fp, 0b0010) == 2.0); // a'=1, b'=0
  CHECK(oracle_eval(s, fp, 0b0000) == 3.0);

  // a diagram mixing a and a' cannot be relabeled without breaking the order
  DiagramRef mixed = s.ite(a, s.indicator(a.counterpart()), s.terminal(0.0));
  CHECK_THROWS_AS(s.swap_primed(mixed), Error);
}

TEST_CASE("evaluate requires the assignment to cover the path") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.ite(a, s.indicator(b), s.terminal(9.0));
  std::vector<std::int8_t> full{1, -1, 1, -1};
  CHECK(s.evaluate(f, full) == 1.0);
  std::vector<std::int8_t> partial{0, -1, -1, -1}; // b never reached
  CHECK(s.evaluate(f, partial) == 9.0);
  std::vector<std::int8_t> missing{1, -1, -1, -1}; // path needs b
  CHECK_THROWS_AS(s.evaluate(f, missing), Error);
  std::vector<std::int8_t> tooShort{1};
  CHECK_THROWS_AS(s.evaluate(f, tooShort), Error);
}

TEST_CASE("sup_norm_diff reports the largest pointwise gap") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  DiagramRef f = s.ite(a, s.terminal(2.0), s.terminal(5.0));
  DiagramRef g = s.ite(a, s.terminal(7.0), s.terminal(3.0));
  CHECK(s.sup_norm_diff(f, g) == 5.0);
  CHECK(s.sup_norm_diff(g, f) == 5.0);
  CHECK(s.sup_norm_diff(f, f) == 0.0);
}

TEST_CASE("stats count paths with multiplicity across shared nodes") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  VarId c = s.add_variable("c");
  DiagramRef f = s.apply(ApplyOp::Add, s.indicator(a),
                         s.apply(ApplyOp::Add, s.indicator(b), s.indicator(c)));
  auto st = s.stats(f);
  CHECK(st.internal_nodes == 6); // 1 + 2 + 3 across the three levels
  CHECK(st.leaves == 4);         // values 0..3
  CHECK(st.equivalent_tree_leaves == 8);
}

TEST_CASE("terminal_values returns distinct sorted leaves") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.ite(a, s.ite(b, s.terminal(5.0), s.terminal(-1.0)),
                       s.ite(b, s.terminal(5.0), s.terminal(2.0)));
  auto vals = s.terminal_values(f);
  REQUIRE(vals.size() == 3);
  CHECK(vals[0] == -1.0);
  CHECK(vals[1] == 2.0);
  CHECK(vals[2] == 5.0);
}

TEST_CASE("dot rendering is deterministic with styled edges") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  DiagramRef f = s.indicator(a);
  std::string expected =
      "digraph add {\n"
      "  n0 [label=\"a\"];\n"
      "  n1 [shape=box,label=\"1\"];\n"
      "  n2 [shape=box,label=\"0\"];\n"
      "  n0 -> n1 [style=solid];\n"
      "  n0 -> n2 [style=dashed];\n"
      "}\n";
  CHECK(s.to_dot(f) == expected);
  CHECK(s.to_dot(f) == s.to_dot(f));

  // an independent store with the same construction renders identical bytes
  DiagramStore s2;
  VarId a2 = s2.add_variable("a");
  CHECK(s2.to_dot(s2.indicator(a2)) == expected);

  // custom terminal labels pass through with escaping
  auto labeled = s.to_dot(f, [](double v) { return v == 1.0 ? "\"hi\"" : "lo"; });
  CHECK(labeled.find("\\\"hi\\\"") != std::string::npos);
}

TEST_CASE("combine folds terminals with a caller-supplied function") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef f = s.ite(a, s.terminal(3.0), s.terminal(1.0));
  DiagramRef g = s.ite(b, s.terminal(3.0), s.terminal(2.0));
  DiagramRef eq = s.combine(f, g, [](double x, double y) { return x == y ? 1.0 : 0.0; });
  for (std::uint64_t bits = 0; bits < 16; ++bits) {
    double expect = oracle_eval(s, f, bits) == oracle_eval(s, g, bits) ? 1.0 : 0.0;
    CHECK(oracle_eval(s, eq, bits) == expect);
  }
}

TEST_CASE("refs are checked against their store") {
  DiagramStore s1, s2;
  s1.add_variable("a");
  s2.add_variable("a");
  DiagramRef f = s1.terminal(1.0);
  CHECK_THROWS_AS(s2.stats(f), Error);
  CHECK_THROWS_AS(s2.apply(ApplyOp::Add, f, f), Error);
  CHECK_THROWS_AS(s1.stats(DiagramRef{}), Error);
}

TEST_CASE("operation cache capacity bounds are honored") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  VarId c = s.add_variable("c");
  s.set_cache_capacity(16);
  std::mt19937_64 rng(7);
  std::vector<VarId> vars{a, b, c};
  for (int i = 0; i < 40; ++i) {
    DiagramRef f = testutil::random_diagram(s, rng, vars, 3);
    DiagramRef g = testutil::random_diagram(s, rng, vars, 3);
    DiagramRef r = s.apply(ApplyOp::Add, f, g);
    CHECK(s.cache_size() <= 16);
    for (std::uint64_t bits = 0; bits < 64; bits += 5) {
      CHECK(same_bits(oracle_eval(s, r, bits),
                      oracle_eval(s, f, bits) + oracle_eval(s, g, bits)));
    }
  }
  s.set_cache_capacity(std::nullopt);
}

TEST_CASE("sweep compacts above the watermark and preserves kept roots") {
  DiagramStore s;
  VarId a = s.add_variable("a");
  VarId b = s.add_variable("b");
  DiagramRef keep_low = s.ite(a, s.terminal(4.0), s.terminal(8.0));
  std::size_t wm = s.watermark();

  std::mt19937_64 rng(11);
  std::vector<VarId> vars{a, b};
  DiagramRef root;
  for (int i = 0; i < 200; ++i) {
    DiagramRef f = testutil::random_diagram(s, rng, vars, 4);
    root = s.apply(ApplyOp::Add, f, keep_low);
  }
  std::vector<double> before;
  for (std::uint64_t bits = 0; bits < 16; ++bits) before.push_back(oracle_eval(s, root, bits));
  std::size_t bloated = s.node_count();

  std::vector<DiagramRef> roots{root};
  auto kept = s.sweep_above(wm, roots);
  REQUIRE(kept.size() == 1);
  CHECK(s.node_count() < bloated);
  CHECK(s.node_count() >= wm);

  // refs created before the watermark are untouched
  CHECK(oracle_eval(s, keep_low, 0b1) == 4.0);
  CHECK(s.ite(a, s.terminal(4.0), s.terminal(8.0)) == keep_low);

  // the kept root denotes the same function
  for (std::uint64_t bits = 0; bits < 16; ++bits)
    CHECK(same_bits(oracle_eval(s, kept[0], bits), before[bits]));

  // the unique table was rebuilt: re-deriving the root lands on the kept copy
  DiagramRef again = s.apply(ApplyOp::Subtract, kept[0], keep_low);
  CHECK(s.apply(ApplyOp::Add, again, keep_low) == kept[0]);

  // sweeping with no roots rolls back to the watermark exactly
  std::vector<DiagramRef> none;
  s.sweep_above(wm, none);
  CHECK(s.node_count() == wm);
}

TEST_CASE("kernel property suite over randomized diagrams") {
  auto rep = testutil::run_kernel_property_suite(0xC0FFEEull, 300);
  for (const auto& f : rep.failures) UNSCOPED_INFO(f);
  CHECK(rep.failures.empty());
  CHECK(rep.cases_run == 300);
  CHECK(rep.checks_run > 3000);
}
