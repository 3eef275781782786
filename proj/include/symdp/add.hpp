/// @file  add.hpp
/// @brief Reduced ordered algebraic decision diagrams with hash-consed nodes
///        and memoized operations.

#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace symdp {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form of a double (exact under from_chars).
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// A variable slot in the global ordering. Every state variable owns two
/// adjacent positions: the unprimed (pre-action) copy at 2*base and its
/// primed (post-action) counterpart immediately after it at 2*base+1.
class VarId {
public:
  constexpr VarId() = default;

  static constexpr VarId from_position(std::uint32_t pos) { return VarId(pos); }
  static constexpr VarId unprimed(std::uint32_t base) { return VarId(base * 2); }
  static constexpr VarId primed(std::uint32_t base) { return VarId(base * 2 + 1); }

  constexpr std::uint32_t position() const { return pos_; }
  constexpr bool is_primed() const { return (pos_ & 1) != 0; }
  constexpr std::uint32_t base() const { return pos_ >> 1; }
  /// The primed copy of an unprimed variable and vice versa.
  constexpr VarId counterpart() const { return VarId(pos_ ^ 1); }

  friend constexpr bool operator==(VarId, VarId) = default;
  friend constexpr auto operator<=>(VarId, VarId) = default;

private:
  explicit constexpr VarId(std::uint32_t pos) : pos_(pos) {}
  std::uint32_t pos_ = 0xFFFFFFFFu;
};

/// Handle to a canonical node. Only meaningful within the store that issued
/// it; two refs from the same store are equal iff they denote the same
/// function under the store's ordering.
class DiagramRef {
public:
  constexpr DiagramRef() = default;

  constexpr bool is_null() const { return store_ == 0; }
  friend constexpr bool operator==(DiagramRef, DiagramRef) = default;

  constexpr std::uint32_t index() const { return index_; }

private:
  friend class DiagramStore;
  friend struct std::hash<DiagramRef>;
  constexpr DiagramRef(std::uint32_t store, std::uint32_t index)
      : store_(store), index_(index) {}

  std::uint32_t store_ = 0;
  std::uint32_t index_ = 0;
};

enum class ApplyOp : std::uint8_t { Add, Subtract, Multiply, Max };

struct DiagramStats {
  std::uint64_t internal_nodes = 0;
  std::uint64_t leaves = 0;
  /// Root-to-terminal path count: the leaf count of the tree obtained by
  /// unfolding all shared subgraphs.
  std::uint64_t equivalent_tree_leaves = 0;
};

/// Shared node store: unique table, operation cache, and the variable
/// registry that fixes the global ordering. Single-owner: all operations on
/// diagrams from one store must be serialized by the caller; independent
/// stores are independent. Nodes are immutable once created.
class DiagramStore {
  static constexpr std::uint32_t kTerminalPos = 0xFFFFFFFFu;

  struct Node {
    std::uint32_t var_pos; // kTerminalPos marks a terminal
    std::uint32_t hi;      // then child
    std::uint32_t lo;      // else child
    double value;          // terminal payload
  };

public:
  DiagramStore() : serial_(next_serial()) { nodes_.reserve(1 << 12); }

  explicit DiagramStore(const std::vector<std::string>& variable_names)
      : DiagramStore() {
    for (const auto& n : variable_names) add_variable(n);
  }

  DiagramStore(const DiagramStore&) = delete;
  DiagramStore& operator=(const DiagramStore&) = delete;
  DiagramStore(DiagramStore&&) = default;
  DiagramStore& operator=(DiagramStore&&) = default;

  // --- variable registry -------------------------------------------------

  /// Registers a state variable (and its primed counterpart) at the end of
  /// the ordering. Returns the unprimed VarId.
  VarId add_variable(std::string name) {
    if (name.empty()) throw Error("variable name must be nonempty");
    if (find_variable(name)) throw Error("duplicate variable name: " + name);
    std::uint32_t base = static_cast<std::uint32_t>(base_names_.size());
    position_names_.push_back(name);
    position_names_.push_back(name + "'");
    base_names_.push_back(std::move(name));
    return VarId::unprimed(base);
  }

  std::size_t variable_count() const { return base_names_.size(); }

  VarId variable(std::size_t base) const {
    if (base >= base_names_.size()) throw Error("variable index out of range");
    return VarId::unprimed(static_cast<std::uint32_t>(base));
  }

  std::optional<VarId> find_variable(std::string_view name) const {
    for (std::size_t i = 0; i < base_names_.size(); ++i)
      if (base_names_[i] == name) return VarId::unprimed(static_cast<std::uint32_t>(i));
    return std::nullopt;
  }

  /// Display name of a variable position ("x" or "x'").
  const std::string& name(VarId v) const {
    check_var(v);
    return position_names_[v.position()];
  }

  // --- construction ------------------------------------------------------

  /// Canonical terminal for an exact double bit pattern. Non-finite values
  /// are rejected.
  DiagramRef terminal(double value) {
    return ref(make_terminal(value));
  }

  /// Canonical internal node. `var` must precede the root variables of both
  /// children in the ordering; collapses to the child when both coincide.
  DiagramRef internal(VarId var, DiagramRef then_branch, DiagramRef else_branch) {
    check_var(var);
    std::uint32_t t = check_ref(then_branch), e = check_ref(else_branch);
    if (var.position() >= level(t) || var.position() >= level(e))
      throw Error("node ordering violation: variable " + name(var) +
                  " does not precede its children");
    return ref(make_internal(var.position(), t, e));
  }

  /// 0/1 indicator of a variable.
  DiagramRef indicator(VarId var) {
    check_var(var);
    return ref(make_internal(var.position(), make_terminal(1.0), make_terminal(0.0)));
  }

  /// Pointwise var ? t : e for arbitrary operand orderings (Shannon
  /// composition; no terminal arithmetic, so leaf values pass through
  /// bit-exactly).
  DiagramRef ite(VarId var, DiagramRef t, DiagramRef e) {
    check_var(var);
    return ref(ite_rec(var.position(), check_ref(t), check_ref(e)));
  }

  // --- operations ----------------------------------------------------------

  /// Pointwise combination of two diagrams; memoized on (op, f, g).
  DiagramRef apply(ApplyOp op, DiagramRef f, DiagramRef g) {
    return ref(apply_rec(op, check_ref(f), check_ref(g)));
  }

  /// Pointwise c * f.
  DiagramRef scale(DiagramRef f, double c) {
    std::uint32_t i = check_ref(f);
    return ref(apply_rec(ApplyOp::Multiply, make_terminal(c), i));
  }

  /// Pointwise 1 - f.
  DiagramRef complement_one(DiagramRef f) {
    std::uint32_t i = check_ref(f);
    return ref(apply_rec(ApplyOp::Subtract, make_terminal(1.0), i));
  }

  /// Cofactor: f with var fixed to val; var is absent from the result.
  DiagramRef restrict_var(DiagramRef f, VarId var, bool val) {
    check_var(var);
    return ref(restrict_rec(check_ref(f), var.position(), val));
  }

  /// f|var=true + f|var=false; eliminates var.
  DiagramRef sum_out(DiagramRef f, VarId var) {
    check_var(var);
    std::uint32_t i = check_ref(f);
    std::uint32_t hi = restrict_rec(i, var.position(), true);
    std::uint32_t lo = restrict_rec(i, var.position(), false);
    return ref(apply_rec(ApplyOp::Add, hi, lo));
  }

  /// Relabels every variable with its counterpart. With the interleaved
  /// ordering this is order-preserving for diagrams mentioning only one kind
  /// of variable; a mix that would break ordering along some path is
  /// rejected.
  DiagramRef swap_primed(DiagramRef f) {
    return ref(swap_rec(check_ref(f)));
  }

  /// Terminal reached by following the assignment (indexed by ordering
  /// position; -1 marks an unset variable). A path that needs an unset
  /// variable is an error.
  double evaluate(DiagramRef f, std::span<const std::int8_t> values_by_position) const {
    std::uint32_t i = check_ref(f);
    while (nodes_[i].var_pos != kTerminalPos) {
      std::uint32_t p = nodes_[i].var_pos;
      std::int8_t v = p < values_by_position.size() ? values_by_position[p] : std::int8_t(-1);
      if (v < 0)
        throw Error("evaluate: assignment does not cover variable " + position_names_[p]);
      i = v ? nodes_[i].hi : nodes_[i].lo;
    }
    return nodes_[i].value;
  }

  /// max over all assignments of |f - g|, computed on the terminals of the
  /// difference diagram.
  double sup_norm_diff(DiagramRef f, DiagramRef g) {
    std::uint32_t d = apply_rec(ApplyOp::Subtract, check_ref(f), check_ref(g));
    double m = 0.0;
    for_each_node(d, [&](const Node& n) {
      if (n.var_pos == kTerminalPos) m = std::max(m, std::fabs(n.value));
    });
    return m;
  }

  DiagramStats stats(DiagramRef f) const {
    std::uint32_t root = check_ref(f);
    DiagramStats s;
    for_each_node(root, [&](const Node& n) {
      if (n.var_pos == kTerminalPos) ++s.leaves; else ++s.internal_nodes;
    });
    std::unordered_map<std::uint32_t, std::uint64_t> etl;
    s.equivalent_tree_leaves = etl_rec(root, etl);
    return s;
  }

  /// Variables occurring in f, sorted by ordering position.
  std::vector<VarId> support(DiagramRef f) const {
    std::uint32_t root = check_ref(f);
    std::vector<std::uint32_t> positions;
    for_each_node(root, [&](const Node& n) {
      if (n.var_pos != kTerminalPos) positions.push_back(n.var_pos);
    });
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    std::vector<VarId> out;
    out.reserve(positions.size());
    for (auto p : positions) out.push_back(VarId::from_position(p));
    return out;
  }

  bool mentions(DiagramRef f, VarId var) const {
    check_var(var);
    std::uint32_t root = check_ref(f);
    bool found = false;
    for_each_node(root, [&](const Node& n) {
      if (n.var_pos == var.position()) found = true;
    });
    return found;
  }

  /// Distinct terminal values reachable from f, ascending.
  std::vector<double> terminal_values(DiagramRef f) const {
    std::uint32_t root = check_ref(f);
    std::vector<double> vals;
    for_each_node(root, [&](const Node& n) {
      if (n.var_pos == kTerminalPos) vals.push_back(n.value);
    });
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
  }

  /// Deterministic DOT rendering: solid edge = then, dashed = else, boxed
  /// terminals. Identical diagrams produce identical bytes.
  std::string to_dot(DiagramRef f,
                     const std::function<std::string(double)>& leaf_label = {}) const {
    std::uint32_t root = check_ref(f);
    std::unordered_map<std::uint32_t, std::uint32_t> id;
    std::vector<std::uint32_t> order;
    assign_dot_ids(root, id, order);
    std::string out = "digraph add {\n";
    for (std::uint32_t i : order) {
      const Node& n = nodes_[i];
      out += "  n" + std::to_string(id[i]);
      if (n.var_pos == kTerminalPos) {
        std::string label = leaf_label ? leaf_label(n.value) : format_double(n.value);
        out += " [shape=box,label=\"" + escape_dot(label) + "\"];\n";
      } else {
        out += " [label=\"" + escape_dot(position_names_[n.var_pos]) + "\"];\n";
      }
    }
    for (std::uint32_t i : order) {
      const Node& n = nodes_[i];
      if (n.var_pos == kTerminalPos) continue;
      out += "  n" + std::to_string(id[i]) + " -> n" + std::to_string(id[n.hi]) +
             " [style=solid];\n";
      out += "  n" + std::to_string(id[i]) + " -> n" + std::to_string(id[n.lo]) +
             " [style=dashed];\n";
    }
    out += "}\n";
    return out;
  }

  /// Pointwise combination with a caller-supplied terminal function. Not
  /// entered in the operation cache (the closure has no identity); a local
  /// memo keeps each call linear in the product of operand sizes.
  template <class F>
  DiagramRef combine(DiagramRef f, DiagramRef g, F&& leaf_op) {
    std::unordered_map<std::uint64_t, std::uint32_t> memo;
    return ref(combine_rec(check_ref(f), check_ref(g), leaf_op, memo));
  }

  // --- introspection -------------------------------------------------------

  bool is_terminal(DiagramRef f) const {
    return nodes_[check_ref(f)].var_pos == kTerminalPos;
  }
  double terminal_value(DiagramRef f) const {
    std::uint32_t i = check_ref(f);
    if (nodes_[i].var_pos != kTerminalPos) throw Error("not a terminal");
    return nodes_[i].value;
  }
  VarId node_var(DiagramRef f) const {
    std::uint32_t i = check_ref(f);
    if (nodes_[i].var_pos == kTerminalPos) throw Error("terminal has no variable");
    return VarId::from_position(nodes_[i].var_pos);
  }
  DiagramRef then_child(DiagramRef f) const {
    std::uint32_t i = check_ref(f);
    if (nodes_[i].var_pos == kTerminalPos) throw Error("terminal has no children");
    return ref(nodes_[i].hi);
  }
  DiagramRef else_child(DiagramRef f) const {
    std::uint32_t i = check_ref(f);
    if (nodes_[i].var_pos == kTerminalPos) throw Error("terminal has no children");
    return ref(nodes_[i].lo);
  }

  std::size_t node_count() const { return nodes_.size(); }

  /// FIFO cap on the operation cache; nullopt (default) means unbounded.
  void set_cache_capacity(std::optional<std::size_t> cap) {
    cache_capacity_ = cap;
    trim_cache();
  }
  std::size_t cache_size() const { return op_cache_.size(); }

  // --- bounded-scope reclamation -------------------------------------------

  /// Current node count; use as the watermark for a later sweep.
  std::size_t watermark() const { return nodes_.size(); }

  /// Compacts away every node at or above `watermark` that is not reachable
  /// from `roots`. Nodes below the watermark never move, so refs issued
  /// before the watermark stay valid; refs above it are invalidated except
  /// for the remapped roots returned (in input order). The operation cache is
  /// cleared.
  std::vector<DiagramRef> sweep_above(std::size_t watermark,
                                      std::span<const DiagramRef> roots) {
    if (watermark > nodes_.size()) throw Error("sweep: watermark beyond store size");
    const std::uint32_t wm = static_cast<std::uint32_t>(watermark);
    std::vector<std::uint8_t> live(nodes_.size() - wm, 0);
    std::vector<std::uint32_t> stack;
    for (DiagramRef r : roots) {
      std::uint32_t i = check_ref(r);
      if (i >= wm && !live[i - wm]) { live[i - wm] = 1; stack.push_back(i); }
    }
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (n.var_pos == kTerminalPos) continue;
      for (std::uint32_t c : {n.hi, n.lo})
        if (c >= wm && !live[c - wm]) { live[c - wm] = 1; stack.push_back(c); }
    }
    // Children always precede parents, so one ascending pass can rewrite
    // child indices through the partially built remap.
    std::vector<std::uint32_t> remap(nodes_.size() - wm, 0);
    std::uint32_t next = wm;
    for (std::uint32_t i = wm; i < nodes_.size(); ++i) {
      if (!live[i - wm]) continue;
      Node n = nodes_[i];
      if (n.var_pos != kTerminalPos) {
        if (n.hi >= wm) n.hi = remap[n.hi - wm];
        if (n.lo >= wm) n.lo = remap[n.lo - wm];
      }
      remap[i - wm] = next;
      nodes_[next++] = n;
    }
    nodes_.resize(next);
    rebuild_unique_tables();
    op_cache_.clear();
    cache_fifo_.clear();
    std::vector<DiagramRef> out;
    out.reserve(roots.size());
    for (DiagramRef r : roots) {
      std::uint32_t i = r.index();
      out.push_back(ref(i >= wm ? remap[i - wm] : i));
    }
    return out;
  }

private:
  // --- op cache -------------------------------------------------------------

  enum OpTag : std::uint32_t {
    kOpAdd = 0, kOpSubtract, kOpMultiply, kOpMax, kOpRestrict, kOpSwap, kOpIte
  };

  struct OpKey {
    std::uint32_t tag, a, b, aux;
    friend bool operator==(const OpKey&, const OpKey&) = default;
  };
  struct OpKeyHash {
    std::size_t operator()(const OpKey& k) const {
      std::uint64_t h = k.tag;
      h = h * 0x9E3779B97F4A7C15ull + k.a;
      h = h * 0x9E3779B97F4A7C15ull + k.b;
      h = h * 0x9E3779B97F4A7C15ull + k.aux;
      return static_cast<std::size_t>(h ^ (h >> 32));
    }
  };

  std::optional<std::uint32_t> cache_find(const OpKey& k) const {
    auto it = op_cache_.find(k);
    if (it == op_cache_.end()) return std::nullopt;
    return it->second;
  }

  void cache_store(const OpKey& k, std::uint32_t v) {
    if (op_cache_.emplace(k, v).second && cache_capacity_) {
      cache_fifo_.push_back(k);
      trim_cache();
    }
  }

  void trim_cache() {
    if (!cache_capacity_) { cache_fifo_.clear(); return; }
    while (op_cache_.size() > *cache_capacity_ && !cache_fifo_.empty()) {
      op_cache_.erase(cache_fifo_.front());
      cache_fifo_.pop_front();
    }
  }

  // --- node construction ------------------------------------------------

  struct InternalKey {
    std::uint32_t var_pos, hi, lo;
    friend bool operator==(const InternalKey&, const InternalKey&) = default;
  };
  struct InternalKeyHash {
    std::size_t operator()(const InternalKey& k) const {
      std::uint64_t h = k.var_pos;
      h = h * 0x9E3779B97F4A7C15ull + k.hi;
      h = h * 0x9E3779B97F4A7C15ull + k.lo;
      return static_cast<std::size_t>(h ^ (h >> 32));
    }
  };

  std::uint32_t make_terminal(double value) {
    if (!std::isfinite(value))
      throw Error("non-finite terminal value: " + std::to_string(value));
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    auto it = terminal_table_.find(bits);
    if (it != terminal_table_.end()) return it->second;
    std::uint32_t idx = push_node({kTerminalPos, 0, 0, value});
    terminal_table_.emplace(bits, idx);
    return idx;
  }

  std::uint32_t make_internal(std::uint32_t var_pos, std::uint32_t hi, std::uint32_t lo) {
    if (hi == lo) return hi; // redundant-node rule
    InternalKey key{var_pos, hi, lo};
    auto it = internal_table_.find(key);
    if (it != internal_table_.end()) return it->second; // duplicate-merge rule
    std::uint32_t idx = push_node({var_pos, hi, lo, 0.0});
    internal_table_.emplace(key, idx);
    return idx;
  }

  std::uint32_t push_node(Node n) {
    if (nodes_.size() >= kTerminalPos) throw Error("diagram store is full");
    nodes_.push_back(n);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  // level: ordering position of the root, terminals sink below everything
  std::uint32_t level(std::uint32_t i) const { return nodes_[i].var_pos; }

  // --- recursions ---------------------------------------------------------

  static double eval_op(ApplyOp op, double a, double b) {
    switch (op) {
      case ApplyOp::Add: return a + b;
      case ApplyOp::Subtract: return a - b;
      case ApplyOp::Multiply: return a * b;
      case ApplyOp::Max:
        if (a < b) return b;
        if (b < a) return a;
        // numeric tie: pick the smaller bit pattern so max is symmetric on +/-0
        return std::bit_cast<std::uint64_t>(a) <= std::bit_cast<std::uint64_t>(b) ? a : b;
    }
    throw Error("unknown apply op");
  }

  static bool commutative(ApplyOp op) {
    return op == ApplyOp::Add || op == ApplyOp::Multiply || op == ApplyOp::Max;
  }

  bool is_terminal_value(std::uint32_t i, double v) const {
    return nodes_[i].var_pos == kTerminalPos &&
           std::bit_cast<std::uint64_t>(nodes_[i].value) == std::bit_cast<std::uint64_t>(v);
  }

  std::uint32_t apply_rec(ApplyOp op, std::uint32_t f, std::uint32_t g) {
    const bool ft = nodes_[f].var_pos == kTerminalPos;
    const bool gt = nodes_[g].var_pos == kTerminalPos;
    if (ft && gt) return make_terminal(eval_op(op, nodes_[f].value, nodes_[g].value));
    // identities that are exact in IEEE arithmetic
    if (op == ApplyOp::Max && f == g) return f;
    if (op == ApplyOp::Subtract && f == g) return make_terminal(0.0);
    if (op == ApplyOp::Multiply) {
      if (is_terminal_value(f, 1.0)) return g;
      if (is_terminal_value(g, 1.0)) return f;
    }
    std::uint32_t a = f, b = g;
    if (commutative(op) && a > b) std::swap(a, b);
    OpKey key{static_cast<std::uint32_t>(op), a, b, 0};
    if (auto hit = cache_find(key)) return *hit;

    std::uint32_t top = std::min(level(f), level(g));
    std::uint32_t fh = level(f) == top ? nodes_[f].hi : f;
    std::uint32_t fl = level(f) == top ? nodes_[f].lo : f;
    std::uint32_t gh = level(g) == top ? nodes_[g].hi : g;
    std::uint32_t gl = level(g) == top ? nodes_[g].lo : g;
    std::uint32_t hi = apply_rec(op, fh, gh);
    std::uint32_t lo = apply_rec(op, fl, gl);
    std::uint32_t r = make_internal(top, hi, lo);
    cache_store(key, r);
    return r;
  }

  std::uint32_t restrict_rec(std::uint32_t f, std::uint32_t var_pos, bool val) {
    if (level(f) > var_pos) return f; // var cannot occur below
    if (level(f) == var_pos) return val ? nodes_[f].hi : nodes_[f].lo;
    OpKey key{kOpRestrict, f, 0, (var_pos << 1) | static_cast<std::uint32_t>(val)};
    if (auto hit = cache_find(key)) return *hit;
    std::uint32_t hi = restrict_rec(nodes_[f].hi, var_pos, val);
    std::uint32_t lo = restrict_rec(nodes_[f].lo, var_pos, val);
    std::uint32_t r = make_internal(nodes_[f].var_pos, hi, lo);
    cache_store(key, r);
    return r;
  }

  std::uint32_t swap_rec(std::uint32_t f) {
    if (nodes_[f].var_pos == kTerminalPos) return f;
    OpKey key{kOpSwap, f, 0, 0};
    if (auto hit = cache_find(key)) return *hit;
    std::uint32_t hi = swap_rec(nodes_[f].hi);
    std::uint32_t lo = swap_rec(nodes_[f].lo);
    std::uint32_t pos = nodes_[f].var_pos ^ 1;
    if (pos >= level(hi) || pos >= level(lo))
      throw Error("swap_primed: relabeling " + position_names_[nodes_[f].var_pos] +
                  " would violate the ordering (mixed primed/unprimed diagram)");
    std::uint32_t r = make_internal(pos, hi, lo);
    cache_store(key, r);
    return r;
  }

  std::uint32_t ite_rec(std::uint32_t var_pos, std::uint32_t t, std::uint32_t e) {
    if (t == e) return t;
    OpKey key{kOpIte, t, e, var_pos};
    if (auto hit = cache_find(key)) return *hit;
    std::uint32_t r;
    std::uint32_t top = std::min({var_pos, level(t), level(e)});
    if (top == var_pos) {
      std::uint32_t t1 = level(t) == var_pos ? nodes_[t].hi : t;
      std::uint32_t e0 = level(e) == var_pos ? nodes_[e].lo : e;
      r = make_internal(var_pos, t1, e0);
    } else {
      std::uint32_t t1 = level(t) == top ? nodes_[t].hi : t;
      std::uint32_t t0 = level(t) == top ? nodes_[t].lo : t;
      std::uint32_t e1 = level(e) == top ? nodes_[e].hi : e;
      std::uint32_t e0 = level(e) == top ? nodes_[e].lo : e;
      r = make_internal(top, ite_rec(var_pos, t1, e1), ite_rec(var_pos, t0, e0));
    }
    cache_store(key, r);
    return r;
  }

  template <class F>
  std::uint32_t combine_rec(std::uint32_t f, std::uint32_t g, F& leaf_op,
                            std::unordered_map<std::uint64_t, std::uint32_t>& memo) {
    const bool ft = nodes_[f].var_pos == kTerminalPos;
    const bool gt = nodes_[g].var_pos == kTerminalPos;
    if (ft && gt) return make_terminal(leaf_op(nodes_[f].value, nodes_[g].value));
    std::uint64_t key = (static_cast<std::uint64_t>(f) << 32) | g;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::uint32_t top = std::min(level(f), level(g));
    std::uint32_t fh = level(f) == top ? nodes_[f].hi : f;
    std::uint32_t fl = level(f) == top ? nodes_[f].lo : f;
    std::uint32_t gh = level(g) == top ? nodes_[g].hi : g;
    std::uint32_t gl = level(g) == top ? nodes_[g].lo : g;
    std::uint32_t r = make_internal(top, combine_rec(fh, gh, leaf_op, memo),
                                    combine_rec(fl, gl, leaf_op, memo));
    memo.emplace(key, r);
    return r;
  }

  std::uint64_t etl_rec(std::uint32_t i,
                        std::unordered_map<std::uint32_t, std::uint64_t>& memo) const {
    if (nodes_[i].var_pos == kTerminalPos) return 1;
    auto it = memo.find(i);
    if (it != memo.end()) return it->second;
    std::uint64_t r = etl_rec(nodes_[i].hi, memo) + etl_rec(nodes_[i].lo, memo);
    memo.emplace(i, r);
    return r;
  }

  template <class F>
  void for_each_node(std::uint32_t root, F&& fn) const {
    std::vector<std::uint32_t> stack{root};
    std::unordered_map<std::uint32_t, bool> seen;
    while (!stack.empty()) {
      std::uint32_t i = stack.back();
      stack.pop_back();
      if (seen[i]) continue;
      seen[i] = true;
      fn(nodes_[i]);
      if (nodes_[i].var_pos != kTerminalPos) {
        stack.push_back(nodes_[i].hi);
        stack.push_back(nodes_[i].lo);
      }
    }
  }

  void assign_dot_ids(std::uint32_t i, std::unordered_map<std::uint32_t, std::uint32_t>& id,
                      std::vector<std::uint32_t>& order) const {
    if (id.count(i)) return;
    id.emplace(i, static_cast<std::uint32_t>(order.size()));
    order.push_back(i);
    if (nodes_[i].var_pos != kTerminalPos) {
      assign_dot_ids(nodes_[i].hi, id, order);
      assign_dot_ids(nodes_[i].lo, id, order);
    }
  }

  static std::string escape_dot(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  }

  void rebuild_unique_tables() {
    terminal_table_.clear();
    internal_table_.clear();
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.var_pos == kTerminalPos)
        terminal_table_.emplace(std::bit_cast<std::uint64_t>(n.value), i);
      else
        internal_table_.emplace(InternalKey{n.var_pos, n.hi, n.lo}, i);
    }
  }

  // --- ref plumbing -------------------------------------------------------

  DiagramRef ref(std::uint32_t index) const { return DiagramRef(serial_, index); }

  std::uint32_t check_ref(DiagramRef r) const {
    if (r.is_null()) throw Error("null diagram ref");
    if (r.store_ != serial_) throw Error("diagram ref belongs to a different store");
    if (r.index_ >= nodes_.size()) throw Error("stale diagram ref");
    return r.index_;
  }

  void check_var(VarId v) const {
    if (v.base() >= base_names_.size()) throw Error("unknown variable id");
  }

  static std::uint32_t next_serial() {
    static std::atomic<std::uint32_t> counter{1};
    return counter.fetch_add(1);
  }

  std::uint32_t serial_;
  std::vector<Node> nodes_;
  std::vector<std::string> base_names_;
  std::vector<std::string> position_names_; // per position, primed names ticked
  std::unordered_map<std::uint64_t, std::uint32_t> terminal_table_;
  std::unordered_map<InternalKey, std::uint32_t, InternalKeyHash> internal_table_;
  std::unordered_map<OpKey, std::uint32_t, OpKeyHash> op_cache_;
  std::deque<OpKey> cache_fifo_;
  std::optional<std::size_t> cache_capacity_;
};

} // namespace symdp

template <>
struct std::hash<symdp::DiagramRef> {
  std::size_t operator()(const symdp::DiagramRef& r) const {
    return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(r.store_) << 32) | r.index_);
  }
};
