#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "dynpar/coin.hpp"
#include "dynpar/detail/batch_cycles.hpp"
#include "dynpar/engine/engine.hpp"

namespace dynpar {

using NodeId = std::uint32_t;
inline constexpr NodeId kNullNode = std::numeric_limits<NodeId>::max();

// Raised when a sequence operation's preconditions do not hold.
class SequenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Batch-dynamic sequences by random-mate list contraction.
//
// Round i of node u reads its neighbours L[i][u], R[i][u]. A node that flipped
// heads while its right neighbour flipped tails splices out; an isolated node
// finalizes; the rest stay alive. acc[i][u] is the fold of the values from u
// up to, but excluding, R[i][u]. Whoever writes R[i+1][x] also writes
// acc[i+1][x].
template <typename T, typename Op = std::plus<T>>
class Sequence {
 public:
  struct Node {
    NodeId prev = kNullNode;
    NodeId next = kNullNode;
    T value{};
  };

  struct Link {
    NodeId node;
    friend bool operator==(const Link&, const Link&) = default;
  };
  struct Acc {
    T value;
    friend bool operator==(const Acc&, const Acc&) = default;
  };
  struct Death {
    Round round;
    friend bool operator==(const Death&, const Death&) = default;
  };
  using Value = std::variant<Link, Acc, Death>;

  static constexpr std::uint8_t kL = 0;
  static constexpr std::uint8_t kR = 1;
  static constexpr std::uint8_t kAcc = 2;
  static constexpr std::uint8_t kD = 3;

  static LocationKey left_key(Round i, NodeId u) { return LocationKey(kL, i, u); }
  static LocationKey right_key(Round i, NodeId u) { return LocationKey(kR, i, u); }
  static LocationKey acc_key(Round i, NodeId u) { return LocationKey(kAcc, i, u); }
  static LocationKey death_key(NodeId u) { return LocationKey(kD, 0, u); }

  struct Program {
    Op op;
    CoinOracle coins;

    void compute_round(Round i, ProcessId u, RoundContext<Value>& ctx) const {
      const NodeId l = std::get<Link>(ctx.read(left_key(i, u))).node;
      const NodeId r = std::get<Link>(ctx.read(right_key(i, u))).node;
      if (r != kNullNode) {
        if (coins.heads(i, u) && !coins.heads(i, r)) {
          ctx.write(left_key(i + 1, r), Value{Link{l}});
          if (l != kNullNode) {
            ctx.write(right_key(i + 1, l), Value{Link{r}});
            const T& left_acc = std::get<Acc>(ctx.read(acc_key(i, l))).value;
            const T& own_acc = std::get<Acc>(ctx.read(acc_key(i, u))).value;
            ctx.write(acc_key(i + 1, l), Value{Acc{op(left_acc, own_acc)}});
          }
          die(i, u, ctx);
        } else {
          stay_alive(i, u, l, r, ctx);
        }
      } else if (l == kNullNode) {
        die(i, u, ctx);
      } else {
        stay_alive(i, u, l, r, ctx);
      }
    }

   private:
    static void die(Round i, NodeId u, RoundContext<Value>& ctx) {
      ctx.write(death_key(u), Value{Death{i}});
      ctx.retire();
    }

    static void stay_alive(Round i, NodeId u, NodeId l, NodeId r, RoundContext<Value>& ctx) {
      if (r != kNullNode) {
        ctx.write(left_key(i + 1, r), Value{Link{u}});
      } else {
        ctx.write(right_key(i + 1, u), Value{Link{kNullNode}});
        ctx.write(acc_key(i + 1, u), Value{Acc{std::get<Acc>(ctx.read(acc_key(i, u))).value}});
      }
      if (l != kNullNode) {
        ctx.write(right_key(i + 1, l), Value{Link{u}});
        ctx.write(acc_key(i + 1, l), Value{Acc{std::get<Acc>(ctx.read(acc_key(i, l))).value}});
      } else {
        ctx.write(left_key(i + 1, u), Value{Link{kNullNode}});
      }
    }
  };

  explicit Sequence(std::span<const Node> nodes, Op op = {}, std::uint64_t seed = 0, EngineOptions options = {})
      : engine_(options), program_{std::move(op), CoinOracle(seed)}, size_(static_cast<NodeId>(nodes.size())) {
    if (nodes.size() >= kNullNode) throw SequenceError("too many nodes");
    validate(nodes);
    engine_.store().reserve(nodes.size() * 8);
    for (NodeId u = 0; u < size_; ++u) {
      engine_.store().set_input(left_key(0, u), Value{Link{nodes[u].prev}});
      engine_.store().set_input(right_key(0, u), Value{Link{nodes[u].next}});
      engine_.store().set_input(acc_key(0, u), Value{Acc{nodes[u].value}});
    }
    std::vector<ProcessId> procs(size_);
    std::iota(procs.begin(), procs.end(), ProcessId{0});
    if (!procs.empty()) engine_.run(program_, procs);
  }

  NodeId size() const { return size_; }
  Round rounds() const { return engine_.trace().rounds_executed(); }
  const Engine<Value>& engine() const { return engine_; }
  const CoinOracle& coins() const { return program_.coins; }

  // Current neighbours and value of u.
  NodeId prev(NodeId u) const { return left(0, check(u)); }
  NodeId next(NodeId u) const { return right(0, check(u)); }
  const T& value(NodeId u) const { return acc(0, check(u)); }

  // The contraction record: neighbours and accumulators of u at round i
  // (u must be alive at round i), and the round u died.
  NodeId left(Round i, NodeId u) const { return std::get<Link>(at(left_key(i, u))).node; }
  NodeId right(Round i, NodeId u) const { return std::get<Link>(at(right_key(i, u))).node; }
  const T& acc(Round i, NodeId u) const { return std::get<Acc>(at(acc_key(i, u))).value; }
  Round death_round(NodeId u) const { return std::get<Death>(at(death_key(check(u)))).round; }
  bool alive_at(Round i, NodeId u) const { return i <= death_round(u); }

  // Whether u finalized (rather than spliced out) at its death round.
  bool finalized(NodeId u) const {
    const Round d = death_round(u);
    return right(d, u) == kNullNode;
  }

  // The node u's list contracts into: its last node.
  NodeId representative(NodeId u) const {
    NodeId x = check(u);
    for (;;) {
      const Round d = death_round(x);
      const NodeId r = right(d, x);
      if (r == kNullNode) return x;
      x = r;
    }
  }

  bool same_list(NodeId u, NodeId v) const { return representative(u) == representative(v); }

  // Breaks the sequence after each u.
  void batch_split(std::span<const NodeId> nodes) {
    absl::flat_hash_set<NodeId> cut;
    for (NodeId u : nodes) {
      check(u);
      if (cut.contains(u)) continue;
      if (next(u) == kNullNode) throw SequenceError("split after node " + std::to_string(u) + ", which is a tail");
      cut.insert(u);
    }
    PropagationDelta delta;
    for (NodeId u : sorted(cut)) {
      const NodeId r = next(u);
      set_link(right_key(0, u), kNullNode, delta);
      set_link(left_key(0, r), kNullNode, delta);
    }
    propagate(delta);
  }

  // Concatenates, for each (u, v), the sequence ending at u with the one
  // starting at v.
  void batch_join(std::span<const std::pair<NodeId, NodeId>> pairs) {
    absl::flat_hash_set<NodeId> tails;
    absl::flat_hash_set<NodeId> heads;
    std::vector<std::pair<NodeId, NodeId>> todo;
    for (const auto& [u, v] : pairs) {
      check(u);
      check(v);
      const std::string which = "join (" + std::to_string(u) + ", " + std::to_string(v) + ")";
      if (tails.contains(u) || heads.contains(v)) {
        if (std::find(todo.begin(), todo.end(), std::pair{u, v}) != todo.end()) continue;
        throw SequenceError(which + " reuses an endpoint");
      }
      if (next(u) != kNullNode) throw SequenceError(which + ": " + std::to_string(u) + " is not a tail");
      if (prev(v) != kNullNode) throw SequenceError(which + ": " + std::to_string(v) + " is not a head");
      tails.insert(u);
      heads.insert(v);
      todo.emplace_back(u, v);
    }
    // Each join merges two lists; a join within one list closes a cycle.
    std::vector<std::pair<NodeId, NodeId>> lists;
    lists.reserve(todo.size());
    for (const auto& [u, v] : todo) lists.emplace_back(representative(u), representative(v));
    if (const auto k = detail::first_cycle(lists))
      throw SequenceError("join (" + std::to_string(todo[*k].first) + ", " + std::to_string(todo[*k].second) +
                          ") would close a cycle");
    PropagationDelta delta;
    std::sort(todo.begin(), todo.end());
    for (const auto& [u, v] : todo) {
      set_link(right_key(0, u), v, delta);
      set_link(left_key(0, v), u, delta);
    }
    propagate(delta);
  }

  void batch_update_value(std::span<const std::pair<NodeId, T>> values) {
    for (const auto& [u, v] : values) check(u);
    PropagationDelta delta;
    for (const auto& [u, v] : values)
      if (engine_.store().set_input(acc_key(0, u), Value{Acc{v}})) delta.changed.push_back(acc_key(0, u));
    propagate(delta);
  }

  // Fold of the values from u through v inclusive; v must not precede u.
  T query(NodeId u, NodeId v) const {
    check(u);
    check(v);
    if (u == v) return value(u);
    if (!same_list(u, v))
      throw SequenceError("query (" + std::to_string(u) + ", " + std::to_string(v) + "): different lists");
    const auto reversed = [&] {
      return SequenceError("query (" + std::to_string(u) + ", " + std::to_string(v) + "): " + std::to_string(v) +
                           " precedes " + std::to_string(u));
    };
    // P folds [u, b) and Q folds [x, v]; b moves right and x moves left as
    // they splice out, until they meet.
    T lhs = value(u);
    NodeId b = next(u);
    T rhs = value(v);
    NodeId x = v;
    for (;;) {
      if (b == kNullNode) throw reversed();
      if (b == x) return program_.op(lhs, rhs);
      const Round db = death_round(b);
      const Round dx = death_round(x);
      if (db <= dx) {
        const NodeId r = right(db, b);
        if (r == kNullNode) throw reversed();
        lhs = program_.op(lhs, acc(db, b));
        b = r;
      } else {
        const NodeId l = left(dx, x);
        if (l == kNullNode || right(dx, x) == kNullNode) throw reversed();
        rhs = program_.op(acc(dx, l), rhs);
        x = l;
      }
    }
  }

  std::vector<T> batch_query_value(std::span<const std::pair<NodeId, NodeId>> pairs) const {
    std::vector<T> out;
    out.reserve(pairs.size());
    for (const auto& [u, v] : pairs) out.push_back(query(u, v));
    return out;
  }

 private:
  NodeId check(NodeId u) const {
    if (u >= size_) throw std::out_of_range("node " + std::to_string(u) + " out of range");
    return u;
  }

  const Value& at(const LocationKey& key) const {
    const Value* v = engine_.store().find(key);
    if (!v) throw std::logic_error("contraction record has no value at the requested location");
    return *v;
  }

  static std::vector<NodeId> sorted(const absl::flat_hash_set<NodeId>& s) {
    std::vector<NodeId> out(s.begin(), s.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  static void validate(std::span<const Node> nodes) {
    const auto n = static_cast<NodeId>(nodes.size());
    for (NodeId u = 0; u < n; ++u) {
      const Node& x = nodes[u];
      if ((x.next != kNullNode && x.next >= n) || (x.prev != kNullNode && x.prev >= n))
        throw SequenceError("node " + std::to_string(u) + " links to a node out of range");
      if (x.next == u || x.prev == u) throw SequenceError("node " + std::to_string(u) + " links to itself");
      if (x.next != kNullNode && nodes[x.next].prev != u)
        throw SequenceError("node " + std::to_string(u) + " has next " + std::to_string(x.next) +
                            " whose prev is not " + std::to_string(u));
      if (x.prev != kNullNode && nodes[x.prev].next != u)
        throw SequenceError("node " + std::to_string(u) + " has prev " + std::to_string(x.prev) +
                            " whose next is not " + std::to_string(u));
    }
    std::vector<bool> seen(n, false);
    for (NodeId u = 0; u < n; ++u) {
      if (nodes[u].prev != kNullNode) continue;
      for (NodeId x = u; x != kNullNode; x = nodes[x].next) seen[x] = true;
    }
    for (NodeId u = 0; u < n; ++u)
      if (!seen[u]) throw SequenceError("node " + std::to_string(u) + " lies on a cycle");
  }

  void set_link(const LocationKey& key, NodeId to, PropagationDelta& delta) {
    if (engine_.store().set_input(key, Value{Link{to}})) delta.changed.push_back(key);
  }

  void propagate(const PropagationDelta& delta) { engine_.propagate(program_, delta); }

  Engine<Value> engine_;
  Program program_;
  NodeId size_;
};

// Node array for a list of chains, each given as node ids in order.
template <typename T>
std::vector<typename Sequence<T>::Node> chains_to_nodes(std::size_t n, const std::vector<std::vector<NodeId>>& chains,
                                                        std::span<const T> values) {
  std::vector<typename Sequence<T>::Node> nodes(n);
  for (std::size_t u = 0; u < n && u < values.size(); ++u) nodes[u].value = values[u];
  for (const auto& c : chains)
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      nodes[c[k]].next = c[k + 1];
      nodes[c[k + 1]].prev = c[k];
    }
  return nodes;
}

}  // namespace dynpar
