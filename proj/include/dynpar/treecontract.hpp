#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>
#include <boost/pending/disjoint_sets.hpp>

#include "dynpar/coin.hpp"
#include "dynpar/detail/batch_cycles.hpp"
#include "dynpar/engine/engine.hpp"

namespace dynpar {

using VertexId = std::uint32_t;
using Weight = double;

inline constexpr VertexId kNullVertex = std::numeric_limits<VertexId>::max();
inline constexpr std::size_t kSlots = 3;
inline constexpr Weight kVirtualWeight = -std::numeric_limits<Weight>::infinity();

class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WeightedEdge {
  VertexId u = 0;
  VertexId v = 0;
  Weight weight = 0;
  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

struct ForestInput {
  VertexId n = 0;
  std::vector<WeightedEdge> edges;
  std::vector<Weight> vertex_weights;  // empty, or one per vertex
};

using EdgeKey = std::pair<VertexId, VertexId>;
inline EdgeKey edge_key(VertexId a, VertexId b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// Bounded-degree image of a forest: every vertex of degree d > 3 becomes a
// path of d vertices, each taking one of its edges. The first path vertex
// keeps the original id; the others are numbered from n upward.
struct DegreeReduction {
  std::vector<std::vector<VertexId>> chains;  // original -> path of reduced vertices
  std::vector<VertexId> owner;                // reduced -> original
  std::vector<Weight> vertex_weight;          // reduced; zero off the first path vertex
  std::vector<WeightedEdge> edges;            // reduced edges, path edges carry kVirtualWeight
  absl::flat_hash_map<EdgeKey, EdgeKey> edge_of;  // original edge -> reduced edge
  absl::flat_hash_map<EdgeKey, Weight> weight_of;  // reduced edge -> weight

  VertexId original_count() const { return static_cast<VertexId>(chains.size()); }
  VertexId reduced_count() const { return static_cast<VertexId>(owner.size()); }
  bool is_virtual_edge(VertexId a, VertexId b) const { return owner[a] == owner[b]; }
  Weight edge_weight(VertexId a, VertexId b) const {
    auto it = weight_of.find(edge_key(a, b));
    if (it == weight_of.end()) throw std::logic_error("no reduced edge between the given vertices");
    return it->second;
  }
};

namespace detail {

inline void check_forest(const ForestInput& f) {
  if (!f.vertex_weights.empty() && f.vertex_weights.size() != f.n)
    throw TreeError("vertex weight count differs from vertex count");
  boost::disjoint_sets_with_storage<> sets(f.n);
  absl::flat_hash_set<EdgeKey> seen;
  for (const auto& e : f.edges) {
    const std::string name = "edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")";
    if (e.u >= f.n || e.v >= f.n) throw TreeError(name + " names a vertex out of range");
    if (e.u == e.v) throw TreeError(name + " is a self-loop");
    if (!seen.insert(edge_key(e.u, e.v)).second) throw TreeError(name + " appears twice");
    if (sets.find_set(e.u) == sets.find_set(e.v)) throw TreeError(name + " closes a cycle");
    sets.union_set(e.u, e.v);
  }
}

}  // namespace detail

inline DegreeReduction tc_reduce_degree(const ForestInput& f) {
  detail::check_forest(f);
  DegreeReduction r;
  r.chains.resize(f.n);
  r.owner.resize(f.n);
  r.vertex_weight.assign(f.n, 0);
  std::vector<std::vector<std::size_t>> incident(f.n);
  for (std::size_t k = 0; k < f.edges.size(); ++k) {
    incident[f.edges[k].u].push_back(k);
    incident[f.edges[k].v].push_back(k);
  }
  for (VertexId x = 0; x < f.n; ++x) {
    r.owner[x] = x;
    r.chains[x].push_back(x);
    if (!f.vertex_weights.empty()) r.vertex_weight[x] = f.vertex_weights[x];
  }
  // endpoint[k][side]: reduced vertex carrying side (0 = u, 1 = v) of edge k.
  std::vector<std::array<VertexId, 2>> endpoint(f.edges.size(), {kNullVertex, kNullVertex});
  for (VertexId x = 0; x < f.n; ++x) {
    const auto& inc = incident[x];
    const bool split = inc.size() > kSlots;
    for (std::size_t j = 0; j < inc.size(); ++j) {
      VertexId c = x;
      if (split && j > 0) {
        c = static_cast<VertexId>(r.owner.size());
        r.owner.push_back(x);
        r.vertex_weight.push_back(0);
        r.edges.push_back(WeightedEdge{r.chains[x].back(), c, kVirtualWeight});
        r.chains[x].push_back(c);
      }
      const auto& e = f.edges[inc[j]];
      endpoint[inc[j]][e.u == x ? 0 : 1] = c;
    }
  }
  for (std::size_t k = 0; k < f.edges.size(); ++k) {
    const auto& e = f.edges[k];
    r.edges.push_back(WeightedEdge{endpoint[k][0], endpoint[k][1], e.weight});
    r.edge_of.emplace(edge_key(e.u, e.v), edge_key(endpoint[k][0], endpoint[k][1]));
  }
  for (const auto& e : r.edges) r.weight_of.emplace(edge_key(e.u, e.v), e.weight);
  return r;
}

// One adjacency slot. `rep` names the compressed vertex an edge stands for
// (null for an input edge); `raker` marks a slot just emptied by a rake.
struct AdjEntry {
  VertexId neighbor = kNullVertex;
  std::uint8_t back = 0;
  VertexId rep = kNullVertex;
  VertexId raker = kNullVertex;

  bool empty() const { return neighbor == kNullVertex; }
  friend bool operator==(const AdjEntry&, const AdjEntry&) = default;
};

using TcValue = std::variant<AdjEntry, bool, Round>;
using Slots = std::array<AdjEntry, kSlots>;

// Undirected randomized tree contraction over a forest of degree at most 3.
// Round i of vertex u reads its slots A[i][u][*] and leaf[i][u]. It finalizes
// when isolated, rakes when it is a leaf (the lower id of two adjacent leaves
// rakes), compresses when it has two non-leaf neighbours and flips (H, T, T)
// against them, and otherwise stays alive.
struct TreeContractionProgram {
  static constexpr std::uint8_t kAdj = 0;
  static constexpr std::uint8_t kLeaf = 1;
  static constexpr std::uint8_t kDeath = 2;

  static LocationKey adj_key(Round i, VertexId u, std::size_t j) {
    return LocationKey(kAdj, i, u, static_cast<std::uint8_t>(j));
  }
  static LocationKey leaf_key(Round i, VertexId u) { return LocationKey(kLeaf, i, u); }
  static LocationKey death_key(VertexId u) { return LocationKey(kDeath, 0, u); }

  CoinOracle coins;

  void compute_round(Round i, ProcessId u, RoundContext<TcValue>& ctx) const {
    Slots s;
    std::size_t degree = 0;
    for (std::size_t j = 0; j < kSlots; ++j) {
      s[j] = std::get<AdjEntry>(ctx.read(adj_key(i, u, j)));
      degree += !s[j].empty();
    }
    const bool leaf = std::get<bool>(ctx.read(leaf_key(i, u)));
    auto leaf_of = [&](VertexId v) { return std::get<bool>(ctx.read(leaf_key(i, v))); };

    if (degree == 0) {
      ctx.write(death_key(u), TcValue{i});
      ctx.retire();
      return;
    }
    if (leaf) {
      const AdjEntry& e = *std::find_if(s.begin(), s.end(), [](const AdjEntry& x) { return !x.empty(); });
      if (!leaf_of(e.neighbor) || u < e.neighbor) {
        AdjEntry raked;
        raked.raker = u;
        ctx.write(adj_key(i + 1, e.neighbor, e.back), TcValue{raked});
        ctx.write(death_key(u), TcValue{i});
        ctx.retire();
        return;
      }
    } else if (degree == 2) {
      std::array<std::size_t, 2> at{};
      std::size_t k = 0;
      for (std::size_t j = 0; j < kSlots; ++j)
        if (!s[j].empty()) at[k++] = j;
      const AdjEntry& a = s[at[0]];
      const AdjEntry& b = s[at[1]];
      const bool leaf_a = leaf_of(a.neighbor);
      const bool leaf_b = leaf_of(b.neighbor);
      const bool coin = coins.heads(i, u) && !coins.heads(i, a.neighbor) && !coins.heads(i, b.neighbor);
      if (!leaf_a && !leaf_b && coin) {
        ctx.write(adj_key(i + 1, a.neighbor, a.back), TcValue{AdjEntry{b.neighbor, b.back, u, kNullVertex}});
        ctx.write(adj_key(i + 1, b.neighbor, b.back), TcValue{AdjEntry{a.neighbor, a.back, u, kNullVertex}});
        ctx.write(death_key(u), TcValue{i});
        ctx.retire();
        return;
      }
    }
    // Alive. The next-round degree is the number of non-leaf neighbours,
    // since every leaf neighbour rakes into u.
    std::size_t nonleaves = 0;
    for (std::size_t j = 0; j < kSlots; ++j) {
      if (!s[j].empty()) {
        ctx.write(adj_key(i + 1, s[j].neighbor, s[j].back),
                  TcValue{AdjEntry{u, static_cast<std::uint8_t>(j), s[j].rep, kNullVertex}});
        nonleaves += !leaf_of(s[j].neighbor);
      } else {
        ctx.write(adj_key(i + 1, u, j), TcValue{AdjEntry{}});
      }
    }
    ctx.write(leaf_key(i + 1, u), TcValue{nonleaves == 1});
  }
};

enum class DeathKind : std::uint8_t { kFinalize = 0, kRake = 1, kCompress = 2 };

// The contraction record of a dynamic forest, kept current under batches of
// links and cuts given on original vertex ids. Vertices of degree above 3 are
// split into paths, and paths grow when a full vertex gains an edge.
class TreeContraction {
 public:
  using Program = TreeContractionProgram;

  explicit TreeContraction(const ForestInput& forest, std::uint64_t seed = 0, EngineOptions options = {})
      : engine_(options), program_{CoinOracle(seed)}, red_(tc_reduce_degree(forest)) {
    const VertexId n = red_.reduced_count();
    std::vector<Slots> slots(n);
    for (const auto& e : red_.edges) connect(slots, e.u, e.v);
    engine_.store().reserve(std::size_t{n} * 12);
    for (VertexId u = 0; u < n; ++u) install(u, slots[u], nullptr);
    std::vector<ProcessId> procs(n);
    std::iota(procs.begin(), procs.end(), ProcessId{0});
    if (n > 0) engine_.run(program_, procs);
  }

  const DegreeReduction& reduction() const { return red_; }
  const Engine<TcValue>& engine() const { return engine_; }
  const CoinOracle& coins() const { return program_.coins; }
  VertexId original_count() const { return red_.original_count(); }
  VertexId vertex_count() const { return red_.reduced_count(); }
  Round rounds() const { return engine_.trace().rounds_executed(); }

  // --- the record, on reduced vertex ids ---------------------------------

  const AdjEntry& slot(Round i, VertexId u, std::size_t j) const {
    return std::get<AdjEntry>(at(Program::adj_key(i, u, j)));
  }
  Slots slots(Round i, VertexId u) const {
    Slots s;
    for (std::size_t j = 0; j < kSlots; ++j) s[j] = slot(i, u, j);
    return s;
  }
  bool leaf(Round i, VertexId u) const { return std::get<bool>(at(Program::leaf_key(i, u))); }
  Round death_round(VertexId u) const { return std::get<Round>(at(Program::death_key(u))); }
  std::size_t degree(Round i, VertexId u) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < kSlots; ++j) d += !slot(i, u, j).empty();
    return d;
  }
  DeathKind death_kind(VertexId u) const {
    const std::size_t d = degree(death_round(u), u);
    return d == 0 ? DeathKind::kFinalize : d == 1 ? DeathKind::kRake : DeathKind::kCompress;
  }

  // The vertex u's component contracts into, reached by following rakes and
  // compressions to later-dying neighbours.
  VertexId representative(VertexId u) const {
    for (;;) {
      const Round d = death_round(u);
      VertexId next = kNullVertex;
      for (std::size_t j = 0; j < kSlots && next == kNullVertex; ++j) next = slot(d, u, j).neighbor;
      if (next == kNullVertex) return u;
      u = next;
    }
  }

  // --- updates, on original vertex ids -----------------------------------

  bool has_edge(VertexId x, VertexId y) const { return red_.edge_of.contains(edge_key(x, y)); }

  void batch_link(std::span<const WeightedEdge> edges) {
    absl::flat_hash_set<EdgeKey> batch;
    for (const auto& e : edges) {
      const std::string name = "link (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")";
      if (e.u >= original_count() || e.v >= original_count()) throw TreeError(name + " names an unknown vertex");
      if (e.u == e.v) throw TreeError(name + " is a self-loop");
      if (has_edge(e.u, e.v)) throw TreeError(name + ": edge already present");
      if (!batch.insert(edge_key(e.u, e.v)).second) throw TreeError(name + " appears twice in the batch");
    }
    check_acyclic(edges);

    Edit edit(*this);
    for (const auto& e : edges) {
      const VertexId a = edit.attach_point(e.u);
      const VertexId b = edit.attach_point(e.v);
      edit.link(a, b, e.weight);
      red_.edge_of.emplace(edge_key(e.u, e.v), edge_key(a, b));
    }
    commit(edit);
  }

  void batch_cut(std::span<const EdgeKey> edges) {
    absl::flat_hash_set<EdgeKey> batch;
    for (const auto& [x, y] : edges) {
      const std::string name = "cut (" + std::to_string(x) + ", " + std::to_string(y) + ")";
      if (x >= original_count() || y >= original_count()) throw TreeError(name + " names an unknown vertex");
      if (!has_edge(x, y)) throw TreeError(name + ": no such edge");
      if (!batch.insert(edge_key(x, y)).second) throw TreeError(name + " appears twice in the batch");
    }
    Edit edit(*this);
    for (const auto& [x, y] : edges) {
      auto it = red_.edge_of.find(edge_key(x, y));
      edit.cut(it->second.first, it->second.second);
      red_.edge_of.erase(it);
    }
    commit(edit);
  }

  // A fresh engine run on the current round-0 input, for consistency checks.
  Engine<TcValue> rerun() const {
    Engine<TcValue> fresh(engine_.options());
    const VertexId n = vertex_count();
    for (VertexId u = 0; u < n; ++u) {
      for (std::size_t j = 0; j < kSlots; ++j)
        fresh.store().set_input(Program::adj_key(0, u, j), TcValue{slot(0, u, j)});
      fresh.store().set_input(Program::leaf_key(0, u), TcValue{leaf(0, u)});
    }
    std::vector<ProcessId> procs(n);
    std::iota(procs.begin(), procs.end(), ProcessId{0});
    if (n > 0) fresh.run(program_, procs);
    return fresh;
  }

 private:
  // Pending round-0 edits: working copies of the slots of touched vertices.
  class Edit {
   public:
    explicit Edit(TreeContraction& tc) : tc_(tc), base_(tc.vertex_count()) {}

    Slots& slots(VertexId u) {
      auto [it, fresh] = work_.try_emplace(u);
      if (fresh) {
        if (u < base_) it->second = tc_.slots(0, u);
        order_.push_back(u);
      }
      return it->second;
    }

    void link(VertexId a, VertexId b, Weight w) {
      Slots& sa = slots(a);
      Slots& sb = slots(b);
      const auto ja = free_slot(sa, a);
      const auto jb = free_slot(sb, b);
      sa[ja] = AdjEntry{b, static_cast<std::uint8_t>(jb), kNullVertex, kNullVertex};
      sb[jb] = AdjEntry{a, static_cast<std::uint8_t>(ja), kNullVertex, kNullVertex};
      tc_.red_.weight_of[edge_key(a, b)] = w;
    }

    void cut(VertexId a, VertexId b) {
      Slots& sa = slots(a);
      Slots& sb = slots(b);
      for (auto& e : sa)
        if (e.neighbor == b) e = AdjEntry{};
      for (auto& e : sb)
        if (e.neighbor == a) e = AdjEntry{};
      tc_.red_.weight_of.erase(edge_key(a, b));
    }

    // A vertex of x's path with a free slot, growing the path when all are
    // full: one outside edge (c, z) of the last path vertex c moves to a new
    // vertex c', which joins the path after c.
    VertexId attach_point(VertexId x) {
      auto& chain = tc_.red_.chains[x];
      for (VertexId c : chain)
        if (degree(slots(c)) < kSlots) return c;
      const VertexId c = chain.back();
      VertexId z = kNullVertex;
      for (const auto& e : slots(c))
        if (tc_.red_.owner[e.neighbor] != x) z = e.neighbor;
      const VertexId fresh = tc_.vertex_count();
      if (fresh == kNullVertex) throw TreeError("vertex id space exhausted");
      added_.push_back(fresh);
      tc_.red_.owner.push_back(x);
      tc_.red_.vertex_weight.push_back(0);
      chain.push_back(fresh);
      const Weight wz = tc_.red_.edge_weight(c, z);
      cut(c, z);
      link(c, fresh, kVirtualWeight);
      link(fresh, z, wz);
      const EdgeKey moved = edge_key(x, tc_.red_.owner[z]);
      tc_.red_.edge_of[moved] = edge_key(fresh, z);
      return fresh;
    }

    const std::vector<VertexId>& touched() const { return order_; }
    const std::vector<VertexId>& added() const { return added_; }
    const Slots& result(VertexId u) const { return work_.at(u); }

   private:
    static std::size_t degree(const Slots& s) {
      return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](const AdjEntry& e) { return !e.empty(); }));
    }
    static std::size_t free_slot(const Slots& s, VertexId u) {
      for (std::size_t j = 0; j < kSlots; ++j)
        if (s[j].empty()) return j;
      throw std::logic_error("vertex " + std::to_string(u) + " has no free adjacency slot");
    }

    TreeContraction& tc_;
    VertexId base_;
    std::unordered_map<VertexId, Slots> work_;  // references must survive inserts
    std::vector<VertexId> order_;
    std::vector<VertexId> added_;
  };

  static void connect(std::vector<Slots>& slots, VertexId a, VertexId b) {
    auto free = [](const Slots& s) {
      for (std::size_t j = 0; j < kSlots; ++j)
        if (s[j].empty()) return j;
      throw std::logic_error("reduced vertex of degree above 3");
    };
    const std::size_t ja = free(slots[a]);
    const std::size_t jb = free(slots[b]);
    slots[a][ja] = AdjEntry{b, static_cast<std::uint8_t>(jb), kNullVertex, kNullVertex};
    slots[b][jb] = AdjEntry{a, static_cast<std::uint8_t>(ja), kNullVertex, kNullVertex};
  }

  // Writes u's round-0 slots and leaf flag, recording changed locations.
  void install(VertexId u, const Slots& s, PropagationDelta* delta) {
    std::size_t degree = 0;
    for (std::size_t j = 0; j < kSlots; ++j) {
      degree += !s[j].empty();
      const LocationKey key = Program::adj_key(0, u, j);
      if (engine_.store().set_input(key, TcValue{s[j]}) && delta) delta->changed.push_back(key);
    }
    const LocationKey key = Program::leaf_key(0, u);
    if (engine_.store().set_input(key, TcValue{degree == 1}) && delta) delta->changed.push_back(key);
  }

  void commit(const Edit& edit) {
    PropagationDelta delta;
    for (VertexId u : edit.touched()) install(u, edit.result(u), &delta);
    delta.added = edit.added();
    engine_.propagate(program_, delta);
  }

  // Links may not join two vertices already connected, directly or through
  // other links of the batch.
  void check_acyclic(std::span<const WeightedEdge> edges) const {
    std::vector<std::pair<VertexId, VertexId>> trees;
    trees.reserve(edges.size());
    for (const auto& e : edges)
      trees.emplace_back(representative(red_.chains[e.u].front()), representative(red_.chains[e.v].front()));
    if (const auto k = detail::first_cycle(trees))
      throw TreeError("link (" + std::to_string(edges[*k].u) + ", " + std::to_string(edges[*k].v) +
                      ") would close a cycle");
  }

  const TcValue& at(const LocationKey& key) const {
    const TcValue* v = engine_.store().find(key);
    if (!v) throw std::logic_error("contraction record has no value at the requested location");
    return *v;
  }

  Engine<TcValue> engine_;
  Program program_;
  DegreeReduction red_;
};

}  // namespace dynpar
