#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>
#include <absl/container/inlined_vector.h>

#include "dynpar/treecontract.hpp"

namespace dynpar {

// Heaviest edge on a path, with the number of edges on it.
struct PathMax {
  Weight weight = -std::numeric_limits<Weight>::infinity();
  VertexId a = kNullVertex;
  VertexId b = kNullVertex;
  std::uint32_t hops = 0;

  bool empty() const { return hops == 0; }
  friend bool operator==(const PathMax&, const PathMax&) = default;
};

inline PathMax combine(const PathMax& x, const PathMax& y) {
  PathMax out = (y.a != kNullVertex && (x.a == kNullVertex || y.weight > x.weight)) ? y : x;
  out.hops = x.hops + y.hops;
  return out;
}

enum class ClusterKind : std::uint8_t { kNullary, kUnary, kBinary, kBaseVertex, kBaseEdge };

// A node of the RC forest. Clusters are named by their representative;
// base edges by their endpoints.
struct RCNode {
  ClusterKind kind = ClusterKind::kBaseVertex;
  VertexId a = kNullVertex;
  VertexId b = kNullVertex;
  friend bool operator==(const RCNode&, const RCNode&) = default;
  friend bool operator<(const RCNode& x, const RCNode& y) {
    return std::tie(x.kind, x.a, x.b) < std::tie(y.kind, y.a, y.b);
  }
};

// The rake-compress forest of a contraction record, on reduced vertex ids.
// C(u) is the cluster formed when u dies; its children are u's base vertex,
// the edges in u's slots at its death round, and the clusters raked into u.
// Payloads: the vertex weight inside each cluster, and the heaviest edge on
// the path between the two boundaries of a binary cluster.
class RCForest {
 public:
  struct Cluster {
    Round death = 0;
    std::uint8_t arity = 0;                             // boundary count
    std::array<VertexId, 2> boundary{kNullVertex, kNullVertex};
    std::array<VertexId, 2> via{kNullVertex, kNullVertex};  // edge cluster representative, null for a base edge
    VertexId parent = kNullVertex;                      // representative of the parent cluster
    Weight sum = 0;
    PathMax spine;
    friend bool operator==(const Cluster&, const Cluster&) = default;
  };

  struct BatchResult {
    std::vector<VertexId> representative;
    std::size_t touched = 0;  // distinct RC nodes visited
  };

  RCForest() = default;
  explicit RCForest(const TreeContraction& tc) { rebuild(tc); }

  void rebuild(const TreeContraction& tc) {
    tc_ = &tc;
    const VertexId n = tc.vertex_count();
    clusters_.assign(n, Cluster{});
    rakers_.assign(n, {});
    boundary_of_.assign(n, {});
    for (VertexId u = 0; u < n; ++u) {
      load(u);
      attach(u);
    }
    for (VertexId u = 0; u < n; ++u) clusters_[u].parent = parent_of(u);
    std::vector<VertexId> order(n);
    std::iota(order.begin(), order.end(), VertexId{0});
    std::sort(order.begin(), order.end(), [&](VertexId x, VertexId y) {
      return std::pair(clusters_[x].death, x) < std::pair(clusters_[y].death, y);
    });
    for (VertexId u : order) refresh_payload(u);
  }

  // Brings the forest up to date after a propagation on the same record,
  // revisiting only the vertices the propagation touched.
  void update(const TreeContraction& tc) {
    tc_ = &tc;
    const VertexId old_n = static_cast<VertexId>(clusters_.size());
    const VertexId n = tc.vertex_count();
    clusters_.resize(n);
    rakers_.resize(n);
    boundary_of_.resize(n);

    std::vector<VertexId> dirty(tc.engine().last_touched().begin(), tc.engine().last_touched().end());
    for (VertexId u = old_n; u < n; ++u) dirty.push_back(u);
    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    for (VertexId u : dirty)
      if (u < old_n) detach(u);
    for (VertexId u : dirty) {
      load(u);
      attach(u);
    }

    absl::flat_hash_set<VertexId> reparent(dirty.begin(), dirty.end());
    for (VertexId u : dirty)
      for (VertexId k : boundary_of_[u]) reparent.insert(k);

    absl::flat_hash_set<VertexId> queued;
    std::priority_queue<std::pair<Round, VertexId>, std::vector<std::pair<Round, VertexId>>, std::greater<>> heap;
    auto push = [&](VertexId k) {
      if (k != kNullVertex && queued.insert(k).second) heap.emplace(clusters_[k].death, k);
    };
    for (VertexId k : reparent) {
      const VertexId before = clusters_[k].parent;
      const VertexId after = parent_of(k);
      clusters_[k].parent = after;
      if (before != after) {
        if (before < n) push(before);
        push(after);
      }
    }
    for (VertexId u : dirty) push(u);
    while (!heap.empty()) {
      const VertexId k = heap.top().second;
      heap.pop();
      if (refresh_payload(k)) push(clusters_[k].parent);
    }
  }

  VertexId vertex_count() const { return static_cast<VertexId>(clusters_.size()); }
  const Cluster& cluster(VertexId u) const { return clusters_[u]; }
  std::size_t node_count() const { return 2 * clusters_.size() + tc_->reduction().weight_of.size(); }

  ClusterKind kind(VertexId u) const { return static_cast<ClusterKind>(clusters_[u].arity); }

  // Parent of a node; none for a root.
  std::optional<RCNode> parent(const RCNode& x) const {
    switch (x.kind) {
      case ClusterKind::kBaseVertex:
        return cluster_node(x.a);
      case ClusterKind::kBaseEdge:
        return cluster_node(clusters_[x.a].death < clusters_[x.b].death ? x.a : x.b);
      default: {
        const VertexId p = clusters_[x.a].parent;
        if (p == kNullVertex) return std::nullopt;
        return cluster_node(p);
      }
    }
  }

  std::vector<RCNode> children(VertexId u) const {
    std::vector<RCNode> out{RCNode{ClusterKind::kBaseVertex, u, kNullVertex}};
    const Cluster& c = clusters_[u];
    for (std::size_t i = 0; i < c.arity; ++i) out.push_back(edge_node(u, c.boundary[i], c.via[i]));
    for (VertexId w : rakers_[u]) out.push_back(cluster_node(w));
    return out;
  }

  std::vector<RCNode> roots() const {
    std::vector<RCNode> out;
    for (VertexId u = 0; u < vertex_count(); ++u)
      if (clusters_[u].arity == 0) out.push_back(cluster_node(u));
    return out;
  }

  // The representative of the root cluster above u.
  VertexId find_repr(VertexId u) const {
    check(u);
    while (clusters_[u].parent != kNullVertex) u = clusters_[u].parent;
    return u;
  }

  // Representatives for many vertices at once. Each walk stops at the first
  // node an earlier walk already visited and takes its answer from there.
  BatchResult batch_find_repr(std::span<const VertexId> batch) const {
    for (VertexId u : batch) check(u);
    BatchResult out;
    out.representative.resize(batch.size());
    absl::flat_hash_map<VertexId, VertexId> answer_of_cluster;
    absl::flat_hash_set<VertexId> base_seen;
    std::vector<VertexId> walk;
    for (std::size_t q = 0; q < batch.size(); ++q) {
      const VertexId u = batch[q];
      if (!base_seen.insert(u).second) {
        out.representative[q] = answer_of_cluster.at(u);
        continue;
      }
      ++out.touched;
      walk.clear();
      VertexId k = u;
      VertexId answer = kNullVertex;
      for (;;) {
        if (auto it = answer_of_cluster.find(k); it != answer_of_cluster.end()) {
          answer = it->second;
          break;
        }
        ++out.touched;
        walk.push_back(k);
        if (clusters_[k].parent == kNullVertex) {
          answer = k;
          break;
        }
        k = clusters_[k].parent;
      }
      for (VertexId w : walk) answer_of_cluster.emplace(w, answer);
      out.representative[q] = answer;
    }
    return out;
  }

  bool connected(VertexId u, VertexId v) const { return find_repr(u) == find_repr(v); }

  // Heaviest edge on the u-v path; empty when u == v.
  PathMax path_max(VertexId u, VertexId v) const {
    check(u);
    check(v);
    if (u == v) return {};
    const auto up = path_chain(u);
    const auto vp = path_chain(v);
    const auto [i, j] = meet(up, vp);
    if (i == up.size()) throw TreeError("path query between disconnected vertices");
    const VertexId x = up[i].cluster;
    if (x == u) return vp[j - 1].agg.at(u);
    if (x == v) return up[i - 1].agg.at(v);
    return combine(up[i - 1].agg.at(x), vp[j - 1].agg.at(x));
  }

  // Total vertex weight in u's subtree when u's tree is rooted at r.
  Weight subtree_sum(VertexId r, VertexId u) const {
    check(r);
    check(u);
    const auto uc = sub_chain(u);
    const auto rc = ancestors(r);
    std::size_t i = 0, j = 0;
    {
      absl::flat_hash_map<VertexId, std::size_t> at;
      for (std::size_t k = 0; k < rc.size(); ++k) at.emplace(rc[k], k);
      while (i < uc.size() && !at.contains(uc[i].cluster)) ++i;
      if (i == uc.size()) throw TreeError("subtree query with root and vertex in different trees");
      j = at.at(uc[i].cluster);
    }
    const Weight total = clusters_[uc.back().cluster].sum;
    if (r == u) return total;
    if (i == 0) {
      // r lies in a child of C(u): everything except that child and what
      // hangs beyond it.
      const VertexId kr = rc[j - 1];
      const Cluster& c = clusters_[kr];
      Weight beyond = 0;
      if (c.arity == 2) {
        const VertexId a = c.boundary[0] == u ? c.boundary[1] : c.boundary[0];
        beyond = outside(rc, j - 1).at(a);
      }
      return total - c.sum - beyond;
    }
    const VertexId x = uc[i].cluster;
    const SubLevel& ku = uc[i - 1];
    const Cluster& c = clusters_[ku.cluster];
    Weight beyond = 0;
    if (c.arity == 2 && ku.on_spine) {
      const VertexId y = c.boundary[0] == x ? c.boundary[1] : c.boundary[0];
      beyond = outside(uc_clusters(uc), i - 1).at(y);
    }
    return ku.sub.at(x) + beyond;
  }

  // Re-derives every cluster from the record and compares, and checks the
  // shape rules: boundaries are neighbours at death, children die first,
  // parents are the first boundary to die.
  std::optional<std::string> audit() const {
    RCForest fresh(*tc_);
    if (!(fresh == *this)) return "incrementally maintained forest differs from a rebuild";
    for (VertexId u = 0; u < vertex_count(); ++u) {
      const Cluster& c = clusters_[u];
      if (c.arity > 2) return "cluster " + std::to_string(u) + " has more than two boundaries";
      for (const RCNode& child : children(u)) {
        if (child.kind == ClusterKind::kBaseVertex) continue;
        if (parent(child) != cluster_node(u))
          return "child of cluster " + std::to_string(u) + " names another parent";
        if (child.kind != ClusterKind::kBaseEdge && clusters_[child.a].death >= c.death)
          return "child cluster " + std::to_string(child.a) + " outlives its parent " + std::to_string(u);
      }
      if (c.parent != kNullVertex && std::find(c.boundary.begin(), c.boundary.begin() + c.arity, c.parent) ==
                                         c.boundary.begin() + c.arity)
        return "parent of cluster " + std::to_string(u) + " is not one of its boundaries";
    }
    return std::nullopt;
  }

  friend bool operator==(const RCForest& x, const RCForest& y) {
    if (x.clusters_ != y.clusters_ || x.rakers_.size() != y.rakers_.size()) return false;
    for (std::size_t u = 0; u < x.rakers_.size(); ++u) {
      auto a = x.rakers_[u], b = y.rakers_[u];
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) return false;
    }
    return true;
  }

 private:
  struct PathLevel {
    VertexId cluster;
    absl::flat_hash_map<VertexId, PathMax> agg;  // boundary -> heaviest edge from the start vertex
  };
  struct SubLevel {
    VertexId cluster;
    absl::flat_hash_map<VertexId, Weight> sub;  // boundary -> start vertex's subtree inside the cluster
    bool on_spine;
  };

  RCNode cluster_node(VertexId u) const { return RCNode{kind(u), u, kNullVertex}; }

  void check(VertexId u) const {
    if (u >= vertex_count()) throw TreeError("vertex " + std::to_string(u) + " is not in the forest");
  }

  RCNode edge_node(VertexId u, VertexId y, VertexId via) const {
    if (via == kNullVertex) return RCNode{ClusterKind::kBaseEdge, std::min(u, y), std::max(u, y)};
    return cluster_node(via);
  }

  void load(VertexId u) {
    Cluster& c = clusters_[u];
    c.death = tc_->death_round(u);
    c.arity = 0;
    c.boundary = {kNullVertex, kNullVertex};
    c.via = {kNullVertex, kNullVertex};
    for (std::size_t j = 0; j < kSlots; ++j) {
      const AdjEntry& e = tc_->slot(c.death, u, j);
      if (e.empty()) continue;
      c.boundary[c.arity] = e.neighbor;
      c.via[c.arity] = e.rep;
      ++c.arity;
    }
  }

  void attach(VertexId u) {
    const Cluster& c = clusters_[u];
    if (c.arity == 1) rakers_[c.boundary[0]].push_back(u);
    if (c.arity == 2)
      for (VertexId b : c.boundary) boundary_of_[b].push_back(u);
  }

  void detach(VertexId u) {
    const Cluster& c = clusters_[u];
    auto drop = [u](auto& v) { v.erase(std::find(v.begin(), v.end(), u)); };
    if (c.arity == 1) drop(rakers_[c.boundary[0]]);
    if (c.arity == 2)
      for (VertexId b : c.boundary) drop(boundary_of_[b]);
  }

  VertexId parent_of(VertexId u) const {
    const Cluster& c = clusters_[u];
    if (c.arity == 0) return kNullVertex;
    if (c.arity == 1) return c.boundary[0];
    return clusters_[c.boundary[0]].death < clusters_[c.boundary[1]].death ? c.boundary[0] : c.boundary[1];
  }

  PathMax edge_spine(VertexId u, std::size_t i) const {
    const Cluster& c = clusters_[u];
    if (c.via[i] != kNullVertex) return clusters_[c.via[i]].spine;
    return PathMax{tc_->reduction().edge_weight(u, c.boundary[i]), std::min(u, c.boundary[i]),
                   std::max(u, c.boundary[i]), 1};
  }
  Weight edge_sum(VertexId u, std::size_t i) const {
    const VertexId via = clusters_[u].via[i];
    return via == kNullVertex ? 0 : clusters_[via].sum;
  }

  // Recomputes u's payload from its children; true when it changed.
  bool refresh_payload(VertexId u) {
    Cluster& c = clusters_[u];
    Weight sum = tc_->reduction().vertex_weight[u];
    for (std::size_t i = 0; i < c.arity; ++i) sum += edge_sum(u, i);
    for (VertexId w : rakers_[u]) sum += clusters_[w].sum;
    const PathMax spine = c.arity == 2 ? combine(edge_spine(u, 0), edge_spine(u, 1)) : PathMax{};
    const bool changed = sum != c.sum || !(spine == c.spine);
    c.sum = sum;
    c.spine = spine;
    return changed;
  }

  std::vector<VertexId> ancestors(VertexId u) const {
    std::vector<VertexId> out{u};
    while (clusters_[out.back()].parent != kNullVertex) out.push_back(clusters_[out.back()].parent);
    return out;
  }

  std::vector<PathLevel> path_chain(VertexId u) const {
    std::vector<PathLevel> out;
    PathLevel level{u, {}};
    for (std::size_t i = 0; i < clusters_[u].arity; ++i) level.agg[clusters_[u].boundary[i]] = edge_spine(u, i);
    out.push_back(std::move(level));
    for (VertexId p = clusters_[u].parent; p != kNullVertex; p = clusters_[p].parent) {
      const PathLevel& below = out.back();
      PathLevel next{p, {}};
      const Cluster& c = clusters_[p];
      for (std::size_t i = 0; i < c.arity; ++i) {
        const VertexId y = c.boundary[i];
        auto it = below.agg.find(y);
        next.agg[y] = it != below.agg.end() ? it->second : combine(below.agg.at(p), edge_spine(p, i));
      }
      out.push_back(std::move(next));
    }
    return out;
  }

  // First common cluster of two chains: indices into each.
  static std::pair<std::size_t, std::size_t> meet(const std::vector<PathLevel>& a, const std::vector<PathLevel>& b) {
    absl::flat_hash_map<VertexId, std::size_t> at;
    for (std::size_t k = 0; k < b.size(); ++k) at.emplace(b[k].cluster, k);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (auto it = at.find(a[k].cluster); it != at.end()) return {k, it->second};
    return {a.size(), b.size()};
  }

  std::vector<SubLevel> sub_chain(VertexId u) const {
    std::vector<SubLevel> out;
    const Cluster& cu = clusters_[u];
    SubLevel level{u, {}, true};
    for (std::size_t i = 0; i < cu.arity; ++i) level.sub[cu.boundary[i]] = cu.sum - edge_sum(u, i);
    out.push_back(std::move(level));
    for (VertexId p = cu.parent; p != kNullVertex; p = clusters_[p].parent) {
      const SubLevel& below = out.back();
      const Cluster& k = clusters_[below.cluster];
      const Cluster& c = clusters_[p];
      SubLevel next{p, {}, k.arity == 2 && below.on_spine && c.arity == 2 && is_slot_child(p, below.cluster)};
      for (std::size_t i = 0; i < c.arity; ++i) {
        const VertexId y = c.boundary[i];
        auto it = below.sub.find(y);
        next.sub[y] = it != below.sub.end() ? it->second + (below.on_spine ? c.sum - k.sum : 0) : below.sub.at(p);
      }
      out.push_back(std::move(next));
    }
    return out;
  }

  bool is_slot_child(VertexId p, VertexId k) const {
    const Cluster& c = clusters_[p];
    for (std::size_t i = 0; i < c.arity; ++i)
      if (c.via[i] == k) return true;
    return false;
  }

  static std::vector<VertexId> uc_clusters(const std::vector<SubLevel>& chain) {
    std::vector<VertexId> out;
    out.reserve(chain.size());
    for (const auto& l : chain) out.push_back(l.cluster);
    return out;
  }

  // For chain[k] (a bottom-up ancestor chain), the weight outside the
  // cluster hanging off each of its boundaries.
  absl::flat_hash_map<VertexId, Weight> outside(const std::vector<VertexId>& chain, std::size_t k) const {
    absl::flat_hash_map<VertexId, Weight> out;  // at the root: no boundaries
    for (std::size_t level = chain.size() - 1; level > k; --level) {
      const VertexId p = chain[level];
      const VertexId kid = chain[level - 1];
      const Cluster& P = clusters_[p];
      const Cluster& K = clusters_[kid];
      const VertexId other = K.arity == 2 ? (K.boundary[0] == p ? K.boundary[1] : K.boundary[0]) : kNullVertex;
      absl::flat_hash_map<VertexId, Weight> next;
      Weight via_p = P.sum - K.sum;
      for (std::size_t i = 0; i < P.arity; ++i)
        if (P.boundary[i] != other) via_p += out.at(P.boundary[i]);
      next[p] = via_p;
      if (other != kNullVertex) next[other] = out.at(other);
      out = std::move(next);
    }
    return out;
  }

  const TreeContraction* tc_ = nullptr;
  std::vector<Cluster> clusters_;
  std::vector<absl::InlinedVector<VertexId, 3>> rakers_;
  std::vector<std::vector<VertexId>> boundary_of_;  // binary clusters with the vertex as a boundary
};

// A dynamic forest on original vertex ids: the contraction record, kept
// current under link and cut batches, with its RC forest on top.
class DynamicForest {
 public:
  explicit DynamicForest(const ForestInput& forest, std::uint64_t seed = 0, EngineOptions options = {})
      : tc_(forest, seed, options), rc_(tc_) {}
  DynamicForest(const DynamicForest&) = delete;
  DynamicForest& operator=(const DynamicForest&) = delete;

  VertexId size() const { return tc_.original_count(); }
  const TreeContraction& contraction() const { return tc_; }
  const RCForest& rc() const { return rc_; }

  void batch_link(std::span<const WeightedEdge> edges) {
    tc_.batch_link(edges);
    rc_.update(tc_);
  }
  void batch_cut(std::span<const EdgeKey> edges) {
    tc_.batch_cut(edges);
    rc_.update(tc_);
  }

  bool has_edge(VertexId x, VertexId y) const { return tc_.has_edge(x, y); }
  Weight vertex_weight(VertexId x) const { return tc_.reduction().vertex_weight[base(x)]; }

  std::vector<WeightedEdge> edges() const {
    std::vector<WeightedEdge> out;
    const DegreeReduction& red = tc_.reduction();
    for (const auto& [orig, redge] : red.edge_of)
      out.push_back(WeightedEdge{orig.first, orig.second, red.weight_of.at(redge)});
    std::sort(out.begin(), out.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
      return std::pair(a.u, a.v) < std::pair(b.u, b.v);
    });
    return out;
  }

  VertexId find_repr(VertexId x) const { return tc_.reduction().owner[rc_.find_repr(base(x))]; }

  RCForest::BatchResult batch_find_repr(std::span<const VertexId> batch) const {
    std::vector<VertexId> reduced;
    reduced.reserve(batch.size());
    for (VertexId x : batch) reduced.push_back(base(x));
    auto out = rc_.batch_find_repr(reduced);
    for (VertexId& r : out.representative) r = tc_.reduction().owner[r];
    return out;
  }

  bool connected(VertexId x, VertexId y) const { return rc_.connected(base(x), base(y)); }

  std::vector<bool> batch_connected(std::span<const EdgeKey> pairs) const {
    std::vector<VertexId> batch;
    batch.reserve(2 * pairs.size());
    for (const auto& [x, y] : pairs) {
      batch.push_back(x);
      batch.push_back(y);
    }
    const auto reprs = batch_find_repr(batch);
    std::vector<bool> out(pairs.size());
    for (std::size_t q = 0; q < pairs.size(); ++q)
      out[q] = reprs.representative[2 * q] == reprs.representative[2 * q + 1];
    return out;
  }

  // Heaviest edge on the x-y path with one edge carrying it; nothing when x == y.
  std::optional<std::pair<Weight, EdgeKey>> path_max(VertexId x, VertexId y) const {
    const PathMax m = rc_.path_max(base(x), base(y));
    if (m.empty()) return std::nullopt;
    const auto& owner = tc_.reduction().owner;
    return std::pair{m.weight, edge_key(owner[m.a], owner[m.b])};
  }

  // Vertex weight in x's subtree with the tree rooted at r. A split vertex
  // enters at the path vertex nearest r, found from hop counts to both ends
  // of its path.
  Weight subtree_sum(VertexId r, VertexId x) const {
    const VertexId root = base(r);
    if (!rc_.connected(root, base(x))) throw TreeError("subtree query with root and vertex in different trees");
    const auto& chain = tc_.reduction().chains[x];
    if (x == r) return rc_.subtree_sum(root, root);
    std::size_t entry = 0;
    if (chain.size() > 1) {
      const long first = rc_.path_max(chain.front(), root).hops;
      const long last = rc_.path_max(chain.back(), root).hops;
      entry = static_cast<std::size_t>((first - last + static_cast<long>(chain.size()) - 1) / 2);
    }
    return rc_.subtree_sum(root, chain[entry]);
  }

  // Propagated state against a fresh run, and the RC forest against a rebuild.
  std::optional<std::string> check_consistency() const {
    const auto fresh = tc_.rerun();
    if (!(fresh.trace() == tc_.engine().trace())) return "propagated trace differs from a fresh run";
    if (!(fresh.store().snapshot() == tc_.engine().store().snapshot()))
      return "propagated record differs from a fresh run";
    return rc_.audit();
  }

 private:
  VertexId base(VertexId x) const {
    if (x >= size()) throw TreeError("vertex " + std::to_string(x) + " is not in the forest");
    return x;
  }

  TreeContraction tc_;
  RCForest rc_;
};

}  // namespace dynpar
