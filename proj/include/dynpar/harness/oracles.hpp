#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dynpar/treecontract.hpp"

namespace dynpar::harness {

// A forest kept as plain adjacency maps. Every query is answered by direct
// traversal.
class ForestOracle {
 public:
  explicit ForestOracle(const ForestInput& f) : adj_(f.n), weight_(f.n, 0) {
    if (!f.vertex_weights.empty()) weight_ = f.vertex_weights;
    for (const auto& e : f.edges) link(e);
  }

  VertexId size() const { return static_cast<VertexId>(adj_.size()); }
  bool has_edge(VertexId x, VertexId y) const { return adj_[x].contains(y); }
  std::size_t degree(VertexId x) const { return adj_[x].size(); }

  void link(const WeightedEdge& e) {
    adj_[e.u][e.v] = e.weight;
    adj_[e.v][e.u] = e.weight;
  }
  void cut(VertexId x, VertexId y) {
    adj_[x].erase(y);
    adj_[y].erase(x);
  }

  std::vector<WeightedEdge> edges() const {
    std::vector<WeightedEdge> out;
    for (VertexId x = 0; x < size(); ++x)
      for (const auto& [y, w] : adj_[x])
        if (x < y) out.push_back({x, y, w});
    return out;
  }

  // Component label: the smallest vertex of the component.
  std::vector<VertexId> components() const {
    std::vector<VertexId> label(size(), kNullVertex);
    for (VertexId s = 0; s < size(); ++s) {
      if (label[s] != kNullVertex) continue;
      std::vector<VertexId> stack{s};
      label[s] = s;
      while (!stack.empty()) {
        const VertexId x = stack.back();
        stack.pop_back();
        for (const auto& [y, w] : adj_[x])
          if (label[y] == kNullVertex) label[y] = s, stack.push_back(y);
      }
    }
    return label;
  }

  bool connected(VertexId x, VertexId y) const { return !path(x, y).empty() || x == y; }

  // Vertices on the x-y path in order, or empty when disconnected.
  std::vector<VertexId> path(VertexId x, VertexId y) const {
    std::vector<VertexId> from(size(), kNullVertex);
    std::vector<VertexId> queue{x};
    from[x] = x;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (const auto& [z, w] : adj_[queue[h]])
        if (from[z] == kNullVertex) from[z] = queue[h], queue.push_back(z);
    if (from[y] == kNullVertex) return {};
    std::vector<VertexId> out{y};
    while (out.back() != x) out.push_back(from[out.back()]);
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Weight of u's subtree with the tree rooted at r.
  Weight subtree_sum(VertexId r, VertexId u) const {
    const auto p = path(r, u);
    if (p.empty() && r != u) throw std::invalid_argument("root and vertex are disconnected");
    const VertexId blocked = p.size() >= 2 ? p[p.size() - 2] : kNullVertex;
    Weight sum = 0;
    std::vector<bool> seen(size(), false);
    std::vector<VertexId> stack{u};
    seen[u] = true;
    if (blocked != kNullVertex) seen[blocked] = true;
    while (!stack.empty()) {
      const VertexId x = stack.back();
      stack.pop_back();
      sum += weight_[x];
      for (const auto& [y, w] : adj_[x])
        if (!seen[y]) seen[y] = true, stack.push_back(y);
    }
    return sum;
  }

  // Heaviest edge weight on the x-y path, nothing for x == y.
  std::optional<Weight> path_max(VertexId x, VertexId y) const {
    const auto p = path(x, y);
    if (p.empty()) throw std::invalid_argument("path endpoints are disconnected");
    std::optional<Weight> best;
    for (std::size_t k = 1; k < p.size(); ++k) {
      const Weight w = adj_[p[k - 1]].at(p[k]);
      if (!best || w > *best) best = w;
    }
    return best;
  }

  std::optional<Weight> edge_weight(VertexId x, VertexId y) const {
    auto it = adj_[x].find(y);
    if (it == adj_[x].end()) return std::nullopt;
    return it->second;
  }

  bool on_path(VertexId x, VertexId y, EdgeKey e) const {
    const auto p = path(x, y);
    for (std::size_t k = 1; k < p.size(); ++k)
      if (edge_key(p[k - 1], p[k]) == e) return true;
    return false;
  }

 private:
  std::vector<std::map<VertexId, Weight>> adj_;
  std::vector<Weight> weight_;
};

// Left-to-right fold of values[i..j].
template <typename T, typename Op>
T oracle_fold(std::span<const T> values, std::size_t i, std::size_t j, Op op) {
  if (i > j || j >= values.size()) throw std::out_of_range("fold range out of bounds");
  T acc = values[i];
  for (std::size_t k = i + 1; k <= j; ++k) acc = op(acc, values[k]);
  return acc;
}

}  // namespace dynpar::harness
