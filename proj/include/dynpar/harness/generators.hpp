#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynpar/treecontract.hpp"

namespace dynpar::harness {

enum class Structure { kPath, kRandomTree, kStar, kBinaryTree };

inline Structure parse_structure(std::string_view s) {
  if (s == "path") return Structure::kPath;
  if (s == "random-tree") return Structure::kRandomTree;
  if (s == "star") return Structure::kStar;
  if (s == "binary-tree") return Structure::kBinaryTree;
  throw std::invalid_argument("unknown structure '" + std::string(s) + "'");
}

inline std::string_view structure_name(Structure s) {
  switch (s) {
    case Structure::kPath: return "path";
    case Structure::kRandomTree: return "random-tree";
    case Structure::kStar: return "star";
    case Structure::kBinaryTree: return "binary-tree";
  }
  return "?";
}

struct GeneratorOptions {
  std::size_t max_degree = 0;  // random trees only; 0 means unbounded
  bool random_weights = false;  // integer weights in [0, 1000)
};

// Trees on n vertices. Random trees use uniform attachment: vertex v picks
// its parent uniformly among 0..v-1 (among those below the degree cap).
inline ForestInput make_tree(Structure s, VertexId n, std::uint64_t seed, GeneratorOptions opt = {}) {
  std::mt19937_64 rng(seed);
  ForestInput f;
  f.n = n;
  std::uniform_int_distribution<int> weight(0, 999);
  auto w = [&]() -> Weight { return opt.random_weights ? weight(rng) : 1; };
  if (s == Structure::kRandomTree && opt.max_degree == 1 && n > 2)
    throw std::invalid_argument("degree cap of 1 cannot span a tree");
  std::vector<VertexId> open{0};  // vertices below the degree cap
  std::vector<std::size_t> degree(n, 0);
  for (VertexId v = 1; v < n; ++v) {
    VertexId parent = 0;
    std::size_t slot = 0;
    switch (s) {
      case Structure::kPath: parent = v - 1; break;
      case Structure::kStar: parent = 0; break;
      case Structure::kBinaryTree: parent = (v - 1) / 2; break;
      case Structure::kRandomTree:
        if (opt.max_degree == 0) {
          parent = std::uniform_int_distribution<VertexId>(0, v - 1)(rng);
        } else {
          slot = std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng);
          parent = open[slot];
        }
        break;
    }
    ++degree[parent];
    ++degree[v];
    f.edges.push_back({parent, v, w()});
    if (s == Structure::kRandomTree && opt.max_degree != 0) {
      if (degree[parent] >= opt.max_degree) {
        open[slot] = open.back();
        open.pop_back();
      }
      if (degree[v] < opt.max_degree) open.push_back(v);
    }
  }
  if (opt.random_weights) {
    f.vertex_weights.resize(n);
    for (auto& x : f.vertex_weights) x = weight(rng);
  }
  return f;
}

// A random forest: a random tree with each edge kept with probability keep.
inline ForestInput make_forest(VertexId n, double keep, std::uint64_t seed, GeneratorOptions opt = {}) {
  ForestInput f = make_tree(Structure::kRandomTree, n, seed, opt);
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  std::bernoulli_distribution kept(keep);
  std::erase_if(f.edges, [&](const WeightedEdge&) { return !kept(rng); });
  return f;
}

}  // namespace dynpar::harness
