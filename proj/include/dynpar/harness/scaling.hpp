#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynpar/harness/generators.hpp"
#include "dynpar/listseq.hpp"
#include "dynpar/rctree.hpp"

namespace dynpar::harness {

struct ExperimentConfig {
  Structure structure = Structure::kPath;
  VertexId n = 1024;
  std::vector<std::size_t> ks{1};
  std::vector<std::uint64_t> seeds{1};
  std::size_t max_degree = 0;
  EngineOptions options{};
};

// One cut batch of k edges on a freshly built tree of n vertices.
struct StatsRow {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  std::size_t initial_work = 0;
  std::size_t affected_total = 0;
  std::size_t affected_round0 = 0;
  std::size_t rc_nodes_touched = 0;
  double wall_time_ms = 0;
};

inline constexpr std::string_view kStatsHeader =
    "n,k,seed,rounds,initial_work,affected_total,affected_round0,rc_nodes_touched,wall_time_ms";

inline void write_row(std::ostream& out, const StatsRow& r) {
  out << r.n << ',' << r.k << ',' << r.seed << ',' << r.rounds << ',' << r.initial_work << ',' << r.affected_total
      << ',' << r.affected_round0 << ',' << r.rc_nodes_touched << ',' << r.wall_time_ms << '\n';
}

// k * log2(1 + n/k), the batch cost scale.
inline double batch_scale(std::size_t n, std::size_t k) {
  return static_cast<double>(k) * std::log2(1.0 + static_cast<double>(n) / static_cast<double>(k));
}

// Mean cost over seeds divided by batch_scale, per k.
struct RatioSummary {
  std::vector<std::size_t> ks;
  std::vector<double> ratio;
  double c_star = 0;  // max ratio
  double median = 0;
  bool bounded = true;  // every ratio within 3x the median
};

template <typename Metric>
RatioSummary summarize(const std::vector<StatsRow>& rows, Metric metric) {
  std::map<std::size_t, std::pair<double, std::size_t>> by_k;
  std::size_t n = 0;
  for (const auto& r : rows) {
    auto& [sum, count] = by_k[r.k];
    sum += static_cast<double>(metric(r));
    ++count;
    n = r.n;
  }
  RatioSummary s;
  for (const auto& [k, acc] : by_k) {
    s.ks.push_back(k);
    s.ratio.push_back(acc.first / static_cast<double>(acc.second) / batch_scale(n, k));
  }
  if (s.ratio.empty()) return s;
  std::vector<double> sorted = s.ratio;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  s.median = m % 2 ? sorted[m / 2] : (sorted[m / 2 - 1] + sorted[m / 2]) / 2;
  s.c_star = sorted.back();
  s.bounded = s.c_star <= 3 * s.median;
  return s;
}

inline RatioSummary summarize_affected(const std::vector<StatsRow>& rows) {
  return summarize(rows, [](const StatsRow& r) { return r.affected_total; });
}
inline RatioSummary summarize_touched(const std::vector<StatsRow>& rows) {
  return summarize(rows, [](const StatsRow& r) { return r.rc_nodes_touched; });
}

inline void write_summary(std::ostream& out, std::string_view label, const RatioSummary& s) {
  out << "# " << label << ": c*=" << s.c_star << " median=" << s.median << (s.bounded ? " bounded" : " DRIFT")
      << " ratios";
  for (std::size_t q = 0; q < s.ks.size(); ++q) out << ' ' << s.ks[q] << ':' << s.ratio[q];
  out << '\n';
}

// For every seed, builds the tree once; for every k, cuts k random edges,
// records the propagation, and links them back. The RC column counts nodes
// touched by one batch representative query over k random vertices.
// `on_row` sees each row as it is produced.
template <typename OnRow>
std::vector<StatsRow> run_scaling(const ExperimentConfig& cfg, OnRow on_row) {
  if (cfg.seeds.empty()) throw std::invalid_argument("scaling experiment needs at least one seed");
  if (cfg.n < 2) throw std::invalid_argument("scaling experiment needs n >= 2");
  for (std::size_t k : cfg.ks)
    if (k == 0 || k > cfg.n - 1)
      throw std::invalid_argument("batch size " + std::to_string(k) + " outside 1.." + std::to_string(cfg.n - 1));
  using Clock = std::chrono::steady_clock;
  std::vector<StatsRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    GeneratorOptions gen;
    gen.max_degree = cfg.max_degree;
    gen.random_weights = true;
    const ForestInput input = make_tree(cfg.structure, cfg.n, seed, gen);
    DynamicForest forest(input, seed, cfg.options);
    const auto& stats = forest.contraction().engine().stats();
    const std::size_t rounds = forest.contraction().rounds();
    const std::size_t work = stats.initial_work();
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + cfg.n);
    std::vector<WeightedEdge> pool = input.edges;
    std::vector<VertexId> vertices(cfg.n);
    std::iota(vertices.begin(), vertices.end(), VertexId{0});
    for (std::size_t k : cfg.ks) {
      StatsRow row{cfg.n, k, seed, rounds, work};

      std::shuffle(vertices.begin(), vertices.end(), rng);
      row.rc_nodes_touched = forest.batch_find_repr(std::span(vertices).first(k)).touched;

      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<EdgeKey> cut;
      cut.reserve(k);
      for (std::size_t q = 0; q < k; ++q) cut.push_back(edge_key(pool[q].u, pool[q].v));
      const auto t0 = Clock::now();
      forest.batch_cut(cut);
      row.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      row.affected_total = stats.affected_total();
      row.affected_round0 = stats.affected_at(0);
      forest.batch_link(std::span(pool).first(k));

      on_row(row);
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::vector<StatsRow> run_scaling(const ExperimentConfig& cfg) {
  return run_scaling(cfg, [](const StatsRow&) {});
}

// Build-time profile of one contraction: live computations per round.
struct BuildProfile {
  std::size_t n = 0;
  std::size_t rounds = 0;
  std::size_t work = 0;
  std::vector<std::size_t> live;

  // Mean of live[i+1] / live[i] over consecutive rounds.
  double mean_survival() const {
    if (live.size() < 2) return 0;
    double sum = 0;
    for (std::size_t i = 0; i + 1 < live.size(); ++i)
      sum += static_cast<double>(live[i + 1]) / static_cast<double>(live[i]);
    return sum / static_cast<double>(live.size() - 1);
  }
};

inline BuildProfile profile_tree(Structure s, VertexId n, std::uint64_t seed, GeneratorOptions gen = {},
                                 EngineOptions options = {}) {
  const TreeContraction tc(make_tree(s, n, seed, gen), seed, options);
  const auto& st = tc.engine().stats();
  return BuildProfile{n, tc.rounds(), st.initial_work(), st.computations_per_round};
}

// A single list of n nodes in a random order.
inline BuildProfile profile_list(NodeId n, std::uint64_t seed, EngineOptions options = {}) {
  std::mt19937_64 rng(seed);
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<long long> values(n, 1);
  const auto nodes = chains_to_nodes<long long>(n, {order}, values);
  const Sequence<long long> seq(nodes, {}, seed, options);
  const auto& st = seq.engine().stats();
  return BuildProfile{n, seq.rounds(), st.initial_work(), st.computations_per_round};
}

}  // namespace dynpar::harness
