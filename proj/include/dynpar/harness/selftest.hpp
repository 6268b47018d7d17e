#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/pending/disjoint_sets.hpp>

#include "dynpar/engine/restricted.hpp"
#include "dynpar/harness/generators.hpp"
#include "dynpar/harness/oracles.hpp"
#include "dynpar/listseq.hpp"
#include "dynpar/mapreduce.hpp"
#include "dynpar/rctree.hpp"

namespace dynpar::harness {

enum class Family { kForest, kList, kArray };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::kForest: return "forest";
    case Family::kList: return "list";
    case Family::kArray: return "array";
  }
  return "?";
}

struct SelftestConfig {
  std::vector<std::uint64_t> seeds{1};
  std::size_t trials_per_seed = 300;  // split evenly over the families
  std::size_t max_n = 256;
  std::size_t batches_per_trial = 3;
  std::size_t max_batch = 8;
  std::size_t queries_per_check = 12;  // per query kind
  std::vector<Family> families{Family::kForest, Family::kList, Family::kArray};
  EngineOptions options{};
};

struct SelftestReport {
  std::size_t trials = 0;
  std::size_t mutations = 0;
  std::size_t state_checks = 0;
  std::size_t state_mismatches = 0;
  std::size_t query_checks = 0;
  std::size_t query_mismatches = 0;
  std::size_t restricted_checks = 0;
  std::size_t restricted_failures = 0;
  std::size_t edge_batches = 0;
  std::size_t round0_over = 0;  // edge batches with more than 3k round-0 affected
  double max_round0_ratio = 0;
  std::vector<std::string> failures;  // first few, for diagnosis

  bool ok() const { return state_mismatches == 0 && query_mismatches == 0 && restricted_failures == 0; }
};

namespace detail {

struct MaxOp {
  long long operator()(long long a, long long b) const { return std::max(a, b); }
};

class TrialRunner {
 public:
  TrialRunner(SelftestReport& rep, std::string tag, std::uint64_t seed)
      : rep_(rep), tag_(std::move(tag)), rng_(seed) {}

  std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  void state(bool ok, const std::string& what) {
    ++rep_.state_checks;
    if (!ok) fail(rep_.state_mismatches, what);
  }
  void query(bool ok, const std::string& what) {
    ++rep_.query_checks;
    if (!ok) fail(rep_.query_mismatches, what);
  }
  template <typename Value>
  void restricted(const Engine<Value>& e) {
    ++rep_.restricted_checks;
    const auto r = check_restricted(e.trace(), e.store());
    if (!r.restricted) fail(rep_.restricted_failures, "not restricted: " + r.first_violation.value_or("?"));
  }
  void error(const std::exception& e) { fail(rep_.state_mismatches, std::string("exception: ") + e.what()); }
  void mutated() { ++rep_.mutations; }
  void edge_batch(std::size_t k, std::size_t round0) {
    ++rep_.edge_batches;
    if (round0 > 3 * k) ++rep_.round0_over;
    rep_.max_round0_ratio = std::max(rep_.max_round0_ratio, static_cast<double>(round0) / static_cast<double>(k));
  }

 private:
  void fail(std::size_t& counter, const std::string& what) {
    ++counter;
    if (rep_.failures.size() < 20) rep_.failures.push_back(tag_ + ": " + what);
  }

  SelftestReport& rep_;
  std::string tag_;
  std::mt19937_64 rng_;
};

inline std::string pair_text(std::size_t a, std::size_t b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

inline void forest_queries(TrialRunner& t, const SelftestConfig& cfg, const DynamicForest& df,
                           const ForestOracle& oracle) {
  const VertexId n = oracle.size();
  const auto label = oracle.components();
  std::vector<std::vector<VertexId>> members(n);
  for (VertexId x = 0; x < n; ++x) members[label[x]].push_back(x);

  std::vector<EdgeKey> pairs;
  for (std::size_t q = 0; q < cfg.queries_per_check; ++q) {
    const auto x = static_cast<VertexId>(t.pick(0, n - 1));
    // Half the pairs are drawn within one component.
    const auto& comp = members[label[x]];
    const VertexId y = q % 2 ? comp[t.pick(0, comp.size() - 1)] : static_cast<VertexId>(t.pick(0, n - 1));
    pairs.emplace_back(x, y);
  }
  const auto batch = df.batch_connected(pairs);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const auto [x, y] = pairs[q];
    const bool want = label[x] == label[y];
    t.query(df.connected(x, y) == want, "connected" + pair_text(x, y));
    t.query(batch[q] == want, "batch connected" + pair_text(x, y));
  }

  std::vector<VertexId> all(n);
  std::iota(all.begin(), all.end(), VertexId{0});
  const auto reprs = df.batch_find_repr(all);
  bool same = true;
  for (VertexId x = 0; x < n; ++x) same = same && reprs.representative[x] == df.find_repr(x);
  t.query(same, "batch representatives differ from pointwise ones");

  for (std::size_t q = 0; q < cfg.queries_per_check; ++q) {
    const auto r = static_cast<VertexId>(t.pick(0, n - 1));
    const auto& comp = members[label[r]];
    const VertexId x = comp[t.pick(0, comp.size() - 1)];
    t.query(df.subtree_sum(r, x) == oracle.subtree_sum(r, x), "subtree sum" + pair_text(r, x));
    const VertexId y = comp[t.pick(0, comp.size() - 1)];
    const auto got = df.path_max(x, y);
    const auto want = oracle.path_max(x, y);
    bool ok = got.has_value() == want.has_value();
    if (ok && got) {
      const auto w = oracle.edge_weight(got->second.first, got->second.second);
      ok = got->first == *want && w && *w == *want && oracle.on_path(x, y, got->second);
    }
    t.query(ok, "path max" + pair_text(x, y));
  }
}

// A link batch joining distinct trees, or nothing when the forest is one tree.
inline std::vector<WeightedEdge> random_links(TrialRunner& t, const ForestOracle& oracle, std::size_t k) {
  const VertexId n = oracle.size();
  const auto label = oracle.components();
  boost::disjoint_sets_with_storage<> sets(n);
  for (VertexId x = 0; x < n; ++x) sets.union_set(x, label[x]);
  std::vector<WeightedEdge> out;
  for (std::size_t tries = 0; tries < 8 * k && out.size() < k; ++tries) {
    const auto x = static_cast<VertexId>(t.pick(0, n - 1));
    const auto y = static_cast<VertexId>(t.pick(0, n - 1));
    if (sets.find_set(x) == sets.find_set(y)) continue;
    sets.union_set(x, y);
    out.push_back({x, y, static_cast<Weight>(t.pick(0, 999))});
  }
  return out;
}

inline void forest_trial(TrialRunner& t, const SelftestConfig& cfg, std::uint64_t seed) {
  const auto n = static_cast<VertexId>(t.pick(2, cfg.max_n));
  GeneratorOptions gen;
  gen.random_weights = true;
  gen.max_degree = std::array<std::size_t, 4>{0, 0, 3, 4}[t.pick(0, 3)];
  const double keep = 0.5 + 0.5 * static_cast<double>(t.pick(0, 100)) / 100.0;
  const ForestInput input = t.pick(0, 9) == 0 ? make_tree(Structure::kStar, n, seed, gen)
                                              : make_forest(n, keep, seed, gen);
  DynamicForest df(input, seed, cfg.options);
  ForestOracle oracle(input);
  auto check = [&] {
    const auto err = df.check_consistency();
    t.state(!err, err.value_or(""));
    t.state(df.edges().size() == oracle.edges().size(), "edge count differs from the oracle");
    forest_queries(t, cfg, df, oracle);
    t.restricted(df.contraction().engine());
  };
  check();
  for (std::size_t b = 0; b < cfg.batches_per_trial; ++b) {
    const std::size_t k = t.pick(1, cfg.max_batch);
    auto edges = oracle.edges();
    std::vector<WeightedEdge> links;
    if (edges.empty() || t.pick(0, 1)) links = random_links(t, oracle, k);
    if (!links.empty()) {
      df.batch_link(links);
      for (const auto& e : links) oracle.link(e);
    } else if (!edges.empty()) {
      std::shuffle(edges.begin(), edges.end(), t.rng());
      edges.resize(std::min(k, edges.size()));
      std::vector<EdgeKey> cut;
      for (const auto& e : edges) cut.push_back(edge_key(e.u, e.v));
      df.batch_cut(cut);
      for (const auto& e : edges) oracle.cut(e.u, e.v);
    } else {
      continue;
    }
    t.mutated();
    const auto& st = df.contraction().engine().stats();
    t.edge_batch(links.empty() ? edges.size() : links.size(), st.affected_at(0));
    check();
  }
}

inline void list_trial(TrialRunner& t, const SelftestConfig& cfg, std::uint64_t seed) {
  using Seq = Sequence<long long>;
  const auto n = static_cast<NodeId>(t.pick(1, cfg.max_n));
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), t.rng());
  std::vector<Seq::Node> nodes(n);
  for (NodeId i = 0; i < n; ++i) nodes[order[i]].value = static_cast<long long>(t.pick(0, 2000)) - 1000;
  for (NodeId i = 0; i + 1 < n; ++i)
    if (t.pick(0, 9) != 0) {
      nodes[order[i]].next = order[i + 1];
      nodes[order[i + 1]].prev = order[i];
    }
  Seq seq(nodes, {}, seed, cfg.options);

  auto lists = [&] {
    std::vector<std::vector<NodeId>> out;
    for (NodeId u = 0; u < n; ++u) {
      if (nodes[u].prev != kNullNode) continue;
      out.emplace_back();
      for (NodeId x = u; x != kNullNode; x = nodes[x].next) out.back().push_back(x);
    }
    return out;
  };
  auto check = [&] {
    const Seq fresh(nodes, {}, seed, cfg.options);
    t.state(seq.engine().store().snapshot() == fresh.engine().store().snapshot(),
            "propagated list record differs from a fresh run");
    t.state(seq.engine().trace() == fresh.engine().trace(), "propagated list trace differs from a fresh run");
    const auto ls = lists();
    std::vector<std::pair<NodeId, NodeId>> pairs;
    std::vector<long long> want;
    for (std::size_t q = 0; q < cfg.queries_per_check; ++q) {
      const auto& l = ls[t.pick(0, ls.size() - 1)];
      std::size_t i = t.pick(0, l.size() - 1);
      std::size_t j = t.pick(0, l.size() - 1);
      if (i > j) std::swap(i, j);
      std::vector<long long> values;
      for (NodeId x : l) values.push_back(nodes[x].value);
      pairs.emplace_back(l[i], l[j]);
      want.push_back(oracle_fold<long long>(values, i, j, std::plus<long long>{}));
    }
    const auto got = seq.batch_query_value(pairs);
    for (std::size_t q = 0; q < pairs.size(); ++q)
      t.query(got[q] == want[q], "sequence query" + pair_text(pairs[q].first, pairs[q].second));
    for (std::size_t q = 0; q < cfg.queries_per_check; ++q) {
      const auto x = static_cast<NodeId>(t.pick(0, n - 1));
      const auto y = static_cast<NodeId>(t.pick(0, n - 1));
      NodeId hx = x, hy = y;
      while (nodes[hx].prev != kNullNode) hx = nodes[hx].prev;
      while (nodes[hy].prev != kNullNode) hy = nodes[hy].prev;
      t.query(seq.same_list(x, y) == (hx == hy), "same list" + pair_text(x, y));
    }
    t.restricted(seq.engine());
  };
  check();
  for (std::size_t b = 0; b < cfg.batches_per_trial; ++b) {
    const std::size_t k = t.pick(1, cfg.max_batch);
    switch (t.pick(0, 2)) {
      case 0: {
        std::vector<NodeId> cut;
        for (std::size_t q = 0; q < k; ++q) {
          const auto u = static_cast<NodeId>(t.pick(0, n - 1));
          if (nodes[u].next != kNullNode) cut.push_back(u);
        }
        if (cut.empty()) continue;
        seq.batch_split(cut);
        for (NodeId u : cut) {
          if (nodes[u].next == kNullNode) continue;
          nodes[nodes[u].next].prev = kNullNode;
          nodes[u].next = kNullNode;
        }
        break;
      }
      case 1: {
        auto ls = lists();
        if (ls.size() < 2) continue;
        std::shuffle(ls.begin(), ls.end(), t.rng());
        const std::size_t m = std::min(ls.size(), k + 1);
        std::vector<std::pair<NodeId, NodeId>> joins;
        for (std::size_t q = 0; q + 1 < m; ++q) joins.emplace_back(ls[q].back(), ls[q + 1].front());
        std::shuffle(joins.begin(), joins.end(), t.rng());
        seq.batch_join(joins);
        for (const auto& [u, v] : joins) {
          nodes[u].next = v;
          nodes[v].prev = u;
        }
        break;
      }
      default: {
        std::vector<std::pair<NodeId, long long>> updates;
        for (std::size_t q = 0; q < k; ++q) {
          const auto u = static_cast<NodeId>(t.pick(0, n - 1));
          updates.emplace_back(u, static_cast<long long>(t.pick(0, 2000)) - 1000);
        }
        seq.batch_update_value(updates);
        for (const auto& [u, v] : updates) nodes[u].value = v;
        break;
      }
    }
    t.mutated();
    check();
  }
}

template <typename Op>
void array_trial(TrialRunner& t, const SelftestConfig& cfg, Op op, long long identity) {
  const std::size_t n = t.pick(1, cfg.max_n);
  std::vector<long long> values(n);
  for (auto& v : values) v = static_cast<long long>(t.pick(0, 2000)) - 1000;
  MapReduce<long long, Op> mr(values, op, identity, {}, cfg.options);
  auto check = [&] {
    const MapReduce<long long, Op> fresh(values, op, identity, {}, cfg.options);
    t.state(mr.engine().store().snapshot() == fresh.engine().store().snapshot(),
            "propagated map-reduce cells differ from a fresh run");
    t.state(mr.engine().trace() == fresh.engine().trace(), "propagated map-reduce trace differs from a fresh run");
    t.query(mr.total() == oracle_fold<long long>(values, 0, n - 1, op), "total");
    for (std::size_t q = 0; q < cfg.queries_per_check; ++q) {
      std::size_t i = t.pick(0, n - 1);
      std::size_t j = t.pick(0, n - 1);
      if (i > j) std::swap(i, j);
      t.query(mr.range(i, j) == oracle_fold<long long>(values, i, j, op), "range" + pair_text(i, j));
    }
    t.restricted(mr.engine());
  };
  check();
  for (std::size_t b = 0; b < cfg.batches_per_trial; ++b) {
    std::vector<std::pair<std::size_t, long long>> updates;
    const std::size_t k = t.pick(1, cfg.max_batch);
    for (std::size_t q = 0; q < k; ++q) updates.emplace_back(t.pick(0, n - 1), static_cast<long long>(t.pick(0, 2000)) - 1000);
    mr.update(updates);
    for (const auto& [i, v] : updates) values[i] = v;
    t.mutated();
    check();
  }
}

}  // namespace detail

// Randomized trials: each builds a structure, applies random batches, and
// after every batch compares the propagated state with a fresh run and the
// query answers with the brute-force oracles.
inline SelftestReport run_selftest(const SelftestConfig& cfg) {
  SelftestReport rep;
  if (cfg.families.empty()) return rep;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t trial = 0; trial < cfg.trials_per_seed; ++trial) {
      const Family family = cfg.families[trial % cfg.families.size()];
      const std::uint64_t trial_seed = seed * 1000003 + trial;
      detail::TrialRunner t(rep,
                            std::string(family_name(family)) + " seed " + std::to_string(seed) + " trial " +
                                std::to_string(trial),
                            trial_seed);
      ++rep.trials;
      try {
        switch (family) {
          case Family::kForest: detail::forest_trial(t, cfg, trial_seed); break;
          case Family::kList: detail::list_trial(t, cfg, trial_seed); break;
          case Family::kArray:
            if (trial % 2)
              detail::array_trial(t, cfg, std::plus<long long>{}, 0);
            else
              detail::array_trial(t, cfg, detail::MaxOp{}, std::numeric_limits<long long>::min());
            break;
        }
      } catch (const std::exception& e) {
        t.error(e);
      }
    }
  }
  return rep;
}

}  // namespace dynpar::harness
