#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <climits>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dynpar/engine/restricted.hpp"
#include "dynpar/mapreduce.hpp"

namespace dynpar {
namespace {

struct Max {
  long operator()(long a, long b) const { return std::max(a, b); }
};
struct Min {
  long operator()(long a, long b) const { return std::min(a, b); }
};

long fold(const std::vector<long>& v, std::size_t i, std::size_t j, const std::function<long(long, long)>& op,
          long id) {
  long acc = id;
  for (std::size_t x = i; x <= j; ++x) acc = op(acc, v[x]);
  return acc;
}

TEST(MapReduce, SumOfFour) {
  const std::vector<long> in{1, 2, 3, 4};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  EXPECT_EQ(mr.total(), 10);
  EXPECT_EQ(mr.levels(), 3u);
}

TEST(MapReduce, Singleton) {
  const std::vector<long> in{5};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  EXPECT_EQ(mr.total(), 5);
  EXPECT_EQ(mr.padded_size(), 1u);
  EXPECT_EQ(mr.engine().trace().rounds_executed(), 1u);
}

TEST(MapReduce, PadsToPowerOfTwo) {
  const std::vector<long> in{1, 2, 3};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  EXPECT_EQ(mr.padded_size(), 4u);
  EXPECT_EQ(mr.total(), 6);
  EXPECT_EQ(mr.partial(0, 3), 0);
}

TEST(MapReduce, EmptyInputIsRejected) {
  const std::vector<long> in;
  EXPECT_THROW(MapReduce<long>(in, std::plus<long>{}, 0), std::invalid_argument);
}

// The reduction tree at n = 4, level by level.
TEST(MapReduce, PartialLayoutAtFour) {
  const std::vector<long> in{1, 2, 3, 4};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  EXPECT_EQ(mr.partial(0, 0), 1);
  EXPECT_EQ(mr.partial(0, 3), 4);
  EXPECT_EQ(mr.partial(1, 0), 3);
  EXPECT_EQ(mr.partial(1, 1), 7);
  EXPECT_EQ(mr.partial(2, 0), 10);
  const auto& t = mr.engine().trace();
  EXPECT_EQ(t.processes(0), (std::vector<ProcessId>{0, 1, 2, 3}));
  EXPECT_EQ(t.processes(1), (std::vector<ProcessId>{0, 1}));
  EXPECT_EQ(t.processes(2), (std::vector<ProcessId>{0}));
  EXPECT_TRUE(t.find(0, 2)->retired);
  EXPECT_FALSE(t.find(0, 1)->retired);
  EXPECT_TRUE(t.find(1, 1)->retired);
  EXPECT_TRUE(t.find(2, 0)->retired);
  EXPECT_EQ(MapReduce<long>::children(1), (std::pair<std::size_t, std::size_t>{2, 3}));
}

TEST(MapReduce, WorkIsLinear) {
  for (std::size_t n : {1u, 2u, 5u, 64u, 1000u}) {
    std::vector<long> in(n, 1);
    MapReduce<long> mr(in, std::plus<long>{}, 0);
    EXPECT_LE(mr.engine().stats().initial_work(), 2 * mr.padded_size());
    EXPECT_EQ(mr.total(), static_cast<long>(n));
  }
}

TEST(MapReduce, SingleUpdateAtEight) {
  std::vector<long> in(8, 1);
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  const std::vector<std::pair<std::size_t, long>> batch{{5, 3}};
  mr.update(batch);
  EXPECT_EQ(mr.total(), 10);
  EXPECT_EQ(mr.engine().stats().reexecuted_total(), 4u);
  EXPECT_EQ(mr.engine().stats().affected_total(), 4u);
  for (Round r = 0; r < 4; ++r) EXPECT_EQ(mr.engine().stats().affected_at(r), 1u);
}

TEST(MapReduce, UpdateThenQuery) {
  const std::vector<long> in{1, 2, 3, 4};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  const std::vector<std::pair<std::size_t, long>> batch{{2, 7}};
  mr.update(batch);
  EXPECT_EQ(mr.total(), 14);
  EXPECT_EQ(mr.element(2), 7);
  EXPECT_EQ(mr.range(2, 2), 7);
  EXPECT_EQ(mr.range(0, 3), 14);
  EXPECT_EQ(mr.range(1, 2), 9);
}

TEST(MapReduce, MaxOperator) {
  const std::vector<long> in{3, 1, 4, 1};
  MapReduce<long, Max> mr(in, Max{}, LONG_MIN);
  EXPECT_EQ(mr.total(), 4);
}

TEST(MapReduce, EmptyBatchRunsNothing) {
  std::vector<long> in(16, 2);
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  mr.update({});
  EXPECT_EQ(mr.engine().stats().affected_total(), 0u);
  const std::vector<std::pair<std::size_t, long>> same{{3, 2}};
  mr.update(same);
  EXPECT_EQ(mr.engine().stats().affected_total(), 0u);
}

TEST(MapReduce, UpdatingEverythingIsBoundedByFullWork) {
  std::vector<long> in(64, 1);
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  std::vector<std::pair<std::size_t, long>> batch;
  for (std::size_t i = 0; i < 64; ++i) batch.emplace_back(i, static_cast<long>(i));
  mr.update(batch);
  EXPECT_LE(mr.engine().stats().affected_total(), 128u);
  EXPECT_EQ(mr.total(), 63 * 64 / 2);
}

TEST(MapReduce, OutOfRange) {
  const std::vector<long> in{1, 2, 3};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  const std::vector<std::pair<std::size_t, long>> bad{{0, 9}, {3, 1}};
  EXPECT_THROW(mr.update(bad), std::out_of_range);
  EXPECT_EQ(mr.element(0), 1);  // nothing applied
  EXPECT_THROW(mr.range(2, 1), std::out_of_range);
  EXPECT_THROW(mr.range(0, 3), std::out_of_range);
  EXPECT_THROW(mr.element(3), std::out_of_range);
}

TEST(MapReduce, DuplicateIndicesKeepLastValue) {
  const std::vector<long> in{1, 2, 3};
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  const std::vector<std::pair<std::size_t, long>> batch{{1, 10}, {1, 20}};
  mr.update(batch);
  EXPECT_EQ(mr.element(1), 20);
  EXPECT_EQ(mr.total(), 24);
}

TEST(MapReduce, MapFunctionIsApplied) {
  const std::vector<std::string> in{"a", "bcd", "", "ef", "g"};
  auto len = [](const std::string& s) { return s.size(); };
  MapReduce<std::string, std::plus<std::size_t>, decltype(len)> mr(in, {}, 0, len);
  EXPECT_EQ(mr.total(), 7u);
  EXPECT_EQ(mr.range(1, 3), 5u);
  const std::vector<std::pair<std::size_t, std::string>> batch{{2, "hello"}};
  mr.update(batch);
  EXPECT_EQ(mr.total(), 12u);
}

TEST(MapReduce, NonCommutativeOperatorKeepsOrder) {
  const std::vector<std::string> in{"a", "b", "c", "d", "e"};
  MapReduce<std::string> mr(in, std::plus<std::string>{}, "");
  EXPECT_EQ(mr.total(), "abcde");
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = i; j < in.size(); ++j) {
      std::string want;
      for (std::size_t x = i; x <= j; ++x) want += in[x];
      EXPECT_EQ(mr.range(i, j), want);
    }
}

template <typename Op>
void check_random(std::mt19937_64& rng, Op op, long id) {
  const std::size_t n = 1 + rng() % 1024;
  std::vector<long> in(n);
  for (auto& x : in) x = static_cast<long>(rng() % 2001) - 1000;
  MapReduce<long, Op> mr(in, op, id);
  const std::function<long(long, long)> f = op;
  EXPECT_EQ(mr.total(), fold(in, 0, n - 1, f, id));
  const Round height = mr.levels();
  for (int step = 0; step < 4; ++step) {
    const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 40);
    std::vector<std::pair<std::size_t, long>> batch;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t idx = rng() % n;
      long v = static_cast<long>(rng() % 2001) - 1000;
      if (v == in[idx]) v += 1;
      batch.emplace_back(idx, v);
    }
    std::vector<std::size_t> distinct;
    for (const auto& [idx, v] : batch) {
      in[idx] = v;
      distinct.push_back(idx);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    mr.update(batch);
    EXPECT_EQ(mr.total(), fold(in, 0, n - 1, f, id));
    const std::size_t affected = mr.engine().stats().affected_total();
    EXPECT_LE(affected, distinct.size() * height);
    for (int q = 0; q < 20; ++q) {
      std::size_t i = rng() % n;
      std::size_t j = rng() % n;
      if (i > j) std::swap(i, j);
      EXPECT_EQ(mr.range(i, j), fold(in, i, j, f, id));
    }
  }
}

TEST(MapReduce, RandomBatchesMatchFoldOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    check_random(rng, std::plus<long>{}, 0);
    check_random(rng, Max{}, LONG_MIN);
    check_random(rng, Min{}, LONG_MAX);
    if (::testing::Test::HasFailure()) return;
  }
}

TEST(MapReduce, EveryRangeOnSmallInputs) {
  std::mt19937_64 rng(11);
  for (std::size_t n = 1; n <= 64; ++n) {
    std::vector<long> in(n);
    for (auto& x : in) x = static_cast<long>(rng() % 100);
    MapReduce<long> sum(in, std::plus<long>{}, 0);
    MapReduce<long, Min> mn(in, Min{}, LONG_MAX);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        ASSERT_EQ(sum.range(i, j), fold(in, i, j, std::plus<long>{}, 0));
        ASSERT_EQ(mn.range(i, j), fold(in, i, j, Min{}, LONG_MAX));
      }
  }
}

// A single changed element re-runs exactly its leaf-to-root path.
TEST(MapReduce, SingleUpdateTouchesOnePath) {
  std::mt19937_64 rng(5);
  for (unsigned k = 0; k <= 12; ++k) {
    const std::size_t n = std::size_t{1} << k;
    std::vector<long> in(n, 1);
    MapReduce<long> mr(in, std::plus<long>{}, 0);
    const std::vector<std::pair<std::size_t, long>> batch{{rng() % n, 5}};
    mr.update(batch);
    EXPECT_EQ(mr.engine().stats().affected_total(), k + 1u);
    EXPECT_EQ(mr.total(), static_cast<long>(n) + 4);
  }
}

TEST(MapReduce, AffectedCountHasPathLowerBound) {
  std::mt19937_64 rng(8);
  const std::size_t n = 1024;
  std::vector<long> in(n, 0);
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  for (std::size_t k : {1u, 3u, 17u, 200u}) {
    std::vector<std::pair<std::size_t, long>> batch;
    for (std::size_t i = 0; i < k; ++i) batch.emplace_back(rng() % n, static_cast<long>(1 + rng() % 1000000));
    mr.update(batch);
    EXPECT_GE(mr.engine().stats().affected_total(), 11u);
    EXPECT_LE(mr.engine().stats().affected_total(), k * 11);
  }
}

TEST(MapReduce, PaddingInvariance) {
  std::mt19937_64 rng(13);
  for (std::size_t m = 1; m <= 40; ++m) {
    std::vector<long> in(m);
    for (auto& x : in) x = static_cast<long>(rng() % 50);
    std::vector<long> padded = in;
    padded.resize(std::bit_ceil(m), 0);
    MapReduce<long> a(in, std::plus<long>{}, 0);
    MapReduce<long> b(padded, std::plus<long>{}, 0);
    EXPECT_EQ(a.total(), b.total());
    for (Round lvl = 0; lvl < a.levels(); ++lvl)
      for (std::size_t p = 0; p < (a.padded_size() >> lvl); ++p) EXPECT_EQ(a.partial(lvl, p), b.partial(lvl, p));
    for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(a.range(i, m - 1), b.range(i, m - 1));
  }
}

TEST(MapReduce, TraceIsRestricted) {
  std::vector<long> in(300);
  std::iota(in.begin(), in.end(), 0);
  MapReduce<long> mr(in, std::plus<long>{}, 0);
  auto rep = check_restricted(mr.engine().trace(), mr.engine().store());
  EXPECT_TRUE(rep.restricted);
  EXPECT_EQ(rep.max_reads, 2u);
  EXPECT_EQ(rep.max_writes, 1u);
  const std::vector<std::pair<std::size_t, long>> batch{{7, -1}, {250, 3}};
  mr.update(batch);
  rep = check_restricted(mr.engine().trace(), mr.engine().store());
  EXPECT_TRUE(rep.restricted);
}

TEST(MapReduce, ThreadedBuildMatches) {
  std::vector<long> in(5000);
  std::iota(in.begin(), in.end(), 1);
  MapReduce<long> a(in, std::plus<long>{}, 0);
  MapReduce<long> b(in, std::plus<long>{}, 0, {}, EngineOptions{4, 64});
  EXPECT_EQ(a.total(), b.total());
  EXPECT_TRUE(a.engine().trace() == b.engine().trace());
}

}  // namespace
}  // namespace dynpar
