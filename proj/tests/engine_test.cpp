#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dynpar/engine/engine.hpp"
#include "dynpar/engine/restricted.hpp"
#include "dynpar/mapreduce.hpp"
#include "support.hpp"

namespace dynpar {
namespace {

using Value = std::int64_t;
using Ctx = RoundContext<Value>;

constexpr std::uint8_t kA = 0;        // input values
constexpr std::uint8_t kPresent = 2;  // input: 1 if the process exists
constexpr std::uint8_t kX = 1;        // per-round state
constexpr std::uint8_t kDeath = 3;    // round in which the process retired

LocationKey a_key(ProcessId p) { return LocationKey(kA, 0, p); }
LocationKey present_key(ProcessId p) { return LocationKey(kPresent, 0, p); }

// A program with data-dependent reads and data-dependent lifetimes. Process p
// lives through round life(A[p]), records that round in a fixed location, and
// each round may read the state of the process picked by its own previous
// state.
struct Toy {
  std::uint32_t n;

  static Round life(Value a) { return static_cast<Round>(a % 4); }

  void compute_round(Round r, ProcessId p, Ctx& ctx) const {
    const Value a = ctx.read(a_key(p));
    if (r == 0) {
      ctx.write(LocationKey(kX, 0, p), a * 7 + 1);
    } else {
      const Value v = ctx.read(LocationKey(kX, r - 1, p));
      Value w = (v * 3 + r) % 1000003;
      const auto q = static_cast<ProcessId>((v + r) % n);
      if (q != p && ctx.read(present_key(q)) == 1 && life(ctx.read(a_key(q))) >= r - 1)
        w = (w * 31 + ctx.read(LocationKey(kX, r - 1, q))) % 1000003;
      ctx.write(LocationKey(kX, r, p), w);
    }
    if (r >= life(a)) {
      ctx.write(LocationKey(kDeath, 0, p), r);
      ctx.retire();
    }
  }
};

struct Instance {
  std::vector<Value> a;
  std::vector<bool> present;
};

Engine<Value> run_fresh(const Instance& in, EngineOptions opts = {}) {
  Engine<Value> e(opts);
  std::vector<ProcessId> procs;
  for (ProcessId p = 0; p < in.a.size(); ++p) {
    e.store().set_input(present_key(p), in.present[p] ? 1 : 0);
    if (in.present[p]) {
      e.store().set_input(a_key(p), in.a[p]);
      procs.push_back(p);
    }
  }
  e.run(Toy{static_cast<std::uint32_t>(in.a.size())}, procs);
  return e;
}

Instance random_instance(std::mt19937_64& rng, std::uint32_t n) {
  Instance in;
  for (std::uint32_t p = 0; p < n; ++p) {
    in.a.push_back(static_cast<Value>(rng() % 40));
    in.present.push_back(true);
  }
  return in;
}

void expect_same_execution(const Engine<Value>& got, const Engine<Value>& want) {
  EXPECT_TRUE(got.store().snapshot() == want.store().snapshot());
  EXPECT_TRUE(got.trace() == want.trace());
  EXPECT_TRUE(testing::subscribers_sound(got));
}

std::set<CompId> as_set(const std::vector<CompId>& v) { return {v.begin(), v.end()}; }

TEST(Engine, MapReduceRunOnFourInputs) {
  const std::vector<int> in{1, 2, 3, 4};
  MapReduce<int> mr(in, std::plus<int>{}, 0);
  EXPECT_EQ(mr.engine().trace().rounds_executed(), 3u);
  EXPECT_EQ(mr.partial(2, 0), 10);
}

TEST(Engine, EveryProcessRetiresAtRoundZero) {
  struct P {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, p), p);
      ctx.retire();
    }
  };
  Engine<Value> e;
  const std::vector<ProcessId> procs{0, 1, 2, 3, 4};
  e.run(P{}, procs);
  EXPECT_EQ(e.trace().rounds_executed(), 1u);
  for (ProcessId p : procs) EXPECT_TRUE(e.trace().find(0, p)->retired);
  EXPECT_EQ(e.stats().computations_per_round, std::vector<std::size_t>{5});
}

TEST(Engine, InputReadIsTracked) {
  struct P {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, p), ctx.read(a_key(p)));
      ctx.retire();
    }
  };
  Engine<Value> e;
  e.store().set_input(a_key(3), 7);
  const std::vector<ProcessId> procs{3};
  e.run(P{}, procs);
  EXPECT_EQ(*e.store().find(LocationKey(kX, 0, 3)), 7);
  const Computation* c = e.trace().find(0, 3);
  ASSERT_NE(c, nullptr);
  ASSERT_EQ(c->reads.size(), 1u);
  EXPECT_EQ(c->reads[0], a_key(3));
  const auto* subs = e.store().subscribers(a_key(3));
  ASSERT_NE(subs, nullptr);
  EXPECT_EQ(subs->size(), 1u);
  EXPECT_EQ((*subs)[0], (CompId{0, 3}));
}

TEST(Engine, RereadIsIdempotent) {
  struct P {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      Value x = ctx.read(a_key(p)) + ctx.read(a_key(p));
      ctx.write(LocationKey(kX, 0, p), x);
      ctx.retire();
    }
  };
  Engine<Value> e;
  e.store().set_input(a_key(0), 5);
  const std::vector<ProcessId> procs{0};
  e.run(P{}, procs);
  EXPECT_EQ(e.trace().find(0, 0)->reads.size(), 1u);
  EXPECT_EQ(*e.store().find(LocationKey(kX, 0, 0)), 10);
  EXPECT_TRUE(testing::subscribers_sound(e));
}

template <typename P>
EngineError::Kind run_error(const P& program, std::vector<ProcessId> procs, std::string* message = nullptr) {
  Engine<Value> e;
  for (ProcessId p : procs) e.store().set_input(a_key(p), p);
  try {
    e.run(program, procs);
  } catch (const EngineError& err) {
    if (message) *message = err.what();
    return err.kind();
  }
  ADD_FAILURE() << "expected an engine error";
  return EngineError::Kind::kBadDelta;
}

TEST(Engine, ReadOfValueWrittenInSameRoundFails) {
  struct Other {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      if (p == 0) ctx.write(LocationKey(kX, 0, 0), 1);
      if (p == 1) ctx.read(LocationKey(kX, 0, 0));
      ctx.retire();
    }
  };
  struct Self {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, p), 1);
      ctx.read(LocationKey(kX, 0, p));
    }
  };
  std::string msg;
  EXPECT_EQ(run_error(Other{}, {0, 1}, &msg), EngineError::Kind::kVisibility);
  EXPECT_NE(msg.find("process 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("process 0"), std::string::npos) << msg;
  EXPECT_EQ(run_error(Self{}, {0}), EngineError::Kind::kVisibility);
}

TEST(Engine, ReadOfAbsentLocationNamesTheComputation) {
  struct P {
    void compute_round(Round, ProcessId, Ctx& ctx) const { ctx.read(LocationKey(kX, 4, 9)); }
  };
  std::string msg;
  EXPECT_EQ(run_error(P{}, {2}, &msg), EngineError::Kind::kMissingRead);
  EXPECT_NE(msg.find("(round 0, process 2)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("round=4, index=9"), std::string::npos) << msg;
}

TEST(Engine, SecondWriterIsRejected) {
  struct Two {
    void compute_round(Round, ProcessId, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, 0), 1);
      ctx.retire();
    }
  };
  struct Twice {
    void compute_round(Round, ProcessId, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, 0), 1);
      ctx.write(LocationKey(kX, 0, 0), 2);
    }
  };
  struct Later {
    void compute_round(Round r, ProcessId, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, 0), r);
      if (r == 1) ctx.retire();
    }
  };
  std::string msg;
  EXPECT_EQ(run_error(Two{}, {0, 1}, &msg), EngineError::Kind::kWriteOnce);
  EXPECT_NE(msg.find("(round 0, process 0)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(round 0, process 1)"), std::string::npos) << msg;
  EXPECT_EQ(run_error(Twice{}, {0}), EngineError::Kind::kWriteOnce);
  EXPECT_EQ(run_error(Later{}, {0}), EngineError::Kind::kWriteOnce);
}

TEST(Engine, ComputationCannotWriteInput) {
  struct P {
    void compute_round(Round, ProcessId p, Ctx& ctx) const { ctx.write(a_key(p), 3); }
  };
  EXPECT_EQ(run_error(P{}, {0}), EngineError::Kind::kInputOverwrite);
}

TEST(Engine, ClientCannotOverwriteComputedValue) {
  Engine<Value> e = run_fresh(Instance{{1, 2}, {true, true}});
  EXPECT_THROW(e.store().set_input(LocationKey(kX, 0, 0), 4), EngineError);
}

TEST(Engine, RunRequiresFreshEngine) {
  Engine<Value> e = run_fresh(Instance{{1, 2}, {true, true}});
  const std::vector<ProcessId> procs{0, 1};
  EXPECT_THROW(e.run(Toy{2}, procs), std::logic_error);
  e.clear();
  e.store().set_input(present_key(0), 1);
  e.store().set_input(present_key(1), 1);
  e.store().set_input(a_key(0), 1);
  e.store().set_input(a_key(1), 2);
  EXPECT_NO_THROW(e.run(Toy{2}, procs));
}

TEST(Engine, EmptyDeltaChangesNothing) {
  std::mt19937_64 rng(1);
  Engine<Value> e = run_fresh(random_instance(rng, 10));
  const Trace before = e.trace();
  const auto snap = e.store().snapshot();
  e.propagate(Toy{10}, PropagationDelta{});
  EXPECT_EQ(e.stats().affected_total(), 0u);
  EXPECT_TRUE(e.last_affected().empty());
  EXPECT_TRUE(testing::changed_computations(before, e.trace()).empty());
  EXPECT_TRUE(e.store().snapshot() == snap);
}

// Listing a location whose value did not change re-runs its readers, but
// nothing downstream of them.
TEST(Engine, RerunWithSameOutputStopsThere) {
  Engine<Value> e = run_fresh(Instance{{1, 2, 3}, {true, true, true}});
  EXPECT_FALSE(e.store().set_input(a_key(1), 2));
  const std::size_t readers = e.store().subscribers(a_key(1))->size();
  const Trace before = e.trace();
  PropagationDelta d;
  d.changed = {a_key(1), a_key(1)};
  e.propagate(Toy{3}, d);
  EXPECT_EQ(e.stats().affected_total(), readers);
  EXPECT_TRUE(e.trace() == before);
}

// Random edits of the inputs, checked against a from-scratch run and against
// the affected-computation definition.
TEST(Engine, PropagationMatchesFreshRun) {
  std::mt19937_64 rng(42);
  std::size_t longer = 0;
  std::size_t shorter = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto n = static_cast<std::uint32_t>(1 + rng() % 12);
    Instance in = random_instance(rng, n);
    Engine<Value> e = run_fresh(in);
    Toy program{n};
    for (int step = 0; step < 3; ++step) {
      const Engine<Value> before = e;
      PropagationDelta d;
      const std::size_t k = 1 + rng() % n;
      for (std::size_t i = 0; i < k; ++i) {
        const auto p = static_cast<ProcessId>(rng() % n);
        in.a[p] = static_cast<Value>(rng() % 40);
        e.store().set_input(a_key(p), in.a[p]);
      }
      for (ProcessId p = 0; p < n; ++p)
        if (*before.store().find(a_key(p)) != in.a[p]) d.changed.push_back(a_key(p));
      e.propagate(program, d);
      const Engine<Value> fresh = run_fresh(in);
      expect_same_execution(e, fresh);
      EXPECT_EQ(as_set(e.last_affected()), testing::affected_by_definition(before, fresh));
      EXPECT_EQ(e.last_affected().size(), e.stats().affected_total());
      for (ProcessId p = 0; p < n; ++p) {
        const Round old_life = Toy::life(*before.store().find(a_key(p)));
        const Round new_life = Toy::life(in.a[p]);
        longer += new_life > old_life;
        shorter += new_life < old_life;
      }
      if (::testing::Test::HasFailure()) return;
    }
  }
  EXPECT_GT(longer, 0u);
  EXPECT_GT(shorter, 0u);
}

TEST(Engine, LivedLongerAndDiedEarlier) {
  Instance in{{0, 0, 0, 0}, {true, true, true, true}};
  Engine<Value> e = run_fresh(in);
  ASSERT_EQ(e.trace().rounds_executed(), 1u);

  // Process 2 now lives through round 3.
  in.a[2] = 3;
  e.store().set_input(a_key(2), 3);
  PropagationDelta d;
  d.changed = {a_key(2)};
  e.propagate(Toy{4}, d);
  EXPECT_EQ(e.trace().rounds_executed(), 4u);
  EXPECT_NE(e.trace().find(3, 2), nullptr);
  expect_same_execution(e, run_fresh(in));

  // And back to retiring at round 0: rounds 1..3 are removed.
  in.a[2] = 4;
  e.store().set_input(a_key(2), 4);
  e.propagate(Toy{4}, d);
  EXPECT_EQ(e.trace().rounds_executed(), 1u);
  EXPECT_EQ(e.stats().removed_total(), 3u);
  EXPECT_EQ(e.stats().reexecuted_total(), 1u);
  expect_same_execution(e, run_fresh(in));
}

TEST(Engine, AddedAndRemovedProcessesMatchFreshRun) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::uint32_t>(2 + rng() % 10);
    Instance in = random_instance(rng, n);
    for (std::uint32_t p = 0; p < n; ++p) in.present[p] = rng() % 3 != 0;
    Engine<Value> e = run_fresh(in);
    const Engine<Value> before = e;
    PropagationDelta d;
    for (ProcessId p = 0; p < n; ++p) {
      if (rng() % 3 != 0) continue;
      if (in.present[p]) {
        d.removed.push_back(p);
        e.store().erase_input(a_key(p));
      } else {
        d.added.push_back(p);
        in.a[p] = static_cast<Value>(rng() % 40);
        e.store().set_input(a_key(p), in.a[p]);
      }
      in.present[p] = !in.present[p];
      e.store().set_input(present_key(p), in.present[p] ? 1 : 0);
      d.changed.push_back(a_key(p));
      d.changed.push_back(present_key(p));
    }
    e.propagate(Toy{n}, d);
    const Engine<Value> fresh = run_fresh(in);
    expect_same_execution(e, fresh);
    EXPECT_EQ(as_set(e.last_affected()), testing::affected_by_definition(before, fresh));
    if (::testing::Test::HasFailure()) return;
  }
}

TEST(Engine, MalformedDeltaIsRejected) {
  Engine<Value> e = run_fresh(Instance{{1, 2, 3}, {true, true, false}});
  PropagationDelta both;
  both.added = {2};
  both.removed = {2};
  EXPECT_THROW(e.propagate(Toy{3}, both), EngineError);
  PropagationDelta unknown;
  unknown.removed = {2};
  EXPECT_THROW(e.propagate(Toy{3}, unknown), EngineError);
  PropagationDelta existing;
  existing.added = {0};
  EXPECT_THROW(e.propagate(Toy{3}, existing), EngineError);
  PropagationDelta computed;
  computed.changed = {LocationKey(kX, 0, 0)};
  EXPECT_THROW(e.propagate(Toy{3}, computed), EngineError);
}

TEST(Engine, RestrictedAudit) {
  const std::vector<int> in{4, 8, 15, 16, 23, 42, 7};
  MapReduce<int> mr(in, std::plus<int>{}, 0);
  const auto rep = check_restricted(mr.engine().trace(), mr.engine().store());
  EXPECT_TRUE(rep.restricted) << rep.first_violation.value_or("");
  EXPECT_LE(rep.max_reads, 2u);

  // Round 2 reads a value written in round 0.
  struct Skip {
    void compute_round(Round r, ProcessId p, Ctx& ctx) const {
      if (r == 2) ctx.read(LocationKey(kX, 0, p));
      ctx.write(LocationKey(kX, r, p), r);
      if (r == 2) ctx.retire();
    }
  };
  Engine<Value> e;
  const std::vector<ProcessId> procs{0};
  e.run(Skip{}, procs);
  const auto bad = check_restricted(e.trace(), e.store());
  EXPECT_FALSE(bad.previous_round_reads);
  EXPECT_FALSE(bad.restricted);
  EXPECT_TRUE(bad.first_violation.has_value());
}

TEST(Engine, RestrictedBoundsAreEnforced) {
  struct Wide {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      for (ProcessId q = 0; q < 10; ++q) ctx.read(a_key(q));
      ctx.write(LocationKey(kX, 0, p), 0);
      ctx.retire();
    }
  };
  Engine<Value> e;
  for (ProcessId q = 0; q < 10; ++q) e.store().set_input(a_key(q), q);
  const std::vector<ProcessId> procs{0, 1};
  e.run(Wide{}, procs);
  const auto rep = check_restricted(e.trace(), e.store());
  EXPECT_TRUE(rep.previous_round_reads);
  EXPECT_EQ(rep.max_reads, 10u);
  EXPECT_EQ(rep.max_readers, 2u);
  EXPECT_FALSE(rep.restricted);
  EXPECT_TRUE(check_restricted(e.trace(), e.store(), RestrictedLimits{10, 1, 2}).restricted);
}

TEST(Engine, RunsAreDeterministic) {
  std::mt19937_64 rng(3);
  const Instance in = random_instance(rng, 3000);
  const Engine<Value> a = run_fresh(in);
  const Engine<Value> b = run_fresh(in);
  const Engine<Value> c = run_fresh(in, EngineOptions{4, 1});
  EXPECT_TRUE(a.trace() == b.trace());
  EXPECT_TRUE(a.trace() == c.trace());
  EXPECT_TRUE(a.store().snapshot() == c.store().snapshot());
}

TEST(Engine, ThreadedPropagationMatchesSequential) {
  std::mt19937_64 rng(5);
  Instance in = random_instance(rng, 2000);
  Engine<Value> seq = run_fresh(in);
  Engine<Value> par = run_fresh(in, EngineOptions{4, 1});
  PropagationDelta d;
  for (int i = 0; i < 200; ++i) {
    const auto p = static_cast<ProcessId>(rng() % in.a.size());
    in.a[p] = static_cast<Value>(rng() % 40);
    seq.store().set_input(a_key(p), in.a[p]);
    par.store().set_input(a_key(p), in.a[p]);
    d.changed.push_back(a_key(p));
  }
  seq.propagate(Toy{2000}, d);
  par.propagate(Toy{2000}, d);
  EXPECT_TRUE(seq.trace() == par.trace());
  EXPECT_TRUE(seq.store().snapshot() == par.store().snapshot());
  EXPECT_EQ(seq.last_affected(), par.last_affected());
  expect_same_execution(par, run_fresh(in));
}

TEST(Engine, ErrorsSurfaceFromWorkerThreads) {
  struct P {
    void compute_round(Round, ProcessId p, Ctx& ctx) const {
      ctx.write(LocationKey(kX, 0, p % 500), 1);
      ctx.retire();
    }
  };
  Engine<Value> e(EngineOptions{4, 1});
  std::vector<ProcessId> procs(1000);
  for (ProcessId p = 0; p < procs.size(); ++p) procs[p] = p;
  EXPECT_THROW(e.run(P{}, procs), EngineError);
}

TEST(Engine, InstrumentationCounts) {
  std::mt19937_64 rng(9);
  Instance in = random_instance(rng, 50);
  Engine<Value> e = run_fresh(in);
  EXPECT_EQ(e.stats().initial_work(), e.trace().computation_count());
  EXPECT_EQ(e.stats().rounds(), e.trace().rounds_executed());
  EXPECT_EQ(e.stats().total_work, e.stats().initial_work());
  in.a[7] += 1;
  e.store().set_input(a_key(7), in.a[7]);
  PropagationDelta d;
  d.changed = {a_key(7)};
  e.propagate(Toy{50}, d);
  std::size_t sum = 0;
  for (Round r = 0; r < 8; ++r) sum += e.stats().affected_at(r);
  EXPECT_EQ(sum, e.stats().affected_total());
  EXPECT_GE(e.stats().affected_at(0), 1u);
  EXPECT_EQ(e.stats().total_work, e.stats().initial_work() + e.stats().reexecuted_total());
  EXPECT_EQ(e.stats().propagations, 1u);
}

}  // namespace
}  // namespace dynpar
