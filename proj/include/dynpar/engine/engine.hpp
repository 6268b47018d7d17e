#pragma once

// Round-synchronous execution with dependency tracking, and change
// propagation over the recorded trace.
//
// A client program supplies `compute_round(round, process, ctx)`, which reads
// and writes shared memory only through `ctx`. Writes are buffered and become
// visible at the end of the round. The engine records every read and write so
// that, after the client edits input locations, `propagate` re-executes only
// the computations that read a changed value (plus processes that now live
// longer), and removes those of processes that now retire earlier.

#include <algorithm>
#include <concepts>
#include <exception>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "dynpar/engine/cell_store.hpp"
#include "dynpar/engine/errors.hpp"
#include "dynpar/engine/location.hpp"
#include "dynpar/engine/trace.hpp"

namespace dynpar {

template <typename Value>
class Engine;

// The tracked memory handle handed to a round computation.
template <typename Value>
class RoundContext {
 public:
  Round round() const { return self_.round; }
  ProcessId process() const { return self_.process; }

  const Value& read(const LocationKey& key) {
    for (const auto& [k, v] : pending_)
      if (k == key) {
        failed_key_ = key;
        throw EngineError(EngineError::Kind::kVisibility,
                          detail::concat(self_, " read ", key, ", which it wrote in the same round"));
      }
    const auto* cell = store_->cell(key);
    if (!cell || !cell->value) {
      failed_key_ = key;
      throw EngineError(EngineError::Kind::kMissingRead, detail::concat(self_, " read ", key, ", which holds no value"));
    }
    if (!cell->writer.is_input() && cell->writer.comp().round >= self_.round) {
      failed_key_ = key;
      throw EngineError(EngineError::Kind::kVisibility,
                        detail::concat(self_, " read ", key, ", written by ", cell->writer.comp(),
                                       " which is not in an earlier round"));
    }
    if (std::find(record_.reads.begin(), record_.reads.end(), key) == record_.reads.end()) {
      record_.reads.push_back(key);
      read_cells_.push_back(cell);
    }
    return *cell->value;
  }

  void write(const LocationKey& key, Value value) {
    for (const auto& [k, v] : pending_)
      if (k == key)
        throw EngineError(EngineError::Kind::kWriteOnce, detail::concat(self_, " wrote ", key, " twice"));
    record_.writes.push_back(key);
    pending_.emplace_back(key, std::move(value));
  }

  void retire() { record_.retired = true; }

 private:
  friend class Engine<Value>;

  void reset(const CellStore<Value>* store, CompId self) {
    store_ = store;
    self_ = self;
    record_ = Computation{};
    pending_.clear();
    read_cells_.clear();
    failed_key_.reset();
  }

  const CellStore<Value>* store_ = nullptr;
  CompId self_{};
  Computation record_;
  absl::InlinedVector<std::pair<LocationKey, Value>, 4> pending_;
  absl::InlinedVector<const typename CellStore<Value>::Cell*, 4> read_cells_;
  std::optional<LocationKey> failed_key_;
};

template <typename P, typename Value>
concept RoundProgram = requires(const P& program, Round r, ProcessId p, RoundContext<Value>& ctx) {
  { program.compute_round(r, p, ctx) };
};

struct EngineOptions {
  // Worker threads used to execute the computations of one round. Results do
  // not depend on this value.
  unsigned threads = 1;
  // Rounds with fewer computations than this run on the calling thread.
  std::size_t parallel_grain = 2048;
};

struct PropagationDelta {
  std::vector<LocationKey> changed;  // U: input locations already rewritten in the store
  std::vector<ProcessId> added;      // P+
  std::vector<ProcessId> removed;    // P-
};

// Counters maintained by the engine.
struct Instrumentation {
  std::vector<std::size_t> computations_per_round;  // last run()
  std::vector<std::size_t> reexecuted_per_round;    // last propagate(): computations re-run
  std::vector<std::size_t> removed_per_round;       // last propagate(): computations deleted
  std::size_t total_work = 0;                       // every computation executed since construction
  std::size_t propagations = 0;

  std::size_t rounds() const { return computations_per_round.size(); }
  std::size_t initial_work() const {
    return std::accumulate(computations_per_round.begin(), computations_per_round.end(), std::size_t{0});
  }
  std::size_t reexecuted_total() const {
    return std::accumulate(reexecuted_per_round.begin(), reexecuted_per_round.end(), std::size_t{0});
  }
  std::size_t removed_total() const {
    return std::accumulate(removed_per_round.begin(), removed_per_round.end(), std::size_t{0});
  }
  // Affected computations of the last propagation: re-run or deleted.
  std::size_t affected_total() const { return reexecuted_total() + removed_total(); }
  std::size_t affected_at(Round r) const {
    std::size_t a = r < reexecuted_per_round.size() ? reexecuted_per_round[r] : 0;
    std::size_t b = r < removed_per_round.size() ? removed_per_round[r] : 0;
    return a + b;
  }
};

template <typename Value>
class Engine {
 public:
  using value_type = Value;
  using Context = RoundContext<Value>;

  explicit Engine(EngineOptions options = {}) : options_(options) {}

  CellStore<Value>& store() { return store_; }
  const CellStore<Value>& store() const { return store_; }
  const Trace& trace() const { return trace_; }
  const Instrumentation& stats() const { return stats_; }
  const EngineOptions& options() const { return options_; }

  // Processes whose computations were re-run, deleted or created by the last
  // propagate(), ascending.
  const std::vector<ProcessId>& last_touched() const { return touched_; }

  // The computations re-run or deleted by the last propagate().
  const std::vector<CompId>& last_affected() const { return affected_; }

  // Initial run. The store must already hold every input location the
  // round-0 computations read.
  template <RoundProgram<Value> Program>
  void run(const Program& program, std::span<const ProcessId> initial) {
    if (!trace_.empty()) throw std::logic_error("Engine::run on an engine that already holds a trace");
    std::vector<ProcessId> live(initial.begin(), initial.end());
    std::sort(live.begin(), live.end());
    live.erase(std::unique(live.begin(), live.end()), live.end());
    trace_.set_initial_processes(live);
    stats_.computations_per_round.clear();

    for (Round r = 0; !live.empty(); ++r) {
      check_round(r);
      auto contexts = execute(program, r, live);
      commit(r, contexts, nullptr, nullptr);
      stats_.computations_per_round.push_back(live.size());
      stats_.total_work += live.size();
      std::vector<ProcessId> next;
      next.reserve(live.size());
      for (const auto& ctx : contexts)
        if (!ctx.record_.retired) next.push_back(ctx.self_.process);
      live = std::move(next);
    }
  }

  // Change propagation. `delta.changed` lists input locations whose values
  // were rewritten (or erased) in the store since the last run/propagate.
  template <RoundProgram<Value> Program>
  void propagate(const Program& program, const PropagationDelta& delta) {
    absl::flat_hash_set<ProcessId> dead(delta.removed.begin(), delta.removed.end());
    absl::flat_hash_set<ProcessId> longer(delta.added.begin(), delta.added.end());
    for (ProcessId p : delta.added)
      if (dead.contains(p))
        throw EngineError(EngineError::Kind::kBadDelta, detail::concat("process ", p, " is both added and removed"));
    for (ProcessId p : delta.removed)
      if (!trace_.find(0, p))
        throw EngineError(EngineError::Kind::kBadDelta, detail::concat("removed process ", p, " never ran"));
    for (ProcessId p : delta.added)
      if (trace_.find(0, p))
        throw EngineError(EngineError::Kind::kBadDelta, detail::concat("added process ", p, " already runs"));
    for (const LocationKey& key : delta.changed)
      if (const auto* cell = store_.cell(key); cell && cell->value && !cell->writer.is_input())
        throw EngineError(EngineError::Kind::kBadDelta,
                          detail::concat("changed location ", key, " is not an input location"));

    {
      std::vector<ProcessId> initial = trace_.initial_processes();
      initial.insert(initial.end(), delta.added.begin(), delta.added.end());
      std::erase_if(initial, [&](ProcessId p) { return dead.contains(p); });
      trace_.set_initial_processes(std::move(initial));
    }

    stats_.reexecuted_per_round.clear();
    stats_.removed_per_round.clear();
    ++stats_.propagations;
    affected_.clear();
    absl::flat_hash_set<ProcessId> touched;

    std::vector<LocationKey> changed(delta.changed.begin(), delta.changed.end());
    std::sort(changed.begin(), changed.end());
    changed.erase(std::unique(changed.begin(), changed.end()), changed.end());

    std::map<Round, std::vector<ProcessId>> affected;  // A_r, only non-empty buckets
    Round r = 0;

    while (!changed.empty() || !dead.empty() || !longer.empty() || !affected.empty()) {
      for (const LocationKey& m : changed) {
        const auto* subs = store_.subscribers(m);
        if (!subs) continue;
        for (const CompId& c : *subs) affected[c.round].push_back(c.process);
      }
      changed.clear();

      if (dead.empty() && longer.empty()) {
        if (affected.empty()) break;
        r = std::max(r, affected.begin()->first);
      }
      check_round(r);

      std::vector<ProcessId> rerun;
      if (auto it = affected.find(r); it != affected.end()) {
        rerun = std::move(it->second);
        affected.erase(it);
        std::sort(rerun.begin(), rerun.end());
        rerun.erase(std::unique(rerun.begin(), rerun.end()), rerun.end());
        std::erase_if(rerun, [&](ProcessId p) { return dead.contains(p); });
      }
      if (!affected.empty() && affected.begin()->first < r)
        throw std::logic_error("propagation reached a subscriber in an already finished round");

      // Forget the prior reads of re-run and dead processes, and purge their
      // prior writes so the round can rewrite them.
      absl::flat_hash_map<LocationKey, Value> purged;
      absl::flat_hash_map<ProcessId, bool> retired_before;
      auto forget = [&](ProcessId p) {
        const Computation* old = trace_.find(r, p);
        if (!old)
          throw std::logic_error(detail::concat("propagation lost the prior computation ", CompId{r, p}));
        const CompId self{r, p};
        for (const auto& key : old->reads) store_.unsubscribe(key, self);
        for (const auto& key : old->writes)
          if (auto v = store_.purge(key, Writer::computation(self))) purged.emplace(key, std::move(*v));
        retired_before.emplace(p, old->retired);
      };
      for (ProcessId p : rerun) forget(p);
      std::vector<ProcessId> dying(dead.begin(), dead.end());
      std::sort(dying.begin(), dying.end());
      for (ProcessId p : dying) {
        forget(p);
        trace_.erase(r, p);
        touched.insert(p);
        affected_.push_back(CompId{r, p});
      }

      std::vector<ProcessId> batch = rerun;
      batch.insert(batch.end(), longer.begin(), longer.end());
      std::sort(batch.begin(), batch.end());
      batch.erase(std::unique(batch.begin(), batch.end()), batch.end());

      auto contexts = execute(program, r, batch);
      commit(r, contexts, &purged, &changed);
      for (const auto& [key, value] : purged) changed.push_back(key);

      record(stats_.reexecuted_per_round, r, batch.size());
      record(stats_.removed_per_round, r, dying.size());
      stats_.total_work += batch.size();
      touched.insert(batch.begin(), batch.end());
      for (ProcessId p : batch) affected_.push_back(CompId{r, p});

      absl::flat_hash_map<ProcessId, bool> retired_now;
      for (const auto& ctx : contexts) retired_now.emplace(ctx.self_.process, ctx.record_.retired);

      absl::flat_hash_set<ProcessId> next_longer;
      for (ProcessId p : longer)
        if (!retired_now.at(p)) next_longer.insert(p);
      absl::flat_hash_set<ProcessId> next_dead;
      for (ProcessId p : dying)
        if (!retired_before.at(p)) next_dead.insert(p);
      for (ProcessId p : rerun) {
        const bool before = retired_before.at(p);
        const bool now = retired_now.at(p);
        if (before && !now) next_longer.insert(p);
        if (!before && now) next_dead.insert(p);
      }
      longer = std::move(next_longer);
      dead = std::move(next_dead);
      ++r;
    }

    touched_.assign(touched.begin(), touched.end());
    std::sort(touched_.begin(), touched_.end());
  }

  // Fresh engine state: forget the trace and every cell.
  void clear() {
    store_ = CellStore<Value>{};
    trace_ = Trace{};
    stats_ = Instrumentation{};
    touched_.clear();
    affected_.clear();
  }

 private:
  static void check_round(Round r) {
    if (r > kMaxRound) throw std::length_error("round count exceeds the location key range");
  }

  static void record(std::vector<std::size_t>& per_round, Round r, std::size_t n) {
    if (n == 0) return;
    if (per_round.size() <= r) per_round.resize(r + 1, 0);
    per_round[r] += n;
  }

  template <typename Program>
  std::vector<Context> execute(const Program& program, Round r, const std::vector<ProcessId>& procs) {
    std::vector<Context> contexts(procs.size());
    std::vector<std::exception_ptr> errors(procs.size());
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        contexts[i].reset(&store_, CompId{r, procs[i]});
        try {
          program.compute_round(r, procs[i], contexts[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const unsigned threads = std::max(1u, options_.threads);
    if (threads == 1 || procs.size() < options_.parallel_grain) {
      work(0, procs.size());
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (procs.size() + threads - 1) / threads;
      for (std::size_t b = 0; b < procs.size(); b += chunk)
        pool.emplace_back(work, b, std::min(procs.size(), b + chunk));
    }
    for (std::size_t i = 0; i < procs.size(); ++i) {
      if (!errors[i]) continue;
      // A read that found nothing may have targeted a location another
      // computation writes in this same round.
      if (const auto& key = contexts[i].failed_key_) {
        for (const auto& other : contexts)
          for (const auto& [k, v] : other.pending_)
            if (k == *key && other.self_.process != procs[i])
              throw EngineError(EngineError::Kind::kVisibility,
                                detail::concat(CompId{r, procs[i]}, " read ", *key, ", which ", other.self_,
                                               " writes in the same round"));
      }
      std::rethrow_exception(errors[i]);
    }
    return contexts;
  }

  // A process that now retires in round r may rewrite a location it wrote in
  // a later round of the prior execution: that computation is stale and is
  // deleted further on in this propagation.
  static bool takes_over(CompId old_writer, const Context& ctx) {
    return old_writer.process == ctx.self_.process && old_writer.round > ctx.self_.round && ctx.record_.retired;
  }

  // Round barrier: checks the write-once discipline, makes the buffered
  // writes visible, subscribes reads and stores the trace entries. With
  // `purged` set, written keys whose value differs from the purged one (or
  // that are new) are appended to `changed`, and keys rewritten are removed
  // from `purged`.
  void commit(Round r, std::vector<Context>& contexts, absl::flat_hash_map<LocationKey, Value>* purged,
              std::vector<LocationKey>* changed) {
    absl::flat_hash_map<LocationKey, CompId> writers;
    for (const auto& ctx : contexts) {
      for (const auto& [key, value] : ctx.pending_) {
        auto [it, fresh] = writers.emplace(key, ctx.self_);
        if (!fresh)
          throw EngineError(EngineError::Kind::kWriteOnce,
                            detail::concat(key, " written by both ", it->second, " and ", ctx.self_));
        if (const auto* cell = store_.cell(key); cell && cell->value) {
          if (cell->writer.is_input())
            throw EngineError(EngineError::Kind::kInputOverwrite,
                              detail::concat(ctx.self_, " wrote input location ", key));
          if (!(cell->writer.comp() == ctx.self_) && !takes_over(cell->writer.comp(), ctx))
            throw EngineError(EngineError::Kind::kWriteOnce,
                              detail::concat(key, " written by both ", cell->writer.comp(), " and ", ctx.self_));
        }
      }
    }
    // Read cells stay valid until the first insert below.
    for (const auto& ctx : contexts)
      for (const auto* cell : ctx.read_cells_) store_.subscribe(*cell, ctx.self_);
    for (auto& ctx : contexts) {
      const Writer self = Writer::computation(ctx.self_);
      for (auto& [key, value] : ctx.pending_) {
        auto& cell = store_.slot(key);
        if (purged) {
          auto it = purged->find(key);
          bool same = it != purged->end() && it->second == value;
          if (it != purged->end()) {
            purged->erase(it);
          } else if (cell.value) {
            same = *cell.value == value;  // taken over from a stale later computation
          }
          if (!same) changed->push_back(key);
        }
        cell.value = std::move(value);
        cell.writer = self;
      }
      trace_.put(r, ctx.self_.process, std::move(ctx.record_));
    }
  }

  EngineOptions options_;
  CellStore<Value> store_;
  Trace trace_;
  Instrumentation stats_;
  std::vector<ProcessId> touched_;
  std::vector<CompId> affected_;
};

}  // namespace dynpar
