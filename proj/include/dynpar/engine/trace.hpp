#pragma once

#include <algorithm>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/inlined_vector.h>

#include "dynpar/engine/location.hpp"

namespace dynpar {

// What one round computation did: R_{r,p}, W_{r,p} and X_{r,p}. Reads are
// kept in first-read order without duplicates.
struct Computation {
  absl::InlinedVector<LocationKey, 8> reads;
  absl::InlinedVector<LocationKey, 4> writes;
  bool retired = false;

  friend bool operator==(const Computation&, const Computation&) = default;
};

// The replayable record of an execution, indexed by round then process.
class Trace {
 public:
  using RoundTable = absl::flat_hash_map<ProcessId, Computation>;

  const Computation* find(Round r, ProcessId p) const {
    if (r >= rounds_.size()) return nullptr;
    auto it = rounds_[r].find(p);
    return it == rounds_[r].end() ? nullptr : &it->second;
  }

  Computation& put(Round r, ProcessId p, Computation c) {
    if (r >= rounds_.size()) rounds_.resize(r + 1);
    return rounds_[r].insert_or_assign(p, std::move(c)).first->second;
  }

  void erase(Round r, ProcessId p) {
    if (r < rounds_.size()) rounds_[r].erase(p);
  }

  // Number of rounds with at least one computation.
  Round rounds_executed() const {
    Round n = static_cast<Round>(rounds_.size());
    while (n > 0 && rounds_[n - 1].empty()) --n;
    return n;
  }

  const RoundTable& round(Round r) const {
    static const RoundTable kEmpty;
    return r < rounds_.size() ? rounds_[r] : kEmpty;
  }

  // Processes of round r in ascending id order.
  std::vector<ProcessId> processes(Round r) const {
    std::vector<ProcessId> out;
    if (r >= rounds_.size()) return out;
    out.reserve(rounds_[r].size());
    for (const auto& kv : rounds_[r]) out.push_back(kv.first);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t computation_count() const {
    std::size_t total = 0;
    for (const auto& r : rounds_) total += r.size();
    return total;
  }

  const std::vector<ProcessId>& initial_processes() const { return initial_; }
  void set_initial_processes(std::vector<ProcessId> p) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    initial_ = std::move(p);
  }

  bool empty() const { return rounds_executed() == 0; }

  template <typename F>
  void for_each(F&& f) const {
    for (Round r = 0; r < rounds_.size(); ++r)
      for (const auto& [p, c] : rounds_[r]) f(CompId{r, p}, c);
  }

  friend bool operator==(const Trace& a, const Trace& b) {
    const Round n = a.rounds_executed();
    if (n != b.rounds_executed() || a.initial_ != b.initial_) return false;
    for (Round r = 0; r < n; ++r)
      if (a.rounds_[r] != b.rounds_[r]) return false;
    return true;
  }

 private:
  std::vector<RoundTable> rounds_;
  std::vector<ProcessId> initial_;
};

}  // namespace dynpar
