#pragma once

// Test-only helpers: an independent definition of "affected computation" and
// subscriber bookkeeping checks, computed purely from traces and stores.

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "dynpar/engine/engine.hpp"

namespace dynpar::testing {

// Computations that run in only one of the two executions, or run in both
// but read some location whose value differs between them.
template <typename Value>
std::set<CompId> affected_by_definition(const Engine<Value>& before, const Engine<Value>& after) {
  std::set<CompId> out;
  auto value_of = [](const Engine<Value>& e, const LocationKey& k) -> const Value* { return e.store().find(k); };
  auto scan = [&](const Engine<Value>& a, const Engine<Value>& b) {
    a.trace().for_each([&](CompId c, const Computation& comp) {
      const Computation* other = b.trace().find(c.round, c.process);
      if (!other) {
        out.insert(c);
        return;
      }
      for (const auto& key : comp.reads) {
        const Value* x = value_of(a, key);
        const Value* y = value_of(b, key);
        if (!x || !y || !(*x == *y)) {
          out.insert(c);
          return;
        }
      }
    });
  };
  scan(before, after);
  scan(after, before);
  return out;
}

// (round, process) pairs re-run or deleted by the last propagation, recovered
// by diffing the engine's trace against the pre-propagation trace.
inline std::set<CompId> changed_computations(const Trace& before, const Trace& after) {
  std::set<CompId> out;
  before.for_each([&](CompId c, const Computation& comp) {
    const Computation* o = after.find(c.round, c.process);
    if (!o || !(*o == comp)) out.insert(c);
  });
  after.for_each([&](CompId c, const Computation&) {
    if (!before.find(c.round, c.process)) out.insert(c);
  });
  return out;
}

// Every subscriber list equals the set of computations whose read set holds
// the location.
template <typename Value>
bool subscribers_sound(const Engine<Value>& e) {
  std::map<LocationKey, std::set<CompId>> expected;
  e.trace().for_each([&](CompId c, const Computation& comp) {
    for (const auto& k : comp.reads) expected[k].insert(c);
  });
  bool ok = true;
  std::size_t nonempty = 0;
  e.store().for_each([&](const LocationKey& k, const auto& cell) {
    std::set<CompId> got(cell.subscribers.begin(), cell.subscribers.end());
    if (!got.empty()) ++nonempty;
    auto it = expected.find(k);
    if (got != (it == expected.end() ? std::set<CompId>{} : it->second)) ok = false;
  });
  return ok && nonempty == expected.size();
}

}  // namespace dynpar::testing
