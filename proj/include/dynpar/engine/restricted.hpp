#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include <absl/container/flat_hash_map.h>

#include "dynpar/engine/cell_store.hpp"
#include "dynpar/engine/errors.hpp"
#include "dynpar/engine/trace.hpp"

namespace dynpar {

struct RestrictedLimits {
  std::size_t reads = 8;
  std::size_t writes = 8;
  std::size_t readers = 8;
};

struct RestrictedReport {
  std::size_t max_reads = 0;    // per computation
  std::size_t max_writes = 0;   // per computation
  std::size_t max_readers = 0;  // per location
  bool previous_round_reads = true;
  bool restricted = true;
  std::optional<std::string> first_violation;
};

// Audits a completed execution against the restricted model: bounded reads and
// writes per computation, bounded readers per location, and every read in
// round r targets a value written in round r-1 (or an input, in round 0).
template <typename Value>
RestrictedReport check_restricted(const Trace& trace, const CellStore<Value>& store, RestrictedLimits limits = {}) {
  RestrictedReport rep;
  absl::flat_hash_map<LocationKey, std::size_t> readers;
  trace.for_each([&](CompId c, const Computation& comp) {
    rep.max_reads = std::max(rep.max_reads, comp.reads.size());
    rep.max_writes = std::max(rep.max_writes, comp.writes.size());
    for (const auto& key : comp.reads) {
      ++readers[key];
      const auto* cell = store.cell(key);
      bool ok = false;
      if (cell && cell->value)
        ok = cell->writer.is_input() ? c.round == 0 : cell->writer.comp().round + 1 == c.round;
      if (!ok && rep.previous_round_reads) {
        rep.previous_round_reads = false;
        rep.first_violation = detail::concat(c, " read ", key, " outside the previous round");
      }
    }
  });
  for (const auto& [key, n] : readers) rep.max_readers = std::max(rep.max_readers, n);
  rep.restricted = rep.previous_round_reads && rep.max_reads <= limits.reads && rep.max_writes <= limits.writes &&
                   rep.max_readers <= limits.readers;
  if (!rep.restricted && !rep.first_violation)
    rep.first_violation = detail::concat("bounds exceeded: reads ", rep.max_reads, ", writes ", rep.max_writes,
                                         ", readers ", rep.max_readers);
  return rep;
}

}  // namespace dynpar
