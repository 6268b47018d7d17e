#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/inlined_vector.h>

#include "dynpar/engine/errors.hpp"
#include "dynpar/engine/location.hpp"

namespace dynpar {

// Who wrote a cell: a round computation, or the client (input locations).
struct Writer {
  static constexpr std::uint64_t kInputBits = ~std::uint64_t{0};

  std::uint64_t bits = kInputBits;

  static constexpr Writer input() { return Writer{}; }
  static constexpr Writer computation(CompId c) { return Writer{c.packed()}; }

  constexpr bool is_input() const { return bits == kInputBits; }
  constexpr CompId comp() const {
    return CompId{static_cast<Round>(bits >> 32), static_cast<ProcessId>(bits & 0xffffffffu)};
  }
  friend constexpr bool operator==(const Writer&, const Writer&) = default;
};

// Versioned write-once shared memory. Each cell holds an optional value (absent
// once purged), the writer of that value, and the set of computations that
// subscribed to it by reading it.
template <typename Value>
class CellStore {
 public:
  using Subscribers = absl::InlinedVector<CompId, 2>;

  struct Cell {
    std::optional<Value> value;
    Writer writer;
    Subscribers subscribers;
  };

  CellStore() = default;

  void reserve(std::size_t n) { cells_.reserve(n); }

  const Cell* cell(const LocationKey& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
  }

  const Value* find(const LocationKey& key) const {
    const Cell* c = cell(key);
    return (c && c->value) ? &*c->value : nullptr;
  }

  bool contains(const LocationKey& key) const { return find(key) != nullptr; }

  // Installs an input value. Returns true when the stored value changed, so
  // callers can build the changed-location set of a propagation.
  bool set_input(const LocationKey& key, Value value) {
    Cell& c = cells_[key];
    if (c.value && !c.writer.is_input())
      throw EngineError(EngineError::Kind::kInputOverwrite,
                        detail::concat("client wrote ", key, ", which holds a value computed by ", c.writer.comp()));
    if (c.value && *c.value == value) return false;
    c.value = std::move(value);
    c.writer = Writer::input();
    return true;
  }

  // Removes an input value. Returns true when something was removed.
  bool erase_input(const LocationKey& key) {
    auto it = cells_.find(key);
    if (it == cells_.end() || !it->second.value) return false;
    it->second.value.reset();
    drop_if_empty(it);
    return true;
  }

  const Subscribers* subscribers(const LocationKey& key) const {
    const Cell* c = cell(key);
    return c ? &c->subscribers : nullptr;
  }

  std::size_t size() const { return cells_.size(); }

  std::size_t value_count() const {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const auto& kv) { return kv.second.value.has_value(); }));
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [key, c] : cells_) f(key, c);
  }

  // Sorted (key, value, writer) triples of every live value: the execution's
  // output in a form that compares across independently built stores.
  struct Entry {
    LocationKey key;
    Value value;
    Writer writer;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> snapshot() const {
    std::vector<Entry> out;
    out.reserve(cells_.size());
    for (const auto& [key, c] : cells_)
      if (c.value) out.push_back(Entry{key, *c.value, c.writer});
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    return out;
  }

  // --- engine-facing mutation -------------------------------------------

  void subscribe(const LocationKey& key, CompId reader) { subscribe(cells_[key], reader); }

  // For a cell found through cell() with no insert since.
  void subscribe(const Cell& cell, CompId reader) {
    auto& subs = const_cast<Cell&>(cell).subscribers;
    if (std::find(subs.begin(), subs.end(), reader) == subs.end()) subs.push_back(reader);
  }

  void unsubscribe(const LocationKey& key, CompId reader) {
    auto it = cells_.find(key);
    if (it == cells_.end()) return;
    auto& subs = it->second.subscribers;
    auto pos = std::find(subs.begin(), subs.end(), reader);
    if (pos != subs.end()) subs.erase(pos);
    drop_if_empty(it);
  }

  // Removes the value written by `writer`, returning it. No-op (nullopt) when
  // the cell holds a value from someone else.
  std::optional<Value> purge(const LocationKey& key, Writer writer) {
    auto it = cells_.find(key);
    if (it == cells_.end() || !it->second.value || !(it->second.writer == writer)) return std::nullopt;
    std::optional<Value> old = std::move(it->second.value);
    it->second.value.reset();
    drop_if_empty(it);
    return old;
  }

  Cell& commit(const LocationKey& key, Value value, Writer writer) {
    Cell& c = cells_[key];
    c.value = std::move(value);
    c.writer = writer;
    return c;
  }

  // The cell for key, created empty when missing.
  Cell& slot(const LocationKey& key) { return cells_[key]; }

 private:
  using Map = absl::flat_hash_map<LocationKey, Cell>;

  void drop_if_empty(typename Map::iterator it) {
    if (!it->second.value && it->second.subscribers.empty()) cells_.erase(it);
  }

  Map cells_;
};

}  // namespace dynpar
