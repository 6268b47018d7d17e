#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>

namespace dynpar {

using Round = std::uint32_t;
using ProcessId = std::uint32_t;

inline constexpr Round kMaxRound = std::numeric_limits<std::uint16_t>::max();

// A shared-memory address: (array, round, index, slot). Packed into 64 bits so
// that keys hash and compare as plain integers.
struct LocationKey {
  std::uint8_t array = 0;
  std::uint8_t slot = 0;
  std::uint16_t round = 0;
  std::uint32_t index = 0;

  constexpr LocationKey() = default;
  constexpr LocationKey(std::uint8_t array_id, Round r, std::uint32_t idx, std::uint8_t slot_id = 0)
      : array(array_id), slot(slot_id), round(static_cast<std::uint16_t>(r)), index(idx) {}

  constexpr std::uint64_t packed() const {
    return (std::uint64_t{array} << 56) | (std::uint64_t{round} << 40) | (std::uint64_t{slot} << 32) |
           std::uint64_t{index};
  }
  static constexpr LocationKey unpack(std::uint64_t bits) {
    LocationKey k;
    k.array = static_cast<std::uint8_t>(bits >> 56);
    k.round = static_cast<std::uint16_t>(bits >> 40);
    k.slot = static_cast<std::uint8_t>(bits >> 32);
    k.index = static_cast<std::uint32_t>(bits);
    return k;
  }

  friend constexpr bool operator==(const LocationKey& a, const LocationKey& b) { return a.packed() == b.packed(); }
  friend constexpr std::strong_ordering operator<=>(const LocationKey& a, const LocationKey& b) {
    return a.packed() <=> b.packed();
  }

  template <typename H>
  friend H AbslHashValue(H h, const LocationKey& k) {
    return H::combine(std::move(h), k.packed());
  }
};

inline std::ostream& operator<<(std::ostream& os, const LocationKey& k) {
  return os << "loc(array=" << int{k.array} << ", round=" << k.round << ", index=" << k.index
            << ", slot=" << int{k.slot} << ")";
}

// A (round, process) pair: one round computation.
struct CompId {
  Round round = 0;
  ProcessId process = 0;

  constexpr std::uint64_t packed() const { return (std::uint64_t{round} << 32) | process; }

  friend constexpr bool operator==(const CompId&, const CompId&) = default;
  friend constexpr std::strong_ordering operator<=>(const CompId& a, const CompId& b) {
    return a.packed() <=> b.packed();
  }
  template <typename H>
  friend H AbslHashValue(H h, const CompId& c) {
    return H::combine(std::move(h), c.packed());
  }
};

inline std::ostream& operator<<(std::ostream& os, const CompId& c) {
  return os << "(round " << c.round << ", process " << c.process << ")";
}

}  // namespace dynpar

template <>
struct std::hash<dynpar::LocationKey> {
  std::size_t operator()(const dynpar::LocationKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(k.packed());
  }
};
