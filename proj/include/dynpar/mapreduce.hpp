#pragma once

#include <bit>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "dynpar/engine/engine.hpp"

namespace dynpar {

// Dynamic map-reduce: a bottom-up reduction tree f(a_0) + f(a_1) + ... under
// an associative operator, kept up to date under batches of element updates,
// with range folds over the stored partial results.
//
// Layout: A[p] holds element p; V[r][p] holds the fold over the input block
// [p * 2^r, (p + 1) * 2^r). The sequence is padded to a power of two with the
// operator identity.
template <typename T, typename Op = std::plus<T>, typename F = std::identity>
class MapReduce {
 public:
  using result_type = std::decay_t<std::invoke_result_t<const F&, const T&>>;

  struct InputCell {
    T value;
    friend bool operator==(const InputCell&, const InputCell&) = default;
  };
  struct PartialCell {
    result_type value;
    friend bool operator==(const PartialCell&, const PartialCell&) = default;
  };
  using Value = std::variant<InputCell, PartialCell>;

  static constexpr std::uint8_t kInput = 0;
  static constexpr std::uint8_t kPartial = 1;

  // The two blocks of round r-1 combined by process p in round r.
  static constexpr std::pair<std::size_t, std::size_t> children(std::size_t p) { return {2 * p, 2 * p + 1}; }
  // Process p is not needed after round r once the next round has fewer
  // blocks than p + 1.
  static constexpr bool retires(std::size_t padded, Round r, std::size_t p) {
    return p >= (padded >> (r + 1));
  }

  struct Program {
    std::size_t length;
    std::size_t padded;
    Op op;
    F f;
    result_type identity;

    void compute_round(Round r, ProcessId p, RoundContext<Value>& ctx) const {
      if (r == 0) {
        result_type v = identity;
        if (p < length) v = std::invoke(f, std::get<InputCell>(ctx.read(LocationKey(kInput, 0, p))).value);
        ctx.write(LocationKey(kPartial, 0, p), PartialCell{std::move(v)});
      } else {
        const auto [lhs, rhs] = children(p);
        const auto& a = std::get<PartialCell>(ctx.read(LocationKey(kPartial, r - 1, static_cast<std::uint32_t>(lhs))));
        const auto& b = std::get<PartialCell>(ctx.read(LocationKey(kPartial, r - 1, static_cast<std::uint32_t>(rhs))));
        ctx.write(LocationKey(kPartial, r, p), PartialCell{op(a.value, b.value)});
      }
      if (retires(padded, r, p)) ctx.retire();
    }
  };

  MapReduce(std::span<const T> seq, Op op, result_type identity, F f = {}, EngineOptions options = {})
      : engine_(options),
        program_{seq.size(), std::bit_ceil(std::max<std::size_t>(seq.size(), 1)), std::move(op), std::move(f),
                 std::move(identity)} {
    if (seq.empty()) throw std::invalid_argument("map-reduce over an empty sequence");
    engine_.store().reserve(2 * program_.padded + seq.size());
    for (std::size_t p = 0; p < seq.size(); ++p)
      engine_.store().set_input(LocationKey(kInput, 0, static_cast<std::uint32_t>(p)), InputCell{seq[p]});
    std::vector<ProcessId> procs(program_.padded);
    std::iota(procs.begin(), procs.end(), ProcessId{0});
    engine_.run(program_, procs);
  }

  std::size_t size() const { return program_.length; }
  std::size_t padded_size() const { return program_.padded; }
  Round levels() const { return static_cast<Round>(std::bit_width(program_.padded)); }

  const Engine<Value>& engine() const { return engine_; }

  // Rewrites the given elements and propagates. Duplicate indices keep the
  // last value.
  void update(std::span<const std::pair<std::size_t, T>> batch) {
    for (const auto& [idx, v] : batch)
      if (idx >= program_.length) throw std::out_of_range("map-reduce update index out of range");
    PropagationDelta delta;
    for (const auto& [idx, v] : batch) {
      LocationKey key(kInput, 0, static_cast<std::uint32_t>(idx));
      if (engine_.store().set_input(key, InputCell{v})) delta.changed.push_back(key);
    }
    engine_.propagate(program_, delta);
  }

  result_type total() const { return partial(levels() - 1, 0); }

  const T& element(std::size_t idx) const {
    if (idx >= program_.length) throw std::out_of_range("map-reduce element index out of range");
    return std::get<InputCell>(*engine_.store().find(LocationKey(kInput, 0, static_cast<std::uint32_t>(idx)))).value;
  }

  // Fold of f over elements i..j inclusive from the O(log n) canonical
  // blocks, combined left to right.
  result_type range(std::size_t i, std::size_t j) const {
    if (i > j || j >= program_.length) throw std::out_of_range("map-reduce range out of bounds");
    result_type left = program_.identity;
    result_type right = program_.identity;
    std::size_t lo = i;
    std::size_t hi = j + 1;
    for (Round level = 0; lo < hi; ++level, lo >>= 1, hi >>= 1) {
      if (lo & 1) left = program_.op(left, partial(level, lo++));
      if (hi & 1) right = program_.op(partial(level, --hi), right);
    }
    return program_.op(left, right);
  }

  const result_type& partial(Round level, std::size_t p) const {
    const Value* v = engine_.store().find(LocationKey(kPartial, level, static_cast<std::uint32_t>(p)));
    if (!v) throw std::logic_error("map-reduce partial result missing");
    return std::get<PartialCell>(*v).value;
  }

 private:
  Engine<Value> engine_;
  Program program_;
};

}  // namespace dynpar
