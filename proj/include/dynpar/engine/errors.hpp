#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

#include "dynpar/engine/location.hpp"

namespace dynpar {

// Raised when a round computation breaks the memory discipline. The message
// names the offending computation and location.
class EngineError : public std::runtime_error {
 public:
  enum class Kind {
    kWriteOnce,       // two writers for one location
    kMissingRead,     // read of a location that holds no value
    kVisibility,      // read of a location written in the same or a later round
    kInputOverwrite,  // computation wrote an input location, or client wrote a computed one
    kBadDelta,        // propagation delta names unknown processes or overlapping sets
  };

  EngineError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

template <typename... Parts>
std::string concat(const Parts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail
}  // namespace dynpar
