#pragma once

#include <stdexcept>

namespace coalsim {

/// An internal invariant failed (probabilities not summing to one, a rate
/// outside [0, 1], ...). Maps to CLI exit code 4.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The random clock never reached the requested rescaled time.
struct HorizonExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace coalsim
