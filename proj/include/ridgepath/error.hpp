#ifndef RIDGEPATH_ERROR_HPP
#define RIDGEPATH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ridgepath {

/// Invalid arguments, malformed files, missing model truth.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Solver breakdown or non-finite values produced during a computation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A target vector fails the sign condition required by a loss bound.
class ConditionViolated : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(what);
}

} // namespace detail
} // namespace ridgepath

#endif
