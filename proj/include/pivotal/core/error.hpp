#pragma once
#include <stdexcept>
#include <string>

namespace pivotal {

/// Raised when a caller supplies arguments outside an operation's contract.
class InvalidInput : public std::invalid_argument
{
public:
    explicit InvalidInput(const std::string& what)
        : std::invalid_argument(what)
    {}
};

/// Raised when a numerical routine fails (non-convergence, non-finite output).
class NumericError : public std::runtime_error
{
public:
    explicit NumericError(const std::string& what)
        : std::runtime_error(what)
    {}
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InvalidInput(msg);
}

} // namespace detail
} // namespace pivotal
