#pragma once

#include <stdexcept>
#include <string>

namespace emrkit {

// Error taxonomy. The numeric mapping feeds the C API status codes and the
// CLI exit codes, so keep the categories stable.
enum class ErrorKind {
    Config,       // invalid or contradictory configuration, bad CLI input
    Environment,  // missing credentials, unreachable endpoints, filesystem trouble
    Agent,        // agent exhausted its budgets or hit a terminal failure
    Malformed,    // a model completion that does not satisfy the output grammar
    Budget,       // a completion that exceeds an explicit numeric budget
    Internal      // programming errors, broken invariants
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(message), kind_(kind), message_(std::move(message)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

inline Error config_error(std::string message) { return Error(ErrorKind::Config, std::move(message)); }
inline Error environment_error(std::string message) { return Error(ErrorKind::Environment, std::move(message)); }
inline Error agent_error(std::string message) { return Error(ErrorKind::Agent, std::move(message)); }
inline Error malformed_error(std::string message) { return Error(ErrorKind::Malformed, std::move(message)); }
inline Error budget_error(std::string message) { return Error(ErrorKind::Budget, std::move(message)); }
inline Error internal_error(std::string message) { return Error(ErrorKind::Internal, std::move(message)); }

}  // namespace emrkit
