#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cshield {

enum class ErrorKind {
    syntax,
    semantic,
    inconsistent_observation,
    unrealizable,
    budget_exceeded,
    off_region,
    empty_intersection,
    cover_violation,
    init_violation,
    stranded_submodel,
    metadata_missing,
    precondition,
    parameter,
    usage,
    io,
    audit_failure,
};

/// Machine-readable category, e.g. "budget-exceeded".
std::string_view to_string(ErrorKind kind);

/// Process exit code used by the CLI for each category.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace cshield
