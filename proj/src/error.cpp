#include "cshield/error.hpp"

namespace cshield {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::syntax: return "syntax";
        case ErrorKind::semantic: return "semantic";
        case ErrorKind::inconsistent_observation: return "inconsistent-observation";
        case ErrorKind::unrealizable: return "unrealizable";
        case ErrorKind::budget_exceeded: return "budget-exceeded";
        case ErrorKind::off_region: return "off-region";
        case ErrorKind::empty_intersection: return "empty-intersection";
        case ErrorKind::cover_violation: return "cover-violation";
        case ErrorKind::init_violation: return "init-violation";
        case ErrorKind::stranded_submodel: return "stranded-submodel";
        case ErrorKind::metadata_missing: return "metadata-missing";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::usage: return "usage";
        case ErrorKind::io: return "io";
        case ErrorKind::audit_failure: return "audit-failure";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::io: return 3;
        case ErrorKind::syntax:
        case ErrorKind::semantic:
        case ErrorKind::metadata_missing:
        case ErrorKind::parameter: return 4;
        case ErrorKind::cover_violation:
        case ErrorKind::init_violation:
        case ErrorKind::stranded_submodel: return 5;
        case ErrorKind::unrealizable: return 6;
        case ErrorKind::budget_exceeded: return 7;
        case ErrorKind::off_region:
        case ErrorKind::empty_intersection:
        case ErrorKind::inconsistent_observation:
        case ErrorKind::precondition:
        case ErrorKind::audit_failure: return 8;
    }
    return 1;
}

}  // namespace cshield
