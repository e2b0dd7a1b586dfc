#pragma once

#include <stdexcept>
#include <string>

namespace oneq {

/// Argument outside the mathematical domain of an operation (w > 1, bad qubit index, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration value (non-positive coherence time, malformed scenario, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Misuse of a quantum resource: consumed twice, missing qubit, pending correction.
class ResourceError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A deterministic precondition of a network operation was violated (e.g. coverage).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Unknown node, cell or link id.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Broken engine contract, such as scheduling an event in the past.
class SimulationError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace oneq
