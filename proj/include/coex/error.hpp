#pragma once

#include <stdexcept>
#include <string>

namespace coex {

// Caller broke a documented precondition or type invariant.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// External input (file, flag, record) failed validation.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem or parse failure, reported with path/line context.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration (missing profile, unknown subcommand option).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Operation asked of a kernel implementation that cannot execute it.
class UnsupportedKernelError : public std::runtime_error {
public:
    explicit UnsupportedKernelError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset unusable for training (empty, degenerate, or too small per kernel).
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Ensemble has no model for the requested (executor, kernel) route.
class RoutingError : public std::runtime_error {
public:
    explicit RoutingError(const std::string& what) : std::runtime_error(what) {}
};

// Model description contains a layer the planner cannot schedule.
class PlanningError : public std::runtime_error {
public:
    explicit PlanningError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coex
