#pragma once

#include <stdexcept>
#include <string>

namespace dgmod {

// Error categories map onto CLI exit codes: ConfigError -> 2,
// NumericalError -> 3, IoError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Feeder construction
struct CycleDetected : ConfigError {
    using ConfigError::ConfigError;
};
struct Disconnected : ConfigError {
    using ConfigError::ConfigError;
};
struct DuplicateLine : ConfigError {
    using ConfigError::ConfigError;
};
struct NonPositiveReactance : ConfigError {
    using ConfigError::ConfigError;
};
struct SingularIncidence : NumericalError {
    using NumericalError::NumericalError;
};

// Power flow
struct DimensionMismatch : ConfigError {
    using ConfigError::ConfigError;
};
struct NoConvergence : NumericalError {
    using NumericalError::NumericalError;
};
struct DivergedVoltage : NumericalError {
    using NumericalError::NumericalError;
};

// Scenario / data ingestion
struct InvalidConfig : ConfigError {
    using ConfigError::ConfigError;
};
struct RaggedRows : IoError {
    using IoError::IoError;
};
struct NonNumericCell : IoError {
    using IoError::IoError;
};
struct UnknownBusLabel : ConfigError {
    using ConfigError::ConfigError;
};
struct EmptyObservedSet : ConfigError {
    using ConfigError::ConfigError;
};

// Regression / estimation
struct MissingRatios : ConfigError {
    using ConfigError::ConfigError;
};
struct SingularNormalMatrix : NumericalError {
    using NumericalError::NumericalError;
};
struct MonotonicityViolation : NumericalError {
    using NumericalError::NumericalError;
};
struct EmptyFold : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace dgmod
