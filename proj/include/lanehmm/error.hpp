#pragma once

#include <stdexcept>
#include <string>

namespace lanehmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input document does not follow the expected schema (map JSON, CSV, config).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Lane geometry violates an invariant (width, segment length, edge counts).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Numerical or probabilistic inconsistency inside the HMM models.
class ModelError : public Error {
public:
    using Error::Error;
};

}  // namespace lanehmm
