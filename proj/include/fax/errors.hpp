#pragma once

#include <stdexcept>
#include <string>

namespace fax {

// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentNotFound : Error {
    explicit ArgumentNotFound(const std::string& id)
        : Error("argument not found: " + id) {}
};

struct InvalidBaf : Error {
    using Error::Error;
};

struct CyclicBaf : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct ArityError : Error {
    using Error::Error;
};

struct ProtocolError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ParameterError : Error {
    using Error::Error;
};

struct TrainingFailure : Error {
    using Error::Error;
};

}  // namespace fax
