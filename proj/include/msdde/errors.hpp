#pragma once

#include <stdexcept>
#include <string>

namespace msdde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A time, step or delay does not sit on the required lattice or mesh.
class MeshAlignmentError : public Error {
public:
    using Error::Error;
};

/// Step size exceeds the smallest delay while delayed double integrals are needed.
class StepSizeError : public Error {
public:
    using Error::Error;
};

/// The problem or scheme is missing something the requested computation needs
/// (Jacobians, mixed integrals, mode counts).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class PresetError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace msdde
