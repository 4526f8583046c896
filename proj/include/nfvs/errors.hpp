#pragma once

#include <stdexcept>
#include <string>

namespace nfvs {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(const std::string& what) : Error(what) {}
};

struct NotUnitQuaternion : Error {
    explicit NotUnitQuaternion(const std::string& what) : Error(what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

struct SingularMatrix : Error {
    explicit SingularMatrix(const std::string& what) : Error(what) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

struct GraphNotRecorded : Error {
    explicit GraphNotRecorded(const std::string& what) : Error(what) {}
};

struct CameraInsideObject : Error {
    explicit CameraInsideObject(const std::string& what) : Error(what) {}
};

struct OracleDiverged : Error {
    explicit OracleDiverged(const std::string& what) : Error(what) {}
};

struct TooShortTrace : Error {
    explicit TooShortTrace(const std::string& what) : Error(what) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& what) : Error(what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace nfvs
