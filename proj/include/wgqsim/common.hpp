#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace wgqsim {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Two fields do not share the same transverse grid.
class GridMismatchError final : public Error {
public:
    explicit GridMismatchError(const std::string& what) : Error(what) {}
};

/// Invalid or inconsistent device/waveguide geometry.
class GeometryError final : public Error {
public:
    explicit GeometryError(const std::string& what) : Error(what) {}
};

/// Mode solving failed (no guided mode, unsupported stack, ...).
class SolverError final : public Error {
public:
    explicit SolverError(const std::string& what) : Error(what) {}
};

/// The transverse window is too small for the fields it must hold.
class WindowError final : public Error {
public:
    explicit WindowError(const std::string& what) : Error(what) {}
};

/// An iterative procedure failed to converge or diverged.
class ConvergenceError final : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error(what) {}
};

/// A calibration search could not bracket or reach its target.
class CalibrationError final : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error(what) {}
};

/// Bad scenario / CLI configuration.
class ConfigError final : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace wgqsim
