#pragma once

#include <stdexcept>
#include <string>

namespace ratekit {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input/configuration problems (CLI maps these to exit code 2).
class SchemaError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class EncodingError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

/// Numerical failures (CLI maps these to exit code 1).
class RankError : public Error { public: using Error::Error; };
class ConvergenceError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class LayoutError : public Error { public: using Error::Error; };
class BracketError : public Error { public: using Error::Error; };
class FeasibilityError : public Error { public: using Error::Error; };

} // namespace ratekit
