#pragma once

#include <stdexcept>
#include <string>

namespace hoa {

/// Base of every error raised by the codec library. The CLI maps these to
/// exit code 2 (runtime failure).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed container or WAV header.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Matrix/frame/channel dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite input or an ill-conditioned system.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Out-of-range configuration value (e.g. reduced order above the input order).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Missing or mismatched codebooks/tables.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Truncated or corrupt bitstream.
class StreamError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Not enough data to train a quantizer.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Quantized basis whose Gram matrix is too ill-conditioned to invert.
class DegenerateBasisError : public NumericError {
public:
    DegenerateBasisError(const std::string& what, int column)
        : NumericError(what), column_(column) {}
    /// First column whose inclusion breaks the condition-number cap.
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    int column_;
};

} // namespace hoa
