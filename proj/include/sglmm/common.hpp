#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <system_error>

namespace sglmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// Every error raised by the library derives from Error so callers can catch
// the whole family at once. The subclasses name the failure category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    if (res.ec != std::errc{}) {
        throw NumericError("cannot format floating-point value");
    }
    return std::string(buf, res.ptr);
}

// Like format_double but always carries a decimal point ("1" -> "1.0").
inline std::string format_decimal(double value) {
    std::string s = format_double(value);
    if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) {
        s += ".0";
    }
    return s;
}

}  // namespace sglmm
