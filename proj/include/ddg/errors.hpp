#pragma once

#include <stdexcept>
#include <string>

namespace ddg {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// ConfigError -> 1, FormatError/ConsistencyError/IoError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ConsistencyError : Error {
    using Error::Error;
};

struct StratificationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace ddg
