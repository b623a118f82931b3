#pragma once

#include <stdexcept>
#include <string>

namespace hsk {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File access / format errors. The CLI maps these to exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace hsk
