#pragma once

#include <stdexcept>
#include <string>

namespace hqmq {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A zero-norm chunk was asked for a direction.
class DegenerateChunk : public Error {
public:
    using Error::Error;
};

/// Packed data is malformed: bad checksum, truncation, out-of-range code.
class CorruptData : public Error {
public:
    using Error::Error;
};

class UnsupportedVersion : public Error {
public:
    using Error::Error;
};

/// Packed tensors and codebooks were built from different parameters.
class ConfigMismatch : public Error {
public:
    using Error::Error;
};

#define HQMQ_THROW_IF_NOT(cond, ExcType, msg)                                  \
    do {                                                                       \
        if (!(cond)) {                                                         \
            throw ::hqmq::ExcType(std::string(msg));                           \
        }                                                                      \
    } while (false)

} // namespace hqmq
