#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace risshare {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    InvalidConfig(std::string field, std::string reason)
        : Error("invalid config '" + field + "': " + reason),
          field_(std::move(field)), reason_(std::move(reason)) {}

    const std::string &field() const { return field_; }
    const std::string &reason() const { return reason_; }

private:
    std::string field_;
    std::string reason_;
};

class OverlappingSets : public Error {
public:
    explicit OverlappingSets(int subchannel)
        : Error("reusable and dedicated subchannel sets overlap at index " +
                std::to_string(subchannel)),
          subchannel_(subchannel) {}

    int subchannel() const { return subchannel_; }

private:
    int subchannel_;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class NoRis : public Error {
public:
    explicit NoRis(int user) : Error("user " + std::to_string(user) + " has no associated RIS") {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(got)) {}
};

class NotReset : public Error {
public:
    NotReset() : Error("environment stepped before reset") {}
};

class InsufficientBuffer : public Error {
public:
    InsufficientBuffer(std::size_t size, std::size_t batch)
        : Error("replay buffer holds " + std::to_string(size) + " transitions, batch needs " +
                std::to_string(batch)) {}
};

class SearchSpaceTooLarge : public Error {
public:
    SearchSpaceTooLarge(double count, double limit)
        : Error("search space of " + std::to_string(count) + " candidates exceeds limit " +
                std::to_string(limit)),
          count_(count) {}

    double count() const { return count_; }

private:
    double count_;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

} // namespace risshare
