#pragma once

#include <stdexcept>
#include <string>

namespace nvgan {

// Shape violations in tensor ops: wrong extents, bad broadcast, rank mismatch.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration: unknown keys, invalid hyperparameters, indivisible grids.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset problems: missing files, shape mismatches, non-finite values.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint file problems, split by failure mode so callers can tell them apart.
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

class CheckpointFormatError : public CheckpointError {
public:
    explicit CheckpointFormatError(const std::string& msg) : CheckpointError(msg) {}
};

class CheckpointVersionError : public CheckpointError {
public:
    explicit CheckpointVersionError(const std::string& msg) : CheckpointError(msg) {}
};

class CheckpointTruncatedError : public CheckpointError {
public:
    explicit CheckpointTruncatedError(const std::string& msg) : CheckpointError(msg) {}
};

class CheckpointChecksumError : public CheckpointError {
public:
    explicit CheckpointChecksumError(const std::string& msg) : CheckpointError(msg) {}
};

// API misuse: querying attention weights before any forward pass, stepping an
// optimizer whose parameters have no gradients, and similar ordering mistakes.
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nvgan
