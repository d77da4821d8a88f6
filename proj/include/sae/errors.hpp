#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sae {

/// Base class for every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape disagreement between operands; the message names both shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Bad or inconsistent configuration (file contents or programmatic values).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, int line = 0, std::string key = {})
        : Error(what), line_(line), key_(std::move(key)) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    int line_ = 0;
    std::string key_;
};

/// Problems with input data files or dataset contents.
class DataError : public Error {
public:
    using Error::Error;
};

/// IDX file violations, with the specific violation kind attached.
class IdxError : public DataError {
public:
    enum class Kind { BadMagic, Truncated, CountMismatch };

    IdxError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// A stratified split could not satisfy the per-class quota.
class SplitError : public DataError {
public:
    SplitError(int label, const std::string& what) : DataError(what), label_(label) {}
    int label() const { return label_; }

private:
    int label_;
};

/// Filesystem failure; carries the offending path.
class IoError : public Error {
public:
    IoError(std::string path, const std::string& what) : Error(what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// A model too large for exact enumeration.
class EnumerationError : public Error {
public:
    using Error::Error;
};

/// Malformed trace input.
class TraceError : public Error {
public:
    using Error::Error;
};

/// Concurrent pre-training failure. worker() is 1-based, 0 when the failure
/// is not attributable to a single worker (e.g. the progress watchdog).
class SyncError : public Error {
public:
    SyncError(int worker, const std::string& what) : Error(what), worker_(worker) {}
    int worker() const { return worker_; }

private:
    int worker_;
};

}  // namespace sae
