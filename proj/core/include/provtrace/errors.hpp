#pragma once

#include <stdexcept>
#include <string>

namespace provtrace {

// Base type for all recoverable errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A log line that is not valid JSON or is missing a required field.
class MalformedRecord : public Error {
public:
    using Error::Error;
};

// A value that parses but violates a documented invariant (e.g. a
// negative duration, or a started event without query text).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

// An activity whose event sequence cannot form a well-nested tree.
// Aborts the activity only; callers skip it and continue.
class MalformedActivity : public Error {
public:
    using Error::Error;
};

class SourceUnavailable : public Error {
public:
    using Error::Error;
};

// The checkpoint file exists but cannot be decoded. We refuse to run
// rather than risk double-processing.
class CorruptCheckpoint : public Error {
public:
    using Error::Error;
};

// The same qualified name was registered with two different entity types.
class TypeConflict : public Error {
public:
    using Error::Error;
};

// A provenance record references a tree node that does not exist.
class MissingNode : public Error {
public:
    using Error::Error;
};

// Hook registration against a point that is not part of the pipeline.
class UnknownPoint : public Error {
public:
    using Error::Error;
};

// Graph failed its integrity check (dangling reference, duplicate name).
class ValidationFailure : public Error {
public:
    using Error::Error;
};

// Upload sink could not be reached after exhausting retries.
class SinkUnavailable : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace provtrace
