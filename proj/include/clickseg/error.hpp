#pragma once

#include <stdexcept>
#include <string>

namespace clickseg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class OutOfBounds : public Error {
public:
    using Error::Error;
};

/// Malformed bytes in one of the on-disk formats (CSPM, parameter file, PNG).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Operation not valid for the current session state (undo on empty, refine without clicks).
class StateError : public Error {
public:
    using Error::Error;
};

class SegmenterError : public Error {
public:
    using Error::Error;
};

class ProcessExited : public SegmenterError {
public:
    using SegmenterError::SegmenterError;
};

class MalformedResponse : public SegmenterError {
public:
    using SegmenterError::SegmenterError;
};

class Timeout : public SegmenterError {
public:
    using SegmenterError::SegmenterError;
};

}  // namespace clickseg
