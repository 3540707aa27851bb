// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace bsa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix, grid or file header has an impossible or mismatched shape.
class InvalidShape : public Error {
public:
    using Error::Error;
};

/// A binary file is malformed (bad magic/version, truncated payload).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A coordinate or block id is out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// A tuning knob or geometry setting is outside its valid domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Query and KV selections do not belong to the same geometry/bundle.
class SelectionMismatch : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace bsa
