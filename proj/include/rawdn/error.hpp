// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rawdn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or size precondition violated (odd dimensions, mismatched planes, kernel larger than image).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed file, sidecar, or stream.
class FormatError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Regression could not be carried out (too few samples, degenerate design).
class FitError : public Error {
public:
    using Error::Error;
};

// External denoiser process failed or violated the wire protocol.
class BridgeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rawdn
