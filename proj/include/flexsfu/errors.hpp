// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flexsfu {

// Optimizer produced a non-finite loss (bad learning rate or config).
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model does not fit into the requested LTC depth.
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data format / element width inconsistent with the loaded configuration.
class FormatMismatchError : public std::runtime_error {
public:
    explicit FormatMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// exe.af() issued before both breakpoint and coefficient memories are loaded.
class NotReadyError : public std::runtime_error {
public:
    explicit NotReadyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flexsfu
