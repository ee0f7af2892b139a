// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xdmg {

/// Failure categories. The numeric values are the process exit codes used by
/// the command-line tool and the status codes returned through the C API.
enum class ErrorKind : int {
  usage = 1,    // malformed configuration, invalid argument, precondition
  data = 2,     // missing/corrupt inputs, shape mismatches between files
  runtime = 3,  // numerical divergence and other failures during execution
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

}  // namespace xdmg
