// Copyright 2026 The CMA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CMA_COMMON_ERRORS_HPP_
#define CMA_COMMON_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cma {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A module or agent name violates the topic-safety rules (empty, or
/// contains '/', '+', '#').
class InvalidNameError : public Error {
 public:
  explicit InvalidNameError(const std::string& what) : Error(what) {}
};

/// A wire payload could not be decoded. `missing_key()` names the first
/// required key that was absent, or is empty for non-JSON input.
class MalformedPayloadError : public Error {
 public:
  explicit MalformedPayloadError(const std::string& what,
                                 std::string missing_key = "")
      : Error(what), missing_key_(std::move(missing_key)) {}
  const std::string& missing_key() const { return missing_key_; }

 private:
  std::string missing_key_;
};

class BusStoppedError : public Error {
 public:
  BusStoppedError() : Error("bus is stopped") {}
};

class DuplicateSubscriptionError : public Error {
 public:
  explicit DuplicateSubscriptionError(const std::string& module_name)
      : Error("module already has an active subscription: " + module_name) {}
};

class DuplicateModuleError : public Error {
 public:
  explicit DuplicateModuleError(const std::string& module_name)
      : Error("module already spawned: " + module_name) {}
};

/// Raised by the memory store when the hard record cap is reached.
/// This is an operator signal that the memory-cleaner module is failing.
class StorageFullError : public Error {
 public:
  explicit StorageFullError(std::size_t cap)
      : Error("memory store reached hard cap of " + std::to_string(cap) +
              " records") {}
};

/// The persistence log is unreadable before its final line. A torn final
/// line is not corruption; it is truncated silently on reload.
class LogCorruptError : public Error {
 public:
  LogCorruptError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parse failure in a gateway rule file or scenario file; carries the
/// 1-based line (rule files) or a textual location (scenario JSON).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class GatewayError : public Error {
 public:
  enum class Kind { kTimeout, kTransport, kUpstreamStatus, kUpstreamMalformed };

  GatewayError(Kind kind, const std::string& what, int status = 0)
      : Error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }

  bool retryable() const {
    switch (kind_) {
      case Kind::kTimeout:
      case Kind::kTransport:
        return true;
      case Kind::kUpstreamStatus:
        return status_ >= 500 || status_ == 429;
      case Kind::kUpstreamMalformed:
        return false;
    }
    return false;
  }

 private:
  Kind kind_;
  int status_;
};

class MqttError : public Error {
 public:
  enum class Kind { kConnectionRefused, kProtocol, kTimeout };

  MqttError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace cma

#endif  // CMA_COMMON_ERRORS_HPP_
