// Copyright 2026 The spanlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPANLAB_ERROR_H_
#define SPANLAB_ERROR_H_

#include <stdexcept>
#include <string>
#include <utility>

namespace spanlab {

// Base exception for every recoverable failure in the library. `code` is a
// stable identifier (e.g. "DuplicateId", "SchemaError") that the CLI and HTTP
// layers surface verbatim in structured error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("ParseError", "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Strict-schema violation. `path` is a JSON pointer to the offending node.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string reason)
      : Error("SchemaError", path + ": " + reason),
        path_(std::move(path)),
        reason_(std::move(reason)) {}
  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

}  // namespace spanlab

#endif  // SPANLAB_ERROR_H_
