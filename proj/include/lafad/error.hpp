// Copyright 2026 The lafad Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace lafad {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or input violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed external input (CSV rows, label files, timestamps).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A persisted file does not match the expected schema or version.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Failure inside the (model, bootstrap) grid, tagged with where it happened.
class PipelineError : public Error {
 public:
  PipelineError(std::size_t model, std::size_t bootstrap, const std::string& what)
      : Error("model " + std::to_string(model) + ", bootstrap " + std::to_string(bootstrap) +
              ": " + what),
        model_(model),
        bootstrap_(bootstrap) {}

  std::size_t model() const noexcept { return model_; }
  std::size_t bootstrap() const noexcept { return bootstrap_; }

 private:
  std::size_t model_;
  std::size_t bootstrap_;
};

}  // namespace lafad
