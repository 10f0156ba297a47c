// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRICLIP_ERRORS_HPP_
#define TRICLIP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace triclip {

// Root of every error thrown by the library. The command line tool maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A record on disk violates the binary or JSON format.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An in-memory record violates an invariant and cannot be persisted.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A modality or channel required by the operation is absent.
class MissingDataError : public Error {
 public:
  using Error::Error;
};

// Every value is identical, so no balanced binary split exists.
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf surfaced in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage needs an artifact that an upstream stage has not produced.
class DependencyError : public Error {
 public:
  DependencyError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace triclip

#endif  // TRICLIP_ERRORS_HPP_
