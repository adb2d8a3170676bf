// Copyright (c) 2026, The mitoforge Authors. All rights reserved.
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

#ifndef MITOFORGE_ERROR_HPP
#define MITOFORGE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mitoforge {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Too few tissue pixels, or a single-stain image.
class DegenerateTissue : public Error {
 public:
  using Error::Error;
};

/// Stain vectors are (numerically) collinear.
class SingularBasis : public Error {
 public:
  using Error::Error;
};

class ImageTooSmall : public Error {
 public:
  using Error::Error;
};

class InsufficientRecords : public Error {
 public:
  using Error::Error;
};

/// No positive and no negative proposals to sample from.
class EmptyAssignment : public Error {
 public:
  using Error::Error;
};

class MissingLosses : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `path()` is a JSON-pointer-like location.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Invalid configuration value; `field()` is the dotted config path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mitoforge

#endif  // MITOFORGE_ERROR_HPP
