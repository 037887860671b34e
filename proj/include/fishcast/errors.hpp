// Copyright 2026 The fishcast Authors. All Rights Reserved.
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

namespace fishcast {

// Error hierarchy. Everything derives from std::runtime_error so callers that
// only care about "it failed" can catch one type.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncated payload, bad dimensions).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A cell is a non-value in some frames but finite in others.
class InconsistentMaskError : public Error {
 public:
  using Error::Error;
};

// Statistics or labels carry no information (constant field, single class).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Not enough frames / history / rows for the requested operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor or grid shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Backward called on a graph that was already consumed.
class StaleGraphError : public Error {
 public:
  using Error::Error;
};

// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Wraps an error raised inside a pipeline stage with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fishcast
