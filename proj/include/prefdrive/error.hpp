// Copyright 2026 The prefdrive Authors
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

namespace prefdrive {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A response file is missing an answer for a structurally used key.
class IncompleteResponse : public Error {
 public:
  using Error::Error;
};

class InvalidMargin : public Error {
 public:
  using Error::Error;
};

class UnusedKey : public Error {
 public:
  using Error::Error;
};

/// A lane referenced relative to the ego lane does not exist on the road.
class LaneOutOfRange : public Error {
 public:
  using Error::Error;
};

/// The preference corridor is empty at the current step.
class EmptyCorridor : public Error {
 public:
  using Error::Error;
};

/// The ego's current state lies outside the corridor of a strategy.
class InfeasibleAtStart : public Error {
 public:
  using Error::Error;
};

class NoFeasiblePlan : public Error {
 public:
  using Error::Error;
};

class InvalidScene : public Error {
 public:
  using Error::Error;
};

class CollisionDetected : public Error {
 public:
  using Error::Error;
};

}  // namespace prefdrive
