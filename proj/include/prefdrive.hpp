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

#include "prefdrive/error.hpp"
#include "prefdrive/log.hpp"
#include "prefdrive/scenario.hpp"
#include "prefdrive/scenario_io.hpp"
#include "prefdrive/questionnaire.hpp"
#include "prefdrive/strategy.hpp"
#include "prefdrive/prefspace.hpp"
#include "prefdrive/dynamics.hpp"
#include "prefdrive/ocp_qp.hpp"
#include "prefdrive/solver.hpp"
#include "prefdrive/planner.hpp"
#include "prefdrive/sim.hpp"
