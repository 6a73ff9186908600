// Copyright 2026 The doublemeas Authors
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

#include "doublemeas/allocator.hpp"
#include "doublemeas/csv.hpp"
#include "doublemeas/errors.hpp"
#include "doublemeas/experiments.hpp"
#include "doublemeas/ising.hpp"
#include "doublemeas/ledger.hpp"
#include "doublemeas/mcmc.hpp"
#include "doublemeas/pauli.hpp"
#include "doublemeas/posterior.hpp"
#include "doublemeas/quadrature.hpp"
#include "doublemeas/rng.hpp"
#include "doublemeas/state.hpp"
