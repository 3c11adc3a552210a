// Copyright 2026 The synqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "synqp/dp_noise.hpp"
#include "synqp/error.hpp"
#include "synqp/generators.hpp"
#include "synqp/io.hpp"
#include "synqp/parallel.hpp"
#include "synqp/pipeline.hpp"
#include "synqp/privacy.hpp"
#include "synqp/quality.hpp"
#include "synqp/rng.hpp"
#include "synqp/simulate.hpp"
#include "synqp/table.hpp"
#include "synqp/version.hpp"
