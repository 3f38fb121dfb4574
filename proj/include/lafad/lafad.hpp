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

#include "lafad/boosted_embedding.hpp"
#include "lafad/bootstrap.hpp"
#include "lafad/config.hpp"
#include "lafad/error.hpp"
#include "lafad/eval.hpp"
#include "lafad/gmm.hpp"
#include "lafad/model_io.hpp"
#include "lafad/parallel.hpp"
#include "lafad/random.hpp"
#include "lafad/synth.hpp"
#include "lafad/timeseries.hpp"
#include "lafad/variance_ensemble.hpp"
