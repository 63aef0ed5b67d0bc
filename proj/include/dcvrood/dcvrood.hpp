// Copyright 2026 The dcv-rood Authors
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

#ifndef DCVROOD_DCVROOD_HPP_
#define DCVROOD_DCVROOD_HPP_

#include "dcvrood/detectors.hpp"
#include "dcvrood/error.hpp"
#include "dcvrood/harness.hpp"
#include "dcvrood/io.hpp"
#include "dcvrood/metrics.hpp"
#include "dcvrood/random.hpp"
#include "dcvrood/splitter.hpp"
#include "dcvrood/stats.hpp"
#include "dcvrood/synth.hpp"
#include "dcvrood/taxonomy.hpp"

#endif  // DCVROOD_DCVROOD_HPP_
