// Copyright 2026 The Causal-IMT Authors.
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

#include <cstdint>
#include <string>
#include <vector>

#include "cimt/gradcheck.hpp"

namespace cimt {

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
  std::string worst_case;
  double seconds = 0.0;
};

// Every differentiable op, every loss, and the full training step under all
// eight module toggle combinations.
GradCheckReport run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace cimt
