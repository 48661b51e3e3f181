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

// Binary parameter snapshot:
//   "CIMT" | version u32 | count u32 |
//   per parameter: name_len u32, name bytes, rank u32, dims u32 x rank,
//                  values f64 x prod(dims)
// Integers and reals are little-endian.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cimt/models.hpp"

namespace cimt::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const model::ParameterSet& params);
void save_checkpoint(const std::string& path, const model::ParameterSet& params);

// Parameter groups are recovered from the name prefix (enc., cls., txt.).
// Throws ValidationError on bad magic, unknown version or truncation.
model::ParameterSet load_checkpoint(std::istream& in);
model::ParameterSet load_checkpoint(const std::string& path);

}  // namespace cimt::harness
