// Copyright 2026 The relnas Authors.
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

#ifndef RELNAS_CHECKPOINT_HPP_
#define RELNAS_CHECKPOINT_HPP_

#include <filesystem>

#include "relnas/network.hpp"

namespace relnas {

// Writes `<path>` (JSON manifest) and `<path>.bin` (little-endian float64
// blob). The manifest lists every tensor name, shape and offset in blob order,
// followed by the batch-norm running statistics.
void save_checkpoint(const std::filesystem::path& path, const Network& net);

// Loads into a network built from the same architecture and dataset widths;
// names and shapes must match.
void load_checkpoint(const std::filesystem::path& path, Network& net);

}  // namespace relnas

#endif  // RELNAS_CHECKPOINT_HPP_
