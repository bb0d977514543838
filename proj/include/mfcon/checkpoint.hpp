// Copyright (c) 2026 The MFCon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>

#include "mfcon/model.hpp"

namespace mfcon {

/// Binary checkpoint: the model configuration as JSON plus every named
/// parameter array (running batch-norm statistics included).
///
///   "MFCONCKPT1\n"
///   u64 config length, config JSON
///   u64 array count, then per array (in name order):
///     u32 name length, name, u8 trainable, u64 rows, u64 cols,
///     rows*cols little-endian f64 values in row-major order
///
/// Files are written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mfcon
