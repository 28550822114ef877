//
// Copyright 2026 The dictcsc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DICTCSC_CHECKPOINT_H_
#define DICTCSC_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "dictcsc/encoders.h"

namespace dictcsc {

// A checkpoint is a directory holding `manifest.json` (format version,
// encoder config including the vocabulary, seed, step and the parameter
// list) plus one `<name>.bin` array per parameter: the bytes "DCSA", then
// little-endian uint32 rank (2), rows, cols, then rows*cols little-endian
// float32 values in row-major order.
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

// Writes into a sibling temporary directory and renames it into place.
void SaveCheckpoint(const CscModel<float>& model, const std::filesystem::path& dir,
                    const CheckpointInfo& info);
void SaveEncoderCheckpoint(const TransformerEncoder<float>& encoder,
                           const std::filesystem::path& dir,
                           const CheckpointInfo& info);

// Throws LoadError naming the offending parameter on a missing array, a
// shape that disagrees with the configuration, an unsupported version, or a
// corrupt file. When `expected` is given, its architecture fields must agree
// with the stored arrays.
CscModel<float> LoadCheckpoint(const std::filesystem::path& dir,
                               const EncoderConfig* expected = nullptr,
                               CheckpointInfo* info = nullptr);

// Loads only the encoder part; accepts both model and encoder checkpoints.
TransformerEncoder<float> LoadEncoderCheckpoint(const std::filesystem::path& dir,
                                                const EncoderConfig* expected = nullptr,
                                                CheckpointInfo* info = nullptr);

// Reads the configuration stored in a checkpoint manifest.
EncoderConfig ReadCheckpointConfig(const std::filesystem::path& dir);

// Single named-array I/O, exposed for tools and tests.
void WriteArray(const std::filesystem::path& path, const MatrixX<float>& m);
MatrixX<float> ReadArray(const std::filesystem::path& path);

}  // namespace dictcsc

#endif  // DICTCSC_CHECKPOINT_H_
