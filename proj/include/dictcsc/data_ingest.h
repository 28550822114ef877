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

#ifndef DICTCSC_DATA_INGEST_H_
#define DICTCSC_DATA_INGEST_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dictcsc/utf8.h"

namespace dictcsc {

// One spell-checking example. Substitution only: source and target always
// have the same length and `error_positions` is exactly their diff.
struct CscSample {
  std::string id;
  Text source;
  Text target;
  std::vector<std::size_t> error_positions;

  // Validates equal lengths (ValidationError naming `id`) and fills
  // error_positions.
  static CscSample Make(std::string id, Text source, Text target);

  bool has_errors() const { return !error_positions.empty(); }
  friend bool operator==(const CscSample&, const CscSample&) = default;
};

// Sorted indices i with a[i] != b[i]. Requires equal lengths.
std::vector<std::size_t> DiffPositions(TextView a, TextView b);

enum class CorpusFormat { kTsv, kJsonl };

// Accepts "tsv" or "jsonl"; throws ConfigError otherwise.
CorpusFormat ParseCorpusFormat(std::string_view name);

std::vector<CscSample> ParseCorpus(std::istream& in, CorpusFormat format);
std::vector<CscSample> LoadCorpus(const std::filesystem::path& path,
                                  CorpusFormat format);

// Canonical interchange form: `id<TAB>source<TAB>target`, one per line.
void WriteCorpusTsv(std::ostream& out, std::span<const CscSample> samples);
void WriteCorpusJsonl(std::ostream& out, std::span<const CscSample> samples);

// Per-character traditional -> simplified table.
struct CharMap {
  std::unordered_map<char32_t, char32_t> mapping;
};

CharMap ParseCharMap(std::istream& in);
CharMap LoadCharMap(const std::filesystem::path& path);

Text ConvertText(TextView text, const CharMap& map);
CscSample ConvertCharset(const CscSample& sample, const CharMap& map);

struct CorpusStats {
  std::size_t sentence_count = 0;
  double avg_length = 0.0;
  std::size_t error_count = 0;
};

CorpusStats ComputeCorpusStats(std::span<const CscSample> samples);

}  // namespace dictcsc

#endif  // DICTCSC_DATA_INGEST_H_
