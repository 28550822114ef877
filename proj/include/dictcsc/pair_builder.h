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

#ifndef DICTCSC_PAIR_BUILDER_H_
#define DICTCSC_PAIR_BUILDER_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dictcsc/data_ingest.h"
#include "dictcsc/encoders.h"
#include "dictcsc/knowledge_base.h"
#include "dictcsc/random.h"

namespace dictcsc {

enum class KnowledgeKind { kPhonetic, kVisual, kDefinition };

// "P", "V" or "D".
std::string_view ToString(KnowledgeKind kind);
KnowledgeKind ParseKnowledgeKind(std::string_view name);

// One contrastive mini-batch: the original sentence, one positive and N
// negatives, all keyed on the error position `error_index`. For definition
// batches the original-side word spans error_index..error_index+span_width
// and positive/negatives are definition sentences.
struct ContrastiveBatch {
  KnowledgeKind kind = KnowledgeKind::kPhonetic;
  Text original;
  Text positive;
  std::vector<Text> negatives;
  std::size_t error_index = 0;
  std::size_t span_width = 0;
  // Id of the sample the batch was built from; empty when unknown.
  std::string sample_id;

  friend bool operator==(const ContrastiveBatch&, const ContrastiveBatch&) = default;
};

// Returns std::nullopt (the skip signal) when the error character has no
// phonetically similar character in `vocab`. Throws ResourceError when fewer
// than n phonetically distinct characters are available, and
// std::invalid_argument when s is not an error position or n == 0.
std::optional<ContrastiveBatch> BuildPhoneticBatch(const CscSample& sample,
                                                   std::size_t s, std::size_t n,
                                                   const KnowledgeBase& kb,
                                                   std::span<const char32_t> vocab,
                                                   Rng& rng);

// Same contract, with the confusion set of the error character as the
// positive pool and the rest of `vocab` as the negative pool.
std::optional<ContrastiveBatch> BuildVisualBatch(const CscSample& sample,
                                                 std::size_t s, std::size_t n,
                                                 const KnowledgeBase& kb,
                                                 std::span<const char32_t> vocab,
                                                 Rng& rng);

// Segments the target sentence, takes the word covering s (falling back to
// the single gold character when the word has no entry) and uses one of its
// definitions as the positive; negatives are definitions of n other
// randomly drawn words. `sim_encoder` is required for kSimilar.
// Skip signal when neither the word nor the character is an entry;
// ResourceError when the dictionary cannot supply n distinct negatives.
std::optional<ContrastiveBatch> BuildDefinitionBatch(
    const CscSample& sample, std::size_t s, std::size_t n, const KnowledgeBase& kb,
    DefinitionStrategy strategy, const Encoder<float>* sim_encoder, Rng& rng);

// Invariant violations of `batch` against the knowledge base; empty when the
// batch is valid. Definition batches are checked for dictionary provenance:
// every text must be a definition of some entry, and with the gold sentence
// `target` the positive must define the word spanning the error.
std::vector<std::string> ValidateBatch(const ContrastiveBatch& batch,
                                       const KnowledgeBase& kb,
                                       const Text* target = nullptr);

// Offline batch file: one JSON object per line with kind, original,
// positive, negatives, error_index, span_width (and id when known).
std::string BatchToJson(const ContrastiveBatch& batch);
ContrastiveBatch BatchFromJson(std::string_view line);
void WriteBatches(std::ostream& out, std::span<const ContrastiveBatch> batches);
std::vector<ContrastiveBatch> ParseBatches(std::istream& in);
std::vector<ContrastiveBatch> LoadBatches(const std::filesystem::path& path);

}  // namespace dictcsc

#endif  // DICTCSC_PAIR_BUILDER_H_
