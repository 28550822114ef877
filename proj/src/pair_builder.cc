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

#include "dictcsc/pair_builder.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {
namespace {

void CheckPreconditions(const CscSample& sample, std::size_t s, std::size_t n) {
  if (n == 0) throw std::invalid_argument("at least one negative is required");
  if (!std::binary_search(sample.error_positions.begin(),
                          sample.error_positions.end(), s)) {
    throw std::invalid_argument("position " + std::to_string(s) +
                                " is not an error position of sample " + sample.id);
  }
}

Text Substitute(TextView sentence, std::size_t s, char32_t c) {
  Text out(sentence);
  out[s] = c;
  return out;
}

// Shared shape of the phonetic and visual builders: one positive from
// `positives`, n distinct negatives from `negatives`.
std::optional<ContrastiveBatch> BuildSubstitutionBatch(
    KnowledgeKind kind, const CscSample& sample, std::size_t s, std::size_t n,
    const std::vector<char32_t>& positives, std::vector<char32_t> negatives,
    Rng& rng) {
  if (positives.empty()) return std::nullopt;
  if (negatives.size() < n) {
    throw ResourceError("only " + std::to_string(negatives.size()) +
                        " negative characters available for " +
                        EncodeUtf8(sample.source[s]) + ", " + std::to_string(n) +
                        " requested");
  }
  ContrastiveBatch batch;
  batch.kind = kind;
  batch.original = sample.source;
  batch.error_index = s;
  batch.sample_id = sample.id;
  batch.positive = Substitute(sample.source, s, positives[UniformIndex(rng, positives.size())]);
  for (char32_t c : SampleWithoutReplacement(std::move(negatives), n, rng)) {
    batch.negatives.push_back(Substitute(sample.source, s, c));
  }
  return batch;
}

}  // namespace

std::string_view ToString(KnowledgeKind kind) {
  switch (kind) {
    case KnowledgeKind::kPhonetic:
      return "P";
    case KnowledgeKind::kVisual:
      return "V";
    case KnowledgeKind::kDefinition:
      return "D";
  }
  return "?";
}

KnowledgeKind ParseKnowledgeKind(std::string_view name) {
  if (name == "P") return KnowledgeKind::kPhonetic;
  if (name == "V") return KnowledgeKind::kVisual;
  if (name == "D") return KnowledgeKind::kDefinition;
  throw ConfigError("unknown knowledge kind '" + std::string(name) +
                    "' (expected P, V or D)");
}

std::optional<ContrastiveBatch> BuildPhoneticBatch(const CscSample& sample,
                                                   std::size_t s, std::size_t n,
                                                   const KnowledgeBase& kb,
                                                   std::span<const char32_t> vocab,
                                                   Rng& rng) {
  CheckPreconditions(sample, s, n);
  const char32_t original = sample.source[s];
  std::vector<char32_t> positives;
  std::vector<char32_t> negatives;
  for (char32_t c : vocab) {
    if (PhoneticallySimilar(original, c, kb.pinyin)) {
      positives.push_back(c);
    } else if (PhoneticallyDistinct(original, c, kb.pinyin)) {
      negatives.push_back(c);
    }
  }
  return BuildSubstitutionBatch(KnowledgeKind::kPhonetic, sample, s, n, positives,
                                std::move(negatives), rng);
}

std::optional<ContrastiveBatch> BuildVisualBatch(const CscSample& sample,
                                                 std::size_t s, std::size_t n,
                                                 const KnowledgeBase& kb,
                                                 std::span<const char32_t> vocab,
                                                 Rng& rng) {
  CheckPreconditions(sample, s, n);
  const char32_t original = sample.source[s];
  const auto& similar = kb.visual.SimilarTo(original);
  std::vector<char32_t> positives;
  std::vector<char32_t> negatives;
  for (char32_t c : vocab) {
    if (c == original) continue;
    if (similar.contains(c)) {
      positives.push_back(c);
    } else {
      negatives.push_back(c);
    }
  }
  return BuildSubstitutionBatch(KnowledgeKind::kVisual, sample, s, n, positives,
                                std::move(negatives), rng);
}

std::optional<ContrastiveBatch> BuildDefinitionBatch(
    const CscSample& sample, std::size_t s, std::size_t n, const KnowledgeBase& kb,
    DefinitionStrategy strategy, const Encoder<float>* sim_encoder, Rng& rng) {
  CheckPreconditions(sample, s, n);
  const Dictionary& dict = kb.dictionary;
  if (dict.size() < n + 1) {
    throw ResourceError("dictionary has " + std::to_string(dict.size()) +
                        " words; " + std::to_string(n + 1) + " required");
  }
  const auto spans = kb.Segment(sample.target);
  WordSpan span = SpanContaining(spans, s);
  if (!dict.Contains(span.word)) {
    span = WordSpan{s, 0, Text(1, sample.target[s])};
    if (!dict.Contains(span.word)) return std::nullopt;
  }

  ContrastiveBatch batch;
  batch.kind = KnowledgeKind::kDefinition;
  batch.original = sample.source;
  batch.error_index = span.start;
  batch.span_width = span.width;
  batch.sample_id = sample.id;
  batch.positive =
      SelectDefinition(span.word, sample.target, dict, strategy, sim_encoder, rng);

  // Rejection-sample other words until n distinct definitions are collected.
  const auto& words = dict.words();
  std::set<std::size_t> tried;
  std::set<Text> used{batch.positive};
  while (batch.negatives.size() < n) {
    if (tried.size() + 1 >= words.size()) {
      throw ResourceError("dictionary cannot supply " + std::to_string(n) +
                          " distinct negative definitions");
    }
    const std::size_t k = UniformIndex(rng, words.size());
    if (words[k] == span.word || !tried.insert(k).second) continue;
    const Text& def =
        SelectDefinition(words[k], sample.target, dict, strategy, sim_encoder, rng);
    if (used.insert(def).second) batch.negatives.push_back(def);
  }
  return batch;
}

std::vector<std::string> ValidateBatch(const ContrastiveBatch& batch,
                                       const KnowledgeBase& kb, const Text* target) {
  std::vector<std::string> problems;
  const std::size_t s = batch.error_index;
  if (batch.negatives.empty()) problems.push_back("no negatives");
  if (std::set<Text>(batch.negatives.begin(), batch.negatives.end()).size() !=
      batch.negatives.size()) {
    problems.push_back("negatives are not pairwise distinct");
  }
  if (s + batch.span_width >= batch.original.size()) {
    problems.push_back("error span lies outside the original sentence");
    return problems;
  }
  if (batch.kind == KnowledgeKind::kDefinition) {
    const auto& dict = kb.dictionary;
    auto is_definition = [&dict](const Text& text) {
      for (const auto& word : dict.words()) {
        const auto& defs = *dict.Find(word);
        if (std::find(defs.begin(), defs.end(), text) != defs.end()) return true;
      }
      return false;
    };
    if (!is_definition(batch.positive)) {
      problems.push_back("positive is not a dictionary definition");
    }
    for (const auto& neg : batch.negatives) {
      if (neg == batch.positive) problems.push_back("a negative equals the positive");
      if (!is_definition(neg)) problems.push_back("negative is not a dictionary definition");
    }
    if (target != nullptr) {
      if (target->size() != batch.original.size()) {
        problems.push_back("gold sentence length differs from the original");
        return problems;
      }
      const Text word = target->substr(s, batch.span_width + 1);
      const auto* defs = dict.Find(word);
      if (defs == nullptr) {
        problems.push_back("gold word is not a dictionary entry");
      } else if (std::find(defs->begin(), defs->end(), batch.positive) == defs->end()) {
        problems.push_back("positive is not a definition of the gold word");
      }
    }
    return problems;
  }
  if (batch.span_width != 0) problems.push_back("substitution batch with span width");
  const auto single_substitution = [&](const Text& other) {
    return other.size() == batch.original.size() &&
           DiffPositions(batch.original, other) == std::vector<std::size_t>{s};
  };
  const char32_t original = batch.original[s];
  if (!single_substitution(batch.positive)) {
    problems.push_back("positive is not a single substitution at the error index");
  } else if (batch.kind == KnowledgeKind::kPhonetic
                 ? !PhoneticallySimilar(original, batch.positive[s], kb.pinyin)
                 : !VisuallySimilar(original, batch.positive[s], kb.visual)) {
    problems.push_back("positive character is not similar to the original");
  }
  for (const auto& neg : batch.negatives) {
    if (!single_substitution(neg)) {
      problems.push_back("negative is not a single substitution at the error index");
    } else if (batch.kind == KnowledgeKind::kPhonetic
                   ? !PhoneticallyDistinct(original, neg[s], kb.pinyin)
                   : (neg[s] == original ||
                      VisuallySimilar(original, neg[s], kb.visual))) {
      problems.push_back("negative character is similar to the original");
    }
  }
  return problems;
}

std::string BatchToJson(const ContrastiveBatch& batch) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(ToString(batch.kind));
  if (!batch.sample_id.empty()) j["id"] = batch.sample_id;
  j["original"] = EncodeUtf8(batch.original);
  j["positive"] = EncodeUtf8(batch.positive);
  auto negs = nlohmann::ordered_json::array();
  for (const auto& n : batch.negatives) negs.push_back(EncodeUtf8(n));
  j["negatives"] = std::move(negs);
  j["error_index"] = batch.error_index;
  j["span_width"] = batch.span_width;
  return j.dump();
}

ContrastiveBatch BatchFromJson(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  ContrastiveBatch batch;
  batch.kind = ParseKnowledgeKind(j.at("kind").get<std::string>());
  if (j.contains("id")) batch.sample_id = j["id"].get<std::string>();
  batch.original = DecodeUtf8(j.at("original").get<std::string>());
  batch.positive = DecodeUtf8(j.at("positive").get<std::string>());
  for (const auto& n : j.at("negatives")) {
    batch.negatives.push_back(DecodeUtf8(n.get<std::string>()));
  }
  batch.error_index = j.at("error_index").get<std::size_t>();
  batch.span_width = j.at("span_width").get<std::size_t>();
  return batch;
}

void WriteBatches(std::ostream& out, std::span<const ContrastiveBatch> batches) {
  for (const auto& b : batches) out << BatchToJson(b) << '\n';
}

std::vector<ContrastiveBatch> ParseBatches(std::istream& in) {
  std::vector<ContrastiveBatch> batches;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    try {
      batches.push_back(BatchFromJson(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return batches;
}

std::vector<ContrastiveBatch> LoadBatches(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ParseBatches(in);
}

}  // namespace dictcsc
