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

#ifndef DICTCSC_KNOWLEDGE_BASE_H_
#define DICTCSC_KNOWLEDGE_BASE_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dictcsc/encoders.h"
#include "dictcsc/random.h"
#include "dictcsc/utf8.h"

namespace dictcsc {

// A pinyin reading such as qi3: toneless letters plus a tone digit 0-4
// (0 = neutral tone).
struct Syllable {
  std::string toneless;
  int tone = 0;

  // Parses "qi3"; throws std::invalid_argument on anything else.
  static Syllable Parse(std::string_view text);
  std::string ToString() const { return toneless + std::to_string(tone); }
  auto operator<=>(const Syllable&) const = default;
};

class PinyinTable {
 public:
  void Add(char32_t c, Syllable syllable);
  // Empty when the character is absent.
  const std::set<Syllable>& Readings(char32_t c) const;
  std::set<std::string> TonelessReadings(char32_t c) const;
  bool Contains(char32_t c) const { return readings_.contains(c); }
  std::size_t size() const { return readings_.size(); }
  const std::map<char32_t, std::set<Syllable>>& entries() const { return readings_; }

 private:
  std::map<char32_t, std::set<Syllable>> readings_;
};

// `char<TAB>qi3,qi2` per line.
PinyinTable ParsePinyinTable(std::istream& in);
PinyinTable LoadPinyinTable(const std::filesystem::path& path);

std::set<Syllable> PinyinOf(char32_t c, const PinyinTable& table);

// a != b and the toneless reading sets intersect.
bool PhoneticallySimilar(char32_t a, char32_t b, const PinyinTable& table);
// Both characters have readings and their toneless reading sets are disjoint.
bool PhoneticallyDistinct(char32_t a, char32_t b, const PinyinTable& table);

// Stroke-similarity confusion set. A character is never in its own set.
class VisualConfusionSet {
 public:
  void Add(char32_t c, char32_t similar);
  const std::set<char32_t>& SimilarTo(char32_t c) const;
  bool Contains(char32_t c) const { return similar_.contains(c); }
  std::size_t size() const { return similar_.size(); }
  const std::map<char32_t, std::set<char32_t>>& entries() const { return similar_; }

 private:
  std::map<char32_t, std::set<char32_t>> similar_;
};

// `char<TAB>similar-characters` per line.
VisualConfusionSet ParseVisualConfusionSet(std::istream& in);
VisualConfusionSet LoadVisualConfusionSet(const std::filesystem::path& path);

bool VisuallySimilar(char32_t a, char32_t b, const VisualConfusionSet& cs);

// Word -> ordered definitions. Order is preserved from the source.
class Dictionary {
 public:
  // Throws ValidationError on an empty list, an empty definition, or a
  // duplicate word.
  void Add(Text word, std::vector<Text> definitions);
  const std::vector<Text>* Find(TextView word) const;
  bool Contains(TextView word) const { return Find(word) != nullptr; }
  std::size_t size() const { return entries_.size(); }
  std::size_t max_word_length() const { return max_word_length_; }
  // Words in code-point order; the sampling order for negatives.
  const std::vector<Text>& words() const { return words_; }

 private:
  std::map<Text, std::vector<Text>, std::less<>> entries_;
  std::vector<Text> words_;
  std::size_t max_word_length_ = 0;
};

// JSON lines: {"word": ..., "definitions": [...]}.
Dictionary ParseDictionary(std::istream& in);
Dictionary LoadDictionary(const std::filesystem::path& path);

// Positions start..start+width (inclusive) of a sentence.
struct WordSpan {
  std::size_t start = 0;
  std::size_t width = 0;
  Text word;

  std::size_t last() const { return start + width; }
  bool Covers(std::size_t pos) const { return pos >= start && pos <= last(); }
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Spans partition the sentence in order.
  virtual std::vector<WordSpan> Tokenize(TextView sentence) const = 0;
};

// Forward maximum matching: at each position take the longest dictionary
// word starting there, falling back to a single character.
class MaxMatchTokenizer final : public Tokenizer {
 public:
  explicit MaxMatchTokenizer(const Dictionary& dict) : dict_(&dict) {}
  std::vector<WordSpan> Tokenize(TextView sentence) const override;

 private:
  const Dictionary* dict_;
};

std::vector<WordSpan> Tokenize(TextView sentence, const Dictionary& dict);

// Throws IndexError when no span covers `pos`.
const WordSpan& SpanContaining(std::span<const WordSpan> spans, std::size_t pos);

enum class DefinitionStrategy { kRandom, kFirst, kSimilar };

DefinitionStrategy ParseDefinitionStrategy(std::string_view name);
std::string_view ToString(DefinitionStrategy strategy);

// Picks one definition of `word`:
//   kRandom  uniform over the list, drawn from `rng`;
//   kFirst   the first listed definition;
//   kSimilar the definition whose mean-pooled `sim_encoder` representation is
//            closest in cosine to that of `context` (lowest index on ties).
// Throws LookupError when `word` is not an entry, and std::invalid_argument
// when kSimilar is requested without an encoder.
const Text& SelectDefinition(TextView word, TextView context,
                             const Dictionary& dict, DefinitionStrategy strategy,
                             const Encoder<float>* sim_encoder, Rng& rng);

// The three knowledge sources plus the segmenter used for definitions.
struct KnowledgeBase {
  PinyinTable pinyin;
  VisualConfusionSet visual;
  Dictionary dictionary;
  // Optional; forward maximum matching over `dictionary` when unset.
  std::shared_ptr<const Tokenizer> tokenizer;

  std::vector<WordSpan> Segment(TextView sentence) const;
};

// Reads pinyin.tsv, confusion.tsv and dictionary.jsonl from `dir`.
KnowledgeBase LoadKnowledgeBase(const std::filesystem::path& dir);

}  // namespace dictcsc

#endif  // DICTCSC_KNOWLEDGE_BASE_H_
