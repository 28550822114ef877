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

#include "dictcsc/knowledge_base.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <limits>
#include <stdexcept>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {
namespace {

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

char32_t SingleChar(std::string_view field, std::size_t line_no) {
  Text t;
  try {
    t = DecodeUtf8(field);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no);
  }
  if (t.size() != 1) throw ParseError("expected a single character", line_no);
  return t[0];
}

TextView Truncate(TextView text, int max_length) {
  return text.substr(0, static_cast<std::size_t>(max_length));
}

const std::set<Syllable> kNoReadings;
const std::set<char32_t> kNoSimilar;

}  // namespace

Syllable Syllable::Parse(std::string_view text) {
  if (text.size() < 2 || text.back() < '0' || text.back() > '4') {
    throw std::invalid_argument("syllable '" + std::string(text) +
                                "' must end in a tone digit 0-4");
  }
  Syllable s;
  s.tone = text.back() - '0';
  for (char ch : text.substr(0, text.size() - 1)) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isdigit(u) || std::isspace(u) || ch == ',') {
      throw std::invalid_argument("malformed syllable '" + std::string(text) + "'");
    }
    s.toneless.push_back(static_cast<char>(std::tolower(u)));
  }
  return s;
}

void PinyinTable::Add(char32_t c, Syllable syllable) {
  if (syllable.toneless.empty() || syllable.tone < 0 || syllable.tone > 4) {
    throw ValidationError("invalid syllable for " + EncodeUtf8(c));
  }
  readings_[c].insert(std::move(syllable));
}

const std::set<Syllable>& PinyinTable::Readings(char32_t c) const {
  auto it = readings_.find(c);
  return it == readings_.end() ? kNoReadings : it->second;
}

std::set<std::string> PinyinTable::TonelessReadings(char32_t c) const {
  std::set<std::string> out;
  for (const auto& s : Readings(c)) out.insert(s.toneless);
  return out;
}

PinyinTable ParsePinyinTable(std::istream& in) {
  PinyinTable table;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    const auto fields = SplitFields(line, '\t');
    if (fields.size() != 2) throw ParseError("expected char<TAB>syllables", line_no);
    const char32_t c = SingleChar(fields[0], line_no);
    const auto syllables = SplitFields(fields[1], ',');
    for (auto text : syllables) {
      try {
        table.Add(c, Syllable::Parse(text));
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line_no);
      }
    }
  }
  return table;
}

PinyinTable LoadPinyinTable(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  return ParsePinyinTable(in);
}

std::set<Syllable> PinyinOf(char32_t c, const PinyinTable& table) {
  return table.Readings(c);
}

bool PhoneticallySimilar(char32_t a, char32_t b, const PinyinTable& table) {
  if (a == b) return false;
  const auto& ra = table.Readings(a);
  const auto& rb = table.Readings(b);
  for (const auto& x : ra) {
    for (const auto& y : rb) {
      if (x.toneless == y.toneless) return true;
    }
  }
  return false;
}

bool PhoneticallyDistinct(char32_t a, char32_t b, const PinyinTable& table) {
  if (a == b || !table.Contains(a) || !table.Contains(b)) return false;
  const auto ta = table.TonelessReadings(a);
  const auto tb = table.TonelessReadings(b);
  return std::none_of(ta.begin(), ta.end(),
                      [&tb](const std::string& s) { return tb.contains(s); });
}

void VisualConfusionSet::Add(char32_t c, char32_t similar) {
  if (c == similar) return;
  similar_[c].insert(similar);
}

const std::set<char32_t>& VisualConfusionSet::SimilarTo(char32_t c) const {
  auto it = similar_.find(c);
  return it == similar_.end() ? kNoSimilar : it->second;
}

VisualConfusionSet ParseVisualConfusionSet(std::istream& in) {
  VisualConfusionSet cs;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    const auto fields = SplitFields(line, '\t');
    if (fields.size() != 2) throw ParseError("expected char<TAB>characters", line_no);
    const char32_t c = SingleChar(fields[0], line_no);
    Text similar;
    try {
      similar = DecodeUtf8(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    for (char32_t s : similar) cs.Add(c, s);
  }
  return cs;
}

VisualConfusionSet LoadVisualConfusionSet(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  return ParseVisualConfusionSet(in);
}

bool VisuallySimilar(char32_t a, char32_t b, const VisualConfusionSet& cs) {
  return a != b && cs.SimilarTo(a).contains(b);
}

void Dictionary::Add(Text word, std::vector<Text> definitions) {
  const std::string label = EncodeUtf8(word);
  if (word.empty()) throw ValidationError("empty dictionary word");
  if (definitions.empty()) throw ValidationError("word " + label + " has no definitions");
  for (const auto& d : definitions) {
    if (d.empty()) throw ValidationError("word " + label + " has an empty definition");
  }
  if (entries_.contains(word)) throw ValidationError("duplicate dictionary word " + label);
  max_word_length_ = std::max(max_word_length_, word.size());
  words_.insert(std::upper_bound(words_.begin(), words_.end(), word), word);
  entries_.emplace(std::move(word), std::move(definitions));
}

const std::vector<Text>* Dictionary::Find(TextView word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

Dictionary ParseDictionary(std::istream& in) {
  Dictionary dict;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      if (!record.is_object() || !record.contains("word") ||
          !record["word"].is_string() || !record.contains("definitions") ||
          !record["definitions"].is_array()) {
        throw ParseError("expected {\"word\": ..., \"definitions\": [...]}", line_no);
      }
      std::vector<Text> defs;
      for (const auto& d : record["definitions"]) {
        if (!d.is_string()) throw ParseError("definitions must be strings", line_no);
        defs.push_back(DecodeUtf8(d.get<std::string>()));
      }
      dict.Add(DecodeUtf8(record["word"].get<std::string>()), std::move(defs));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return dict;
}

Dictionary LoadDictionary(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  return ParseDictionary(in);
}

std::vector<WordSpan> MaxMatchTokenizer::Tokenize(TextView sentence) const {
  std::vector<WordSpan> spans;
  std::size_t pos = 0;
  while (pos < sentence.size()) {
    std::size_t len = std::min(dict_->max_word_length(), sentence.size() - pos);
    for (; len > 1; --len) {
      if (dict_->Contains(sentence.substr(pos, len))) break;
    }
    len = std::max<std::size_t>(len, 1);
    spans.push_back(WordSpan{pos, len - 1, Text(sentence.substr(pos, len))});
    pos += len;
  }
  return spans;
}

std::vector<WordSpan> Tokenize(TextView sentence, const Dictionary& dict) {
  return MaxMatchTokenizer(dict).Tokenize(sentence);
}

const WordSpan& SpanContaining(std::span<const WordSpan> spans, std::size_t pos) {
  auto it = std::find_if(spans.begin(), spans.end(),
                         [pos](const WordSpan& s) { return s.Covers(pos); });
  if (it == spans.end()) {
    throw IndexError("position " + std::to_string(pos) +
                     " is not covered by any span");
  }
  return *it;
}

DefinitionStrategy ParseDefinitionStrategy(std::string_view name) {
  if (name == "random") return DefinitionStrategy::kRandom;
  if (name == "first") return DefinitionStrategy::kFirst;
  if (name == "similar") return DefinitionStrategy::kSimilar;
  throw ConfigError("unknown definition strategy '" + std::string(name) +
                    "' (expected random, first or similar)");
}

std::string_view ToString(DefinitionStrategy strategy) {
  switch (strategy) {
    case DefinitionStrategy::kRandom:
      return "random";
    case DefinitionStrategy::kFirst:
      return "first";
    case DefinitionStrategy::kSimilar:
      return "similar";
  }
  return "unknown";
}

const Text& SelectDefinition(TextView word, TextView context,
                             const Dictionary& dict, DefinitionStrategy strategy,
                             const Encoder<float>* sim_encoder, Rng& rng) {
  const auto* defs = dict.Find(word);
  if (defs == nullptr) {
    throw LookupError("word " + EncodeUtf8(word) + " is not in the dictionary");
  }
  switch (strategy) {
    case DefinitionStrategy::kFirst:
      return defs->front();
    case DefinitionStrategy::kRandom:
      return (*defs)[UniformIndex(rng, defs->size())];
    case DefinitionStrategy::kSimilar:
      break;
  }
  if (sim_encoder == nullptr) {
    throw std::invalid_argument("the similar strategy requires an encoder");
  }
  if (defs->size() == 1) return defs->front();
  const int limit = sim_encoder->max_length();
  const VectorX<float> ctx = MeanPool(sim_encoder->Encode(Truncate(context, limit)));
  const float ctx_norm = ctx.norm();
  std::size_t best = 0;
  float best_score = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < defs->size(); ++i) {
    const VectorX<float> d = MeanPool(sim_encoder->Encode(Truncate((*defs)[i], limit)));
    const float denom = ctx_norm * d.norm();
    const float score = denom > 0.0f ? ctx.dot(d) / denom
                                     : -std::numeric_limits<float>::infinity();
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return (*defs)[best];
}

std::vector<WordSpan> KnowledgeBase::Segment(TextView sentence) const {
  if (tokenizer) return tokenizer->Tokenize(sentence);
  return Tokenize(sentence, dictionary);
}

KnowledgeBase LoadKnowledgeBase(const std::filesystem::path& dir) {
  KnowledgeBase kb;
  kb.pinyin = LoadPinyinTable(dir / "pinyin.tsv");
  kb.visual = LoadVisualConfusionSet(dir / "confusion.tsv");
  kb.dictionary = LoadDictionary(dir / "dictionary.jsonl");
  return kb;
}

}  // namespace dictcsc
