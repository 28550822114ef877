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

#include "dictcsc/data_ingest.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {
namespace {

Text DecodeField(std::string_view field, std::size_t line_no) {
  try {
    return DecodeUtf8(field);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no);
  }
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<std::size_t> DiffPositions(TextView a, TextView b) {
  std::vector<std::size_t> diff;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] != b[i]) diff.push_back(i);
  }
  return diff;
}

CscSample CscSample::Make(std::string id, Text source, Text target) {
  if (source.size() != target.size()) {
    throw ValidationError("record " + id + ": source has " +
                          std::to_string(source.size()) +
                          " characters but target has " +
                          std::to_string(target.size()));
  }
  CscSample sample{std::move(id), std::move(source), std::move(target), {}};
  sample.error_positions = DiffPositions(sample.source, sample.target);
  return sample;
}

CorpusFormat ParseCorpusFormat(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw ConfigError("unknown corpus format '" + std::string(name) +
                    "' (expected tsv or jsonl)");
}

std::vector<CscSample> ParseCorpus(std::istream& in, CorpusFormat format) {
  std::vector<CscSample> samples;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    std::string id;
    Text source;
    Text target;
    if (format == CorpusFormat::kTsv) {
      const auto fields = SplitFields(line, '\t');
      if (fields.size() != 3) {
        throw ParseError("expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()),
                         line_no);
      }
      if (fields[0].empty()) throw ParseError("empty id", line_no);
      id = std::string(fields[0]);
      source = DecodeField(fields[1], line_no);
      target = DecodeField(fields[2], line_no);
    } else {
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what(), line_no);
      }
      for (const char* key : {"id", "source", "target"}) {
        if (!record.is_object() || !record.contains(key) ||
            !record[key].is_string()) {
          throw ParseError(std::string("missing string field '") + key + "'",
                           line_no);
        }
      }
      id = record["id"].get<std::string>();
      source = DecodeField(record["source"].get<std::string>(), line_no);
      target = DecodeField(record["target"].get<std::string>(), line_no);
    }
    samples.push_back(
        CscSample::Make(std::move(id), std::move(source), std::move(target)));
  }
  return samples;
}

std::vector<CscSample> LoadCorpus(const std::filesystem::path& path,
                                  CorpusFormat format) {
  auto in = OpenForRead(path);
  return ParseCorpus(in, format);
}

void WriteCorpusTsv(std::ostream& out, std::span<const CscSample> samples) {
  for (const auto& s : samples) {
    out << s.id << '\t' << EncodeUtf8(s.source) << '\t' << EncodeUtf8(s.target)
        << '\n';
  }
}

void WriteCorpusJsonl(std::ostream& out, std::span<const CscSample> samples) {
  for (const auto& s : samples) {
    nlohmann::json record = {{"id", s.id},
                             {"source", EncodeUtf8(s.source)},
                             {"target", EncodeUtf8(s.target)}};
    out << record.dump() << '\n';
  }
}

CharMap ParseCharMap(std::istream& in) {
  CharMap map;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripLineEnding(raw);
    if (line.empty()) continue;
    const auto fields = SplitFields(line, '\t');
    if (fields.size() != 2) {
      throw ParseError("expected traditional<TAB>simplified", line_no);
    }
    const Text from = DecodeField(fields[0], line_no);
    const Text to = DecodeField(fields[1], line_no);
    if (from.size() != 1 || to.size() != 1) {
      throw ParseError("only single-character mappings are supported", line_no);
    }
    auto [it, inserted] = map.mapping.emplace(from[0], to[0]);
    if (!inserted && it->second != to[0]) {
      throw ParseError("conflicting mapping for " + EncodeUtf8(from), line_no);
    }
  }
  return map;
}

CharMap LoadCharMap(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  return ParseCharMap(in);
}

Text ConvertText(TextView text, const CharMap& map) {
  Text out(text);
  for (char32_t& c : out) {
    if (auto it = map.mapping.find(c); it != map.mapping.end()) c = it->second;
  }
  return out;
}

CscSample ConvertCharset(const CscSample& sample, const CharMap& map) {
  return CscSample::Make(sample.id, ConvertText(sample.source, map),
                         ConvertText(sample.target, map));
}

CorpusStats ComputeCorpusStats(std::span<const CscSample> samples) {
  CorpusStats stats;
  std::size_t total_chars = 0;
  for (const auto& s : samples) {
    ++stats.sentence_count;
    total_chars += s.source.size();
    stats.error_count += s.error_positions.size();
  }
  if (stats.sentence_count > 0) {
    stats.avg_length = static_cast<double>(total_chars) /
                       static_cast<double>(stats.sentence_count);
  }
  return stats;
}

}  // namespace dictcsc
