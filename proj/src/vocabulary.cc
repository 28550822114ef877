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

#include "dictcsc/vocabulary.h"

#include <set>

namespace dictcsc {

Vocabulary::Vocabulary(std::span<const char32_t> chars) {
  for (char32_t c : chars) {
    if (index_.contains(c)) continue;
    chars_.push_back(c);
    index_.emplace(c, static_cast<int>(chars_.size()));
  }
}

Vocabulary Vocabulary::FromTexts(std::span<const Text> texts) {
  std::set<char32_t> seen;
  for (const auto& t : texts) seen.insert(t.begin(), t.end());
  const std::vector<char32_t> ordered(seen.begin(), seen.end());
  return Vocabulary(ordered);
}

int Vocabulary::IdOf(char32_t c) const {
  auto it = index_.find(c);
  return it == index_.end() ? kUnknownId : it->second;
}

char32_t Vocabulary::CharAt(int id) const {
  if (id <= 0 || id > static_cast<int>(chars_.size())) return kUnknownChar;
  return chars_[id - 1];
}

std::vector<int> Vocabulary::Ids(TextView text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char32_t c : text) ids.push_back(IdOf(c));
  return ids;
}

}  // namespace dictcsc
