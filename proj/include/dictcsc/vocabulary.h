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

#ifndef DICTCSC_VOCABULARY_H_
#define DICTCSC_VOCABULARY_H_

#include <span>
#include <unordered_map>
#include <vector>

#include "dictcsc/utf8.h"

namespace dictcsc {

// Ordered character inventory. Id 0 is reserved for characters outside the
// list; listed characters take ids 1..n in the given order.
class Vocabulary {
 public:
  static constexpr int kUnknownId = 0;
  static constexpr char32_t kUnknownChar = U'�';

  Vocabulary() = default;
  // Duplicates are dropped, keeping the first occurrence.
  explicit Vocabulary(std::span<const char32_t> chars);

  // Every distinct character across `texts`, in code-point order.
  static Vocabulary FromTexts(std::span<const Text> texts);

  int IdOf(char32_t c) const;
  char32_t CharAt(int id) const;
  bool Contains(char32_t c) const { return index_.contains(c); }
  std::vector<int> Ids(TextView text) const;

  // Includes the unknown slot.
  int size() const { return static_cast<int>(chars_.size()) + 1; }
  const std::vector<char32_t>& chars() const { return chars_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.chars_ == b.chars_;
  }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> index_;
};

}  // namespace dictcsc

#endif  // DICTCSC_VOCABULARY_H_
