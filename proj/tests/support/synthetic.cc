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

#include "synthetic.h"

#include <atomic>
#include <numeric>
#include <fstream>
#include <random>
#include <unistd.h>

#include "json.hpp"

namespace dictcsc::testing {

namespace fs = std::filesystem;

char32_t SynthChar(int k) { return static_cast<char32_t>(0x4E00 + k); }

std::string Letters(int k) {
  std::string out;
  do {
    out.insert(out.begin(), static_cast<char>('a' + k % 26));
    k /= 26;
  } while (k > 0);
  return out;
}

World MakeWorld(const WorldSpec& spec) {
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  World w;
  int next = 0;
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<char32_t> members;
    for (int i = 0; i < spec.class_size; ++i) members.push_back(SynthChar(next++));
    w.classes.push_back(members);
  }
  for (int f = 0; f < spec.fillers; ++f) w.fillers.push_back(SynthChar(next++));

  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < spec.class_size; ++i) {
      const char32_t ch = w.classes[c][i];
      const std::string toneless =
          spec.phonetic_classes ? "q" + Letters(c) : "u" + Letters(c) + "x" + Letters(i);
      w.kb.pinyin.Add(ch, Syllable{toneless, 1 + i % 4});
      if (spec.visual_classes) {
        for (char32_t other : w.classes[c]) w.kb.visual.Add(ch, other);
      }
    }
  }
  for (int f = 0; f < spec.fillers; ++f) {
    w.kb.pinyin.Add(w.fillers[f], Syllable{"f" + Letters(f), 1 + f % 4});
  }
  if (spec.polyphone_rate > 0 && spec.classes > 1) {
    for (int c = 0; c < spec.classes; ++c) {
      for (char32_t ch : w.classes[c]) {
        if (unit(rng) < spec.polyphone_rate) {
          const int other = (c + 1 + static_cast<int>(UniformIndex(
                                         rng, static_cast<std::size_t>(spec.classes - 1)))) %
                            spec.classes;
          w.kb.pinyin.Add(ch, Syllable{"q" + Letters(other), 3});
        }
      }
    }
  }

  std::vector<char32_t> all = w.fillers;
  for (const auto& cls : w.classes) all.insert(all.end(), cls.begin(), cls.end());
  auto random_text = [&](int length) {
    Text t;
    for (int i = 0; i < length; ++i) t.push_back(w.fillers[UniformIndex(rng, w.fillers.size())]);
    return t;
  };
  auto random_definitions = [&] {
    std::vector<Text> defs;
    const int count = 1 + static_cast<int>(UniformIndex(rng, spec.max_definitions));
    for (int d = 0; d < count; ++d) {
      defs.push_back(random_text(3 + static_cast<int>(UniformIndex(rng, 4))));
    }
    return defs;
  };
  for (const auto& cls : w.classes) {
    for (char32_t ch : cls) w.kb.dictionary.Add(Text(1, ch), random_definitions());
  }
  for (int k = 0; k < spec.words * 20 && static_cast<int>(w.kb.dictionary.size()) <
                                             spec.words + spec.classes * spec.class_size;
       ++k) {
    Text word{all[UniformIndex(rng, all.size())], all[UniformIndex(rng, all.size())]};
    if (word[0] == word[1] || w.kb.dictionary.Contains(word)) continue;
    w.kb.dictionary.Add(word, random_definitions());
  }

  for (int n = 0; n < spec.samples; ++n) {
    const int length =
        spec.min_length +
        static_cast<int>(UniformIndex(rng, static_cast<std::size_t>(spec.max_length -
                                                                    spec.min_length + 1)));
    Text target = random_text(length);
    Text source = target;
    const bool clean = unit(rng) < spec.clean_rate;
    const int errors = 1 + static_cast<int>(UniformIndex(rng, spec.max_errors));
    std::vector<std::size_t> positions(static_cast<std::size_t>(length));
    std::iota(positions.begin(), positions.end(), 0);
    positions = SampleWithoutReplacement(std::move(positions),
                                         static_cast<std::size_t>(errors), rng);
    for (std::size_t p : positions) {
      const auto& cls = w.classes[UniformIndex(rng, w.classes.size())];
      std::size_t t = spec.fixed_targets ? 0 : UniformIndex(rng, cls.size());
      std::size_t e = spec.fixed_targets ? 1 + UniformIndex(rng, cls.size() - 1)
                                         : (t + 1 + UniformIndex(rng, cls.size() - 1)) %
                                               cls.size();
      target[p] = cls[t];
      source[p] = clean ? cls[t] : cls[e];
    }
    w.samples.push_back(CscSample::Make("s" + std::to_string(n), source, target));
  }
  return w;
}

void WriteKnowledgeBase(const fs::path& dir, const KnowledgeBase& kb) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "pinyin.tsv");
    for (const auto& [c, readings] : kb.pinyin.entries()) {
      out << EncodeUtf8(c) << '\t';
      bool first = true;
      for (const auto& r : readings) {
        out << (first ? "" : ",") << r.ToString();
        first = false;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "confusion.tsv");
    for (const auto& [c, similar] : kb.visual.entries()) {
      out << EncodeUtf8(c) << '\t';
      for (char32_t s : similar) out << EncodeUtf8(s);
      out << '\n';
    }
  }
  std::ofstream out(dir / "dictionary.jsonl");
  for (const auto& word : kb.dictionary.words()) {
    nlohmann::json j;
    j["word"] = EncodeUtf8(word);
    j["definitions"] = nlohmann::json::array();
    for (const auto& d : *kb.dictionary.Find(word)) j["definitions"].push_back(EncodeUtf8(d));
    out << j.dump() << '\n';
  }
}

TrainConfig ToyConfig() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.learning_rate = 3e-3;
  c.hidden_size = 16;
  c.layers = 1;
  c.heads = 2;
  c.max_length = 32;
  c.negatives = 4;
  c.seed = 7;
  return c;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("dictcsc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace dictcsc::testing
