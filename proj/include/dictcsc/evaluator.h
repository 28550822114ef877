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

#ifndef DICTCSC_EVALUATOR_H_
#define DICTCSC_EVALUATOR_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dictcsc/data_ingest.h"
#include "dictcsc/encoders.h"

namespace dictcsc {

struct Prediction {
  std::string id;
  Text source;
  Text output;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Greedy per-position decoding. Throws LengthError past the model's
// max_length.
Prediction Predict(const CscModel<float>& model, const CscSample& sample);

// Decodes sentences of any length in consecutive windows of the model's
// max_length.
Prediction PredictWindowed(const CscModel<float>& model, const CscSample& sample);

struct PrfScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// 0 when a denominator is 0.
PrfScores MakePrf(std::size_t tp, std::size_t predicted, std::size_t gold);

struct EvalCounts {
  std::size_t sentences = 0;
  std::size_t gold_positive = 0;
  std::size_t predicted_positive = 0;
  std::size_t det_tp = 0;
  std::size_t cor_tp = 0;
};

struct EvalReport {
  PrfScores detection;
  PrfScores correction;
  EvalCounts counts;

  std::string ToJson() const;
  std::string ToTable() const;
};

// Auxiliary characters whose mixed usage is excluded in SIGHAN13 scoring.
bool IsAuxiliary(char32_t c);

// Resets prediction and gold to the source at every position where any of
// the three holds an auxiliary character.
std::pair<Prediction, CscSample> Sighan13Filter(const Prediction& pred,
                                                const CscSample& gold);

// Sentence-level strict metrics. Pairs are matched by position and must
// share id, source and length; otherwise AlignmentError.
EvalReport Evaluate(std::span<const Prediction> preds, std::span<const CscSample> gold,
                    bool sighan13_mode);

// `id<TAB>source<TAB>output`.
void WritePredictions(std::ostream& out, std::span<const Prediction> preds);
std::vector<Prediction> ParsePredictions(std::istream& in);
std::vector<Prediction> LoadPredictions(const std::filesystem::path& path);

}  // namespace dictcsc

#endif  // DICTCSC_EVALUATOR_H_
