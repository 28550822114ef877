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

#include "dictcsc/evaluator.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {

Prediction Predict(const CscModel<float>& model, const CscSample& sample) {
  return Prediction{sample.id, sample.source, model.Predict(sample.source)};
}

Prediction PredictWindowed(const CscModel<float>& model, const CscSample& sample) {
  const auto window = static_cast<std::size_t>(model.config().max_length);
  Text output;
  output.reserve(sample.source.size());
  for (std::size_t start = 0; start < sample.source.size(); start += window) {
    output += model.Predict(TextView(sample.source).substr(start, window));
  }
  return Prediction{sample.id, sample.source, std::move(output)};
}

PrfScores MakePrf(std::size_t tp, std::size_t predicted, std::size_t gold) {
  PrfScores s;
  s.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  s.recall = gold > 0 ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  s.f1 = s.precision + s.recall > 0
             ? 2 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  auto prf = [](const PrfScores& s) {
    return nlohmann::ordered_json{
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  j["detection"] = prf(detection);
  j["correction"] = prf(correction);
  j["counts"] = {{"sentences", counts.sentences},
                 {"gold_positive", counts.gold_positive},
                 {"predicted_positive", counts.predicted_positive},
                 {"det_tp", counts.det_tp},
                 {"cor_tp", counts.cor_tp}};
  return j.dump(2);
}

std::string EvalReport::ToTable() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << "level" << std::right << std::setw(10)
      << "precision" << std::setw(10) << "recall" << std::setw(10) << "f1" << "\n";
  auto row = [&out](const char* name, const PrfScores& s) {
    out << std::left << std::setw(12) << name << std::right << std::setw(10)
        << s.precision << std::setw(10) << s.recall << std::setw(10) << s.f1 << "\n";
  };
  row("detection", detection);
  row("correction", correction);
  out << "sentences=" << counts.sentences << " gold_positive=" << counts.gold_positive
      << " predicted_positive=" << counts.predicted_positive
      << " det_tp=" << counts.det_tp << " cor_tp=" << counts.cor_tp << "\n";
  return out.str();
}

bool IsAuxiliary(char32_t c) { return c == U'的' || c == U'地' || c == U'得'; }

std::pair<Prediction, CscSample> Sighan13Filter(const Prediction& pred,
                                                const CscSample& gold) {
  Prediction p = pred;
  Text target = gold.target;
  for (std::size_t i = 0; i < p.source.size(); ++i) {
    if (IsAuxiliary(p.source[i]) || IsAuxiliary(p.output[i]) || IsAuxiliary(target[i])) {
      p.output[i] = p.source[i];
      target[i] = gold.source[i];
    }
  }
  return {std::move(p), CscSample::Make(gold.id, gold.source, std::move(target))};
}

EvalReport Evaluate(std::span<const Prediction> preds, std::span<const CscSample> gold,
                    bool sighan13_mode) {
  if (preds.size() != gold.size()) {
    throw AlignmentError(std::to_string(preds.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold sentences");
  }
  EvalReport report;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Prediction& raw_pred = preds[i];
    const CscSample& raw_gold = gold[i];
    if (raw_pred.id != raw_gold.id) {
      throw AlignmentError("prediction id " + raw_pred.id + " does not match gold id " +
                           raw_gold.id + " at index " + std::to_string(i));
    }
    if (raw_pred.output.size() != raw_pred.source.size() ||
        raw_pred.source.size() != raw_gold.source.size()) {
      throw AlignmentError("length mismatch for id " + raw_pred.id);
    }
    if (raw_pred.source != raw_gold.source) {
      throw AlignmentError("source mismatch for id " + raw_pred.id);
    }
    Prediction pred = raw_pred;
    CscSample g = raw_gold;
    if (sighan13_mode) std::tie(pred, g) = Sighan13Filter(raw_pred, raw_gold);

    ++report.counts.sentences;
    const bool gold_positive = g.source != g.target;
    const bool predicted_positive = pred.output != pred.source;
    if (gold_positive) ++report.counts.gold_positive;
    if (!predicted_positive) continue;
    ++report.counts.predicted_positive;
    if (DiffPositions(pred.source, pred.output) == g.error_positions) {
      ++report.counts.det_tp;
    }
    if (pred.output == g.target) ++report.counts.cor_tp;
  }
  const EvalCounts& c = report.counts;
  report.detection = MakePrf(c.det_tp, c.predicted_positive, c.gold_positive);
  report.correction = MakePrf(c.cor_tp, c.predicted_positive, c.gold_positive);
  return report;
}

void WritePredictions(std::ostream& out, std::span<const Prediction> preds) {
  for (const auto& p : preds) {
    out << p.id << '\t' << EncodeUtf8(p.source) << '\t' << EncodeUtf8(p.output) << '\n';
  }
}

std::vector<Prediction> ParsePredictions(std::istream& in) {
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripLineEnding(line);
    if (view.empty()) continue;
    const auto fields = SplitFields(view, '\t');
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Prediction p;
    p.id = std::string(fields[0]);
    try {
      p.source = DecodeUtf8(fields[1]);
      p.output = DecodeUtf8(fields[2]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    if (p.source.size() != p.output.size()) {
      throw ParseError("source and output lengths differ for id " + p.id, line_no);
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

std::vector<Prediction> LoadPredictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ParsePredictions(in);
}

}  // namespace dictcsc
