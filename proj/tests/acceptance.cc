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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Arguments select a subset by number.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "dictcsc/analysis.h"
#include "dictcsc/data_ingest.h"
#include "dictcsc/evaluator.h"
#include "dictcsc/objectives.h"
#include "dictcsc/pair_builder.h"
#include "dictcsc/trainer.h"
#include "synthetic.h"

using namespace dictcsc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

// --- 1 ---------------------------------------------------------------------

Outcome InfoNceUniform() {
  const std::vector<double> negatives(8, 0.37);
  const auto scores = MetricScores<double>::FromScores(0.37, negatives);
  const double loss = InfoNce(scores).loss;
  const double expected = 2.1972245773362196;  // ln 9
  return {std::abs(loss - expected) <= 1e-9,
          Fmt("loss=%.15f expected=%.15f", loss, expected)};
}

// --- 2 ---------------------------------------------------------------------

double RelError(const MatrixX<double>& a, const MatrixX<double>& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-6});
  return (a - b).norm() / scale;
}

struct Instance {
  int T, h, V;
  LossWeights w;
  MatrixX<double> head, bias;
  std::vector<int> targets;
  std::unique_ptr<bool[]> mask;
  RepSequence<double> pos_p, pos_v, pos_d;
  std::vector<RepSequence<double>> neg_p, neg_v, neg_d;
  Eigen::Index s_p, s_v, s_d, w_d;
};

RepSequence<double> RandomRep(Rng& rng, int rows, int h, int valid) {
  std::uniform_real_distribution<double> u(-1, 1);
  RepSequence<double> r;
  r.values = MatrixX<double>::NullaryExpr(rows, h, [&] { return u(rng); });
  r.valid_length = valid;
  return r;
}

Instance RandomInstance(Rng& rng, int T, int h) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> lam(0.1, 2.0);
  Instance in;
  in.T = T;
  in.h = h;
  in.V = 3 + static_cast<int>(UniformIndex(rng, 6));
  in.w = LossWeights{lam(rng), lam(rng), lam(rng), lam(rng)};
  in.head = MatrixX<double>::NullaryExpr(h, in.V, [&] { return u(rng); });
  in.bias = MatrixX<double>::NullaryExpr(1, in.V, [&] { return u(rng); });
  in.mask.reset(new bool[T]);
  for (int t = 0; t < T; ++t) {
    in.targets.push_back(static_cast<int>(UniformIndex(rng, in.V)));
    in.mask[t] = t == 0 || UniformIndex(rng, 4) != 0;
  }
  const int n = 1 + static_cast<int>(UniformIndex(rng, 8));
  in.s_p = static_cast<Eigen::Index>(UniformIndex(rng, T));
  in.s_v = static_cast<Eigen::Index>(UniformIndex(rng, T));
  in.s_d = static_cast<Eigen::Index>(UniformIndex(rng, T));
  in.w_d = static_cast<Eigen::Index>(UniformIndex(rng, T - in.s_d));
  in.pos_p = RandomRep(rng, T, h, T);
  in.pos_v = RandomRep(rng, T, h, T);
  for (int i = 0; i < n; ++i) {
    in.neg_p.push_back(RandomRep(rng, T, h, T));
    in.neg_v.push_back(RandomRep(rng, T, h, T));
  }
  auto def = [&] {
    const int rows = 1 + static_cast<int>(UniformIndex(rng, 8));
    return RandomRep(rng, rows, h, 1 + static_cast<int>(UniformIndex(rng, rows)));
  };
  in.pos_d = def();
  for (int i = 0; i < n; ++i) in.neg_d.push_back(def());
  return in;
}

// Combined loss of a given encoder output; fills the gradient when asked.
double CombinedOf(const Instance& in, const MatrixX<double>& o, MatrixX<double>* d_o) {
  RepSequence<double> rep{o, o.rows()};
  MatrixX<double> logits = o * in.head;
  logits.rowwise() += in.bias.row(0);
  const auto ce = CscLoss<double>(logits, in.targets,
                                  std::span<const bool>(in.mask.get(), in.T));
  const auto p = DotContrastiveLoss<double>(rep, in.pos_p, in.neg_p, in.s_p);
  const auto v = DotContrastiveLoss<double>(rep, in.pos_v, in.neg_v, in.s_v);
  const auto d = CosineContrastiveLoss<double>(rep, in.pos_d, in.neg_d, in.s_d, in.w_d);
  if (d_o != nullptr) {
    *d_o = in.w.csc * ce.d_logits * in.head.transpose() + in.w.phonetic * p.d_original +
           in.w.visual * v.d_original + in.w.definition * d.d_original;
  }
  return CombinedLoss(ce.mean(), p.loss, v.loss, d.loss, in.w);
}

Outcome GradientAudit() {
  Rng rng(2024);
  const double step = 1e-4;
  int instances = 0;
  int failures = 0;
  double worst = 0;
  // Representation-level instances.
  for (int k = 0; k < 120; ++k) {
    const int T = 1 + static_cast<int>(UniformIndex(rng, 8));
    const int h = 2 + static_cast<int>(UniformIndex(rng, 15));
    const Instance in = RandomInstance(rng, T, h);
    MatrixX<double> o = RandomRep(rng, T, h, T).values;
    MatrixX<double> analytic;
    CombinedOf(in, o, &analytic);
    MatrixX<double> numeric(T, h);
    for (Eigen::Index i = 0; i < o.size(); ++i) {
      const double saved = o.data()[i];
      o.data()[i] = saved + step;
      const double up = CombinedOf(in, o, nullptr);
      o.data()[i] = saved - step;
      const double down = CombinedOf(in, o, nullptr);
      o.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2 * step);
    }
    const double e = RelError(analytic, numeric);
    worst = std::max(worst, e);
    failures += e < 1e-3 ? 0 : 1;
    ++instances;
  }
  // End-to-end instances through the transformer and prediction head.
  const std::u32string alphabet = U"甲乙丙丁戊己庚辛";
  for (int k = 0; k < 12; ++k) {
    EncoderConfig c;
    c.vocab = Vocabulary(std::vector<char32_t>(alphabet.begin(), alphabet.end()));
    c.hidden_size = 4 * (1 + static_cast<int>(UniformIndex(rng, 4)));
    c.heads = 2;
    c.layers = 1 + static_cast<int>(UniformIndex(rng, 2));
    c.max_length = 8;
    auto model = CscModel<double>::Random(c, 100 + k);
    const int T = 2 + static_cast<int>(UniformIndex(rng, 7));
    Text sentence;
    for (int t = 0; t < T; ++t) sentence.push_back(alphabet[UniformIndex(rng, alphabet.size())]);
    Instance in = RandomInstance(rng, T, c.hidden_size);
    in.V = c.vocab.size();
    for (auto& t : in.targets) t = static_cast<int>(UniformIndex(rng, in.V));
    auto loss_of = [&](const CscModel<double>& m, CscWeights<double>* grads) {
      const auto pass = m.Forward(sentence);
      RepSequence<double> rep{pass.hidden, T};
      const auto ce = CscLoss<double>(pass.logits, in.targets,
                                      std::span<const bool>(in.mask.get(), T));
      const auto p = DotContrastiveLoss<double>(rep, in.pos_p, in.neg_p, in.s_p);
      const auto v = DotContrastiveLoss<double>(rep, in.pos_v, in.neg_v, in.s_v);
      const auto d = CosineContrastiveLoss<double>(rep, in.pos_d, in.neg_d, in.s_d, in.w_d);
      if (grads != nullptr) {
        const MatrixX<double> d_hidden = in.w.phonetic * p.d_original +
                                         in.w.visual * v.d_original +
                                         in.w.definition * d.d_original;
        m.Backward(pass, d_hidden, in.w.csc * ce.d_logits, *grads);
      }
      return CombinedLoss(ce.mean(), p.loss, v.loss, d.loss, in.w);
    };
    auto grads = CscWeights<double>::Zeros(c);
    loss_of(model, &grads);
    std::vector<MatrixX<double>*> params;
    model.ForEachParameter([&](const std::string&, MatrixX<double>& p) { params.push_back(&p); });
    std::vector<const MatrixX<double>*> analytic;
    grads.ForEach([&](const std::string&, const MatrixX<double>& g) { analytic.push_back(&g); });
    for (std::size_t j = 0; j < params.size(); ++j) {
      MatrixX<double> numeric(params[j]->rows(), params[j]->cols());
      for (Eigen::Index i = 0; i < params[j]->size(); ++i) {
        double& x = params[j]->data()[i];
        const double saved = x;
        x = saved + step;
        const double up = loss_of(model, nullptr);
        x = saved - step;
        const double down = loss_of(model, nullptr);
        x = saved;
        numeric.data()[i] = (up - down) / (2 * step);
      }
      const double e = RelError(*analytic[j], numeric);
      worst = std::max(worst, e);
      failures += e < 1e-3 ? 0 : 1;
    }
    ++instances;
  }
  return {failures == 0 && instances >= 100,
          Fmt("%d instances (120 representation-level, 12 through the encoder), "
              "%d failures, worst relative error %.2e",
              instances, failures, worst)};
}

// --- 3 ---------------------------------------------------------------------

std::vector<MatrixX<float>> Snapshot(const Encoder<float>& e) {
  std::vector<MatrixX<float>> out;
  e.VisitParameters([&](const std::string&, const MatrixX<float>& p) { out.push_back(p); });
  return out;
}

Outcome FreezeContract() {
  testing::WorldSpec spec;
  spec.visual_classes = true;
  spec.samples = 40;
  spec.seed = 3;
  const auto world = testing::MakeWorld(spec);
  TrainConfig config;
  config.epochs = 20;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.negatives = 8;
  config.seed = 3;
  const auto ec = config.MakeEncoderConfig(BuildVocabulary(world.samples, world.kb));
  const auto initial = CscModel<float>::Random(ec, config.seed);
  KnowledgeEncoders encoders{
      std::make_shared<const FrozenEncoder<float>>(Freeze(initial.encoder())),
      std::make_shared<const FrozenEncoder<float>>(
          Freeze(TransformerEncoder<float>::Random(ec, 11))),
      std::make_shared<const FrozenEncoder<float>>(
          Freeze(TransformerEncoder<float>::Random(ec, 12)))};
  const auto before_p = Snapshot(*encoders.phonetic);
  const auto before_v = Snapshot(*encoders.visual);
  const auto before_d = Snapshot(*encoders.definition);
  const auto result = Train(config, world.samples, world.kb, initial, encoders);
  int p = 0, v = 0, d = 0;
  for (const auto& e : result.log) {
    p += e.losses.phonetic_batches;
    v += e.losses.visual_batches;
    d += e.losses.definition_batches;
  }
  const bool moved = !(Snapshot(result.model.encoder()) == Snapshot(initial.encoder()));
  const bool frozen = Snapshot(*encoders.phonetic) == before_p &&
                      Snapshot(*encoders.visual) == before_v &&
                      Snapshot(*encoders.definition) == before_d;
  const bool active = p > 0 && v > 0 && d > 0 && config.weights.csc > 0;
  return {frozen && moved && active && result.log.size() == 200,
          Fmt("%zu steps; P/V/D batches %d/%d/%d; E_C changed: %s; "
              "E_P, E_V, E_D bitwise identical: %s",
              result.log.size(), p, v, d, moved ? "yes" : "no", frozen ? "yes" : "no")};
}

// --- 4 ---------------------------------------------------------------------

std::set<std::string> Toneless(char32_t c, const PinyinTable& t) {
  std::set<std::string> out;
  for (const auto& s : t.Readings(c)) out.insert(s.toneless);
  return out;
}

bool Intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.contains(x)) return true;
  }
  return false;
}

// Independent re-check of every batch invariant.
std::string Recheck(const ContrastiveBatch& b, const CscSample& sample, std::size_t n,
                    const KnowledgeBase& kb) {
  if (b.negatives.size() != n) return "wrong negative count";
  if (std::set<Text>(b.negatives.begin(), b.negatives.end()).size() != n) {
    return "duplicate negatives";
  }
  if (b.original != sample.source) return "original is not the source";
  const std::size_t s = b.error_index;
  if (b.kind == KnowledgeKind::kDefinition) {
    const Text word = sample.target.substr(s, b.span_width + 1);
    const auto* defs = kb.dictionary.Find(word);
    if (defs == nullptr) return "gold word missing from dictionary";
    if (std::find(defs->begin(), defs->end(), b.positive) == defs->end()) {
      return "positive is not a definition of the gold word";
    }
    bool covers = false;
    for (std::size_t p : sample.error_positions) covers |= p >= s && p <= s + b.span_width;
    if (!covers) return "span does not cover an error";
    for (const auto& neg : b.negatives) {
      if (neg == b.positive) return "negative equals positive";
      bool found = false;
      for (const auto& w : kb.dictionary.words()) {
        if (w == word) continue;
        const auto& d = *kb.dictionary.Find(w);
        found |= std::find(d.begin(), d.end(), neg) != d.end();
      }
      if (!found) return "negative is not a definition of another word";
    }
    return "";
  }
  if (b.span_width != 0) return "nonzero span width";
  if (std::find(sample.error_positions.begin(), sample.error_positions.end(), s) ==
      sample.error_positions.end()) {
    return "error index is not an error position";
  }
  auto substitutes_only_s = [&](const Text& t) {
    if (t.size() != b.original.size()) return false;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if ((t[i] != b.original[i]) != (i == s)) return false;
    }
    return true;
  };
  if (!substitutes_only_s(b.positive)) return "positive is not a single substitution";
  const char32_t o = b.original[s];
  if (b.kind == KnowledgeKind::kPhonetic) {
    if (!Intersects(Toneless(o, kb.pinyin), Toneless(b.positive[s], kb.pinyin))) {
      return "positive pinyin not similar";
    }
  } else if (!kb.visual.SimilarTo(o).contains(b.positive[s])) {
    return "positive not in confusion set";
  }
  for (const auto& neg : b.negatives) {
    if (!substitutes_only_s(neg)) return "negative is not a single substitution";
    if (b.kind == KnowledgeKind::kPhonetic) {
      const auto tn = Toneless(neg[s], kb.pinyin);
      if (tn.empty() || Intersects(Toneless(o, kb.pinyin), tn)) {
        return "negative pinyin not disjoint";
      }
    } else if (kb.visual.SimilarTo(o).contains(neg[s])) {
      return "negative in confusion set";
    }
  }
  return "";
}

Outcome PairSoundness() {
  Rng rng(77);
  int counts[3] = {0, 0, 0};
  int violations = 0;
  int total = 0;
  std::string first_problem;
  for (std::uint64_t world_seed = 1; total < 10000; ++world_seed) {
    testing::WorldSpec spec;
    spec.classes = 2 + static_cast<int>(UniformIndex(rng, 4));
    spec.class_size = 2 + static_cast<int>(UniformIndex(rng, 4));
    spec.fillers = 12 + static_cast<int>(UniformIndex(rng, 20));
    spec.visual_classes = true;
    spec.polyphone_rate = 0.3;
    spec.samples = 60;
    spec.max_errors = 3;
    spec.seed = world_seed;
    const auto world = testing::MakeWorld(spec);
    const Vocabulary vocab = BuildVocabulary(world.samples, world.kb);
    EncoderConfig ec;
    ec.vocab = vocab;
    ec.hidden_size = 8;
    ec.layers = 1;
    ec.max_length = 16;
    const auto sim = TransformerEncoder<float>::Random(ec, world_seed);
    for (int k = 0; k < 400 && total < 10000; ++k) {
      const auto& sample = world.samples[UniformIndex(rng, world.samples.size())];
      if (!sample.has_errors()) continue;
      const std::size_t s =
          sample.error_positions[UniformIndex(rng, sample.error_positions.size())];
      const std::size_t n = 1 + UniformIndex(rng, 8);
      const auto kind = static_cast<KnowledgeKind>(UniformIndex(rng, 3));
      const auto strategy = static_cast<DefinitionStrategy>(UniformIndex(rng, 3));
      std::optional<ContrastiveBatch> b;
      try {
        switch (kind) {
          case KnowledgeKind::kPhonetic:
            b = BuildPhoneticBatch(sample, s, n, world.kb, vocab.chars(), rng);
            break;
          case KnowledgeKind::kVisual:
            b = BuildVisualBatch(sample, s, n, world.kb, vocab.chars(), rng);
            break;
          case KnowledgeKind::kDefinition:
            b = BuildDefinitionBatch(sample, s, n, world.kb, strategy, &sim, rng);
            break;
        }
      } catch (const ResourceError&) {
        continue;
      }
      if (!b) continue;
      std::string problem = Recheck(*b, sample, n, world.kb);
      const auto library = ValidateBatch(*b, world.kb, &sample.target);
      if (problem.empty() && !library.empty()) problem = "library check: " + library.front();
      if (!problem.empty()) {
        ++violations;
        if (first_problem.empty()) first_problem = problem;
      }
      ++counts[static_cast<int>(b->kind)];
      ++total;
    }
  }
  return {violations == 0 && total >= 10000,
          Fmt("%d batches (P %d, V %d, D %d), %d violations%s%s", total, counts[0],
              counts[1], counts[2], violations, first_problem.empty() ? "" : ": ",
              first_problem.c_str())};
}

// --- 5 ---------------------------------------------------------------------

// Brute-force scorer written independently of the library.
struct BruteCounts {
  int gold = 0, predicted = 0, det = 0, cor = 0;
};

BruteCounts BruteForce(const std::vector<Prediction>& preds,
                       const std::vector<CscSample>& gold) {
  BruteCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::set<std::size_t> gold_set, pred_set;
    for (std::size_t j = 0; j < gold[i].source.size(); ++j) {
      if (gold[i].source[j] != gold[i].target[j]) gold_set.insert(j);
      if (preds[i].source[j] != preds[i].output[j]) pred_set.insert(j);
    }
    c.gold += gold_set.empty() ? 0 : 1;
    if (pred_set.empty()) continue;
    ++c.predicted;
    c.det += pred_set == gold_set ? 1 : 0;
    c.cor += preds[i].output == gold[i].target ? 1 : 0;
  }
  return c;
}

double Ratio(int a, int b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; }
double F1(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

Outcome EvaluatorOracle() {
  const std::vector<CscSample> gold = {CscSample::Make("s1", U"我们在门口", U"我们再门口"),
                                       CscSample::Make("s2", U"今天天气好", U"今天天气好"),
                                       CscSample::Make("s3", U"他门去写校", U"他们去学校")};
  const std::vector<Prediction> preds = {{"s1", U"我们在门口", U"我们再门口"},
                                         {"s2", U"今天天气好", U"今天填气好"},
                                         {"s3", U"他门去写校", U"他们去写校"}};
  const EvalReport r = Evaluate(preds, gold, false);
  bool crafted = true;
  for (const PrfScores& p : {r.detection, r.correction}) {
    crafted &= p.precision == 1.0 / 3 && p.recall == 0.5 && std::abs(p.f1 - 0.4) < 1e-15;
  }

  Rng rng(5);
  const std::u32string alphabet = U"甲乙丙丁戊";
  int mismatches = 0;
  int ordering_violations = 0;
  const int suites = 200;
  for (int k = 0; k < suites; ++k) {
    std::vector<CscSample> g;
    std::vector<Prediction> p;
    for (int i = 0; i < 50; ++i) {
      const int n = 1 + static_cast<int>(UniformIndex(rng, 6));
      Text src, tgt, out;
      for (int j = 0; j < n; ++j) {
        const char32_t t = alphabet[UniformIndex(rng, alphabet.size())];
        const char32_t s = UniformIndex(rng, 5) == 0 ? alphabet[UniformIndex(rng, 5)] : t;
        const std::size_t mode = UniformIndex(rng, 4);
        const char32_t o = mode == 0 ? t : mode == 1 ? s : alphabet[UniformIndex(rng, 5)];
        src.push_back(s);
        tgt.push_back(t);
        out.push_back(UniformIndex(rng, 2) == 0 ? s : o);
      }
      g.push_back(CscSample::Make("r" + std::to_string(i), src, tgt));
      p.push_back({g.back().id, src, out});
    }
    const EvalReport e = Evaluate(p, g, false);
    const BruteCounts b = BruteForce(p, g);
    const double dp = Ratio(b.det, b.predicted), dr = Ratio(b.det, b.gold);
    const double cp = Ratio(b.cor, b.predicted), cr = Ratio(b.cor, b.gold);
    const bool same =
        e.counts.gold_positive == static_cast<std::size_t>(b.gold) &&
        e.counts.predicted_positive == static_cast<std::size_t>(b.predicted) &&
        e.counts.det_tp == static_cast<std::size_t>(b.det) &&
        e.counts.cor_tp == static_cast<std::size_t>(b.cor) && e.detection.precision == dp &&
        e.detection.recall == dr && e.detection.f1 == F1(dp, dr) &&
        e.correction.precision == cp && e.correction.recall == cr &&
        e.correction.f1 == F1(cp, cr);
    mismatches += same ? 0 : 1;
    const bool ordered = e.correction.precision <= e.detection.precision &&
                         e.correction.recall <= e.detection.recall &&
                         e.correction.f1 <= e.detection.f1;
    ordering_violations += ordered ? 0 : 1;
  }
  return {crafted && mismatches == 0 && ordering_violations == 0,
          Fmt("crafted suite P=%.6f R=%.6f F1=%.6f (both levels: %s); %d random 50-sentence "
              "suites: %d mismatches vs brute force, %d correction>detection",
              r.detection.precision, r.detection.recall, r.detection.f1,
              crafted ? "exact" : "WRONG", suites, mismatches, ordering_violations)};
}

// --- 6 ---------------------------------------------------------------------

Outcome Sighan13Fixture(const std::string& data_dir) {
  const auto gold = LoadCorpus(data_dir + "/sighan13_aux.tsv", CorpusFormat::kTsv);
  const auto preds = LoadPredictions(data_dir + "/sighan13_aux_preds.tsv");
  const auto it = std::find_if(gold.begin(), gold.end(),
                               [](const CscSample& s) { return s.id == "aux1"; });
  const std::size_t index = static_cast<std::size_t>(it - gold.begin());
  const bool only_aux = it != gold.end() && it->error_positions.size() == 1 &&
                        it->source[it->error_positions[0]] == U'的' &&
                        it->target[it->error_positions[0]] == U'得';
  const auto [fp, fg] = Sighan13Filter(preds[index], gold[index]);
  const EvalReport raw = Evaluate(preds, gold, false);
  const EvalReport filtered = Evaluate(preds, gold, true);
  // Unfiltered: aux1, aux2, aux4 are gold positives. Filtered: only aux2.
  const bool pass = only_aux && !fg.has_errors() && raw.counts.gold_positive == 3 &&
                    filtered.counts.gold_positive == 1;
  return {pass, Fmt("aux1 (的->得 only) gold-negative after filtering: %s; gold positives "
                    "%zu unfiltered, %zu filtered",
                    fg.has_errors() ? "no" : "yes", raw.counts.gold_positive,
                    filtered.counts.gold_positive)};
}

// --- 7 ---------------------------------------------------------------------

EvalReport EvaluateOn(const CscModel<float>& model, const std::vector<CscSample>& samples) {
  std::vector<Prediction> preds;
  for (const auto& s : samples) preds.push_back(Predict(model, s));
  return Evaluate(preds, samples, false);
}

KnowledgeEncoders CopiesOf(const CscModel<float>& model) {
  auto frozen = std::make_shared<const FrozenEncoder<float>>(Freeze(model.encoder()));
  return KnowledgeEncoders{frozen, frozen, frozen};
}

Outcome Overfit() {
  testing::WorldSpec spec;
  spec.visual_classes = true;
  spec.classes = 4;
  spec.class_size = 3;
  spec.samples = 50;
  spec.fixed_targets = true;
  spec.seed = 50;
  const auto world = testing::MakeWorld(spec);
  TrainConfig config;
  config.epochs = 10;
  config.batch_size = 2;
  config.learning_rate = 3e-3;
  config.hidden_size = 64;
  config.layers = 2;
  config.heads = 2;
  config.seed = 1;
  const auto ec = config.MakeEncoderConfig(BuildVocabulary(world.samples, world.kb));
  const auto initial = CscModel<float>::Random(ec, config.seed);
  const auto start = std::chrono::steady_clock::now();
  const auto result = Train(config, world.samples, world.kb, initial, CopiesOf(initial));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const EvalReport r = EvaluateOn(result.model, world.samples);
  return {r.correction.f1 == 1.0,
          Fmt("50 samples, 2 layers, h=64, 10 epochs (%zu steps, %.1fs): training-set "
              "correction F1 %.4f (P %.4f, R %.4f)",
              result.log.size(), seconds, r.correction.f1, r.correction.precision,
              r.correction.recall)};
}

// --- 8 ---------------------------------------------------------------------

struct GeometryRun {
  ClassGap trained;
  ClassGap baseline;
};

GeometryRun Geometry(bool phonetic, std::uint64_t seed) {
  testing::WorldSpec spec;
  spec.classes = 2;
  spec.class_size = 4;
  spec.phonetic_classes = phonetic;
  spec.visual_classes = !phonetic;
  spec.fillers = 16;
  spec.samples = 60;
  spec.seed = seed;
  const auto world = testing::MakeWorld(spec);
  TrainConfig config;
  config.epochs = 4;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.hidden_size = 32;
  config.layers = 2;
  config.negatives = 8;
  config.seed = seed;
  config.weights = phonetic ? LossWeights{1, 1, 0, 0} : LossWeights{1, 0, 1, 0};
  const auto ec = config.MakeEncoderConfig(BuildVocabulary(world.samples, world.kb));
  const auto initial = CscModel<float>::Random(ec, seed);
  const auto encoders = CopiesOf(initial);

  std::vector<char32_t> chars;
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c) {
    for (char32_t ch : world.classes[c]) {
      chars.push_back(ch);
      labels.push_back(c);
    }
  }
  auto gap_of = [&](const CscModel<float>& m) {
    return MeanDotProducts(EncodeCharacters(m.encoder(), chars).vectors, labels);
  };
  GeometryRun run;
  run.trained = gap_of(Train(config, world.samples, world.kb, initial, encoders).model);
  config.weights = LossWeights{1, 0, 0, 0};
  run.baseline = gap_of(Train(config, world.samples, world.kb, initial, encoders).model);
  return run;
}

Outcome GeometryAnalog() {
  const GeometryRun p = Geometry(true, 8);
  const GeometryRun v = Geometry(false, 9);
  auto ok = [](const GeometryRun& r) {
    return r.trained.intra > r.trained.inter && r.baseline.gap() < r.trained.gap();
  };
  return {ok(p) && ok(v),
          Fmt("L_P: intra %.3f vs inter %.3f (gap %.3f), CSC-only gap %.3f; "
              "L_V: intra %.3f vs inter %.3f (gap %.3f), CSC-only gap %.3f",
              p.trained.intra, p.trained.inter, p.trained.gap(), p.baseline.gap(),
              v.trained.intra, v.trained.inter, v.trained.gap(), v.baseline.gap())};
}

// --- 9 ---------------------------------------------------------------------

// Confusable characters whose correct form is only recoverable from topic
// characters in the context. Each word has an informative definition (the
// word plus its topic characters) and an uninformative one; the informative
// one is listed first for most words.
struct TopicWorld {
  KnowledgeBase kb;
  std::vector<CscSample> train;
  std::vector<CscSample> test;
  std::map<char32_t, Text> informative;
};

TopicWorld MakeTopicWorld(std::uint64_t seed) {
  Rng rng(seed);
  const int classes = 6, class_size = 3, topic_size = 3, generic = 12;
  int next = 0;
  auto fresh = [&] { return testing::SynthChar(next++); };
  TopicWorld w;
  std::vector<std::vector<char32_t>> members(classes);
  std::map<char32_t, std::vector<char32_t>> topics;
  for (int c = 0; c < classes; ++c) {
    for (int m = 0; m < class_size; ++m) {
      const char32_t ch = fresh();
      members[c].push_back(ch);
      w.kb.pinyin.Add(ch, Syllable{"q" + testing::Letters(c), 1});
    }
  }
  int reading = 0;
  auto filler = [&] {
    const char32_t ch = fresh();
    w.kb.pinyin.Add(ch, Syllable{"f" + testing::Letters(reading++), 1});
    return ch;
  };
  for (const auto& cls : members) {
    for (char32_t ch : cls) {
      for (int t = 0; t < topic_size; ++t) topics[ch].push_back(filler());
    }
  }
  std::vector<char32_t> generics;
  for (int g = 0; g < generic; ++g) generics.push_back(filler());
  auto pick = [&](const std::vector<char32_t>& pool) { return pool[UniformIndex(rng, pool.size())]; };

  // Characters that only occur in uninformative senses.
  std::vector<char32_t> unrelated;
  for (int g = 0; g < generic; ++g) unrelated.push_back(filler());
  for (const auto& cls : members) {
    // Uninformative senses are near-identical across a class, so they do not
    // tell its members apart.
    Text shared;
    for (int k = 0; k < 5; ++k) shared.push_back(pick(unrelated));
    for (std::size_t m = 0; m < cls.size(); ++m) {
      const char32_t ch = cls[m];
      Text good{ch};
      for (char32_t t : topics[ch]) good.push_back(t);
      good.push_back(pick(generics));
      Text poor = shared;
      poor.back() = unrelated[m];
      w.informative[ch] = good;
      std::vector<Text> defs = {good, poor};
      if (UniformIndex(rng, 4) == 0) std::swap(defs[0], defs[1]);
      w.kb.dictionary.Add(Text{ch}, defs);
    }
  }

  auto sentence = [&](int index) {
    const auto& cls = members[UniformIndex(rng, members.size())];
    const std::size_t m = UniformIndex(rng, cls.size());
    Text target;
    for (int k = 0; k < 4; ++k) target.push_back(pick(topics[cls[m]]));
    for (int k = 0; k < 5; ++k) target.push_back(pick(generics));
    std::shuffle(target.begin(), target.end(), rng);
    const std::size_t at = UniformIndex(rng, target.size() + 1);
    target.insert(target.begin() + static_cast<std::ptrdiff_t>(at), cls[m]);
    Text source = target;
    source[at] = cls[(m + 1 + UniformIndex(rng, cls.size() - 1)) % cls.size()];
    return CscSample::Make("t" + std::to_string(index), source, target);
  };
  for (int i = 0; i < 240; ++i) w.train.push_back(sentence(i));
  for (int i = 0; i < 240; ++i) w.test.push_back(sentence(1000 + i));
  return w;
}

Outcome StrategyOrdering() {
  const std::vector<DefinitionStrategy> strategies = {
      DefinitionStrategy::kSimilar, DefinitionStrategy::kFirst, DefinitionStrategy::kRandom};
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7};
  std::map<DefinitionStrategy, std::vector<double>> f1;
  double similar_hits = 0, similar_total = 0;
  for (std::uint64_t seed : seeds) {
    const TopicWorld world = MakeTopicWorld(seed);
    TrainConfig config;
    config.epochs = 12;
    config.batch_size = 8;
    config.learning_rate = 2e-3;
    config.hidden_size = 32;
    config.layers = 1;
    config.negatives = 8;
    config.seed = seed;
    config.weights = LossWeights{1, 0, 0, 1};
    std::vector<CscSample> all = world.train;
    all.insert(all.end(), world.test.begin(), world.test.end());
    const auto ec = config.MakeEncoderConfig(BuildVocabulary(all, world.kb));
    const auto initial = CscModel<float>::Random(ec, seed);
    const auto encoders = CopiesOf(initial);

    Rng rng(seed);
    for (const auto& s : world.train) {
      const std::size_t at = s.error_positions.front();
      const Text& chosen =
          SelectDefinition(Text{s.target[at]}, s.target, world.kb.dictionary,
                           DefinitionStrategy::kSimilar, encoders.definition.get(), rng);
      similar_hits += chosen == world.informative.at(s.target[at]) ? 1 : 0;
      ++similar_total;
    }
    for (DefinitionStrategy strategy : strategies) {
      config.definition_strategy = strategy;
      const auto result = Train(config, world.train, world.kb, initial, encoders);
      f1[strategy].push_back(EvaluateOn(result.model, world.test).correction.f1);
    }
  }
  int ordered = 0, similar_first = 0, first_random = 0;
  std::string per_seed;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const double s = f1[DefinitionStrategy::kSimilar][k];
    const double f = f1[DefinitionStrategy::kFirst][k];
    const double r = f1[DefinitionStrategy::kRandom][k];
    ordered += s >= f && f >= r ? 1 : 0;
    similar_first += s >= f ? 1 : 0;
    first_random += f >= r ? 1 : 0;
    per_seed += Fmt(" [%.3f %.3f %.3f]", s, f, r);
  }
  const bool pass = 2 * ordered > static_cast<int>(seeds.size());
  return {pass, Fmt("held-out correction F1 per seed [similar first random]:%s; ordering "
                    "held in %d of %zu seeds (similar>=first %d, first>=random %d); similar "
                    "picked the informative definition %.1f%% of the time",
                    per_seed.c_str(), ordered, seeds.size(), similar_first, first_random,
                    100 * similar_hits / similar_total)};
}

// --- 10 --------------------------------------------------------------------

Outcome DataStatistics(const std::string& data_dir) {
  if (const char* path = std::getenv("DICTCSC_SIGHAN15_TEST")) {
    const auto stats = ComputeCorpusStats(LoadCorpus(path, CorpusFormat::kTsv));
    const bool pass = stats.sentence_count == 1100 &&
                      std::abs(stats.avg_length - 30.6) <= 0.05 && stats.error_count == 703;
    return {pass, Fmt("SIGHAN15 test (%s): %zu sentences, avg length %.3f, %zu errors", path,
                      stats.sentence_count, stats.avg_length, stats.error_count)};
  }
  const auto stats =
      ComputeCorpusStats(LoadCorpus(data_dir + "/stats_fixture.tsv", CorpusFormat::kTsv));
  // Counts frozen from an independent script over the fixture.
  const bool pass = stats.sentence_count == 40 && std::abs(stats.avg_length - 26.475) < 1e-12 &&
                    stats.error_count == 34;
  return {pass, Fmt("SIGHAN15 data not supplied (set DICTCSC_SIGHAN15_TEST); bundled fixture: "
                    "%zu sentences, avg length %.3f, %zu errors (expected 40, 26.475, 34)",
                    stats.sentence_count, stats.avg_length, stats.error_count)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string data_dir = DICTCSC_TEST_DATA_DIR;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"InfoNCE uniform-score identity", InfoNceUniform},
      {"gradient audit", GradientAudit},
      {"freeze contract", FreezeContract},
      {"pair-construction soundness", PairSoundness},
      {"evaluator oracle equivalence", EvaluatorOracle},
      {"SIGHAN13 auxiliary filter", [&] { return Sighan13Fixture(data_dir); }},
      {"overfit check", Overfit},
      {"contrastive geometry", GeometryAnalog},
      {"definition-strategy ordering", StrategyOrdering},
      {"data statistics", [&] { return DataStatistics(data_dir); }},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " ("
              << criteria[i].first << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
