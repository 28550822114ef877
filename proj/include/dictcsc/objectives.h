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

#ifndef DICTCSC_OBJECTIVES_H_
#define DICTCSC_OBJECTIVES_H_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dictcsc/encoders.h"
#include "dictcsc/errors.h"

namespace dictcsc {

// Scores f(o, k, s) entering the contrastive objective, held as natural logs
// so that exp-of-dot scores never overflow. positive_score() and
// negative_score(i) recover the strictly positive scores themselves.
template <typename Scalar>
struct MetricScores {
  Scalar log_positive = 0;
  std::vector<Scalar> log_negatives;

  // From raw scores; throws std::invalid_argument unless all are > 0 and
  // finite.
  static MetricScores FromScores(Scalar positive, std::span<const Scalar> negatives) {
    auto check = [](Scalar v) {
      if (!(v > 0) || !std::isfinite(v)) {
        throw std::invalid_argument("metric scores must be positive and finite");
      }
      return std::log(v);
    };
    MetricScores out;
    out.log_positive = check(positive);
    for (Scalar v : negatives) out.log_negatives.push_back(check(v));
    return out;
  }

  Scalar positive_score() const { return std::exp(log_positive); }
  Scalar negative_score(std::size_t i) const { return std::exp(log_negatives[i]); }
  std::size_t size() const { return log_negatives.size(); }
};

template <typename Scalar>
void CheckRow(const RepSequence<Scalar>& rep, Eigen::Index s, const char* what) {
  if (s < 0 || s >= rep.valid_length) {
    throw IndexError(std::string(what) + ": position " + std::to_string(s) +
                     " outside valid length " + std::to_string(rep.valid_length));
  }
}

// o[s] . k[s], the exponent of the dot-product metric.
template <typename Scalar>
Scalar DotExponent(const RepSequence<Scalar>& original,
                   const RepSequence<Scalar>& other, Eigen::Index s) {
  CheckRow(original, s, "original");
  CheckRow(other, s, "other");
  if (original.hidden_size() != other.hidden_size()) {
    throw std::invalid_argument("hidden sizes differ");
  }
  return original.values.row(s).dot(other.values.row(s));
}

// exp(o[s] . k[s]); used for phonetic and visual knowledge.
template <typename Scalar>
Scalar MetricDot(const RepSequence<Scalar>& original,
                 const RepSequence<Scalar>& other, Eigen::Index s) {
  return std::exp(DotExponent(original, other, s));
}

// Mean of rows s..s+w of the original.
template <typename Scalar>
RowVectorX<Scalar> SpanMean(const RepSequence<Scalar>& original, Eigen::Index s,
                            Eigen::Index w) {
  CheckRow(original, s, "original");
  CheckRow(original, s + w, "original");
  return original.values.middleRows(s, w + 1).colwise().mean();
}

template <typename Scalar>
Scalar Cosine(const RowVectorX<Scalar>& a, const RowVectorX<Scalar>& b) {
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > 0) || !(nb > 0)) {
    throw DegenerateInputError("cosine of a zero-norm pooled vector");
  }
  return a.dot(b) / (na * nb);
}

// cos(mean(o[s..s+w]), mean(valid rows of def)); used for definitions.
template <typename Scalar>
Scalar MetricCosineSpan(const RepSequence<Scalar>& original,
                        const RepSequence<Scalar>& definition, Eigen::Index s,
                        Eigen::Index w) {
  if (definition.valid_length < 1) {
    throw DegenerateInputError("empty definition representation");
  }
  return Cosine<Scalar>(SpanMean(original, s, w),
                        definition.valid_rows().colwise().mean());
}

template <typename Scalar>
struct InfoNceResult {
  Scalar loss = 0;
  // dLoss / dlog f for the positive and each negative.
  Scalar d_log_positive = 0;
  std::vector<Scalar> d_log_negatives;
};

// -log(pos / (pos + sum neg)) evaluated as logsumexp(all) - log pos.
template <typename Scalar>
InfoNceResult<Scalar> InfoNce(const MetricScores<Scalar>& scores) {
  if (scores.log_negatives.empty()) {
    throw std::invalid_argument("InfoNCE needs at least one negative");
  }
  Scalar max = scores.log_positive;
  for (Scalar v : scores.log_negatives) max = std::max(max, v);
  Scalar sum = std::exp(scores.log_positive - max);
  for (Scalar v : scores.log_negatives) sum += std::exp(v - max);
  const Scalar log_total = max + std::log(sum);

  InfoNceResult<Scalar> r;
  r.loss = log_total - scores.log_positive;
  r.d_log_positive = std::exp(scores.log_positive - log_total) - Scalar(1);
  r.d_log_negatives.reserve(scores.size());
  for (Scalar v : scores.log_negatives) {
    r.d_log_negatives.push_back(std::exp(v - log_total));
  }
  return r;
}

// The textbook form on raw scores; overflows for large exponents.
template <typename Scalar>
Scalar InfoNceNaive(Scalar positive, std::span<const Scalar> negatives) {
  Scalar total = positive;
  for (Scalar v : negatives) total += v;
  return -std::log(positive / total);
}

enum class CosineScoring {
  // f = exp(cos / temperature)
  kExponential,
  // f = max(cos, floor); ablation only
  kClampedRaw,
};

template <typename Scalar>
struct ContrastiveOptions {
  // Multiplies the dot-product exponent; 1 reproduces exp(o.k) exactly.
  Scalar dot_scale = 1;
  Scalar cosine_temperature = 1;
  CosineScoring cosine_scoring = CosineScoring::kExponential;
  Scalar clamp_floor = Scalar(1e-6);
};

template <typename Scalar>
struct ContrastiveLoss {
  Scalar loss = 0;
  MetricScores<Scalar> scores;
  // dLoss / d original.values; zero outside the rows the metric reads.
  MatrixX<Scalar> d_original;
};

// Contrastive loss with the dot-product metric at row s. Gradient flows to
// the original only; positive and negatives come from frozen encoders.
template <typename Scalar>
ContrastiveLoss<Scalar> DotContrastiveLoss(
    const RepSequence<Scalar>& original, const RepSequence<Scalar>& positive,
    std::span<const RepSequence<Scalar>> negatives, Eigen::Index s,
    const ContrastiveOptions<Scalar>& options = {}) {
  ContrastiveLoss<Scalar> out;
  out.scores.log_positive = options.dot_scale * DotExponent(original, positive, s);
  for (const auto& n : negatives) {
    out.scores.log_negatives.push_back(options.dot_scale * DotExponent(original, n, s));
  }
  const auto nce = InfoNce(out.scores);
  out.loss = nce.loss;
  out.d_original = MatrixX<Scalar>::Zero(original.length(), original.hidden_size());
  auto row = out.d_original.row(s);
  row += nce.d_log_positive * options.dot_scale * positive.values.row(s);
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    row += nce.d_log_negatives[i] * options.dot_scale * negatives[i].values.row(s);
  }
  return out;
}

// Contrastive loss with the span-cosine metric over rows s..s+w of the
// original and the mean-pooled definitions.
template <typename Scalar>
ContrastiveLoss<Scalar> CosineContrastiveLoss(
    const RepSequence<Scalar>& original, const RepSequence<Scalar>& positive,
    std::span<const RepSequence<Scalar>> negatives, Eigen::Index s, Eigen::Index w,
    const ContrastiveOptions<Scalar>& options = {}) {
  const RowVectorX<Scalar> u = SpanMean(original, s, w);
  const Scalar u_norm = u.norm();
  if (!(u_norm > 0)) throw DegenerateInputError("zero-norm span representation");

  std::vector<RowVectorX<Scalar>> pooled;
  pooled.reserve(negatives.size() + 1);
  auto pool = [&pooled](const RepSequence<Scalar>& r) {
    if (r.valid_length < 1) throw DegenerateInputError("empty definition representation");
    pooled.push_back(r.valid_rows().colwise().mean());
  };
  pool(positive);
  for (const auto& n : negatives) pool(n);

  std::vector<Scalar> cosines;
  std::vector<Scalar> d_log_d_cos;
  ContrastiveLoss<Scalar> out;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const Scalar c = Cosine<Scalar>(u, pooled[i]);
    Scalar log_score;
    Scalar slope;
    if (options.cosine_scoring == CosineScoring::kExponential) {
      log_score = c / options.cosine_temperature;
      slope = Scalar(1) / options.cosine_temperature;
    } else if (c > options.clamp_floor) {
      log_score = std::log(c);
      slope = Scalar(1) / c;
    } else {
      log_score = std::log(options.clamp_floor);
      slope = 0;
    }
    cosines.push_back(c);
    d_log_d_cos.push_back(slope);
    if (i == 0) {
      out.scores.log_positive = log_score;
    } else {
      out.scores.log_negatives.push_back(log_score);
    }
  }
  const auto nce = InfoNce(out.scores);
  out.loss = nce.loss;

  RowVectorX<Scalar> d_u = RowVectorX<Scalar>::Zero(u.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const Scalar g = (i == 0 ? nce.d_log_positive : nce.d_log_negatives[i - 1]) *
                     d_log_d_cos[i];
    if (g == 0) continue;
    const Scalar v_norm = pooled[i].norm();
    // d cos(u, v) / du = v / (|u||v|) - cos * u / |u|^2
    d_u += g * (pooled[i] / (u_norm * v_norm) - cosines[i] * u / (u_norm * u_norm));
  }
  out.d_original = MatrixX<Scalar>::Zero(original.length(), original.hidden_size());
  out.d_original.middleRows(s, w + 1).rowwise() += d_u / static_cast<Scalar>(w + 1);
  return out;
}

template <typename Scalar>
struct CrossEntropy {
  Scalar sum = 0;          // summed over scored positions
  Eigen::Index count = 0;  // number of scored positions
  MatrixX<Scalar> d_logits;  // d sum / d logits

  Scalar mean() const { return count > 0 ? sum / static_cast<Scalar>(count) : Scalar(0); }
};

// Softmax cross-entropy of each masked row of `logits` (T x V) against the
// vocabulary id in `targets`. An empty mask scores nothing.
template <typename Scalar>
CrossEntropy<Scalar> CrossEntropySum(const MatrixX<Scalar>& logits,
                                     std::span<const int> targets,
                                     std::span<const bool> mask) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows() ||
      mask.size() != targets.size()) {
    throw std::invalid_argument("logits, targets and mask disagree in length");
  }
  CrossEntropy<Scalar> out;
  out.d_logits = MatrixX<Scalar>::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    if (!mask[t]) continue;
    const int y = targets[t];
    if (y < 0 || y >= logits.cols()) throw IndexError("target id out of range");
    const Scalar max = logits.row(t).maxCoeff();
    const RowVectorX<Scalar> e = (logits.row(t).array() - max).exp().matrix();
    const Scalar z = e.sum();
    out.sum += std::log(z) + max - logits(t, y);
    out.d_logits.row(t) = e / z;
    out.d_logits(t, y) -= Scalar(1);
    ++out.count;
  }
  return out;
}

// Mean per-position cross-entropy over masked rows; 0 for an empty mask.
// d_logits is scaled to the mean.
template <typename Scalar>
CrossEntropy<Scalar> CscLoss(const MatrixX<Scalar>& logits, std::span<const int> targets,
                             std::span<const bool> mask) {
  auto ce = CrossEntropySum(logits, targets, mask);
  if (ce.count > 0) ce.d_logits /= static_cast<Scalar>(ce.count);
  return ce;
}

// Non-negative task weights of the combined objective.
struct LossWeights {
  double csc = 1.0;
  double phonetic = 1.0;
  double visual = 1.0;
  double definition = 1.0;

  bool all_zero() const {
    return csc == 0 && phonetic == 0 && visual == 0 && definition == 0;
  }
  // Throws ConfigError on a negative or non-finite weight.
  void Validate() const {
    for (double w : {csc, phonetic, visual, definition}) {
      if (!(w >= 0) || !std::isfinite(w)) {
        throw ConfigError("loss weights must be finite and non-negative");
      }
    }
  }
};

// lambda1 * l_csc + lambda2 * l_p + lambda3 * l_v + lambda4 * l_d. An absent
// objective is passed as 0.
template <typename Scalar>
Scalar CombinedLoss(Scalar l_csc, Scalar l_p, Scalar l_v, Scalar l_d,
                    const LossWeights& w) {
  return static_cast<Scalar>(w.csc) * l_csc + static_cast<Scalar>(w.phonetic) * l_p +
         static_cast<Scalar>(w.visual) * l_v + static_cast<Scalar>(w.definition) * l_d;
}

}  // namespace dictcsc

#endif  // DICTCSC_OBJECTIVES_H_
