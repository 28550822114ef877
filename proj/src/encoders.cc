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

#include "dictcsc/encoders.h"

#include <cmath>
#include <limits>
#include <random>

#include "dictcsc/errors.h"

namespace dictcsc {
namespace {

constexpr double kNormEpsilon = 1e-5;

template <typename Scalar>
void CheckLength(TextView sentence, int max_length) {
  if (static_cast<long>(sentence.size()) > max_length) {
    throw LengthError("sentence of length " + std::to_string(sentence.size()) +
                      " exceeds max_length " + std::to_string(max_length));
  }
}

template <typename Scalar>
MatrixX<Scalar> Uniform(Eigen::Index rows, Eigen::Index cols, double bound,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(dist(rng));
  }
  return m;
}

template <typename Scalar>
void AddRowBias(MatrixX<Scalar>& m, const MatrixX<Scalar>& bias) {
  m.rowwise() += bias.row(0);
}

// Row-wise layer norm; stores the normalized input and reciprocal std.
template <typename Scalar>
MatrixX<Scalar> NormForward(const MatrixX<Scalar>& x, const MatrixX<Scalar>& gamma,
                            const MatrixX<Scalar>& beta, MatrixX<Scalar>& xhat,
                            VectorX<Scalar>& rstd) {
  const Eigen::Index n = x.cols();
  xhat.resize(x.rows(), n);
  rstd.resize(x.rows());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Scalar mean = x.row(t).mean();
    const auto centered = (x.row(t).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
    rstd(t) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kNormEpsilon));
    xhat.row(t) = centered * rstd(t);
  }
  MatrixX<Scalar> out = xhat.array().rowwise() * gamma.row(0).array();
  out.rowwise() += beta.row(0);
  return out;
}

template <typename Scalar>
MatrixX<Scalar> NormBackward(const MatrixX<Scalar>& d_out,
                             const MatrixX<Scalar>& gamma,
                             const MatrixX<Scalar>& xhat,
                             const VectorX<Scalar>& rstd,
                             MatrixX<Scalar>& d_gamma, MatrixX<Scalar>& d_beta) {
  d_gamma.row(0) += (d_out.array() * xhat.array()).colwise().sum().matrix();
  d_beta.row(0) += d_out.colwise().sum();
  const MatrixX<Scalar> d_xhat = d_out.array().rowwise() * gamma.row(0).array();
  MatrixX<Scalar> d_in(d_out.rows(), d_out.cols());
  for (Eigen::Index t = 0; t < d_out.rows(); ++t) {
    const Scalar mean_d = d_xhat.row(t).mean();
    const Scalar mean_dx = d_xhat.row(t).dot(xhat.row(t)) /
                           static_cast<Scalar>(d_out.cols());
    d_in.row(t) = rstd(t) * (d_xhat.row(t).array() - mean_d -
                             xhat.row(t).array() * mean_dx)
                                .matrix();
  }
  return d_in;
}

template <typename Scalar>
Scalar Gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar GeluDerivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
  const Scalar pdf =
      std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(M_PI));
  return cdf + x * pdf;
}

template <typename Scalar>
void SoftmaxRowsInPlace(MatrixX<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Scalar max = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - max).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

void EncoderConfig::Validate() const {
  if (hidden_size < 1) throw ConfigError("hidden_size must be positive");
  if (heads < 1 || hidden_size % heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (layers < 0) throw ConfigError("layers must be non-negative");
  if (max_length < 1) throw ConfigError("max_length must be at least 1");
  if (ffn_size < 0) throw ConfigError("ffn_size must be non-negative");
}

// --- LookupEncoder ---------------------------------------------------------

template <typename Scalar>
LookupEncoder<Scalar>::LookupEncoder(Vocabulary vocab, MatrixX<Scalar> table,
                                     int max_length)
    : vocab_(std::move(vocab)), table_(std::move(table)), max_length_(max_length) {
  if (table_.rows() != vocab_.size()) {
    throw ConfigError("lookup table has " + std::to_string(table_.rows()) +
                      " rows for a vocabulary of " +
                      std::to_string(vocab_.size()));
  }
}

template <typename Scalar>
RepSequence<Scalar> LookupEncoder<Scalar>::Encode(TextView sentence) const {
  CheckLength<Scalar>(sentence, max_length_);
  RepSequence<Scalar> rep;
  rep.values.resize(static_cast<Eigen::Index>(sentence.size()), table_.cols());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    rep.values.row(static_cast<Eigen::Index>(t)) =
        table_.row(vocab_.IdOf(sentence[t]));
  }
  rep.valid_length = rep.values.rows();
  return rep;
}

// --- Weights ---------------------------------------------------------------

template <typename Scalar>
EncoderWeights<Scalar> EncoderWeights<Scalar>::Zeros(const EncoderConfig& config) {
  config.Validate();
  const Eigen::Index h = config.hidden_size;
  const Eigen::Index f = config.ffn();
  EncoderWeights w;
  w.token_embedding = MatrixX<Scalar>::Zero(config.vocab.size(), h);
  w.position_embedding = MatrixX<Scalar>::Zero(config.max_length, h);
  w.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& l : w.layers) {
    for (auto* m : {&l.query_weight, &l.key_weight, &l.value_weight,
                    &l.output_weight}) {
      *m = MatrixX<Scalar>::Zero(h, h);
    }
    for (auto* m : {&l.query_bias, &l.key_bias, &l.value_bias, &l.output_bias,
                    &l.attention_norm_gamma, &l.attention_norm_beta,
                    &l.ffn_out_bias, &l.ffn_norm_gamma, &l.ffn_norm_beta}) {
      *m = MatrixX<Scalar>::Zero(1, h);
    }
    l.ffn_in_weight = MatrixX<Scalar>::Zero(h, f);
    l.ffn_in_bias = MatrixX<Scalar>::Zero(1, f);
    l.ffn_out_weight = MatrixX<Scalar>::Zero(f, h);
  }
  return w;
}

template <typename Scalar>
EncoderWeights<Scalar> EncoderWeights<Scalar>::Random(const EncoderConfig& config,
                                                      std::uint64_t seed) {
  EncoderWeights w = Zeros(config);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  w.ForEach([&](const std::string& name, MatrixX<Scalar>& m) {
    if (name.ends_with(".gamma")) {
      m.setOnes();
    } else if (name.ends_with(".bias") || name.ends_with(".beta")) {
      m.setZero();
    } else {
      m = Uniform<Scalar>(m.rows(), m.cols(), bound, rng);
    }
  });
  return w;
}

template <typename Scalar>
template <typename To>
EncoderWeights<To> EncoderWeights<Scalar>::Cast() const {
  EncoderWeights<To> out;
  out.token_embedding = token_embedding.template cast<To>();
  out.position_embedding = position_embedding.template cast<To>();
  std::vector<const MatrixX<Scalar>*> src;
  for (const auto& l : layers) {
    LayerWeights<Scalar>::Visit(l, "", [&src](const std::string&,
                                              const MatrixX<Scalar>& m) {
      src.push_back(&m);
    });
  }
  out.layers.resize(layers.size());
  std::size_t k = 0;
  for (auto& l : out.layers) {
    LayerWeights<To>::Visit(l, "", [&](const std::string&, MatrixX<To>& m) {
      m = src[k++]->template cast<To>();
    });
  }
  return out;
}

template <typename Scalar>
CscWeights<Scalar> CscWeights<Scalar>::Zeros(const EncoderConfig& config) {
  CscWeights w;
  w.encoder = EncoderWeights<Scalar>::Zeros(config);
  w.head_weight = MatrixX<Scalar>::Zero(config.hidden_size, config.vocab.size());
  w.head_bias = MatrixX<Scalar>::Zero(1, config.vocab.size());
  return w;
}

// --- TransformerEncoder ----------------------------------------------------

template <typename Scalar>
TransformerEncoder<Scalar>::TransformerEncoder(EncoderConfig config,
                                               EncoderWeights<Scalar> weights)
    : config_(std::move(config)), weights_(std::move(weights)) {
  config_.Validate();
  if (weights_.token_embedding.rows() != config_.vocab.size() ||
      weights_.token_embedding.cols() != config_.hidden_size ||
      weights_.position_embedding.rows() != config_.max_length ||
      static_cast<int>(weights_.layers.size()) != config_.layers) {
    throw ConfigError("encoder weights do not match the configuration");
  }
}

template <typename Scalar>
TransformerEncoder<Scalar> TransformerEncoder<Scalar>::Random(
    const EncoderConfig& config, std::uint64_t seed) {
  return TransformerEncoder(config, EncoderWeights<Scalar>::Random(config, seed));
}

template <typename Scalar>
RepSequence<Scalar> TransformerEncoder<Scalar>::Encode(TextView sentence) const {
  RepSequence<Scalar> rep;
  rep.values = Forward(sentence, nullptr);
  rep.valid_length = rep.values.rows();
  return rep;
}

template <typename Scalar>
void TransformerEncoder<Scalar>::VisitParameters(
    const typename Encoder<Scalar>::ParameterVisitor& visit) const {
  weights_.ForEach(
      [&visit](const std::string& name, const MatrixX<Scalar>& m) { visit(name, m); });
}

template <typename Scalar>
MatrixX<Scalar> TransformerEncoder<Scalar>::Forward(TextView sentence,
                                                    Cache* cache) const {
  CheckLength<Scalar>(sentence, config_.max_length);
  return ForwardIds(config_.vocab.Ids(sentence), cache);
}

template <typename Scalar>
MatrixX<Scalar> TransformerEncoder<Scalar>::ForwardIds(const std::vector<int>& ids,
                                                       Cache* cache) const {
  const auto length = static_cast<Eigen::Index>(ids.size());
  if (length > config_.max_length) {
    throw LengthError("sequence of length " + std::to_string(length) +
                      " exceeds max_length " + std::to_string(config_.max_length));
  }
  const Eigen::Index h = config_.hidden_size;
  const Eigen::Index dh = config_.head_size();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix x(length, h);
  for (Eigen::Index t = 0; t < length; ++t) {
    x.row(t) = weights_.token_embedding.row(ids[t]) +
               weights_.position_embedding.row(t);
  }
  if (cache != nullptr) {
    cache->ids = ids;
    cache->layers.assign(weights_.layers.size(), LayerCache<Scalar>{});
  }

  for (std::size_t li = 0; li < weights_.layers.size(); ++li) {
    const auto& w = weights_.layers[li];
    LayerCache<Scalar> local;
    LayerCache<Scalar>& c = cache != nullptr ? cache->layers[li] : local;
    c.input = x;
    c.query = x * w.query_weight;
    AddRowBias(c.query, w.query_bias);
    c.key = x * w.key_weight;
    AddRowBias(c.key, w.key_bias);
    c.value = x * w.value_weight;
    AddRowBias(c.value, w.value_bias);

    c.context.resize(length, h);
    c.probs.resize(static_cast<std::size_t>(config_.heads));
    for (int hd = 0; hd < config_.heads; ++hd) {
      const Eigen::Index off = hd * dh;
      Matrix scores = c.query.middleCols(off, dh) *
                      c.key.middleCols(off, dh).transpose() * scale;
      SoftmaxRowsInPlace(scores);
      c.context.middleCols(off, dh) = scores * c.value.middleCols(off, dh);
      c.probs[hd] = std::move(scores);
    }
    Matrix residual = c.context * w.output_weight;
    AddRowBias(residual, w.output_bias);
    residual += x;
    c.attention_norm_out =
        NormForward(residual, w.attention_norm_gamma, w.attention_norm_beta,
                    c.attention_norm_xhat, c.attention_norm_rstd);

    c.ffn_pre = c.attention_norm_out * w.ffn_in_weight;
    AddRowBias(c.ffn_pre, w.ffn_in_bias);
    c.ffn_act = c.ffn_pre.unaryExpr([](Scalar v) { return Gelu(v); });
    Matrix ffn_residual = c.ffn_act * w.ffn_out_weight;
    AddRowBias(ffn_residual, w.ffn_out_bias);
    ffn_residual += c.attention_norm_out;
    x = NormForward(ffn_residual, w.ffn_norm_gamma, w.ffn_norm_beta,
                    c.ffn_norm_xhat, c.ffn_norm_rstd);
  }
  return x;
}

template <typename Scalar>
void TransformerEncoder<Scalar>::Backward(const Cache& cache,
                                          const Matrix& d_output,
                                          EncoderWeights<Scalar>& grads) const {
  const Eigen::Index dh = config_.head_size();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  Matrix d_x = d_output;

  for (std::size_t li = weights_.layers.size(); li-- > 0;) {
    const auto& w = weights_.layers[li];
    auto& g = grads.layers[li];
    const auto& c = cache.layers[li];

    // Feed-forward sublayer.
    Matrix d_ffn_residual = NormBackward(d_x, w.ffn_norm_gamma, c.ffn_norm_xhat,
                                         c.ffn_norm_rstd, g.ffn_norm_gamma,
                                         g.ffn_norm_beta);
    g.ffn_out_weight.noalias() += c.ffn_act.transpose() * d_ffn_residual;
    g.ffn_out_bias.row(0) += d_ffn_residual.colwise().sum();
    Matrix d_pre = d_ffn_residual * w.ffn_out_weight.transpose();
    d_pre.array() *=
        c.ffn_pre.unaryExpr([](Scalar v) { return GeluDerivative(v); }).array();
    g.ffn_in_weight.noalias() += c.attention_norm_out.transpose() * d_pre;
    g.ffn_in_bias.row(0) += d_pre.colwise().sum();
    Matrix d_attn_norm_out = d_ffn_residual;
    d_attn_norm_out.noalias() += d_pre * w.ffn_in_weight.transpose();

    // Attention sublayer.
    Matrix d_residual = NormBackward(d_attn_norm_out, w.attention_norm_gamma,
                                     c.attention_norm_xhat, c.attention_norm_rstd,
                                     g.attention_norm_gamma, g.attention_norm_beta);
    g.output_weight.noalias() += c.context.transpose() * d_residual;
    g.output_bias.row(0) += d_residual.colwise().sum();
    const Matrix d_context = d_residual * w.output_weight.transpose();

    Matrix d_query(c.query.rows(), c.query.cols());
    Matrix d_key(c.key.rows(), c.key.cols());
    Matrix d_value(c.value.rows(), c.value.cols());
    for (int hd = 0; hd < config_.heads; ++hd) {
      const Eigen::Index off = hd * dh;
      const Matrix& p = c.probs[hd];
      const auto d_ctx = d_context.middleCols(off, dh);
      d_value.middleCols(off, dh) = p.transpose() * d_ctx;
      const Matrix d_p = d_ctx * c.value.middleCols(off, dh).transpose();
      const VectorX<Scalar> row_dot = (d_p.array() * p.array()).rowwise().sum();
      const Matrix d_scores =
          (p.array() * (d_p.array().colwise() - row_dot.array())).matrix() * scale;
      d_query.middleCols(off, dh) = d_scores * c.key.middleCols(off, dh);
      d_key.middleCols(off, dh) = d_scores.transpose() * c.query.middleCols(off, dh);
    }
    g.query_weight.noalias() += c.input.transpose() * d_query;
    g.query_bias.row(0) += d_query.colwise().sum();
    g.key_weight.noalias() += c.input.transpose() * d_key;
    g.key_bias.row(0) += d_key.colwise().sum();
    g.value_weight.noalias() += c.input.transpose() * d_value;
    g.value_bias.row(0) += d_value.colwise().sum();

    d_x = d_residual;
    d_x.noalias() += d_query * w.query_weight.transpose();
    d_x.noalias() += d_key * w.key_weight.transpose();
    d_x.noalias() += d_value * w.value_weight.transpose();
  }

  for (Eigen::Index t = 0; t < d_x.rows(); ++t) {
    grads.token_embedding.row(cache.ids[t]) += d_x.row(t);
    grads.position_embedding.row(t) += d_x.row(t);
  }
}

// --- CscModel --------------------------------------------------------------

template <typename Scalar>
CscModel<Scalar>::CscModel(TransformerEncoder<Scalar> encoder, Matrix head_weight,
                           Matrix head_bias)
    : encoder_(std::move(encoder)),
      head_weight_(std::move(head_weight)),
      head_bias_(std::move(head_bias)) {
  const auto& cfg = encoder_.config();
  if (head_weight_.rows() != cfg.hidden_size ||
      head_weight_.cols() != cfg.vocab.size() || head_bias_.rows() != 1 ||
      head_bias_.cols() != cfg.vocab.size()) {
    throw ConfigError("prediction head does not match the encoder configuration");
  }
}

template <typename Scalar>
CscModel<Scalar> CscModel<Scalar>::Random(const EncoderConfig& config,
                                          std::uint64_t seed) {
  auto encoder = TransformerEncoder<Scalar>::Random(config, seed);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  Matrix head = Uniform<Scalar>(config.hidden_size, config.vocab.size(), bound, rng);
  return CscModel(std::move(encoder), std::move(head),
                  Matrix::Zero(1, config.vocab.size()));
}

template <typename Scalar>
typename CscModel<Scalar>::Pass CscModel<Scalar>::Forward(TextView sentence) const {
  Pass pass;
  pass.hidden = encoder_.Forward(sentence, &pass.cache);
  pass.logits = pass.hidden * head_weight_;
  pass.logits.rowwise() += head_bias_.row(0);
  return pass;
}

template <typename Scalar>
MatrixX<Scalar> CscModel<Scalar>::Probabilities(TextView sentence) const {
  Matrix hidden = encoder_.Forward(sentence, nullptr);
  Matrix probs = hidden * head_weight_;
  probs.rowwise() += head_bias_.row(0);
  SoftmaxRowsInPlace(probs);
  return probs;
}

template <typename Scalar>
Text CscModel<Scalar>::Predict(TextView sentence) const {
  Matrix logits = encoder_.Forward(sentence, nullptr) * head_weight_;
  logits.rowwise() += head_bias_.row(0);
  Text out(sentence.size(), U'\0');
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index v = 1; v < logits.cols(); ++v) {
      if (logits(t, v) > logits(t, best)) best = v;
    }
    // The unknown slot cannot be written back; keep the input character.
    out[t] = best == Vocabulary::kUnknownId
                 ? sentence[t]
                 : encoder_.vocab().CharAt(static_cast<int>(best));
  }
  return out;
}

template <typename Scalar>
void CscModel<Scalar>::Backward(const Pass& pass, const Matrix& d_hidden,
                                const Matrix& d_logits,
                                CscWeights<Scalar>& grads) const {
  grads.head_weight.noalias() += pass.hidden.transpose() * d_logits;
  grads.head_bias.row(0) += d_logits.colwise().sum();
  Matrix d_out = d_hidden;
  d_out.noalias() += d_logits * head_weight_.transpose();
  encoder_.Backward(pass.cache, d_out, grads.encoder);
}

template class LookupEncoder<float>;
template class LookupEncoder<double>;
template struct EncoderWeights<float>;
template struct EncoderWeights<double>;
template EncoderWeights<double> EncoderWeights<float>::Cast<double>() const;
template EncoderWeights<float> EncoderWeights<double>::Cast<float>() const;
template EncoderWeights<float> EncoderWeights<float>::Cast<float>() const;
template EncoderWeights<double> EncoderWeights<double>::Cast<double>() const;
template struct CscWeights<float>;
template struct CscWeights<double>;
template class TransformerEncoder<float>;
template class TransformerEncoder<double>;
template class CscModel<float>;
template class CscModel<double>;

}  // namespace dictcsc
