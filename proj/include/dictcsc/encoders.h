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

#ifndef DICTCSC_ENCODERS_H_
#define DICTCSC_ENCODERS_H_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dictcsc/utf8.h"
#include "dictcsc/vocabulary.h"

namespace dictcsc {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Encoder output for one sentence: T rows of hidden size h. Rows at or past
// valid_length are padding and never enter a pooled quantity.
template <typename Scalar>
struct RepSequence {
  MatrixX<Scalar> values;
  Eigen::Index valid_length = 0;

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index hidden_size() const { return values.cols(); }
  auto valid_rows() const { return values.topRows(valid_length); }
};

struct EncoderConfig {
  Vocabulary vocab;
  int hidden_size = 64;
  int layers = 2;
  int heads = 2;
  int max_length = 128;
  // Feed-forward width; 0 selects 4 * hidden_size.
  int ffn_size = 0;

  int ffn() const { return ffn_size > 0 ? ffn_size : 4 * hidden_size; }
  int head_size() const { return hidden_size / heads; }
  // Throws ConfigError.
  void Validate() const;
};

template <typename Scalar>
class Encoder {
 public:
  using ParameterVisitor =
      std::function<void(const std::string&, const MatrixX<Scalar>&)>;

  virtual ~Encoder() = default;

  // Throws LengthError when the sentence exceeds max_length(). Characters
  // outside vocab() are encoded as the unknown symbol.
  virtual RepSequence<Scalar> Encode(TextView sentence) const = 0;
  virtual int hidden_size() const = 0;
  virtual int max_length() const = 0;
  virtual const Vocabulary& vocab() const = 0;
  virtual void VisitParameters(const ParameterVisitor& /*visit*/) const {}
};

// Row `id` of a fixed table per character. Used as a deterministic stand-in
// in tests and as a similarity encoder with hand-built embeddings.
template <typename Scalar>
class LookupEncoder final : public Encoder<Scalar> {
 public:
  // `table` has vocab.size() rows (row 0 is the unknown symbol).
  LookupEncoder(Vocabulary vocab, MatrixX<Scalar> table, int max_length = 128);

  RepSequence<Scalar> Encode(TextView sentence) const override;
  int hidden_size() const override { return static_cast<int>(table_.cols()); }
  int max_length() const override { return max_length_; }
  const Vocabulary& vocab() const override { return vocab_; }
  void VisitParameters(
      const typename Encoder<Scalar>::ParameterVisitor& visit) const override {
    visit("lookup.table", table_);
  }

 private:
  Vocabulary vocab_;
  MatrixX<Scalar> table_;
  int max_length_;
};

// Parameters of one post-norm transformer block. Biases and norm parameters
// are 1 x n row matrices.
template <typename Scalar>
struct LayerWeights {
  MatrixX<Scalar> query_weight, query_bias;
  MatrixX<Scalar> key_weight, key_bias;
  MatrixX<Scalar> value_weight, value_bias;
  MatrixX<Scalar> output_weight, output_bias;
  MatrixX<Scalar> attention_norm_gamma, attention_norm_beta;
  MatrixX<Scalar> ffn_in_weight, ffn_in_bias;
  MatrixX<Scalar> ffn_out_weight, ffn_out_bias;
  MatrixX<Scalar> ffn_norm_gamma, ffn_norm_beta;

  template <typename Self, typename Fn>
  static void Visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + "attention.query.weight", self.query_weight);
    fn(prefix + "attention.query.bias", self.query_bias);
    fn(prefix + "attention.key.weight", self.key_weight);
    fn(prefix + "attention.key.bias", self.key_bias);
    fn(prefix + "attention.value.weight", self.value_weight);
    fn(prefix + "attention.value.bias", self.value_bias);
    fn(prefix + "attention.output.weight", self.output_weight);
    fn(prefix + "attention.output.bias", self.output_bias);
    fn(prefix + "attention.norm.gamma", self.attention_norm_gamma);
    fn(prefix + "attention.norm.beta", self.attention_norm_beta);
    fn(prefix + "ffn.in.weight", self.ffn_in_weight);
    fn(prefix + "ffn.in.bias", self.ffn_in_bias);
    fn(prefix + "ffn.out.weight", self.ffn_out_weight);
    fn(prefix + "ffn.out.bias", self.ffn_out_bias);
    fn(prefix + "ffn.norm.gamma", self.ffn_norm_gamma);
    fn(prefix + "ffn.norm.beta", self.ffn_norm_beta);
  }
};

template <typename Scalar>
struct EncoderWeights {
  MatrixX<Scalar> token_embedding;     // vocab x h
  MatrixX<Scalar> position_embedding;  // max_length x h
  std::vector<LayerWeights<Scalar>> layers;

  static EncoderWeights Zeros(const EncoderConfig& config);
  // Weights and embeddings ~ U(-1/sqrt(h), 1/sqrt(h)); biases 0; norm gain 1.
  static EncoderWeights Random(const EncoderConfig& config, std::uint64_t seed);

  template <typename Self, typename Fn>
  static void Visit(Self& self, Fn&& fn) {
    fn("embeddings.token", self.token_embedding);
    fn("embeddings.position", self.position_embedding);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      LayerWeights<Scalar>::Visit(self.layers[i],
                                  "layer" + std::to_string(i) + ".", fn);
    }
  }
  template <typename Fn>
  void ForEach(Fn&& fn) {
    Visit(*this, std::forward<Fn>(fn));
  }
  template <typename Fn>
  void ForEach(Fn&& fn) const {
    Visit(*this, std::forward<Fn>(fn));
  }

  template <typename To>
  EncoderWeights<To> Cast() const;
};

// Per-layer activations kept for the backward pass.
template <typename Scalar>
struct LayerCache {
  MatrixX<Scalar> input;
  MatrixX<Scalar> query, key, value;
  std::vector<MatrixX<Scalar>> probs;  // one T x T matrix per head
  MatrixX<Scalar> context;
  MatrixX<Scalar> attention_norm_xhat;
  VectorX<Scalar> attention_norm_rstd;
  MatrixX<Scalar> attention_norm_out;
  MatrixX<Scalar> ffn_pre;
  MatrixX<Scalar> ffn_act;
  MatrixX<Scalar> ffn_norm_xhat;
  VectorX<Scalar> ffn_norm_rstd;
};

template <typename Scalar>
struct EncoderCache {
  std::vector<int> ids;
  std::vector<LayerCache<Scalar>> layers;
};

// Learned token + position embeddings followed by `layers` post-norm
// multi-head self-attention blocks with GELU feed-forward.
template <typename Scalar>
class TransformerEncoder final : public Encoder<Scalar> {
 public:
  using Matrix = MatrixX<Scalar>;
  using Cache = EncoderCache<Scalar>;

  TransformerEncoder(EncoderConfig config, EncoderWeights<Scalar> weights);
  static TransformerEncoder Random(const EncoderConfig& config,
                                   std::uint64_t seed);

  RepSequence<Scalar> Encode(TextView sentence) const override;
  int hidden_size() const override { return config_.hidden_size; }
  int max_length() const override { return config_.max_length; }
  const Vocabulary& vocab() const override { return config_.vocab; }
  void VisitParameters(
      const typename Encoder<Scalar>::ParameterVisitor& visit) const override;

  // T x h output; fills `cache` when non-null.
  Matrix Forward(TextView sentence, Cache* cache) const;
  Matrix ForwardIds(const std::vector<int>& ids, Cache* cache) const;
  // Accumulates dLoss/dWeights into `grads` given dLoss/dOutput.
  void Backward(const Cache& cache, const Matrix& d_output,
                EncoderWeights<Scalar>& grads) const;

  const EncoderConfig& config() const { return config_; }
  const EncoderWeights<Scalar>& weights() const { return weights_; }
  EncoderWeights<Scalar>& mutable_weights() { return weights_; }

  template <typename To>
  TransformerEncoder<To> Cast() const {
    return TransformerEncoder<To>(config_, weights_.template Cast<To>());
  }

 private:
  EncoderConfig config_;
  EncoderWeights<Scalar> weights_;
};

template <typename Scalar>
struct CscWeights {
  EncoderWeights<Scalar> encoder;
  MatrixX<Scalar> head_weight;  // h x vocab
  MatrixX<Scalar> head_bias;    // 1 x vocab

  static CscWeights Zeros(const EncoderConfig& config);

  template <typename Self, typename Fn>
  static void Visit(Self& self, Fn&& fn) {
    EncoderWeights<Scalar>::Visit(self.encoder, fn);
    fn("head.weight", self.head_weight);
    fn("head.bias", self.head_bias);
  }
  template <typename Fn>
  void ForEach(Fn&& fn) {
    Visit(*this, std::forward<Fn>(fn));
  }
  template <typename Fn>
  void ForEach(Fn&& fn) const {
    Visit(*this, std::forward<Fn>(fn));
  }
};

// The spell-checking model: a trainable encoder plus a per-position linear
// classifier over the vocabulary.
template <typename Scalar>
class CscModel {
 public:
  using Matrix = MatrixX<Scalar>;

  struct Pass {
    EncoderCache<Scalar> cache;
    Matrix hidden;  // T x h
    Matrix logits;  // T x vocab
  };

  CscModel(TransformerEncoder<Scalar> encoder, Matrix head_weight,
           Matrix head_bias);
  static CscModel Random(const EncoderConfig& config, std::uint64_t seed);

  Pass Forward(TextView sentence) const;
  // Row-wise softmax of the logits.
  Matrix Probabilities(TextView sentence) const;
  // Per-position argmax; ties resolve to the lowest vocabulary id.
  Text Predict(TextView sentence) const;

  // d_hidden is the gradient reaching the encoder output directly (from the
  // contrastive objectives); d_logits comes from the classification loss.
  void Backward(const Pass& pass, const Matrix& d_hidden, const Matrix& d_logits,
                CscWeights<Scalar>& grads) const;

  const TransformerEncoder<Scalar>& encoder() const { return encoder_; }
  TransformerEncoder<Scalar>& mutable_encoder() { return encoder_; }
  const Matrix& head_weight() const { return head_weight_; }
  const Matrix& head_bias() const { return head_bias_; }
  const EncoderConfig& config() const { return encoder_.config(); }

  // Visits encoder parameters followed by the head.
  template <typename Fn>
  void ForEachParameter(Fn&& fn) {
    EncoderWeights<Scalar>::Visit(encoder_.mutable_weights(), fn);
    fn("head.weight", head_weight_);
    fn("head.bias", head_bias_);
  }
  template <typename Fn>
  void ForEachParameter(Fn&& fn) const {
    EncoderWeights<Scalar>::Visit(encoder_.weights(), fn);
    fn("head.weight", head_weight_);
    fn("head.bias", head_bias_);
  }

  template <typename To>
  CscModel<To> Cast() const {
    return CscModel<To>(encoder_.template Cast<To>(),
                        head_weight_.template cast<To>(),
                        head_bias_.template cast<To>());
  }

 private:
  TransformerEncoder<Scalar> encoder_;
  Matrix head_weight_;
  Matrix head_bias_;
};

// Read-only handle over an immutable snapshot of an encoder. Nothing reachable
// through the handle can modify the parameters it was created with.
template <typename Scalar>
class FrozenEncoder final : public Encoder<Scalar> {
 public:
  explicit FrozenEncoder(std::shared_ptr<const Encoder<Scalar>> inner)
      : inner_(std::move(inner)) {}

  RepSequence<Scalar> Encode(TextView sentence) const override {
    return inner_->Encode(sentence);
  }
  int hidden_size() const override { return inner_->hidden_size(); }
  int max_length() const override { return inner_->max_length(); }
  const Vocabulary& vocab() const override { return inner_->vocab(); }
  void VisitParameters(
      const typename Encoder<Scalar>::ParameterVisitor& visit) const override {
    inner_->VisitParameters(visit);
  }

 private:
  std::shared_ptr<const Encoder<Scalar>> inner_;
};

// Deep-copies the encoder's current parameters into a frozen handle.
template <typename Scalar>
FrozenEncoder<Scalar> Freeze(const TransformerEncoder<Scalar>& encoder) {
  return FrozenEncoder<Scalar>(
      std::make_shared<const TransformerEncoder<Scalar>>(encoder));
}

template <typename Scalar>
FrozenEncoder<Scalar> Freeze(const LookupEncoder<Scalar>& encoder) {
  return FrozenEncoder<Scalar>(
      std::make_shared<const LookupEncoder<Scalar>>(encoder));
}

// Named copy of every parameter an encoder exposes, for drift checks.
template <typename Scalar>
std::vector<std::pair<std::string, MatrixX<Scalar>>> SnapshotParameters(
    const Encoder<Scalar>& encoder) {
  std::vector<std::pair<std::string, MatrixX<Scalar>>> out;
  encoder.VisitParameters([&out](const std::string& name,
                                 const MatrixX<Scalar>& value) {
    out.emplace_back(name, value);
  });
  return out;
}

// Mean of the valid rows of `rep`; the sentence representation used when
// comparing contexts and definitions.
template <typename Scalar>
VectorX<Scalar> MeanPool(const RepSequence<Scalar>& rep) {
  return rep.valid_rows().colwise().mean().transpose();
}

}  // namespace dictcsc

#endif  // DICTCSC_ENCODERS_H_
