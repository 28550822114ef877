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

#ifndef DICTCSC_TRAINER_H_
#define DICTCSC_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dictcsc/data_ingest.h"
#include "dictcsc/encoders.h"
#include "dictcsc/knowledge_base.h"
#include "dictcsc/objectives.h"
#include "dictcsc/pair_builder.h"
#include "dictcsc/random.h"

namespace dictcsc {

enum class CscPositions { kAll, kErrorsOnly };

struct TrainConfig {
  // [trainer]
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 5e-5;  // peak
  int warmup_steps = -1;        // -1: 5% of the total step count
  int max_length = 128;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double grad_clip = 1.0;       // global norm; 0 disables
  int contrastive_interval = 1; // apply contrastive objectives every k steps

  // [pair_builder]
  int negatives = 8;
  int per_sample_error_cap = 0;  // 0: every error position
  DefinitionStrategy definition_strategy = DefinitionStrategy::kFirst;

  // [objectives]
  LossWeights weights;
  CscPositions csc_positions = CscPositions::kAll;
  CosineScoring cosine_scoring = CosineScoring::kExponential;
  double cosine_temperature = 1.0;

  // [encoders]
  int hidden_size = 64;
  int layers = 2;
  int heads = 2;
  int ffn_size = 0;
  std::string init_checkpoint;
  std::string phonetic_checkpoint;
  std::string visual_checkpoint;
  std::string definition_checkpoint;

  // Throws ConfigError.
  void Validate() const;
  int ResolvedWarmup(std::int64_t total_steps) const;
  EncoderConfig MakeEncoderConfig(Vocabulary vocab) const;
};

// INI-style text: `[section]` headers and `key = value` lines. Unknown
// sections or keys throw ConfigError naming them.
TrainConfig ParseTrainConfig(std::istream& in);
TrainConfig LoadTrainConfig(const std::filesystem::path& path);
// Every field, in the format ParseTrainConfig reads.
std::string FormatTrainConfig(const TrainConfig& config);

// Linear warm-up from 0 to the peak over the warm-up steps, then linear
// decay to 0 at total_steps. Throws ConfigError when total_steps does not
// exceed the warm-up length, std::out_of_range when step is outside
// [0, total_steps].
double LrSchedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config);

// Decoupled-weight-decay Adam over every parameter of a CscModel. Biases and
// norm parameters are not decayed.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(const EncoderConfig& config, Options options);
  void Step(CscModel<float>& model, const CscWeights<float>& grads, double lr);
  std::int64_t steps() const { return steps_; }

 private:
  Options options_;
  CscWeights<float> m_;
  CscWeights<float> v_;
  std::int64_t steps_ = 0;
};

// Global L2 norm of a gradient set; scales it down to `max_norm` if larger.
// Returns the norm before clipping.
double ClipGradients(CscWeights<float>& grads, double max_norm);

// The frozen knowledge encoders E_P, E_V, E_D.
struct KnowledgeEncoders {
  std::shared_ptr<const Encoder<float>> phonetic;
  std::shared_ptr<const Encoder<float>> visual;
  std::shared_ptr<const Encoder<float>> definition;
};

// Contrastive batches for each sample of a CSC batch (outer index = sample).
using SampleBatches = std::vector<std::vector<ContrastiveBatch>>;

struct StepLosses {
  double csc = 0;
  double phonetic = 0;
  double visual = 0;
  double definition = 0;
  double total = 0;
  int phonetic_batches = 0;
  int visual_batches = 0;
  int definition_batches = 0;
};

// One optimizer update of the model from the combined loss over `batch` and
// its contrastive batches. Contrastive losses are averaged within a kind
// before weighting; a kind with no batches contributes 0. When every weight
// is 0 the model is left untouched. Throws NonFiniteLossError naming the
// objective.
StepLosses TrainingStep(CscModel<float>& model, AdamW& optimizer,
                        std::span<const CscSample> batch,
                        const SampleBatches& contrastive,
                        const KnowledgeEncoders& encoders, const TrainConfig& config,
                        double lr);

// Builds P/V/D batches for every error position of each sample (capped per
// sample), skipping kinds whose weight is 0 and batches that report the skip
// signal.
SampleBatches BuildContrastiveBatches(std::span<const CscSample> batch,
                                      const KnowledgeBase& kb,
                                      std::span<const char32_t> vocab,
                                      const KnowledgeEncoders& encoders,
                                      const TrainConfig& config, Rng& rng);

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0;
  StepLosses losses;

  // {step, lr, l_csc, l_p, l_v, l_d, total}
  std::string ToJson() const;
};

struct TrainCallbacks {
  std::function<void(const StepLog&)> on_step;
  // Called after each epoch with the 1-based epoch number.
  std::function<void(int, const CscModel<float>&, std::int64_t)> on_epoch;
};

struct TrainResult {
  CscModel<float> model;
  std::vector<StepLog> log;
};

// Offline batches keyed by sample id; replaces online construction.
using OfflineBatches = std::map<std::string, std::vector<ContrastiveBatch>>;

// Runs epochs x batches training steps. Samples are truncated to
// config.max_length. Throws ConfigError on an empty training set or an
// invalid configuration.
TrainResult Train(const TrainConfig& config, std::span<const CscSample> samples,
                  const KnowledgeBase& kb, CscModel<float> initial,
                  const KnowledgeEncoders& encoders,
                  const OfflineBatches* offline = nullptr,
                  const TrainCallbacks& callbacks = {});

// Every distinct character of the corpus and the knowledge base, in
// code-point order.
Vocabulary BuildVocabulary(std::span<const CscSample> samples, const KnowledgeBase& kb);

// Truncates source and target to `max_length` characters.
CscSample TruncateSample(const CscSample& sample, int max_length);

}  // namespace dictcsc

#endif  // DICTCSC_TRAINER_H_
