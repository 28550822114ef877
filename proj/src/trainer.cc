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

#include "dictcsc/trainer.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {
namespace {

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + text + "' for key " + key);
  }
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for key " + key);
}

TextView Truncated(TextView text, int max_length) {
  return text.substr(0, static_cast<std::size_t>(max_length));
}

const Encoder<float>& EncoderFor(KnowledgeKind kind, const KnowledgeEncoders& e) {
  const Encoder<float>* enc = kind == KnowledgeKind::kPhonetic ? e.phonetic.get()
                              : kind == KnowledgeKind::kVisual ? e.visual.get()
                                                               : e.definition.get();
  if (enc == nullptr) {
    throw std::invalid_argument("no frozen encoder for knowledge kind " +
                                std::string(ToString(kind)));
  }
  return *enc;
}

double WeightFor(KnowledgeKind kind, const LossWeights& w) {
  switch (kind) {
    case KnowledgeKind::kPhonetic:
      return w.phonetic;
    case KnowledgeKind::kVisual:
      return w.visual;
    case KnowledgeKind::kDefinition:
      return w.definition;
  }
  return 0;
}

const char* ObjectiveName(KnowledgeKind kind) {
  switch (kind) {
    case KnowledgeKind::kPhonetic:
      return "phonetic";
    case KnowledgeKind::kVisual:
      return "visual";
    case KnowledgeKind::kDefinition:
      return "definition";
  }
  return "?";
}

template <typename Fn>
void ForEachParameterPair(CscModel<float>& model, const CscWeights<float>& grads,
                          CscWeights<float>& m, CscWeights<float>& v, Fn&& fn) {
  std::vector<std::pair<std::string, MatrixX<float>*>> params;
  model.ForEachParameter([&params](const std::string& name, MatrixX<float>& p) {
    params.emplace_back(name, &p);
  });
  std::vector<const MatrixX<float>*> g;
  grads.ForEach([&g](const std::string&, const MatrixX<float>& x) { g.push_back(&x); });
  std::vector<MatrixX<float>*> ms;
  m.ForEach([&ms](const std::string&, MatrixX<float>& x) { ms.push_back(&x); });
  std::vector<MatrixX<float>*> vs;
  v.ForEach([&vs](const std::string&, MatrixX<float>& x) { vs.push_back(&x); });
  for (std::size_t i = 0; i < params.size(); ++i) {
    fn(params[i].first, *params[i].second, *g[i], *ms[i], *vs[i]);
  }
}

}  // namespace

// --- Configuration ---------------------------------------------------------

void TrainConfig::Validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (negatives < 1) throw ConfigError("negatives must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (warmup_steps < -1) throw ConfigError("warmup_steps must be non-negative (or -1)");
  if (max_length < 1) throw ConfigError("max_length must be at least 1");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (grad_clip < 0) throw ConfigError("grad_clip must be non-negative");
  if (contrastive_interval < 1) throw ConfigError("contrastive_interval must be at least 1");
  if (per_sample_error_cap < 0) throw ConfigError("per_sample_error_cap must be non-negative");
  if (!(cosine_temperature > 0)) throw ConfigError("cosine_temperature must be positive");
  weights.Validate();
  EncoderConfig probe;
  probe.hidden_size = hidden_size;
  probe.layers = layers;
  probe.heads = heads;
  probe.max_length = max_length;
  probe.ffn_size = ffn_size;
  probe.Validate();
}

int TrainConfig::ResolvedWarmup(std::int64_t total_steps) const {
  if (warmup_steps >= 0) return warmup_steps;
  return static_cast<int>(std::llround(0.05 * static_cast<double>(total_steps)));
}

EncoderConfig TrainConfig::MakeEncoderConfig(Vocabulary vocab) const {
  EncoderConfig c;
  c.vocab = std::move(vocab);
  c.hidden_size = hidden_size;
  c.layers = layers;
  c.heads = heads;
  c.max_length = max_length;
  c.ffn_size = ffn_size;
  c.Validate();
  return c;
}

TrainConfig ParseTrainConfig(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  TrainConfig c;
  for (const auto& [section, keys] : tree) {
    if (keys.empty()) {
      throw ConfigError("key " + section + " must appear inside a [section]");
    }
    for (const auto& [key, node] : keys) {
      const std::string full = section + "." + key;
      const std::string value = node.get_value<std::string>();
      auto as_int = [&] { return ParseNumber<int>(full, value); };
      auto as_double = [&] { return ParseNumber<double>(full, value); };
      if (section == "trainer") {
        if (key == "epochs") c.epochs = as_int();
        else if (key == "batch_size") c.batch_size = as_int();
        else if (key == "learning_rate") c.learning_rate = as_double();
        else if (key == "warmup_steps") c.warmup_steps = as_int();
        else if (key == "max_length") c.max_length = as_int();
        else if (key == "seed") c.seed = ParseNumber<std::uint64_t>(full, value);
        else if (key == "weight_decay") c.weight_decay = as_double();
        else if (key == "grad_clip") c.grad_clip = as_double();
        else if (key == "contrastive_interval") c.contrastive_interval = as_int();
        else throw ConfigError("unknown config key " + full);
      } else if (section == "pair_builder") {
        if (key == "negatives") c.negatives = as_int();
        else if (key == "per_sample_error_cap") c.per_sample_error_cap = as_int();
        else if (key == "definition_strategy") c.definition_strategy = ParseDefinitionStrategy(value);
        else throw ConfigError("unknown config key " + full);
      } else if (section == "objectives") {
        if (key == "lambda_csc") c.weights.csc = as_double();
        else if (key == "lambda_p") c.weights.phonetic = as_double();
        else if (key == "lambda_v") c.weights.visual = as_double();
        else if (key == "lambda_d") c.weights.definition = as_double();
        else if (key == "csc_positions") {
          if (value == "all") c.csc_positions = CscPositions::kAll;
          else if (value == "errors") c.csc_positions = CscPositions::kErrorsOnly;
          else throw ConfigError("invalid value '" + value + "' for key " + full);
        } else if (key == "cosine_scoring") {
          if (value == "exp") c.cosine_scoring = CosineScoring::kExponential;
          else if (value == "clamped") c.cosine_scoring = CosineScoring::kClampedRaw;
          else throw ConfigError("invalid value '" + value + "' for key " + full);
        } else if (key == "cosine_temperature") c.cosine_temperature = as_double();
        else throw ConfigError("unknown config key " + full);
      } else if (section == "encoders") {
        if (key == "hidden_size") c.hidden_size = as_int();
        else if (key == "layers") c.layers = as_int();
        else if (key == "heads") c.heads = as_int();
        else if (key == "ffn_size") c.ffn_size = as_int();
        else if (key == "init_checkpoint") c.init_checkpoint = value;
        else if (key == "phonetic_checkpoint") c.phonetic_checkpoint = value;
        else if (key == "visual_checkpoint") c.visual_checkpoint = value;
        else if (key == "definition_checkpoint") c.definition_checkpoint = value;
        else throw ConfigError("unknown config key " + full);
      } else {
        throw ConfigError("unknown config section [" + section + "]");
      }
    }
  }
  (void)ParseBool;
  c.Validate();
  return c;
}

TrainConfig LoadTrainConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return ParseTrainConfig(in);
}

std::string FormatTrainConfig(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "[trainer]\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "learning_rate = " << c.learning_rate << "\n"
      << "warmup_steps = " << c.warmup_steps << "\n"
      << "max_length = " << c.max_length << "\n"
      << "seed = " << c.seed << "\n"
      << "weight_decay = " << c.weight_decay << "\n"
      << "grad_clip = " << c.grad_clip << "\n"
      << "contrastive_interval = " << c.contrastive_interval << "\n\n"
      << "[pair_builder]\n"
      << "negatives = " << c.negatives << "\n"
      << "per_sample_error_cap = " << c.per_sample_error_cap << "\n"
      << "definition_strategy = " << ToString(c.definition_strategy) << "\n\n"
      << "[objectives]\n"
      << "lambda_csc = " << c.weights.csc << "\n"
      << "lambda_p = " << c.weights.phonetic << "\n"
      << "lambda_v = " << c.weights.visual << "\n"
      << "lambda_d = " << c.weights.definition << "\n"
      << "csc_positions = " << (c.csc_positions == CscPositions::kAll ? "all" : "errors")
      << "\n"
      << "cosine_scoring = "
      << (c.cosine_scoring == CosineScoring::kExponential ? "exp" : "clamped") << "\n"
      << "cosine_temperature = " << c.cosine_temperature << "\n\n"
      << "[encoders]\n"
      << "hidden_size = " << c.hidden_size << "\n"
      << "layers = " << c.layers << "\n"
      << "heads = " << c.heads << "\n"
      << "ffn_size = " << c.ffn_size << "\n"
      << "init_checkpoint = " << c.init_checkpoint << "\n"
      << "phonetic_checkpoint = " << c.phonetic_checkpoint << "\n"
      << "visual_checkpoint = " << c.visual_checkpoint << "\n"
      << "definition_checkpoint = " << c.definition_checkpoint << "\n";
  return out.str();
}

double LrSchedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config) {
  const std::int64_t warmup = config.ResolvedWarmup(total_steps);
  if (total_steps <= warmup) {
    throw ConfigError("total steps " + std::to_string(total_steps) +
                      " must exceed warmup steps " + std::to_string(warmup));
  }
  if (step < 0 || step > total_steps) {
    throw std::out_of_range("step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + "]");
  }
  const double peak = config.learning_rate;
  if (step < warmup) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return peak * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

// --- Optimizer -------------------------------------------------------------

AdamW::AdamW(const EncoderConfig& config, Options options)
    : options_(options),
      m_(CscWeights<float>::Zeros(config)),
      v_(CscWeights<float>::Zeros(config)) {}

void AdamW::Step(CscModel<float>& model, const CscWeights<float>& grads, double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const auto b1 = static_cast<float>(options_.beta1);
  const auto b2 = static_cast<float>(options_.beta2);
  const auto step_size = static_cast<float>(lr / bc1);
  const auto sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
  const auto eps = static_cast<float>(options_.epsilon);
  const auto decay = static_cast<float>(lr * options_.weight_decay);
  ForEachParameterPair(
      model, grads, m_, v_,
      [&](const std::string& name, MatrixX<float>& p, const MatrixX<float>& g,
          MatrixX<float>& m, MatrixX<float>& v) {
        m = b1 * m + (1.0f - b1) * g;
        v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
        p.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bc2 + eps);
        const bool decays = !(name.ends_with(".bias") || name.ends_with(".gamma") ||
                              name.ends_with(".beta"));
        if (decays && decay > 0) p *= (1.0f - decay);
      });
}

double ClipGradients(CscWeights<float>& grads, double max_norm) {
  double sq = 0;
  grads.ForEach([&sq](const std::string&, const MatrixX<float>& g) {
    sq += g.cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    grads.ForEach([scale](const std::string&, MatrixX<float>& g) { g *= scale; });
  }
  return norm;
}

// --- Training --------------------------------------------------------------

StepLosses TrainingStep(CscModel<float>& model, AdamW& optimizer,
                        std::span<const CscSample> batch,
                        const SampleBatches& contrastive,
                        const KnowledgeEncoders& encoders, const TrainConfig& config,
                        double lr) {
  if (!contrastive.empty() && contrastive.size() != batch.size()) {
    throw std::invalid_argument("contrastive batches are not aligned with the CSC batch");
  }
  const Vocabulary& vocab = model.config().vocab;
  const LossWeights& w = config.weights;
  ContrastiveOptions<float> options;
  options.cosine_scoring = config.cosine_scoring;
  options.cosine_temperature = static_cast<float>(config.cosine_temperature);

  struct Item {
    CscModel<float>::Pass pass;
    MatrixX<float> d_hidden;
    MatrixX<float> d_logits;
  };
  std::vector<Item> items(batch.size());

  double ce_sum = 0;
  Eigen::Index ce_count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CscSample& sample = batch[i];
    Item& item = items[i];
    item.pass = model.Forward(sample.source);
    const std::vector<int> targets = vocab.Ids(sample.target);
    std::vector<char> mask_storage(sample.target.size(),
                                   config.csc_positions == CscPositions::kAll);
    for (std::size_t p : sample.error_positions) mask_storage[p] = 1;
    const std::vector<bool> mask_bits(mask_storage.begin(), mask_storage.end());
    std::unique_ptr<bool[]> mask(new bool[mask_storage.size()]);
    for (std::size_t k = 0; k < mask_storage.size(); ++k) mask[k] = mask_storage[k] != 0;
    auto ce = CrossEntropySum<float>(item.pass.logits, targets,
                                     std::span<const bool>(mask.get(), mask_storage.size()));
    ce_sum += ce.sum;
    ce_count += ce.count;
    item.d_logits = std::move(ce.d_logits);
    item.d_hidden = MatrixX<float>::Zero(item.pass.hidden.rows(), item.pass.hidden.cols());
  }

  StepLosses losses;
  losses.csc = ce_count > 0 ? ce_sum / static_cast<double>(ce_count) : 0.0;
  if (!std::isfinite(losses.csc)) {
    throw NonFiniteLossError("non-finite loss in the csc objective");
  }
  const float csc_scale =
      ce_count > 0 ? static_cast<float>(w.csc / static_cast<double>(ce_count)) : 0.0f;
  for (auto& item : items) item.d_logits *= csc_scale;

  struct Term {
    std::size_t sample;
    KnowledgeKind kind;
    MatrixX<float> d_original;
  };
  std::vector<Term> terms;
  double sums[3] = {0, 0, 0};
  int counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < contrastive.size(); ++i) {
    for (const ContrastiveBatch& b : contrastive[i]) {
      if (b.original != batch[i].source) {
        throw std::invalid_argument("contrastive batch for sample " + batch[i].id +
                                    " does not match its source sentence");
      }
      const double weight = WeightFor(b.kind, w);
      if (weight == 0) continue;
      const Encoder<float>& enc = EncoderFor(b.kind, encoders);
      RepSequence<float> original{items[i].pass.hidden, items[i].pass.hidden.rows()};
      const RepSequence<float> positive = enc.Encode(Truncated(b.positive, enc.max_length()));
      std::vector<RepSequence<float>> negatives;
      negatives.reserve(b.negatives.size());
      for (const Text& n : b.negatives) {
        negatives.push_back(enc.Encode(Truncated(n, enc.max_length())));
      }
      const auto s = static_cast<Eigen::Index>(b.error_index);
      ContrastiveLoss<float> result =
          b.kind == KnowledgeKind::kDefinition
              ? CosineContrastiveLoss<float>(original, positive, negatives, s,
                                             static_cast<Eigen::Index>(b.span_width),
                                             options)
              : DotContrastiveLoss<float>(original, positive, negatives, s, options);
      if (!std::isfinite(result.loss) || !result.d_original.allFinite()) {
        throw NonFiniteLossError(std::string("non-finite loss in the ") +
                                 ObjectiveName(b.kind) + " objective (sample " +
                                 batch[i].id + ")");
      }
      const int k = static_cast<int>(b.kind);
      sums[k] += result.loss;
      ++counts[k];
      terms.push_back(Term{i, b.kind, std::move(result.d_original)});
    }
  }
  auto mean = [&](int k) { return counts[k] > 0 ? sums[k] / counts[k] : 0.0; };
  losses.phonetic = mean(0);
  losses.visual = mean(1);
  losses.definition = mean(2);
  losses.phonetic_batches = counts[0];
  losses.visual_batches = counts[1];
  losses.definition_batches = counts[2];
  losses.total = CombinedLoss<double>(losses.csc, losses.phonetic, losses.visual,
                                      losses.definition, w);
  for (const Term& t : terms) {
    const int k = static_cast<int>(t.kind);
    const auto scale = static_cast<float>(WeightFor(t.kind, w) / counts[k]);
    items[t.sample].d_hidden += scale * t.d_original;
  }

  if (w.all_zero()) return losses;

  auto grads = CscWeights<float>::Zeros(model.config());
  for (const Item& item : items) {
    model.Backward(item.pass, item.d_hidden, item.d_logits, grads);
  }
  ClipGradients(grads, config.grad_clip);
  optimizer.Step(model, grads, lr);
  return losses;
}

SampleBatches BuildContrastiveBatches(std::span<const CscSample> batch,
                                      const KnowledgeBase& kb,
                                      std::span<const char32_t> vocab,
                                      const KnowledgeEncoders& encoders,
                                      const TrainConfig& config, Rng& rng) {
  SampleBatches out(batch.size());
  const auto n = static_cast<std::size_t>(config.negatives);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CscSample& sample = batch[i];
    if (!sample.has_errors()) continue;
    std::vector<std::size_t> positions = sample.error_positions;
    const auto cap = static_cast<std::size_t>(config.per_sample_error_cap);
    if (cap > 0 && positions.size() > cap) {
      positions = SampleWithoutReplacement(std::move(positions), cap, rng);
      std::sort(positions.begin(), positions.end());
    }
    for (std::size_t s : positions) {
      if (config.weights.phonetic > 0) {
        if (auto b = BuildPhoneticBatch(sample, s, n, kb, vocab, rng)) {
          out[i].push_back(std::move(*b));
        }
      }
      if (config.weights.visual > 0) {
        if (auto b = BuildVisualBatch(sample, s, n, kb, vocab, rng)) {
          out[i].push_back(std::move(*b));
        }
      }
      if (config.weights.definition > 0) {
        if (auto b = BuildDefinitionBatch(sample, s, n, kb, config.definition_strategy,
                                          encoders.definition.get(), rng)) {
          out[i].push_back(std::move(*b));
        }
      }
    }
  }
  return out;
}

std::string StepLog::ToJson() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["l_csc"] = losses.csc;
  j["l_p"] = losses.phonetic;
  j["l_v"] = losses.visual;
  j["l_d"] = losses.definition;
  j["total"] = losses.total;
  return j.dump();
}

CscSample TruncateSample(const CscSample& sample, int max_length) {
  const auto limit = static_cast<std::size_t>(max_length);
  if (sample.source.size() <= limit) return sample;
  return CscSample::Make(sample.id, sample.source.substr(0, limit),
                         sample.target.substr(0, limit));
}

Vocabulary BuildVocabulary(std::span<const CscSample> samples, const KnowledgeBase& kb) {
  std::set<char32_t> chars;
  for (const auto& s : samples) {
    chars.insert(s.source.begin(), s.source.end());
    chars.insert(s.target.begin(), s.target.end());
  }
  for (const auto& [c, readings] : kb.pinyin.entries()) chars.insert(c);
  for (const auto& [c, similar] : kb.visual.entries()) {
    chars.insert(c);
    chars.insert(similar.begin(), similar.end());
  }
  for (const auto& word : kb.dictionary.words()) {
    chars.insert(word.begin(), word.end());
    for (const auto& def : *kb.dictionary.Find(word)) chars.insert(def.begin(), def.end());
  }
  const std::vector<char32_t> ordered(chars.begin(), chars.end());
  return Vocabulary(ordered);
}

TrainResult Train(const TrainConfig& config, std::span<const CscSample> samples,
                  const KnowledgeBase& kb, CscModel<float> initial,
                  const KnowledgeEncoders& encoders, const OfflineBatches* offline,
                  const TrainCallbacks& callbacks) {
  config.Validate();
  if (samples.empty()) throw ConfigError("training set is empty");
  for (const auto* enc : {encoders.phonetic.get(), encoders.visual.get(),
                          encoders.definition.get()}) {
    if (enc != nullptr && enc->hidden_size() != initial.config().hidden_size) {
      throw ConfigError("knowledge encoder hidden size " +
                        std::to_string(enc->hidden_size()) +
                        " differs from the model's " +
                        std::to_string(initial.config().hidden_size));
    }
  }

  std::vector<CscSample> data;
  data.reserve(samples.size());
  const int max_length = std::min(config.max_length, initial.config().max_length);
  for (const auto& s : samples) data.push_back(TruncateSample(s, max_length));

  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  const std::int64_t batches_per_epoch =
      static_cast<std::int64_t>((data.size() + batch_size - 1) / batch_size);
  const std::int64_t total_steps = batches_per_epoch * config.epochs;
  // Validates the schedule before any work is done.
  (void)LrSchedule(0, total_steps, config);

  TrainResult result{std::move(initial), {}};
  CscModel<float>& model = result.model;
  AdamW optimizer(model.config(), AdamW::Options{.weight_decay = config.weight_decay});
  Rng shuffle_rng = DeriveRng(config.seed, 1);
  Rng pair_rng = DeriveRng(config.seed, 2);
  const std::vector<char32_t>& vocab_chars = model.config().vocab.chars();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order = SampleWithoutReplacement(std::move(order), order.size(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<CscSample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
        batch.push_back(data[order[k]]);
      }
      ++step;
      const double lr = LrSchedule(step, total_steps, config);
      SampleBatches contrastive;
      if ((step - 1) % config.contrastive_interval == 0) {
        if (offline != nullptr) {
          contrastive.resize(batch.size());
          for (std::size_t i = 0; i < batch.size(); ++i) {
            auto it = offline->find(batch[i].id);
            if (it == offline->end()) continue;
            for (const auto& b : it->second) {
              if (WeightFor(b.kind, config.weights) > 0) contrastive[i].push_back(b);
            }
          }
        } else {
          contrastive = BuildContrastiveBatches(batch, kb, vocab_chars, encoders,
                                                config, pair_rng);
        }
      }
      StepLog entry;
      entry.step = step;
      entry.epoch = epoch;
      entry.lr = lr;
      entry.losses = TrainingStep(model, optimizer, batch, contrastive, encoders,
                                  config, lr);
      if (callbacks.on_step) callbacks.on_step(entry);
      result.log.push_back(entry);
    }
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, model, step);
  }
  return result;
}

}  // namespace dictcsc
