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

#include "dictcsc/cli.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dictcsc/analysis.h"
#include "dictcsc/checkpoint.h"
#include "dictcsc/data_ingest.h"
#include "dictcsc/errors.h"
#include "dictcsc/evaluator.h"
#include "dictcsc/knowledge_base.h"
#include "dictcsc/pair_builder.h"
#include "dictcsc/trainer.h"
#include "json.hpp"

namespace dictcsc {

namespace fs = std::filesystem;

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string Sha256File(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return Sha256Hex(buffer.str());
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void RunManifest::AddInput(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) input_digests[f.string()] = Sha256File(f);
  } else {
    input_digests[path.string()] = Sha256File(path);
  }
}

std::string RunManifest::ToJson() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["arguments"] = arguments;
  j["config"] = config;
  j["input_digests"] = input_digests;
  j["seed"] = seed;
  j["version"] = version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j.dump(2);
}

void RunManifest::Write(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << ToJson() << "\n";
}

namespace {

fs::path Sibling(const fs::path& file, const std::string& suffix) {
  return fs::path(file.string() + suffix);
}

std::ofstream OpenOutput(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<CscSample> LoadCorpusWithContext(const fs::path& path, CorpusFormat format) {
  try {
    return LoadCorpus(path, format);
  } catch (const ParseError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string StatsJson(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["sentence_count"] = stats.sentence_count;
  j["avg_length"] = stats.avg_length;
  j["error_count"] = stats.error_count;
  return j.dump(2);
}

// --- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string input;
  std::string charmap;
  std::string output;
  std::string format = "tsv";
};

void CmdPrepare(const PrepareArgs& a, RunManifest& manifest) {
  manifest.AddInput(a.input);
  auto samples = LoadCorpusWithContext(a.input, ParseCorpusFormat(a.format));
  if (!a.charmap.empty()) {
    manifest.AddInput(a.charmap);
    const CharMap map = LoadCharMap(a.charmap);
    for (auto& s : samples) s = ConvertCharset(s, map);
  }
  {
    auto out = OpenOutput(a.output);
    WriteCorpusTsv(out, samples);
  }
  auto stats_out = OpenOutput(Sibling(a.output, ".stats.json"));
  stats_out << StatsJson(ComputeCorpusStats(samples)) << "\n";
}

// --- build-pairs -----------------------------------------------------------

struct BuildPairsArgs {
  std::string corpus;
  std::string format = "tsv";
  std::string kb_dir;
  std::string knowledge;
  int n = 8;
  std::string strategy = "first";
  std::uint64_t seed = 0;
  int max_length = 128;
  std::string encoder_checkpoint;
  std::string output;
};

void CmdBuildPairs(const BuildPairsArgs& a, RunManifest& manifest) {
  manifest.AddInput(a.corpus);
  manifest.AddInput(a.kb_dir);
  const KnowledgeKind kind = ParseKnowledgeKind(a.knowledge);
  const DefinitionStrategy strategy = ParseDefinitionStrategy(a.strategy);
  const auto corpus = LoadCorpusWithContext(a.corpus, ParseCorpusFormat(a.format));
  const KnowledgeBase kb = LoadKnowledgeBase(a.kb_dir);

  std::shared_ptr<const Encoder<float>> sim_encoder;
  if (!a.encoder_checkpoint.empty()) {
    manifest.AddInput(a.encoder_checkpoint);
    sim_encoder = std::make_shared<const TransformerEncoder<float>>(
        LoadEncoderCheckpoint(a.encoder_checkpoint));
  } else if (kind == KnowledgeKind::kDefinition && strategy == DefinitionStrategy::kSimilar) {
    throw ConfigError("--strategy similar requires --encoder-checkpoint");
  }

  std::vector<CscSample> samples;
  for (const auto& s : corpus) samples.push_back(TruncateSample(s, a.max_length));
  const Vocabulary vocab = BuildVocabulary(samples, kb);
  Rng rng = DeriveRng(a.seed, static_cast<std::uint64_t>(kind) + 1);
  const auto n = static_cast<std::size_t>(a.n);
  std::vector<ContrastiveBatch> batches;
  for (const auto& sample : samples) {
    for (std::size_t s : sample.error_positions) {
      std::optional<ContrastiveBatch> b;
      switch (kind) {
        case KnowledgeKind::kPhonetic:
          b = BuildPhoneticBatch(sample, s, n, kb, vocab.chars(), rng);
          break;
        case KnowledgeKind::kVisual:
          b = BuildVisualBatch(sample, s, n, kb, vocab.chars(), rng);
          break;
        case KnowledgeKind::kDefinition:
          b = BuildDefinitionBatch(sample, s, n, kb, strategy, sim_encoder.get(), rng);
          break;
      }
      if (b) batches.push_back(std::move(*b));
    }
  }
  auto out = OpenOutput(a.output);
  WriteBatches(out, batches);
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string train;
  std::string format = "tsv";
  std::string kb_dir;
  std::string out_dir;
  std::string pairs_dir;
};

std::shared_ptr<const Encoder<float>> KnowledgeEncoder(const std::string& checkpoint,
                                                       const CscModel<float>& initial,
                                                       RunManifest& manifest) {
  if (checkpoint.empty()) {
    return std::make_shared<const FrozenEncoder<float>>(Freeze(initial.encoder()));
  }
  manifest.AddInput(checkpoint);
  return std::make_shared<const FrozenEncoder<float>>(
      Freeze(LoadEncoderCheckpoint(checkpoint)));
}

void CmdTrain(const TrainArgs& a, RunManifest& manifest, std::ostream& err) {
  manifest.AddInput(a.config);
  manifest.AddInput(a.train);
  manifest.AddInput(a.kb_dir);
  const TrainConfig config = LoadTrainConfig(a.config);
  manifest.config = FormatTrainConfig(config);
  manifest.seed = config.seed;
  const auto samples = LoadCorpusWithContext(a.train, ParseCorpusFormat(a.format));
  const KnowledgeBase kb = LoadKnowledgeBase(a.kb_dir);

  std::optional<CscModel<float>> initial;
  if (!config.init_checkpoint.empty()) {
    manifest.AddInput(config.init_checkpoint);
    initial.emplace(LoadCheckpoint(config.init_checkpoint));
  } else {
    initial.emplace(CscModel<float>::Random(
        config.MakeEncoderConfig(BuildVocabulary(samples, kb)), config.seed));
  }
  if (config.visual_checkpoint.empty() && config.weights.visual > 0) {
    err << "warning: no visual_checkpoint configured; the visual encoder is a frozen "
           "copy of the initial model encoder\n";
  }
  KnowledgeEncoders encoders{
      KnowledgeEncoder(config.phonetic_checkpoint, *initial, manifest),
      KnowledgeEncoder(config.visual_checkpoint, *initial, manifest),
      KnowledgeEncoder(config.definition_checkpoint, *initial, manifest)};

  OfflineBatches offline;
  if (!a.pairs_dir.empty()) {
    manifest.AddInput(a.pairs_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.pairs_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        for (auto& b : LoadBatches(f)) offline[b.sample_id].push_back(std::move(b));
      } catch (const ParseError& e) {
        throw std::runtime_error(f.string() + ": " + e.what());
      }
    }
  }

  fs::create_directories(a.out_dir);
  const fs::path out_dir(a.out_dir);
  {
    auto cfg = OpenOutput(out_dir / "config.ini");
    cfg << manifest.config;
  }
  auto log = OpenOutput(out_dir / "train_log.jsonl");
  TrainCallbacks callbacks;
  callbacks.on_step = [&log](const StepLog& entry) { log << entry.ToJson() << "\n"; };
  callbacks.on_epoch = [&](int epoch, const CscModel<float>& model, std::int64_t step) {
    log.flush();
    SaveCheckpoint(model, out_dir / ("checkpoint-epoch-" + std::to_string(epoch)),
                   CheckpointInfo{config.seed, static_cast<std::uint64_t>(step)});
    err << "epoch " << epoch << " done (step " << step << ")\n";
  };
  TrainResult result = Train(config, samples, kb, std::move(*initial), encoders,
                             a.pairs_dir.empty() ? nullptr : &offline, callbacks);
  SaveCheckpoint(result.model, out_dir / "checkpoint-final",
                 CheckpointInfo{config.seed, result.log.empty()
                                                 ? 0
                                                 : static_cast<std::uint64_t>(
                                                       result.log.back().step)});

  std::vector<Prediction> preds;
  std::vector<CscSample> truncated;
  for (const auto& s : samples) {
    truncated.push_back(TruncateSample(s, result.model.config().max_length));
    preds.push_back(Predict(result.model, truncated.back()));
  }
  const EvalReport report = Evaluate(preds, truncated, false);
  auto report_out = OpenOutput(out_dir / "train_eval.json");
  report_out << report.ToJson() << "\n";
  err << "training-set correction F1 " << report.correction.f1 << "\n";
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string predictions;
  std::string test;
  std::string format = "tsv";
  bool sighan13 = false;
  std::string report;
  std::string write_predictions;
};

void CmdEvaluate(const EvaluateArgs& a, RunManifest& manifest) {
  manifest.AddInput(a.test);
  const auto gold = LoadCorpusWithContext(a.test, ParseCorpusFormat(a.format));
  std::vector<Prediction> preds;
  if (!a.checkpoint.empty()) {
    manifest.AddInput(a.checkpoint);
    const CscModel<float> model = LoadCheckpoint(a.checkpoint);
    for (const auto& s : gold) preds.push_back(PredictWindowed(model, s));
  } else {
    manifest.AddInput(a.predictions);
    preds = LoadPredictions(a.predictions);
  }
  if (!a.write_predictions.empty()) {
    auto out = OpenOutput(a.write_predictions);
    WritePredictions(out, preds);
  }
  const EvalReport report = Evaluate(preds, gold, a.sighan13);
  {
    auto out = OpenOutput(a.report);
    out << report.ToJson() << "\n";
  }
  auto table = OpenOutput(Sibling(a.report, ".txt"));
  table << report.ToTable();
}

// --- export-reps -----------------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string chars_file;
  std::string output;
  bool pca2d = false;
};

void WriteVectors(std::ostream& out, std::span<const char32_t> chars,
                  const MatrixX<double>& vectors) {
  out << std::setprecision(9);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    out << EncodeUtf8(chars[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) out << '\t' << vectors(i, j);
    out << '\n';
  }
}

void CmdExportReps(const ExportArgs& a, RunManifest& manifest, std::ostream& err) {
  manifest.AddInput(a.checkpoint);
  manifest.AddInput(a.chars_file);
  const TransformerEncoder<float> encoder = LoadEncoderCheckpoint(a.checkpoint);
  std::ifstream in(a.chars_file);
  if (!in) throw std::runtime_error("cannot open " + a.chars_file);
  std::vector<char32_t> chars;
  std::set<char32_t> seen;
  std::string line;
  while (std::getline(in, line)) {
    for (char32_t c : DecodeUtf8(StripLineEnding(line))) {
      if (c == U' ' || c == U'\t') continue;
      if (seen.insert(c).second) chars.push_back(c);
    }
  }
  const CharRepresentations reps = EncodeCharacters(encoder, chars);
  {
    auto out = OpenOutput(a.output);
    WriteVectors(out, reps.chars, reps.vectors);
    if (!reps.skipped.empty()) {
      out << "# skipped\n";
      for (char32_t c : reps.skipped) out << "# " << EncodeUtf8(c) << "\n";
    }
  }
  for (char32_t c : reps.skipped) {
    err << "skipped character outside the vocabulary: " << EncodeUtf8(c) << "\n";
  }
  if (a.pca2d) {
    auto out = OpenOutput(Sibling(a.output, ".pca2d.tsv"));
    WriteVectors(out, reps.chars, Pca2d(reps.vectors));
  }
}


}  // namespace

int RunCli(int argc, char** argv, std::ostream& err) {
  CLI::App app{"Knowledge-enhanced Chinese spell checking toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  const char* env_kb = std::getenv("LEAD_KB_DIR");
  const std::string default_kb = env_kb != nullptr ? env_kb : "";

  PrepareArgs prepare;
  auto* c_prepare = app.add_subcommand("prepare", "Convert and validate a corpus");
  c_prepare->add_option("--input", prepare.input, "Raw corpus")->required()->check(CLI::ExistingFile);
  c_prepare->add_option("--charmap", prepare.charmap, "Traditional to simplified table")
      ->check(CLI::ExistingFile);
  c_prepare->add_option("--output", prepare.output, "Canonical TSV output")->required();
  c_prepare->add_option("--format", prepare.format, "Input format")
      ->check(CLI::IsMember({"tsv", "jsonl"}));

  BuildPairsArgs pairs;
  pairs.kb_dir = default_kb;
  auto* c_pairs = app.add_subcommand("build-pairs", "Build offline contrastive batches");
  c_pairs->add_option("--corpus", pairs.corpus)->required()->check(CLI::ExistingFile);
  c_pairs->add_option("--format", pairs.format)->check(CLI::IsMember({"tsv", "jsonl"}));
  c_pairs->add_option("--kb-dir", pairs.kb_dir, "Knowledge-base directory (default $LEAD_KB_DIR)");
  c_pairs->add_option("--knowledge", pairs.knowledge)->required()->check(CLI::IsMember({"P", "V", "D"}));
  c_pairs->add_option("--n", pairs.n, "Negatives per batch")->check(CLI::PositiveNumber);
  c_pairs->add_option("--strategy", pairs.strategy)
      ->check(CLI::IsMember({"random", "first", "similar"}));
  c_pairs->add_option("--seed", pairs.seed);
  c_pairs->add_option("--max-length", pairs.max_length)->check(CLI::PositiveNumber);
  c_pairs->add_option("--encoder-checkpoint", pairs.encoder_checkpoint,
                      "Encoder used by the similar strategy");
  c_pairs->add_option("--output", pairs.output)->required();

  TrainArgs train;
  train.kb_dir = default_kb;
  auto* c_train = app.add_subcommand("train", "Train a model");
  c_train->add_option("--config", train.config)->required()->check(CLI::ExistingFile);
  c_train->add_option("--train", train.train)->required()->check(CLI::ExistingFile);
  c_train->add_option("--format", train.format)->check(CLI::IsMember({"tsv", "jsonl"}));
  c_train->add_option("--kb-dir", train.kb_dir, "Knowledge-base directory (default $LEAD_KB_DIR)");
  c_train->add_option("--out-dir", train.out_dir)->required();
  c_train->add_option("--pairs-dir", train.pairs_dir, "Offline batches (*.jsonl)")
      ->check(CLI::ExistingDirectory);

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score a model or a prediction file");
  auto* o_ckpt = c_eval->add_option("--checkpoint", evaluate.checkpoint)->check(CLI::ExistingDirectory);
  auto* o_preds = c_eval->add_option("--predictions", evaluate.predictions,
                                     "Existing predictions (id, source, output)")
                      ->check(CLI::ExistingFile);
  o_ckpt->excludes(o_preds);
  c_eval->add_option("--test", evaluate.test)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--format", evaluate.format)->check(CLI::IsMember({"tsv", "jsonl"}));
  c_eval->add_flag("--sighan13", evaluate.sighan13, "Exclude auxiliary-character changes");
  c_eval->add_option("--report", evaluate.report)->required();
  c_eval->add_option("--write-predictions", evaluate.write_predictions);

  ExportArgs exp;
  auto* c_export = app.add_subcommand("export-reps", "Export isolated-character representations");
  c_export->add_option("--checkpoint", exp.checkpoint)->required()->check(CLI::ExistingDirectory);
  c_export->add_option("--chars-file", exp.chars_file)->required()->check(CLI::ExistingFile);
  c_export->add_option("--output", exp.output)->required();
  c_export->add_flag("--pca2d", exp.pca2d);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cout, err);
  }

  RunManifest manifest;
  for (int i = 1; i < argc; ++i) manifest.arguments.emplace_back(argv[i]);
  manifest.started_at = UtcTimestamp();
  try {
    fs::path manifest_path;
    if (c_prepare->parsed()) {
      manifest.command = "prepare";
      CmdPrepare(prepare, manifest);
      manifest_path = Sibling(prepare.output, ".manifest.json");
    } else if (c_pairs->parsed()) {
      if (pairs.kb_dir.empty()) throw ConfigError("--kb-dir is required (or set LEAD_KB_DIR)");
      manifest.command = "build-pairs";
      manifest.seed = pairs.seed;
      CmdBuildPairs(pairs, manifest);
      manifest_path = Sibling(pairs.output, ".manifest.json");
    } else if (c_train->parsed()) {
      if (train.kb_dir.empty()) throw ConfigError("--kb-dir is required (or set LEAD_KB_DIR)");
      manifest.command = "train";
      CmdTrain(train, manifest, err);
      manifest_path = fs::path(train.out_dir) / "manifest.json";
    } else if (c_eval->parsed()) {
      if (evaluate.checkpoint.empty() == evaluate.predictions.empty()) {
        throw ConfigError("exactly one of --checkpoint and --predictions is required");
      }
      manifest.command = "evaluate";
      CmdEvaluate(evaluate, manifest);
      manifest_path = Sibling(evaluate.report, ".manifest.json");
    } else if (c_export->parsed()) {
      manifest.command = "export-reps";
      CmdExportReps(exp, manifest, err);
      manifest_path = Sibling(exp.output, ".manifest.json");
    }
    manifest.finished_at = UtcTimestamp();
    manifest.Write(manifest_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dictcsc
