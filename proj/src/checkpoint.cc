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

#include "dictcsc/checkpoint.h"

#include <array>
#include <map>
#include <bit>
#include <fstream>
#include <random>
#include <system_error>

#include "dictcsc/errors.h"
#include "json.hpp"

namespace dictcsc {
namespace fs = std::filesystem;
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'C', 'S', 'A'};

void PutU32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF),
                         static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

bool GetU32(std::istream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) |
      (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

std::string FileNameFor(const std::string& name) { return name + ".bin"; }

nlohmann::ordered_json ConfigToJson(const EncoderConfig& config) {
  nlohmann::ordered_json j;
  j["hidden_size"] = config.hidden_size;
  j["layers"] = config.layers;
  j["heads"] = config.heads;
  j["max_length"] = config.max_length;
  j["ffn_size"] = config.ffn();
  auto vocab = nlohmann::ordered_json::array();
  for (char32_t c : config.vocab.chars()) vocab.push_back(EncodeUtf8(c));
  j["vocab"] = std::move(vocab);
  return j;
}

EncoderConfig ConfigFromJson(const nlohmann::json& j) {
  EncoderConfig config;
  config.hidden_size = j.at("hidden_size").get<int>();
  config.layers = j.at("layers").get<int>();
  config.heads = j.at("heads").get<int>();
  config.max_length = j.at("max_length").get<int>();
  config.ffn_size = j.at("ffn_size").get<int>();
  std::vector<char32_t> chars;
  for (const auto& c : j.at("vocab")) {
    const Text t = DecodeUtf8(c.get<std::string>());
    if (t.size() != 1) throw LoadError("vocabulary entry is not a single character");
    chars.push_back(t[0]);
  }
  config.vocab = Vocabulary(chars);
  return config;
}

template <typename Fn>
void SaveDirectory(const fs::path& dir, const EncoderConfig& config,
                   const CheckpointInfo& info, const char* kind, Fn&& for_each) {
  const fs::path target = fs::absolute(dir);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp-" + std::to_string(rd()));
  fs::create_directories(tmp);

  nlohmann::ordered_json manifest;
  manifest["format"] = "dictcsc-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["kind"] = kind;
  manifest["config"] = ConfigToJson(config);
  manifest["seed"] = info.seed;
  manifest["step"] = info.step;
  auto params = nlohmann::ordered_json::array();
  try {
    for_each([&](const std::string& name, const MatrixX<float>& m) {
      WriteArray(tmp / FileNameFor(name), m);
      params.push_back({{"name", name},
                        {"file", FileNameFor(name)},
                        {"shape", {m.rows(), m.cols()}}});
    });
    manifest["parameters"] = std::move(params);
    {
      std::ofstream out(tmp / "manifest.json");
      out << manifest.dump(2) << '\n';
      if (!out) throw std::runtime_error("failed writing manifest in " + tmp.string());
    }
    if (fs::exists(target)) {
      const fs::path old = target.parent_path() /
                           (target.filename().string() + ".old-" + std::to_string(rd()));
      fs::rename(target, old);
      fs::rename(tmp, target);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, target);
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

struct Manifest {
  EncoderConfig config;
  CheckpointInfo info;
  std::string kind;
  std::map<std::string, std::pair<std::string, std::array<long, 2>>> params;
};

Manifest ReadManifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw LoadError("missing manifest.json in " + dir.string());
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "dictcsc-checkpoint") {
      throw LoadError("not a checkpoint manifest: " + dir.string());
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw LoadError("unsupported checkpoint version " + std::to_string(version));
    }
    m.kind = j.at("kind").get<std::string>();
    m.config = ConfigFromJson(j.at("config"));
    m.info.seed = j.at("seed").get<std::uint64_t>();
    m.info.step = j.at("step").get<std::uint64_t>();
    for (const auto& p : j.at("parameters")) {
      const auto shape = p.at("shape");
      m.params[p.at("name").get<std::string>()] = {
          p.at("file").get<std::string>(), {shape.at(0).get<long>(), shape.at(1).get<long>()}};
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("corrupt manifest in " + dir.string() + ": " + e.what());
  }
  return m;
}

void CheckCompatible(const EncoderConfig& stored, const EncoderConfig* expected) {
  if (expected == nullptr) return;
  auto mismatch = [](const char* field, int want, int got) {
    throw LoadError(std::string("config ") + field + " " + std::to_string(want) +
                    " does not match stored " + std::to_string(got));
  };
  if (expected->hidden_size != stored.hidden_size) {
    mismatch("hidden_size", expected->hidden_size, stored.hidden_size);
  }
  if (expected->layers != stored.layers) mismatch("layers", expected->layers, stored.layers);
  if (expected->heads != stored.heads) mismatch("heads", expected->heads, stored.heads);
  if (expected->max_length != stored.max_length) {
    mismatch("max_length", expected->max_length, stored.max_length);
  }
  if (expected->ffn() != stored.ffn()) mismatch("ffn_size", expected->ffn(), stored.ffn());
  if (!expected->vocab.chars().empty() && !(expected->vocab == stored.vocab)) {
    throw LoadError("config vocabulary does not match the stored vocabulary");
  }
}

void LoadInto(const fs::path& dir, const Manifest& manifest, const std::string& name,
              MatrixX<float>& into) {
  auto it = manifest.params.find(name);
  if (it == manifest.params.end()) {
    throw LoadError("parameter " + name + " missing from manifest");
  }
  const auto& [file, shape] = it->second;
  if (shape[0] != into.rows() || shape[1] != into.cols()) {
    throw LoadError("parameter " + name + " has stored shape " +
                    std::to_string(shape[0]) + "x" + std::to_string(shape[1]) +
                    ", configuration expects " + std::to_string(into.rows()) + "x" +
                    std::to_string(into.cols()));
  }
  MatrixX<float> value;
  try {
    value = ReadArray(dir / file);
  } catch (const LoadError& e) {
    throw LoadError("parameter " + name + ": " + e.what());
  }
  if (value.rows() != into.rows() || value.cols() != into.cols()) {
    throw LoadError("parameter " + name + " array shape disagrees with manifest");
  }
  into = std::move(value);
}

EncoderWeights<float> LoadEncoderWeights(const fs::path& dir, const Manifest& manifest,
                                         const EncoderConfig& shape_config) {
  auto weights = EncoderWeights<float>::Zeros(shape_config);
  weights.ForEach([&](const std::string& name, MatrixX<float>& m) {
    LoadInto(dir, manifest, name, m);
  });
  return weights;
}

// Architecture from `expected` when given (so shape disagreements surface as
// parameter errors), vocabulary from the manifest.
EncoderConfig ShapeConfig(const Manifest& manifest, const EncoderConfig* expected) {
  if (expected == nullptr) return manifest.config;
  EncoderConfig c = *expected;
  c.vocab = manifest.config.vocab;
  return c;
}

}  // namespace

void WriteArray(const fs::path& path, const MatrixX<float>& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  PutU32(out, 2);
  PutU32(out, static_cast<std::uint32_t>(m.rows()));
  PutU32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      PutU32(out, std::bit_cast<std::uint32_t>(m(r, c)));
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MatrixX<float> ReadArray(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing array file " + path.filename().string());
  std::array<char, 4> magic{};
  std::uint32_t rank = 0, rows = 0, cols = 0;
  if (!in.read(magic.data(), magic.size()) || magic != kMagic || !GetU32(in, rank) ||
      rank != 2 || !GetU32(in, rows) || !GetU32(in, cols)) {
    throw LoadError("corrupt array header in " + path.filename().string());
  }
  MatrixX<float> m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      std::uint32_t bits = 0;
      if (!GetU32(in, bits)) {
        throw LoadError("truncated array data in " + path.filename().string());
      }
      m(r, c) = std::bit_cast<float>(bits);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw LoadError("trailing bytes in " + path.filename().string());
  }
  return m;
}

void SaveCheckpoint(const CscModel<float>& model, const fs::path& dir,
                    const CheckpointInfo& info) {
  SaveDirectory(dir, model.config(), info, "csc_model",
                [&model](auto&& visit) { model.ForEachParameter(visit); });
}

void SaveEncoderCheckpoint(const TransformerEncoder<float>& encoder, const fs::path& dir,
                           const CheckpointInfo& info) {
  SaveDirectory(dir, encoder.config(), info, "encoder",
                [&encoder](auto&& visit) { encoder.weights().ForEach(visit); });
}

EncoderConfig ReadCheckpointConfig(const fs::path& dir) { return ReadManifest(dir).config; }

CscModel<float> LoadCheckpoint(const fs::path& dir, const EncoderConfig* expected,
                               CheckpointInfo* info) {
  const Manifest manifest = ReadManifest(dir);
  if (manifest.kind != "csc_model") {
    throw LoadError("checkpoint " + dir.string() + " holds an encoder without a head");
  }
  CheckCompatible(manifest.config, expected);
  const EncoderConfig config = ShapeConfig(manifest, expected);
  auto weights = LoadEncoderWeights(dir, manifest, config);
  MatrixX<float> head_weight = MatrixX<float>::Zero(config.hidden_size, config.vocab.size());
  MatrixX<float> head_bias = MatrixX<float>::Zero(1, config.vocab.size());
  LoadInto(dir, manifest, "head.weight", head_weight);
  LoadInto(dir, manifest, "head.bias", head_bias);
  if (info != nullptr) *info = manifest.info;
  return CscModel<float>(TransformerEncoder<float>(config, std::move(weights)),
                         std::move(head_weight), std::move(head_bias));
}

TransformerEncoder<float> LoadEncoderCheckpoint(const fs::path& dir,
                                                const EncoderConfig* expected,
                                                CheckpointInfo* info) {
  const Manifest manifest = ReadManifest(dir);
  CheckCompatible(manifest.config, expected);
  const EncoderConfig config = ShapeConfig(manifest, expected);
  auto weights = LoadEncoderWeights(dir, manifest, config);
  if (info != nullptr) *info = manifest.info;
  return TransformerEncoder<float>(config, std::move(weights));
}

}  // namespace dictcsc
