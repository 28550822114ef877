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

#ifndef DICTCSC_CLI_H_
#define DICTCSC_CLI_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dictcsc {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config;  // resolved configuration, as text
  std::map<std::string, std::string> input_digests;  // path -> sha256 hex
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;

  // Digests a file, or every regular file below a directory in path order.
  void AddInput(const std::filesystem::path& path);
  std::string ToJson() const;
  void Write(const std::filesystem::path& path) const;
};

std::string Sha256Hex(const std::string& bytes);
std::string Sha256File(const std::filesystem::path& path);
std::string UtcTimestamp();

// Entry point of the `dictcsc` tool. Returns the process exit code; data go
// to files, diagnostics to `err`.
int RunCli(int argc, char** argv, std::ostream& err);

}  // namespace dictcsc

#endif  // DICTCSC_CLI_H_
