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

#ifndef DICTCSC_UTF8_H_
#define DICTCSC_UTF8_H_

#include <string>
#include <string_view>
#include <vector>

namespace dictcsc {

// Sentences are handled as sequences of Unicode code points; every index in
// the library is a code-point index.
using Text = std::u32string;
using TextView = std::u32string_view;

// Throws std::invalid_argument on malformed UTF-8.
Text DecodeUtf8(std::string_view bytes);
std::string EncodeUtf8(TextView text);
std::string EncodeUtf8(char32_t c);

// Splits on every occurrence of `sep`; keeps empty fields.
std::vector<std::string_view> SplitFields(std::string_view line, char sep);

// Removes a trailing '\r' (CRLF files) and a leading UTF-8 BOM.
std::string_view StripLineEnding(std::string_view line);

}  // namespace dictcsc

#endif  // DICTCSC_UTF8_H_
