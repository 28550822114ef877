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

#ifndef DICTCSC_ANALYSIS_H_
#define DICTCSC_ANALYSIS_H_

#include <span>
#include <string>
#include <vector>

#include "dictcsc/encoders.h"

namespace dictcsc {

// Representations of characters encoded in isolation (one-character
// sentences). Characters outside the encoder vocabulary go to `skipped`.
struct CharRepresentations {
  std::vector<char32_t> chars;
  MatrixX<double> vectors;  // chars.size() x h
  std::vector<char32_t> skipped;
};

CharRepresentations EncodeCharacters(const Encoder<float>& encoder,
                                     std::span<const char32_t> chars);

// Two-component principal projection of the rows of `x` (n x d). Each
// component is sign-fixed so its largest-magnitude loading is positive;
// components with a negligible eigenvalue are all zeros.
MatrixX<double> Pca2d(const MatrixX<double>& x);

// Mean pairwise dot product of rows within the same class and across
// different classes. `labels[i]` is the class of row i.
struct ClassGap {
  double intra = 0;
  double inter = 0;
  double gap() const { return intra - inter; }
};
ClassGap MeanDotProducts(const MatrixX<double>& x, std::span<const int> labels);

}  // namespace dictcsc

#endif  // DICTCSC_ANALYSIS_H_
