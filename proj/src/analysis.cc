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

#include "dictcsc/analysis.h"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace dictcsc {

CharRepresentations EncodeCharacters(const Encoder<float>& encoder,
                                     std::span<const char32_t> chars) {
  CharRepresentations out;
  std::vector<RowVectorX<double>> rows;
  for (char32_t c : chars) {
    if (c == 0 || encoder.vocab().IdOf(c) == 0) {
      out.skipped.push_back(c);
      continue;
    }
    const RepSequence<float> rep = encoder.Encode(Text(1, c));
    out.chars.push_back(c);
    rows.push_back(rep.values.row(0).cast<double>());
  }
  out.vectors.resize(static_cast<Eigen::Index>(rows.size()), encoder.hidden_size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.vectors.row(static_cast<Eigen::Index>(i)) = rows[i];
  }
  return out;
}

MatrixX<double> Pca2d(const MatrixX<double>& x) {
  const Eigen::Index n = x.rows();
  MatrixX<double> out = MatrixX<double>::Zero(n, 2);
  if (n < 2 || x.cols() == 0) return out;
  const RowVectorX<double> mean = x.colwise().mean();
  const MatrixX<double> centered = x.rowwise() - mean;
  const MatrixX<double> cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const VectorX<double>& values = solver.eigenvalues();  // ascending
  const double largest = std::max(values(values.size() - 1), 0.0);
  const double tolerance = 1e-9 * std::max(largest, 1.0);
  for (Eigen::Index k = 0; k < 2 && k < values.size(); ++k) {
    const Eigen::Index idx = values.size() - 1 - k;
    if (values(idx) <= tolerance) continue;
    VectorX<double> component = solver.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    component.cwiseAbs().maxCoeff(&arg);
    if (component(arg) < 0) component = -component;
    out.col(k) = centered * component;
  }
  return out;
}

ClassGap MeanDotProducts(const MatrixX<double>& x, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw std::invalid_argument("one label per row is required");
  }
  double intra = 0, inter = 0;
  long n_intra = 0, n_inter = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double d = x.row(i).dot(x.row(j));
      if (labels[i] == labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  if (n_intra == 0 || n_inter == 0) {
    throw std::invalid_argument("need at least one intra-class and one inter-class pair");
  }
  return ClassGap{intra / n_intra, inter / n_inter};
}

}  // namespace dictcsc
