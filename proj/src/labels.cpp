// Copyright 2026 The lerptext Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lerptext/labels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lerptext {

int SoftLabel::argmax() const {
  if (probs.empty()) throw std::invalid_argument("argmax of empty label");
  int best = 0;
  for (int i = 1; i < num_classes(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

SoftLabel one_hot(int cls, int num_classes) {
  if (cls < 0 || cls >= num_classes) {
    throw std::out_of_range("class index " + std::to_string(cls) +
                            " outside [0, " + std::to_string(num_classes) + ")");
  }
  SoftLabel y;
  y.probs.assign(static_cast<size_t>(num_classes), 0.0);
  y.probs[cls] = 1.0;
  return y;
}

SoftLabel to_soft(const Label& label, int num_classes) {
  if (const int* cls = std::get_if<int>(&label)) return one_hot(*cls, num_classes);
  const auto& y = std::get<SoftLabel>(label);
  if (y.num_classes() != num_classes) {
    throw std::invalid_argument("soft label has " + std::to_string(y.num_classes()) +
                                " classes, expected " + std::to_string(num_classes));
  }
  return y;
}

bool on_simplex(const SoftLabel& y, double tol) {
  if (y.probs.empty()) return false;
  double sum = 0.0;
  for (double p : y.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace lerptext
