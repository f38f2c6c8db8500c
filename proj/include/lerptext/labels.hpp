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

#pragma once

#include <variant>
#include <vector>

namespace lerptext {

/// Probability vector over classes. Entries are non-negative and sum to 1.
struct SoftLabel {
  std::vector<double> probs;

  int num_classes() const { return static_cast<int>(probs.size()); }
  int argmax() const;  // lowest index among ties
  bool operator==(const SoftLabel&) const = default;
};

/// A class index or a full distribution.
using Label = std::variant<int, SoftLabel>;

SoftLabel one_hot(int cls, int num_classes);
SoftLabel to_soft(const Label& label, int num_classes);

/// True when every entry is >= 0 and the sum is within `tol` of 1.
bool on_simplex(const SoftLabel& y, double tol = 1e-6);

}  // namespace lerptext
