// Copyright 2026 The cfmia Authors
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

#pragma once

#include <cmath>

#include "cfmia/common.hpp"

namespace cfmia {

// Upper bounds on any attacker's balanced accuracy when the recourse
// mechanism is (epsilon, 0)-differentially private.
struct DpBound {
  double epsilon = 0.0;
  double ba_bound = 0.5;          // 1/2 + (1 - e^-eps) / 2
  double refined_ba_bound = 0.5;  // 1/2 + (2 - e^-eps)(1 - e^-eps) / 4
};

inline DpBound dp_ba_bound(double epsilon) {
  if (!(epsilon >= 0.0)) fail_config("epsilon must be nonnegative (got ", epsilon, ")");
  // 1 - e^-eps without cancellation for small eps.
  const double gap = -std::expm1(-epsilon);
  return {epsilon, 0.5 + gap / 2.0, 0.5 + (1.0 + gap) * gap / 4.0};
}

}  // namespace cfmia
