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
#include <string>
#include <string_view>

#include "cfmia/common.hpp"

namespace cfmia {

enum class CostNorm { kL1, kL2 };

// Recourse cost c(x, x'): the selected norm of x' - x.
struct CostFn {
  CostNorm norm = CostNorm::kL1;

  double operator()(const Vector& x, const Vector& x_prime) const {
    check_dimension(x_prime.size(), x.size(), "cost");
    const Vector delta = x_prime - x;
    return norm == CostNorm::kL1 ? delta.lpNorm<1>() : delta.norm();
  }

  // Subgradient with respect to x'. Zero coordinates (l1) and a zero delta
  // (l2) get a zero subgradient.
  Vector gradient(const Vector& x, const Vector& x_prime) const {
    check_dimension(x_prime.size(), x.size(), "cost gradient");
    const Vector delta = x_prime - x;
    if (norm == CostNorm::kL1) {
      return delta.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    }
    const double len = delta.norm();
    if (len == 0.0) return Vector::Zero(delta.size());
    return delta / len;
  }
};

inline double cost(const Vector& x, const Vector& x_prime, const CostFn& fn) {
  return fn(x, x_prime);
}

inline std::string to_string(CostNorm n) { return n == CostNorm::kL1 ? "l1" : "l2"; }

inline CostNorm parse_cost_norm(std::string_view s) {
  if (s == "l1") return CostNorm::kL1;
  if (s == "l2") return CostNorm::kL2;
  fail_config("unknown cost norm '", s, "' (expected l1 or l2)");
}

}  // namespace cfmia
