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

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/attack.hpp"
#include "cfmia/common.hpp"
#include "cfmia/data.hpp"

namespace cfmia {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), both coordinates nondecreasing
  bool higher_means_member = true;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Threshold sweep over the unique score values, strongest member evidence
// first. Tied scores enter the curve as a single step.
inline RocCurve roc(std::span<const double> scores, std::span<const Guess> membership,
                    bool higher_means_member) {
  if (scores.size() != membership.size()) {
    fail_config("roc: ", scores.size(), " scores but ", membership.size(), " labels");
  }
  auto is_member = [&](std::size_t i) { return membership[i] == Guess::kMember; };
  RocCurve c;
  c.higher_means_member = higher_means_member;
  for (std::size_t i = 0; i < scores.size(); ++i) (is_member(i) ? c.n_pos : c.n_neg)++;
  if (c.n_pos == 0 || c.n_neg == 0) fail_config("roc: both members and non-members are required");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto eff = [&](std::size_t i) { return higher_means_member ? scores[i] : -scores[i]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eff(a) > eff(b); });
  c.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double v = eff(order[k]);
    while (k < order.size() && eff(order[k]) == v) {
      (is_member(order[k]) ? tp : fp)++;
      ++k;
    }
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(c.n_neg),
                        static_cast<double>(tp) / static_cast<double>(c.n_pos)});
  }
  return c;
}

inline RocCurve roc(std::span<const AttackScore> scores, std::span<const Guess> membership) {
  if (scores.size() != membership.size()) {
    fail_config("roc: ", scores.size(), " scores but ", membership.size(), " labels");
  }
  if (scores.empty()) fail_config("roc: no scores");
  std::vector<double> s;
  for (const auto& a : scores) {
    if (a.higher_means_member != scores[0].higher_means_member) {
      fail_config("roc: mixed score directions");
    }
    s.push_back(a.score);
  }
  return roc(s, membership, scores[0].higher_means_member);
}

inline double auc(const RocCurve& c) {
  double area = 0.0;
  for (std::size_t k = 1; k < c.points.size(); ++k) {
    area += (c.points[k].fpr - c.points[k - 1].fpr) * (c.points[k].tpr + c.points[k - 1].tpr) * 0.5;
  }
  return area;
}

// Best (TPR + TNR) / 2 over the swept thresholds.
inline double balanced_accuracy(const RocCurve& c) {
  double best = 0.0;
  for (const auto& p : c.points) best = std::max(best, 0.5 * (p.tpr + 1.0 - p.fpr));
  return best;
}

// TPR at the largest achieved FPR not exceeding alpha; no interpolation.
inline double tpr_at_fpr(const RocCurve& c, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail_config("tpr_at_fpr: alpha=", alpha, " outside (0,1)");
  double best = 0.0;
  for (const auto& p : c.points) {
    if (p.fpr <= alpha) best = std::max(best, p.tpr);
  }
  return best;
}

inline constexpr double kLogFprFloor = 1e-5;

inline void export_log_roc(const RocCurve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write '", path, "'");
  out << "fpr,tpr,fpr_raw\n";
  char buf[96];
  for (const auto& p : c.points) {
    const double shown = p.fpr == 0.0 ? kLogFprFloor : p.fpr;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", shown, p.tpr, p.fpr);
    out << buf;
  }
  if (!out) fail_runtime("write to '", path, "' failed");
}

// Reads a file written by export_log_roc back into curve points (raw FPR).
inline RocCurve import_log_roc(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_runtime("cannot open '", path, "'");
  std::string line;
  if (!std::getline(in, line) || line != "fpr,tpr,fpr_raw") fail_runtime(path, ": bad ROC header");
  RocCurve c;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 3) fail_runtime(path, ": row ", line_no, " needs 3 fields");
    const auto tpr = detail::parse_double(f[1]);
    const auto raw = detail::parse_double(f[2]);
    if (!tpr || !raw) fail_runtime(path, ": row ", line_no, " is not numeric");
    c.points.push_back({*raw, *tpr});
  }
  return c;
}

struct MetricsReport {
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  std::map<double, double> tpr_at_fpr;
};

inline MetricsReport evaluate_curve(const RocCurve& c, std::span<const double> alphas) {
  MetricsReport r;
  r.auc = auc(c);
  r.balanced_accuracy = balanced_accuracy(c);
  for (double a : alphas) r.tpr_at_fpr[a] = tpr_at_fpr(c, a);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [a, v] : r.tpr_at_fpr) {
    std::ostringstream key;
    key << a;
    t[key.str()] = v;
  }
  return {{"auc", r.auc}, {"balanced_accuracy", r.balanced_accuracy}, {"tpr_at_fpr", t}};
}

}  // namespace cfmia
