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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/common.hpp"
#include "cfmia/rng.hpp"

namespace cfmia {

struct SyntheticSpec {
  std::size_t d = 2;
  std::size_t n_per_class = 100;
  std::uint64_t seed = 0;
  // Scale of the hypercube vertices used as class centers.
  double class_separation = 1.0;
};

enum class LabelRule { kBinary, kMedianThreshold };

inline std::string to_string(LabelRule r) {
  return r == LabelRule::kBinary ? "binary" : "median-threshold";
}

inline LabelRule parse_label_rule(std::string_view s) {
  if (s == "binary") return LabelRule::kBinary;
  if (s == "median-threshold") return LabelRule::kMedianThreshold;
  fail_config("unknown label rule '", s, "' (expected binary or median-threshold)");
}

// Where a dataset came from. Synthetic data records the two class centers so
// they can be checked against sample means.
struct Provenance {
  std::optional<SyntheticSpec> synthetic;
  Matrix class_centers;  // 2 x d, row k is the center of label k
  std::string path;
  std::string label_column;
  std::optional<LabelRule> label_rule;
  std::vector<std::string> feature_names;
  bool standardized = false;
};

class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix features, std::vector<int> labels, Provenance provenance = {})
      : features_(std::move(features)), labels_(std::move(labels)),
        provenance_(std::move(provenance)) {
    if (static_cast<std::size_t>(features_.rows()) != labels_.size()) {
      fail_config("dataset has ", features_.rows(), " feature rows but ", labels_.size(),
                  " labels");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] != 0 && labels_[i] != 1) {
        fail_config("dataset label at row ", i, " is ", labels_[i], ", expected 0 or 1");
      }
    }
  }

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const Provenance& provenance() const { return provenance_; }
  std::size_t n() const { return labels_.size(); }
  std::size_t d() const { return static_cast<std::size_t>(features_.cols()); }

  Vector row(std::size_t i) const { return features_.row(static_cast<Eigen::Index>(i)).transpose(); }
  int label(std::size_t i) const { return labels_[i]; }

  Vector label_vector() const {
    Vector y(static_cast<Eigen::Index>(n()));
    for (std::size_t i = 0; i < n(); ++i) y[static_cast<Eigen::Index>(i)] = labels_[i];
    return y;
  }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Matrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::vector<int> y(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] >= n()) fail_config("subset row ", rows[k], " out of range (n=", n(), ")");
      x.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(rows[k]));
      y[k] = labels_[rows[k]];
    }
    return Dataset(std::move(x), std::move(y), provenance_);
  }

 private:
  Matrix features_;
  std::vector<int> labels_;
  Provenance provenance_;
};

// Two distinct vertices of {-s, +s}^d are drawn as class centers; each class
// gets n_per_class unit-variance Gaussian samples about its vertex. Rows are
// ordered class 0 first.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.d < 1 || spec.n_per_class < 1) {
    fail_config("synthetic spec needs d >= 1 and n_per_class >= 1");
  }
  if (!(spec.class_separation > 0.0)) fail_config("class_separation must be positive");
  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(derive_seed(spec.seed, "synthetic-vertices"));
  Matrix centers(2, d);
  auto draw_vertex = [&](Eigen::Index k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      centers(k, j) = (rng() >> 63) ? spec.class_separation : -spec.class_separation;
    }
  };
  draw_vertex(0);
  do {
    draw_vertex(1);
  } while (centers.row(1) == centers.row(0));

  const auto per = static_cast<Eigen::Index>(spec.n_per_class);
  Matrix x(2 * per, d);
  std::vector<int> y(static_cast<std::size_t>(2 * per));
  Rng noise(derive_seed(spec.seed, "synthetic-noise"));
  for (Eigen::Index i = 0; i < 2 * per; ++i) {
    const Eigen::Index k = i < per ? 0 : 1;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = centers(k, j) + noise.normal();
    y[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  Provenance prov;
  prov.synthetic = spec;
  prov.class_centers = centers;
  for (Eigen::Index j = 0; j < d; ++j) prov.feature_names.push_back("x" + std::to_string(j));
  return Dataset(std::move(x), std::move(y), std::move(prov));
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

// Reads a headered, comma-separated numeric table. Every column other than
// `label_column` becomes a feature. Under median-threshold, label = 1 iff the
// raw value exceeds the column median (ties go to 0).
inline Dataset load_tabular(const std::string& path, const std::string& label_column,
                            LabelRule rule) {
  std::ifstream in(path);
  if (!in) fail_config("cannot open '", path, "'");
  std::string line;
  if (!std::getline(in, line)) fail_config(path, ": empty file, header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header;
  for (auto f : detail::split_csv_line(line)) header.emplace_back(detail::trim(f));
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) fail_config(path, ": no column named '", label_column, "'");
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t ncols = header.size();

  std::vector<double> values;
  std::vector<double> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != ncols) {
      fail_config(path, ": row ", line_no, " has ", fields.size(), " fields, header has ", ncols);
    }
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) {
        fail_config(path, ": row ", line_no, ", column '", header[c], "': non-numeric value '",
                    detail::trim(fields[c]), "'");
      }
      if (c == label_idx) {
        raw_labels.push_back(*v);
      } else {
        values.push_back(*v);
      }
    }
  }
  const std::size_t n = raw_labels.size();
  const std::size_t d = ncols - 1;
  if (n == 0) fail_config(path, ": no data rows");
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];
    }
  }
  std::vector<int> y(n);
  if (rule == LabelRule::kBinary) {
    for (std::size_t i = 0; i < n; ++i) {
      if (raw_labels[i] != 0.0 && raw_labels[i] != 1.0) {
        fail_config(path, ": row ", i + 2, ", column '", label_column, "': label ",
                    raw_labels[i], " is not 0 or 1");
      }
      y[i] = raw_labels[i] == 1.0 ? 1 : 0;
    }
  } else {
    const double med = detail::median(raw_labels);
    for (std::size_t i = 0; i < n; ++i) y[i] = raw_labels[i] > med ? 1 : 0;
  }
  Provenance prov;
  prov.path = path;
  prov.label_column = label_column;
  prov.label_rule = rule;
  for (std::size_t c = 0; c < ncols; ++c) {
    if (c != label_idx) prov.feature_names.push_back(header[c]);
  }
  return Dataset(std::move(x), std::move(y), std::move(prov));
}

// Per-column affine map to zero mean, unit variance. Uses the population
// (1/n) standard deviation.
struct ScalerParams {
  Vector mean;
  Vector std;
  bool population_std = true;

  Matrix transform(const Matrix& x) const {
    return ((x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
  }
  Matrix inverse_transform(const Matrix& z) const {
    return ((z.array().rowwise() * std.transpose().array()).rowwise() + mean.transpose().array())
        .matrix();
  }
};

inline std::pair<Dataset, ScalerParams> standardize(const Dataset& data) {
  if (data.n() < 2) fail_config("standardize needs at least 2 rows");
  const Matrix& x = data.features();
  ScalerParams p;
  p.mean = x.colwise().mean().transpose();
  p.std = ((x.rowwise() - p.mean.transpose()).array().square().colwise().sum() /
           static_cast<double>(data.n()))
              .sqrt()
              .transpose();
  for (Eigen::Index j = 0; j < p.std.size(); ++j) {
    const double scale = std::max(1.0, std::fabs(p.mean[j]));
    if (!(p.std[j] > 1e-12 * scale)) {
      const auto& names = data.provenance().feature_names;
      const std::string name = static_cast<std::size_t>(j) < names.size()
                                   ? names[static_cast<std::size_t>(j)]
                                   : "#" + std::to_string(j);
      fail_config("column '", name, "' has zero variance; drop it before standardizing");
    }
  }
  Provenance prov = data.provenance();
  prov.standardized = true;
  return {Dataset(p.transform(x), data.labels(), std::move(prov)), std::move(p)};
}

// Disjoint owner / shadow / evaluation-out partitions. `*_rows` are row
// indices into the source dataset; eval_in indexes owner_train.
struct SplitBundle {
  Dataset owner_train;
  Dataset shadow_pool;
  Dataset eval_out;
  std::vector<std::size_t> eval_in;
  std::vector<std::size_t> owner_rows;
  std::vector<std::size_t> shadow_rows;
  std::vector<std::size_t> eval_out_rows;
  std::uint64_t seed = 0;
};

inline SplitBundle split(const Dataset& data, std::size_t owner_n, std::size_t shadow_n,
                         std::size_t eval_out_n, std::uint64_t seed) {
  if (owner_n + shadow_n + eval_out_n > data.n()) {
    fail_config("split sizes ", owner_n, "+", shadow_n, "+", eval_out_n, " exceed n=", data.n());
  }
  std::vector<std::size_t> perm(data.n());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(perm.begin(), perm.end());
  SplitBundle b;
  b.seed = seed;
  auto take = [&](std::size_t from, std::size_t count) {
    return std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                    perm.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  b.owner_rows = take(0, owner_n);
  b.shadow_rows = take(owner_n, shadow_n);
  b.eval_out_rows = take(owner_n + shadow_n, eval_out_n);
  b.owner_train = data.subset(b.owner_rows);
  b.shadow_pool = data.subset(b.shadow_rows);
  b.eval_out = data.subset(b.eval_out_rows);
  b.eval_in.resize(owner_n);
  std::iota(b.eval_in.begin(), b.eval_in.end(), std::size_t{0});
  return b;
}

inline nlohmann::json to_json(const Provenance& p) {
  nlohmann::json j;
  if (p.synthetic) {
    j["kind"] = "synthetic";
    j["d"] = p.synthetic->d;
    j["n_per_class"] = p.synthetic->n_per_class;
    j["seed"] = p.synthetic->seed;
    j["class_separation"] = p.synthetic->class_separation;
    nlohmann::json centers = nlohmann::json::array();
    for (Eigen::Index k = 0; k < p.class_centers.rows(); ++k) {
      std::vector<double> row(p.class_centers.row(k).begin(), p.class_centers.row(k).end());
      centers.push_back(row);
    }
    j["class_centers"] = centers;
  } else {
    j["kind"] = "file";
    j["path"] = p.path;
    j["label_column"] = p.label_column;
    j["label_rule"] = p.label_rule ? to_string(*p.label_rule) : "";
    j["feature_names"] = p.feature_names;
  }
  j["standardized"] = p.standardized;
  return j;
}

// Features followed by a trailing `label` column.
inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write '", path, "'");
  const auto& names = data.provenance().feature_names;
  for (std::size_t j = 0; j < data.d(); ++j) {
    out << (j < names.size() ? names[j] : "x" + std::to_string(j)) << ',';
  }
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.d(); ++j) {
      out << data.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ',';
    }
    out << data.label(i) << '\n';
  }
  if (!out) fail_runtime("write to '", path, "' failed");
}

}  // namespace cfmia
