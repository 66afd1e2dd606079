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

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/attack.hpp"
#include "cfmia/common.hpp"
#include "cfmia/data.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/recourse.hpp"

// Experiment configuration: one JSON document, nested objects, unknown keys
// rejected. Every key is optional and falls back to the defaults below.
//
// {
//   "id": "exp",                      experiment label used in summaries
//   "seed": 0,                        master seed; all stage seeds derive from it
//   "workers": 1,
//   "output_dir": "out",
//   "data": {
//     "source": "synthetic",          or "csv"
//     "d": 50, "n_per_class": 2000, "class_separation": 1.0,      synthetic
//     "path": "", "label_column": "label", "label_rule": "binary", csv
//     "standardize": null             default: true for csv, false for synthetic
//   },
//   "split": {"owner_n": 1000, "shadow_n": 2000, "eval_out_n": 1000},
//   "model": {"architecture": [], "train": {TRAIN}},
//   "recourse": {
//     "algorithm": "scfe",            scfe | gs | cchvae
//     "cost": "l1",                   l1 | l2
//     "immutable": [],
//     "scfe": {"lambda": 0.1, "lambda_decay": 0.5, "max_iters": 1000,
//              "step_size": 0.05, "max_retries": 5},
//     "search": {"initial_radius": 0.1, "radius_step": 0.1,
//                "samples_per_radius": 500, "max_radius": 10.0},
//     "vae": {"hidden": 20, "latent": 8, "train": {TRAIN, epochs default 200}}
//   },
//   "attack": {"attacks": ["cfd", "cfd_lrt", "loss", "loss_lrt"], "n_shadow": 16,
//              "pool_fraction": 0.5, "alphas": [0.1, 0.01]},
//   "eval": {"per_class": 100},
//   "sweep": {"data.d": [50, 200, 800]}   dotted path -> values (sweep only)
// }
//
// TRAIN = {"learning_rate": 1e-4, "epochs": 250, "batch_size": 64,
//          "full_batch_max": 256, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}
namespace cfmia {

struct DataConfig {
  bool synthetic = true;
  std::size_t d = 50;
  std::size_t n_per_class = 2000;
  double class_separation = 1.0;
  std::string path;
  std::string label_column = "label";
  LabelRule label_rule = LabelRule::kBinary;
  std::optional<bool> standardize;

  bool should_standardize() const { return standardize.value_or(!synthetic); }
};

struct SplitConfig {
  std::size_t owner_n = 1000;
  std::size_t shadow_n = 2000;
  std::size_t eval_out_n = 1000;
};

struct ModelConfig {
  std::vector<std::size_t> architecture;
  TrainConfig train;
};

struct AttackConfig {
  std::vector<AttackKind> attacks = {AttackKind::kCfd, AttackKind::kCfdLrt, AttackKind::kLoss,
                                     AttackKind::kLossLrt};
  std::size_t n_shadow = 16;
  double pool_fraction = 0.5;
  std::vector<double> alphas = {0.1, 0.01};

  bool wants(AttackKind k) const {
    return std::find(attacks.begin(), attacks.end(), k) != attacks.end();
  }
  bool needs_shadows() const { return wants(AttackKind::kCfdLrt) || wants(AttackKind::kLossLrt); }
};

struct EvalConfig {
  std::size_t per_class = 100;
};

struct ExperimentConfig {
  std::string id = "exp";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_dir = "out";
  DataConfig data;
  SplitConfig split;
  ModelConfig model;
  RecourseConfig recourse;
  AttackConfig attack;
  EvalConfig eval;
  nlohmann::json sweep = nlohmann::json::object();
};

namespace detail {

// Reads keys from one JSON object and remembers which were consumed, so that
// anything left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail_config("config: '", path_, "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail_config("config: '", where(key), "': ", e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    T value{};
    get(key, value);
    out = std::move(value);
  }

  template <typename T, typename Parse>
  void get_parsed(const char* key, T& out, Parse&& parse) {
    std::optional<std::string> s;
    get(key, s);
    if (s) out = parse(*s);
  }

  bool has(const char* key) const { return j_.contains(key); }

  std::optional<ObjectReader> child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return ObjectReader(*it, where(key));
  }

  const nlohmann::json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail_config("config: unknown key '", where(k.c_str()), "'");
    }
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_train(ObjectReader r, TrainConfig& t) {
  r.get("learning_rate", t.learning_rate);
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("full_batch_max", t.full_batch_max);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("eps", t.eps);
  r.finish();
  t.validate();
}

inline nlohmann::json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
          {"batch_size", t.batch_size},       {"full_batch_max", t.full_batch_max},
          {"beta1", t.beta1},                 {"beta2", t.beta2},
          {"eps", t.eps}};
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::ObjectReader;
  ExperimentConfig c;
  ObjectReader root(j, "");
  root.get("id", c.id);
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.get("output_dir", c.output_dir);
  if (auto r = root.child("data")) {
    std::string source = "synthetic";
    r->get("source", source);
    if (source != "synthetic" && source != "csv") {
      fail_config("config: data.source must be synthetic or csv");
    }
    c.data.synthetic = source == "synthetic";
    r->get("d", c.data.d);
    r->get("n_per_class", c.data.n_per_class);
    r->get("class_separation", c.data.class_separation);
    r->get("path", c.data.path);
    r->get("label_column", c.data.label_column);
    r->get_parsed("label_rule", c.data.label_rule, parse_label_rule);
    r->get("standardize", c.data.standardize);
    r->finish();
    if (!c.data.synthetic && c.data.path.empty()) fail_config("config: data.path required for csv");
  }
  if (auto r = root.child("split")) {
    r->get("owner_n", c.split.owner_n);
    r->get("shadow_n", c.split.shadow_n);
    r->get("eval_out_n", c.split.eval_out_n);
    r->finish();
  }
  if (auto r = root.child("model")) {
    r->get("architecture", c.model.architecture);
    if (auto t = r->child("train")) detail::read_train(*t, c.model.train);
    r->finish();
  }
  if (auto r = root.child("recourse")) {
    r->get_parsed("algorithm", c.recourse.algorithm, parse_recourse_algorithm);
    r->get_parsed("cost", c.recourse.cost.norm, parse_cost_norm);
    std::vector<std::size_t> immutable;
    r->get("immutable", immutable);
    c.recourse.scfe.immutable = immutable;
    c.recourse.search.immutable = immutable;
    if (auto s = r->child("scfe")) {
      s->get("lambda", c.recourse.scfe.lambda);
      s->get("lambda_decay", c.recourse.scfe.lambda_decay);
      s->get("max_iters", c.recourse.scfe.max_iters);
      s->get("step_size", c.recourse.scfe.step_size);
      s->get("max_retries", c.recourse.scfe.max_retries);
      s->finish();
    }
    if (auto s = r->child("search")) {
      s->get("initial_radius", c.recourse.search.initial_radius);
      s->get("radius_step", c.recourse.search.radius_step);
      s->get("samples_per_radius", c.recourse.search.samples_per_radius);
      s->get("max_radius", c.recourse.search.max_radius);
      s->finish();
    }
    if (auto v = r->child("vae")) {
      v->get("hidden", c.recourse.vae_shape.hidden);
      v->get("latent", c.recourse.vae_shape.latent);
      if (auto t = v->child("train")) detail::read_train(*t, c.recourse.vae_train);
      v->finish();
    }
    r->finish();
    c.recourse.scfe.validate();
    c.recourse.search.validate();
  }
  if (auto r = root.child("attack")) {
    std::vector<std::string> names;
    r->get("attacks", names);
    if (r->has("attacks")) {
      c.attack.attacks.clear();
      for (const auto& n : names) c.attack.attacks.push_back(parse_attack_kind(n));
    }
    r->get("n_shadow", c.attack.n_shadow);
    r->get("pool_fraction", c.attack.pool_fraction);
    r->get("alphas", c.attack.alphas);
    r->finish();
    for (double a : c.attack.alphas) {
      if (!(a > 0.0 && a < 1.0)) fail_config("config: attack.alphas must lie in (0,1)");
    }
  }
  if (auto r = root.child("eval")) {
    r->get("per_class", c.eval.per_class);
    r->finish();
  }
  if (root.has("sweep")) {
    c.sweep = root.raw("sweep");
    if (!c.sweep.is_object()) fail_config("config: sweep must be an object");
    for (const auto& [k, v] : c.sweep.items()) {
      if (!v.is_array() || v.empty()) fail_config("config: sweep.", k, " must be a nonempty array");
    }
  }
  root.finish();
  if (c.workers < 1) fail_config("config: workers must be >= 1");
  if (c.eval.per_class < 1) fail_config("config: eval.per_class must be >= 1");
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_config("cannot open config '", path, "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail_config(path, ": ", e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_json_file(path));
}

// Fully resolved config, suitable for parse_config again.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json data = {{"source", c.data.synthetic ? "synthetic" : "csv"}};
  if (c.data.synthetic) {
    data["d"] = c.data.d;
    data["n_per_class"] = c.data.n_per_class;
    data["class_separation"] = c.data.class_separation;
  } else {
    data["path"] = c.data.path;
    data["label_column"] = c.data.label_column;
    data["label_rule"] = to_string(c.data.label_rule);
  }
  data["standardize"] = c.data.should_standardize();
  std::vector<std::string> attacks;
  for (auto a : c.attack.attacks) attacks.push_back(to_string(a));
  const auto& s = c.recourse.search;
  const auto& f = c.recourse.scfe;
  nlohmann::json out = {
      {"id", c.id},
      {"seed", c.seed},
      {"workers", c.workers},
      {"output_dir", c.output_dir},
      {"data", data},
      {"split",
       {{"owner_n", c.split.owner_n}, {"shadow_n", c.split.shadow_n}, {"eval_out_n", c.split.eval_out_n}}},
      {"model", {{"architecture", c.model.architecture}, {"train", detail::train_to_json(c.model.train)}}},
      {"recourse",
       {{"algorithm", to_string(c.recourse.algorithm)},
        {"cost", to_string(c.recourse.cost.norm)},
        {"immutable", f.immutable},
        {"scfe",
         {{"lambda", f.lambda}, {"lambda_decay", f.lambda_decay}, {"max_iters", f.max_iters},
          {"step_size", f.step_size}, {"max_retries", f.max_retries}}},
        {"search",
         {{"initial_radius", s.initial_radius}, {"radius_step", s.radius_step},
          {"samples_per_radius", s.samples_per_radius}, {"max_radius", s.max_radius}}},
        {"vae",
         {{"hidden", c.recourse.vae_shape.hidden}, {"latent", c.recourse.vae_shape.latent},
          {"train", detail::train_to_json(c.recourse.vae_train)}}}}},
      {"attack",
       {{"attacks", attacks}, {"n_shadow", c.attack.n_shadow}, {"pool_fraction", c.attack.pool_fraction},
        {"alphas", c.attack.alphas}}},
      {"eval", {{"per_class", c.eval.per_class}}}};
  if (!c.sweep.empty()) out["sweep"] = c.sweep;
  return out;
}

}  // namespace cfmia
