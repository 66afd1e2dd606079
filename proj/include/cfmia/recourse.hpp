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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/common.hpp"
#include "cfmia/cost.hpp"
#include "cfmia/layers.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/rng.hpp"
#include "cfmia/vae.hpp"

namespace cfmia {

enum class RecourseAlgorithm { kScfe, kGrowingSpheres, kCchvae };

inline std::string to_string(RecourseAlgorithm a) {
  switch (a) {
    case RecourseAlgorithm::kScfe: return "scfe";
    case RecourseAlgorithm::kGrowingSpheres: return "gs";
    case RecourseAlgorithm::kCchvae: return "cchvae";
  }
  return "?";
}

inline RecourseAlgorithm parse_recourse_algorithm(std::string_view s) {
  if (s == "scfe") return RecourseAlgorithm::kScfe;
  if (s == "gs") return RecourseAlgorithm::kGrowingSpheres;
  if (s == "cchvae") return RecourseAlgorithm::kCchvae;
  fail_config("unknown recourse algorithm '", s, "' (expected scfe, gs or cchvae)");
}

struct RecourseTrace {
  int iterations = 0;  // optimizer steps (SCFE) or radii tried (GS, CCHVAE)
  int retries = 0;
  double lambda = 0.0;
  double radius = 0.0;
  std::optional<Vector> latent;  // CCHVAE: latent code that decodes to the counterfactual
};

struct RecourseResult {
  Vector counterfactual;
  double cost = 0.0;
  bool valid = false;
  RecourseAlgorithm algorithm = RecourseAlgorithm::kScfe;
  RecourseTrace trace;
  std::uint64_t seed = 0;
};

struct ScfeParams {
  double lambda = 0.1;
  double lambda_decay = 0.5;
  int max_iters = 1000;
  double step_size = 0.05;
  int max_retries = 5;
  // Feature indices that recourse may not change.
  std::vector<std::size_t> immutable;

  void validate() const {
    if (!(lambda > 0.0)) fail_config("scfe lambda must be positive");
    if (!(lambda_decay > 0.0 && lambda_decay < 1.0)) fail_config("scfe lambda_decay must be in (0,1)");
    if (max_iters < 1) fail_config("scfe max_iters must be >= 1");
    if (!(step_size > 0.0)) fail_config("scfe step_size must be positive");
    if (max_retries < 0) fail_config("scfe max_retries must be >= 0");
  }
};

// Radius schedule for growing-sphere searches (input space for GS, latent
// space for CCHVAE).
struct SearchParams {
  double initial_radius = 0.1;
  double radius_step = 0.1;
  int samples_per_radius = 500;
  double max_radius = 10.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> immutable;

  void validate() const {
    if (!(initial_radius > 0.0) || !(radius_step > 0.0) || !(max_radius > 0.0)) {
      fail_config("search radii must be positive");
    }
    if (samples_per_radius < 1) fail_config("samples_per_radius must be >= 1");
  }
};

// `count` points drawn uniformly from the l1 ball of the given radius. Uses
// the representation y / (||y||_1 + E) with i.i.d. Laplace y and an
// independent Exp(1) variable E, which is uniform on the unit l1 ball.
inline Matrix uniform_l1_ball_sample(const Vector& center, double radius, std::size_t count,
                                     std::uint64_t seed) {
  if (!(radius > 0.0)) fail_config("l1 ball radius must be positive");
  const Eigen::Index d = center.size();
  Matrix pts(static_cast<Eigen::Index>(count), d);
  Rng rng(seed);
  Vector y(d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) y[j] = rng.laplace();
    const double denom = y.lpNorm<1>() + rng.exponential();
    Vector delta = y * (radius / denom);
    Vector p = center + delta;
    const double len = (p - center).lpNorm<1>();
    if (len > radius) {
      // Rounding in center + delta can push the norm past the radius by an ulp.
      delta *= (radius / len) * (1.0 - 4 * std::numeric_limits<double>::epsilon());
      p = center + delta;
    }
    pts.row(i) = p.transpose();
  }
  return pts;
}

namespace detail {

inline void require_negative(const Model& model, const Vector& x, const char* who) {
  check_dimension(x.size(), static_cast<Eigen::Index>(model.input_dim()), who);
  const double p = predict_proba(model, x);
  if (p >= 0.5) {
    fail_config(who, ": input already receives the favorable outcome (p=", p, ")");
  }
}

inline void zero_immutable(Vector& v, const std::vector<std::size_t>& immutable) {
  for (std::size_t j : immutable) {
    if (static_cast<Eigen::Index>(j) < v.size()) v[static_cast<Eigen::Index>(j)] = 0.0;
  }
}

// Cheapest valid point on the segment from x (invalid) to target (valid).
inline Vector boundary_on_segment(const Model& model, const Vector& x, const Vector& target) {
  const Vector dir = target - x;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (predict_proba(model, Vector(x + mid * dir)) >= 0.5) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return x + hi * dir;
}

// Among rows of `candidates` flagged in `ok`, returns the lowest-cost one that
// is still valid when re-evaluated through `finish` (identity for GS, the
// single-vector decoder for CCHVAE).
template <typename Finish>
std::optional<std::pair<Eigen::Index, Vector>> lowest_cost_valid(const Model& model,
                                                                 const Vector& x,
                                                                 const Matrix& candidates,
                                                                 const std::vector<bool>& ok,
                                                                 const CostFn& cost_fn,
                                                                 Finish&& finish) {
  std::vector<std::pair<double, Eigen::Index>> ranked;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    if (!ok[static_cast<std::size_t>(i)]) continue;
    ranked.emplace_back(cost_fn(x, finish(i)), i);
  }
  std::sort(ranked.begin(), ranked.end());
  for (const auto& [c, i] : ranked) {
    Vector v = finish(i);
    if (predict_proba(model, v) >= 0.5) return std::make_pair(i, std::move(v));
  }
  return std::nullopt;
}

}  // namespace detail

// Gradient-based recourse: Adam on x' (started at x) minimizing
// BCE(f(x'), 1) + lambda * c(x, x'). If no iterate is valid, lambda is
// multiplied by lambda_decay and the search restarts. Among valid iterates the
// cheapest is kept; it and the final iterate are then pulled back along the
// segment from x to the decision boundary, and the cheaper point wins.
inline RecourseResult scfe(const Model& model, const Vector& x, const ScfeParams& params,
                           const CostFn& cost_fn, std::uint64_t seed = 0) {
  params.validate();
  detail::require_negative(model, x, "scfe");
  RecourseResult result;
  result.algorithm = RecourseAlgorithm::kScfe;
  result.seed = seed;
  double lambda = params.lambda;
  Vector last = x;
  for (int attempt = 0; attempt <= params.max_retries; ++attempt, lambda *= params.lambda_decay) {
    Adam adam(AdamParams{params.step_size, 0.9, 0.999, 1e-8});
    Vector xp = x;
    Vector m = Vector::Zero(x.size()), v = Vector::Zero(x.size());
    std::optional<Vector> best;
    double best_cost = std::numeric_limits<double>::infinity();
    const RecourseObjective objective{x, lambda, cost_fn};
    bool final_valid = false;
    for (int it = 0; it <= params.max_iters; ++it) {
      const double p = predict_proba(model, xp);
      const bool valid = p >= 0.5;
      if (valid && it > 0) {
        const double c = cost_fn(x, xp);
        if (c < best_cost) {
          best_cost = c;
          best = xp;
        }
      }
      if (it == params.max_iters) {
        final_valid = valid;
        break;
      }
      Vector g = input_gradient(model, xp, objective);
      detail::zero_immutable(g, params.immutable);
      adam.next_step();
      adam.apply(xp, g, m, v);
    }
    last = xp;
    if (!best) continue;

    std::vector<Vector> candidates = {*best, detail::boundary_on_segment(model, x, *best)};
    if (final_valid) candidates.push_back(detail::boundary_on_segment(model, x, xp));
    const Vector* pick = nullptr;
    double pick_cost = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      const double cc = cost_fn(x, c);
      if (cc < pick_cost && predict_proba(model, c) >= 0.5) {
        pick_cost = cc;
        pick = &c;
      }
    }
    result.counterfactual = *pick;
    result.cost = pick_cost;
    result.valid = true;
    result.trace.iterations = params.max_iters * (attempt + 1);
    result.trace.retries = attempt;
    result.trace.lambda = lambda;
    return result;
  }
  result.counterfactual = last;
  result.cost = cost_fn(x, last);
  result.valid = false;
  result.trace.iterations = params.max_iters * (params.max_retries + 1);
  result.trace.retries = params.max_retries;
  result.trace.lambda = params.lambda * std::pow(params.lambda_decay, params.max_retries);
  return result;
}

namespace detail {

inline double radius_at(const SearchParams& p, int k) {
  return p.initial_radius + static_cast<double>(k) * p.radius_step;
}

inline int radius_count(const SearchParams& p) {
  if (p.initial_radius > p.max_radius * (1.0 + 1e-12)) return 0;
  return static_cast<int>(std::floor((p.max_radius - p.initial_radius) / p.radius_step + 1e-9)) + 1;
}

inline RecourseResult search_failure(const Vector& x, RecourseAlgorithm algo,
                                     const SearchParams& params, int tried, const CostFn& cost_fn) {
  RecourseResult r;
  r.algorithm = algo;
  r.seed = params.seed;
  r.counterfactual = x;
  r.cost = cost_fn(x, x);
  r.valid = false;
  r.trace.iterations = tried;
  r.trace.radius = tried > 0 ? radius_at(params, tried - 1) : 0.0;
  return r;
}

}  // namespace detail

// Random search in growing l1 balls around x. Returns the cheapest valid
// sample at the first radius that yields any valid sample.
inline RecourseResult growing_spheres(const Model& model, const Vector& x, const SearchParams& params,
                                      const CostFn& cost_fn) {
  params.validate();
  detail::require_negative(model, x, "growing_spheres");
  const int radii = detail::radius_count(params);
  for (int k = 0; k < radii; ++k) {
    const double r = detail::radius_at(params, k);
    Matrix pts = uniform_l1_ball_sample(x, r, static_cast<std::size_t>(params.samples_per_radius),
                                        derive_seed(params.seed, "gs-radius", static_cast<std::uint64_t>(k)));
    for (std::size_t j : params.immutable) {
      if (static_cast<Eigen::Index>(j) < x.size()) pts.col(static_cast<Eigen::Index>(j)).setConstant(x[static_cast<Eigen::Index>(j)]);
    }
    const Vector probs = predict_proba(model, pts);
    std::vector<bool> ok(static_cast<std::size_t>(pts.rows()));
    bool any = false;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      ok[static_cast<std::size_t>(i)] = probs[i] >= 0.5;
      any = any || probs[i] >= 0.5;
    }
    if (!any) continue;
    auto found = detail::lowest_cost_valid(model, x, pts, ok, cost_fn,
                                           [&](Eigen::Index i) { return Vector(pts.row(i).transpose()); });
    if (!found) continue;
    RecourseResult res;
    res.algorithm = RecourseAlgorithm::kGrowingSpheres;
    res.seed = params.seed;
    res.counterfactual = std::move(found->second);
    res.cost = cost_fn(x, res.counterfactual);
    res.valid = true;
    res.trace.iterations = k + 1;
    res.trace.radius = r;
    return res;
  }
  return detail::search_failure(x, RecourseAlgorithm::kGrowingSpheres, params, radii, cost_fn);
}

// Growing l1-ball search in the VAE latent space around the encoder mean of
// x. Candidates are decoded, so every counterfactual lies in the decoder's
// range; cost is measured in input space.
inline RecourseResult cchvae(const Model& model, const VaeModel& vae, const Vector& x,
                             const SearchParams& params, const CostFn& cost_fn) {
  params.validate();
  detail::require_negative(model, x, "cchvae");
  check_dimension(static_cast<Eigen::Index>(vae.input_dim()), x.size(), "cchvae VAE input");
  const Vector z_x = vae.encode(x).first;
  const int radii = detail::radius_count(params);
  for (int k = 0; k < radii; ++k) {
    const double r = detail::radius_at(params, k);
    const Matrix zs = uniform_l1_ball_sample(z_x, r, static_cast<std::size_t>(params.samples_per_radius),
                                             derive_seed(params.seed, "cchvae-radius", static_cast<std::uint64_t>(k)));
    const Matrix decoded = vae.decode(zs);
    const Vector probs = predict_proba(model, decoded);
    std::vector<bool> ok(static_cast<std::size_t>(zs.rows()));
    bool any = false;
    for (Eigen::Index i = 0; i < zs.rows(); ++i) {
      ok[static_cast<std::size_t>(i)] = probs[i] >= 0.5;
      any = any || probs[i] >= 0.5;
    }
    if (!any) continue;
    auto found = detail::lowest_cost_valid(model, x, zs, ok, cost_fn, [&](Eigen::Index i) {
      return vae.decode(Vector(zs.row(i).transpose()));
    });
    if (!found) continue;
    RecourseResult res;
    res.algorithm = RecourseAlgorithm::kCchvae;
    res.seed = params.seed;
    res.counterfactual = std::move(found->second);
    res.cost = cost_fn(x, res.counterfactual);
    res.valid = true;
    res.trace.iterations = k + 1;
    res.trace.radius = r;
    res.trace.latent = Vector(zs.row(found->first).transpose());
    return res;
  }
  return detail::search_failure(x, RecourseAlgorithm::kCchvae, params, radii, cost_fn);
}

// Algorithm choice plus every parameter needed to run it, i.e. the recourse
// mechanism the owner deploys (and the adversary replicates on shadows).
struct RecourseConfig {
  RecourseAlgorithm algorithm = RecourseAlgorithm::kScfe;
  CostFn cost;
  ScfeParams scfe;
  SearchParams search;
  TrainConfig vae_train = default_vae_config();
  VaeShape vae_shape;
};

// Runs the configured generator. `vae` is required for CCHVAE only; `seed`
// overrides the search seed so each query gets its own stream.
inline RecourseResult generate_recourse(const Model& model, const VaeModel* vae, const Vector& x,
                                        const RecourseConfig& config, std::uint64_t seed) {
  switch (config.algorithm) {
    case RecourseAlgorithm::kScfe:
      return scfe(model, x, config.scfe, config.cost, seed);
    case RecourseAlgorithm::kGrowingSpheres: {
      SearchParams p = config.search;
      p.seed = seed;
      return growing_spheres(model, x, p, config.cost);
    }
    case RecourseAlgorithm::kCchvae: {
      if (vae == nullptr) fail_config("cchvae recourse requires a trained VAE");
      SearchParams p = config.search;
      p.seed = seed;
      return cchvae(model, *vae, x, p, config.cost);
    }
  }
  fail_config("unknown recourse algorithm");
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline nlohmann::json to_json(const RecourseResult& r) {
  nlohmann::json trace = {{"iterations", r.trace.iterations},
                          {"retries", r.trace.retries},
                          {"lambda", r.trace.lambda},
                          {"radius", r.trace.radius}};
  if (r.trace.latent) trace["latent"] = to_std(*r.trace.latent);
  return {{"algorithm", to_string(r.algorithm)},
          {"valid", r.valid},
          {"cost", r.cost},
          {"counterfactual", to_std(r.counterfactual)},
          {"seed", r.seed},
          {"trace", trace}};
}

namespace detail {

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline RecourseResult recourse_from_json(const nlohmann::json& j) {
  RecourseResult r;
  try {
    r.algorithm = parse_recourse_algorithm(j.at("algorithm").get<std::string>());
    r.valid = j.at("valid").get<bool>();
    r.cost = j.at("cost").get<double>();
    r.counterfactual = detail::vector_from_json(j.at("counterfactual"));
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("trace");
    r.trace.iterations = t.at("iterations").get<int>();
    r.trace.retries = t.at("retries").get<int>();
    r.trace.lambda = t.at("lambda").get<double>();
    r.trace.radius = t.at("radius").get<double>();
    if (t.contains("latent")) r.trace.latent = detail::vector_from_json(t.at("latent"));
  } catch (const nlohmann::json::exception& e) {
    fail_config("malformed recourse record: ", e.what());
  }
  return r;
}

}  // namespace cfmia
