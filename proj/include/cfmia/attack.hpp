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
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/common.hpp"
#include "cfmia/data.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/parallel.hpp"
#include "cfmia/recourse.hpp"
#include "cfmia/rng.hpp"
#include "cfmia/stats.hpp"
#include "cfmia/vae.hpp"

namespace cfmia {

enum class AttackKind { kCfd, kCfdLrt, kLoss, kLossLrt };

inline std::string to_string(AttackKind a) {
  switch (a) {
    case AttackKind::kCfd: return "cfd";
    case AttackKind::kCfdLrt: return "cfd_lrt";
    case AttackKind::kLoss: return "loss";
    case AttackKind::kLossLrt: return "loss_lrt";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "cfd") return AttackKind::kCfd;
  if (s == "cfd_lrt") return AttackKind::kCfdLrt;
  if (s == "loss") return AttackKind::kLoss;
  if (s == "loss_lrt") return AttackKind::kLossLrt;
  fail_config("unknown attack '", s, "' (expected cfd, cfd_lrt, loss or loss_lrt)");
}

enum class Guess { kMember, kNonMember };

inline std::string to_string(Guess g) { return g == Guess::kMember ? "MEMBER" : "NON-MEMBER"; }

inline Guess parse_guess(const std::string& s) {
  if (s == "MEMBER") return Guess::kMember;
  if (s == "NON-MEMBER") return Guess::kNonMember;
  fail_config("unknown membership label '", s, "'");
}

// One attack's verdict material for one point. `score` is what ROC sweeps
// threshold; `higher_means_member` fixes the direction of that threshold.
struct AttackScore {
  std::string point_id;
  AttackKind attack = AttackKind::kCfd;
  double statistic = 0.0;
  double score = 0.0;
  bool higher_means_member = true;
  std::map<double, Guess> guess_at;
};

// Gaussian fit to log-statistics: mean and population variance.
struct LogNormalFit {
  double mu = 0.0;
  double sigma2 = 0.0;
  std::size_t n = 0;
};

struct NormalFit {
  double mu = 0.0;
  double sigma2 = 0.0;
  std::size_t n = 0;
};

// Fits with variance below this are treated as point masses.
inline constexpr double kDegenerateVariance = 1e-18;
inline constexpr double kDistanceFloor = 1e-12;

inline double cfd_statistic(const Vector& x, const RecourseResult& recourse) {
  if (!recourse.valid) fail_config("cfd_statistic: recourse is not valid");
  check_dimension(recourse.counterfactual.size(), x.size(), "cfd_statistic");
  return std::max(recourse.cost, kDistanceFloor);
}

// Equality resolves to MEMBER in both directions.
inline Guess threshold_attack(double statistic, double tau, bool higher_means_member) {
  const bool member = higher_means_member ? statistic >= tau : statistic <= tau;
  return member ? Guess::kMember : Guess::kNonMember;
}

inline LogNormalFit fit_lognormal_mle(std::span<const double> samples) {
  if (samples.empty()) fail_config("fit_lognormal_mle: no samples");
  double sum = 0.0;
  for (double s : samples) {
    if (!(s > 0.0)) fail_config("fit_lognormal_mle: sample ", s, " is not positive");
    sum += std::log(s);
  }
  const double n = static_cast<double>(samples.size());
  const double mu = sum / n;
  double ss = 0.0;
  for (double s : samples) ss += (mu - std::log(s)) * (mu - std::log(s));
  return {mu, ss / n, samples.size()};
}

inline NormalFit fit_normal_mle(std::span<const double> samples) {
  if (samples.empty()) fail_config("fit_normal_mle: no samples");
  const double n = static_cast<double>(samples.size());
  const double mu = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mu) * (s - mu);
  return {mu, ss / n, samples.size()};
}

inline double lognormal_quantile(const LogNormalFit& fit, double q) {
  if (!(q > 0.0 && q < 1.0)) fail_config("lognormal_quantile: q=", q, " outside (0,1)");
  if (fit.sigma2 < kDegenerateVariance) return std::exp(fit.mu);
  return std::exp(fit.mu + std::sqrt(fit.sigma2) * normal_quantile(q));
}

// Literal decision rule of the one-sided test: reverse = false gives
// NON-MEMBER iff t0 > z_{1-alpha}; reverse = true gives MEMBER iff t0 < z_alpha.
inline Guess cfd_lrt_decide(double t0, const LogNormalFit& fit, double alpha, bool reverse) {
  if (!reverse) {
    return t0 > lognormal_quantile(fit, 1.0 - alpha) ? Guess::kNonMember : Guess::kMember;
  }
  return t0 < lognormal_quantile(fit, alpha) ? Guess::kMember : Guess::kNonMember;
}

namespace detail {

inline double standardized_cdf(double value, double mu, double sigma2) {
  if (sigma2 < kDegenerateVariance) {
    return value > mu ? 1.0 : (value < mu ? 0.0 : 0.5);
  }
  return normal_cdf((value - mu) / std::sqrt(sigma2));
}

}  // namespace detail

// OUT-distribution CDF of the observed distance, Phi((log t0 - mu) / sigma).
// Large values mean the distance is unusually large for a non-member.
inline double cfd_lrt_score(double t0, const LogNormalFit& fit) {
  if (!(t0 > 0.0)) fail_config("cfd_lrt_score: t0 must be positive");
  return detail::standardized_cdf(std::log(t0), fit.mu, fit.sigma2);
}

// Offline loss LRT: OUT-distribution CDF of the target model's logit confidence.
inline double loss_lrt_score(double conf, const NormalFit& out_fit) {
  return detail::standardized_cdf(conf, out_fit.mu, out_fit.sigma2);
}

// Loss-threshold statistic; lower loss means member.
inline double loss_attack_score(const Model& model, const Vector& x, int y) {
  return bce_loss(model, x, y);
}

// The adversary's shadow models, each trained on a disjoint-from-owner
// subsample of the shadow pool, plus the recourse mechanism they replicate.
struct ShadowEnsemble {
  std::vector<Model> models;
  std::vector<VaeModel> vaes;  // one per model when the mechanism is CCHVAE
  std::vector<std::size_t> architecture;
  TrainConfig trainer_config;
  RecourseConfig recourse_config;
  std::uint64_t seed = 0;

  std::size_t size() const { return models.size(); }
  const VaeModel* vae(std::size_t i) const { return vaes.empty() ? nullptr : &vaes[i]; }
};

struct ShadowOptions {
  std::size_t n_models = 16;
  double pool_fraction = 0.5;
  unsigned workers = 1;
};

inline ShadowEnsemble train_shadow_ensemble(const Dataset& pool,
                                            const std::vector<std::size_t>& architecture,
                                            const TrainConfig& trainer, const RecourseConfig& recourse,
                                            const ShadowOptions& opts, std::uint64_t seed) {
  if (opts.n_models < 1) fail_config("shadow ensemble needs at least one model");
  if (!(opts.pool_fraction > 0.0 && opts.pool_fraction <= 1.0)) {
    fail_config("shadow pool_fraction must be in (0, 1]");
  }
  const auto take = static_cast<std::size_t>(
      std::floor(opts.pool_fraction * static_cast<double>(pool.n())));
  if (take < 2) fail_config("shadow pool too small (", pool.n(), " rows)");
  ShadowEnsemble ens;
  ens.architecture = architecture;
  ens.trainer_config = trainer;
  ens.recourse_config = recourse;
  ens.seed = seed;
  ens.models.resize(opts.n_models);
  const bool need_vae = recourse.algorithm == RecourseAlgorithm::kCchvae;
  if (need_vae) ens.vaes.resize(opts.n_models);
  parallel_for(opts.n_models, opts.workers, [&](std::size_t i) {
    std::vector<std::size_t> rows(pool.n());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "shadow-data", i));
    rng.shuffle(rows.begin(), rows.end());
    rows.resize(take);
    const Dataset sub = pool.subset(rows);
    TrainConfig tc = trainer;
    tc.seed = derive_seed(seed, "shadow-train", i);
    ens.models[i] = train_classifier(sub, architecture, tc);
    if (need_vae) {
      TrainConfig vc = recourse.vae_train;
      vc.seed = derive_seed(seed, "shadow-vae", i);
      ens.vaes[i] = train_vae(sub, vc, recourse.vae_shape);
    }
  });
  return ens;
}

// Counterfactual distances of x under each shadow model (the OUT samples).
// Shadow models that already classify x favorably, or whose recourse search
// fails, contribute no sample.
inline std::vector<double> build_shadow_distances(const Vector& x, const ShadowEnsemble& ensemble,
                                                  std::uint64_t point_key = 0) {
  std::vector<double> out;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Model& shadow = ensemble.models[i];
    if (predict_proba(shadow, x) >= 0.5) continue;
    const auto rec = generate_recourse(
        shadow, ensemble.vae(i), x, ensemble.recourse_config,
        derive_seed(ensemble.seed ^ point_key, "shadow-recourse", i));
    if (rec.valid) out.push_back(cfd_statistic(x, rec));
  }
  if (out.size() < 2) {
    fail_runtime("only ", out.size(), " shadow counterfactual distances available (need >= 2)");
  }
  return out;
}

// Logit confidences of (x, y) under each shadow model, for the offline loss LRT.
inline std::vector<double> shadow_confidences(const Vector& x, int y, const ShadowEnsemble& ensemble) {
  std::vector<double> out;
  out.reserve(ensemble.size());
  for (const auto& m : ensemble.models) out.push_back(logit_confidence(m, x, y));
  return out;
}

inline nlohmann::json to_json(const AttackScore& s, std::string_view direction) {
  nlohmann::json guesses = nlohmann::json::object();
  for (const auto& [alpha, g] : s.guess_at) {
    std::ostringstream key;
    key << alpha;
    guesses[key.str()] = to_string(g);
  }
  return {{"point_id", s.point_id},
          {"attack", to_string(s.attack)},
          {"statistic", s.statistic},
          {"score", s.score},
          {"direction", direction},
          {"higher_means_member", s.higher_means_member},
          {"guess_at", guesses}};
}

}  // namespace cfmia
