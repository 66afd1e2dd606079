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
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/attack.hpp"
#include "cfmia/common.hpp"
#include "cfmia/config.hpp"
#include "cfmia/data.hpp"
#include "cfmia/metrics.hpp"
#include "cfmia/model_io.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/parallel.hpp"
#include "cfmia/recourse.hpp"
#include "cfmia/rng.hpp"
#include "cfmia/vae.hpp"

namespace cfmia {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "cfmia 0.1.0";
inline constexpr double kReportAlphas[] = {0.1, 0.01, 0.001};

// One round of the recourse membership game: a negatively classified point,
// its ground-truth membership, and the single recourse the owner released.
struct GameSample {
  std::string point_id;
  Vector point;
  int label = 0;  // true label; only the loss baselines may read it
  Guess membership = Guess::kNonMember;
  RecourseResult recourse;
};

// Counts every use of the owner model. The runner snapshots the count around
// the counterfactual-distance attack stage and fails if it moved.
class OwnerOracle {
 public:
  explicit OwnerOracle(const Model& m) : model_(m) {}
  const Model& access() const {
    queries_.fetch_add(1, std::memory_order_relaxed);
    return model_;
  }
  std::size_t queries() const { return queries_.load(); }

 private:
  const Model& model_;
  mutable std::atomic<std::size_t> queries_{0};
};

struct OwnerSetup {
  Dataset data;
  std::optional<ScalerParams> scaler;
  SplitBundle split;
  Model model;
  std::optional<VaeModel> vae;
};

inline Dataset load_experiment_data(const ExperimentConfig& c) {
  if (c.data.synthetic) {
    SyntheticSpec spec{c.data.d, c.data.n_per_class, derive_seed(c.seed, "data"), c.data.class_separation};
    return generate_synthetic(spec);
  }
  return load_tabular(c.data.path, c.data.label_column, c.data.label_rule);
}

inline OwnerSetup prepare_owner(const ExperimentConfig& c) {
  OwnerSetup o;
  o.data = load_experiment_data(c);
  if (c.data.should_standardize()) {
    auto [std_data, scaler] = standardize(o.data);
    o.data = std::move(std_data);
    o.scaler = std::move(scaler);
  }
  o.split = split(o.data, c.split.owner_n, c.split.shadow_n, c.split.eval_out_n,
                  derive_seed(c.seed, "split"));
  {
    std::vector<std::size_t> owner = o.split.owner_rows, shadow = o.split.shadow_rows;
    std::sort(owner.begin(), owner.end());
    std::sort(shadow.begin(), shadow.end());
    std::vector<std::size_t> common;
    std::set_intersection(owner.begin(), owner.end(), shadow.begin(), shadow.end(),
                          std::back_inserter(common));
    if (!common.empty()) fail_runtime("shadow pool intersects the owner training set");
  }
  TrainConfig tc = c.model.train;
  tc.seed = derive_seed(c.seed, "owner-train");
  o.model = train_classifier(o.split.owner_train, c.model.architecture, tc,
                             o.split.eval_out.n() > 0 ? &o.split.eval_out : nullptr);
  if (c.recourse.algorithm == RecourseAlgorithm::kCchvae) {
    TrainConfig vc = c.recourse.vae_train;
    vc.seed = derive_seed(c.seed, "owner-vae");
    o.vae = train_vae(o.split.owner_train, vc, c.recourse.vae_shape);
  }
  return o;
}

struct GameResult {
  std::vector<GameSample> samples;  // recourse failures removed
  std::size_t member_failures = 0;
  std::size_t non_member_failures = 0;
  std::size_t members_available = 0;
  std::size_t non_members_available = 0;

  std::size_t count(Guess g) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                  [g](const GameSample& s) { return s.membership == g; }));
  }
  // Set when removing failed recourses leaves the classes more than 10% apart.
  bool imbalanced() const {
    const double m = static_cast<double>(count(Guess::kMember));
    const double n = static_cast<double>(count(Guess::kNonMember));
    return std::fabs(m - n) > 0.1 * std::max(m, n);
  }
};

// MEMBER candidates are negatively classified owner-training rows,
// NON-MEMBER candidates negatively classified held-out rows; each side is
// subsampled to eval.per_class and every chosen point receives one recourse.
inline GameResult play_game(const ExperimentConfig& c, const OwnerSetup& owner, const OwnerOracle& oracle) {
  const Model& model = oracle.access();
  auto negatives = [&](const Dataset& d, const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out;
    for (std::size_t r : rows) {
      if (predict_proba(model, d.row(r)) < 0.5) out.push_back(r);
    }
    return out;
  };
  std::vector<std::size_t> out_rows(owner.split.eval_out.n());
  std::iota(out_rows.begin(), out_rows.end(), std::size_t{0});
  auto members = negatives(owner.split.owner_train, owner.split.eval_in);
  auto non_members = negatives(owner.split.eval_out, out_rows);
  GameResult g;
  g.members_available = members.size();
  g.non_members_available = non_members.size();
  if (members.size() < c.eval.per_class || non_members.size() < c.eval.per_class) {
    fail_runtime("not enough negatively classified points for the game: ", members.size(),
                 " members and ", non_members.size(), " non-members available, ", c.eval.per_class,
                 " needed per side");
  }
  Rng pick_in(derive_seed(c.seed, "game-members"));
  Rng pick_out(derive_seed(c.seed, "game-non-members"));
  pick_in.shuffle(members.begin(), members.end());
  pick_out.shuffle(non_members.begin(), non_members.end());
  members.resize(c.eval.per_class);
  non_members.resize(c.eval.per_class);
  std::sort(members.begin(), members.end());
  std::sort(non_members.begin(), non_members.end());

  std::vector<GameSample> all;
  for (std::size_t r : members) {
    all.push_back({"in:" + std::to_string(r), owner.split.owner_train.row(r),
                   owner.split.owner_train.label(r), Guess::kMember, {}});
  }
  for (std::size_t r : non_members) {
    all.push_back({"out:" + std::to_string(r), owner.split.eval_out.row(r), owner.split.eval_out.label(r),
                   Guess::kNonMember, {}});
  }
  const VaeModel* vae = owner.vae ? &*owner.vae : nullptr;
  parallel_for(all.size(), c.workers, [&](std::size_t i) {
    all[i].recourse = generate_recourse(model, vae, all[i].point, c.recourse,
                                        derive_seed(c.seed, "recourse", fnv1a(all[i].point_id)));
  });
  for (auto& s : all) {
    if (s.recourse.valid) {
      g.samples.push_back(std::move(s));
    } else {
      (s.membership == Guess::kMember ? g.member_failures : g.non_member_failures)++;
    }
  }
  return g;
}

inline std::vector<GameSample> play_game(const ExperimentConfig& c) {
  const OwnerSetup owner = prepare_owner(c);
  const OwnerOracle oracle(owner.model);
  return play_game(c, owner, oracle).samples;
}

// game.json: failure counts plus every scored sample with its recourse.
inline nlohmann::json to_json(const GameResult& g) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : g.samples) {
    samples.push_back({{"point_id", s.point_id},
                       {"membership", to_string(s.membership)},
                       {"label", s.label},
                       {"point", to_std(s.point)},
                       {"recourse", to_json(s.recourse)}});
  }
  return {{"members_available", g.members_available},
          {"non_members_available", g.non_members_available},
          {"member_recourse_failures", g.member_failures},
          {"non_member_recourse_failures", g.non_member_failures},
          {"samples", samples}};
}

inline GameResult game_from_json(const nlohmann::json& j) {
  GameResult g;
  try {
    g.members_available = j.at("members_available").get<std::size_t>();
    g.non_members_available = j.at("non_members_available").get<std::size_t>();
    g.member_failures = j.at("member_recourse_failures").get<std::size_t>();
    g.non_member_failures = j.at("non_member_recourse_failures").get<std::size_t>();
    for (const auto& s : j.at("samples")) {
      GameSample gs;
      gs.point_id = s.at("point_id").get<std::string>();
      gs.membership = parse_guess(s.at("membership").get<std::string>());
      gs.label = s.at("label").get<int>();
      gs.point = detail::vector_from_json(s.at("point"));
      gs.recourse = recourse_from_json(s.at("recourse"));
      g.samples.push_back(std::move(gs));
    }
  } catch (const nlohmann::json::exception& e) {
    fail_config("malformed game file: ", e.what());
  }
  return g;
}

inline ShadowEnsemble build_shadow_ensemble(const ExperimentConfig& c, const OwnerSetup& owner) {
  return train_shadow_ensemble(owner.split.shadow_pool, c.model.architecture, c.model.train, c.recourse,
                               ShadowOptions{c.attack.n_shadow, c.attack.pool_fraction, c.workers},
                               derive_seed(c.seed, "shadows"));
}

// Scores for one attack in both threshold directions. `fits` carries the
// per-point OUT fit parameters for the LRT attacks (mu, sigma2).
struct AttackRun {
  AttackKind kind = AttackKind::kCfd;
  std::vector<AttackScore> forward;
  std::vector<AttackScore> reversed;
  std::vector<Guess> membership;
  std::size_t excluded = 0;
  RocCurve forward_curve, reversed_curve;
  MetricsReport forward_metrics, reversed_metrics;

  std::string selected_direction() const {
    return reversed_metrics.auc > forward_metrics.auc ? "reversed" : "forward";
  }
};

namespace detail {

// Smallest threshold on the member-evidence scale whose false-positive rate
// stays within alpha; nullopt means no threshold qualifies.
inline std::optional<double> oracle_threshold(const std::vector<double>& evidence,
                                              const std::vector<Guess>& membership, double alpha) {
  std::vector<double> neg;
  std::vector<double> uniq = evidence;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (membership[i] == Guess::kNonMember) neg.push_back(evidence[i]);
  }
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::sort(neg.begin(), neg.end());
  const double budget = alpha * static_cast<double>(neg.size());
  std::optional<double> best;
  for (auto it = uniq.rbegin(); it != uniq.rend(); ++it) {
    const auto fp = static_cast<double>(neg.end() - std::lower_bound(neg.begin(), neg.end(), *it));
    if (fp > budget) break;
    best = *it;
  }
  return best;
}

inline void add_threshold_guesses(std::vector<AttackScore>& scores, const std::vector<Guess>& membership,
                                  std::span<const double> alphas) {
  std::vector<double> evidence;
  for (const auto& s : scores) evidence.push_back(s.higher_means_member ? s.score : -s.score);
  for (double a : alphas) {
    const auto t = oracle_threshold(evidence, membership, a);
    for (auto& s : scores) {
      if (!t) {
        s.guess_at[a] = Guess::kNonMember;
      } else {
        s.guess_at[a] = threshold_attack(s.score, s.higher_means_member ? *t : -*t, s.higher_means_member);
      }
    }
  }
}

inline void finish_attack(AttackRun& run, std::span<const double> alphas) {
  for (const auto& s : run.forward) {
    AttackScore r = s;
    r.higher_means_member = !s.higher_means_member;
    r.guess_at.clear();
    run.reversed.push_back(std::move(r));
  }
  run.forward_curve = roc(run.forward, run.membership);
  run.reversed_curve = roc(run.reversed, run.membership);
  run.forward_metrics = evaluate_curve(run.forward_curve, kReportAlphas);
  run.reversed_metrics = evaluate_curve(run.reversed_curve, kReportAlphas);
  (void)alphas;
}

}  // namespace detail

// Counterfactual-distance attacks. They see only the released recourses and
// the adversary's own shadow ensemble, never the owner model.
inline std::vector<AttackRun> run_distance_attacks(const ExperimentConfig& c,
                                                   std::span<const GameSample> samples,
                                                   const ShadowEnsemble* shadows) {
  std::vector<AttackRun> runs;
  const auto& alphas = c.attack.alphas;
  if (c.attack.wants(AttackKind::kCfd)) {
    AttackRun run;
    run.kind = AttackKind::kCfd;
    for (const auto& s : samples) {
      const double t0 = cfd_statistic(s.point, s.recourse);
      run.forward.push_back({s.point_id, AttackKind::kCfd, t0, t0, true, {}});
      run.membership.push_back(s.membership);
    }
    detail::finish_attack(run, alphas);
    detail::add_threshold_guesses(run.forward, run.membership, alphas);
    detail::add_threshold_guesses(run.reversed, run.membership, alphas);
    runs.push_back(std::move(run));
  }
  if (c.attack.wants(AttackKind::kCfdLrt)) {
    if (shadows == nullptr) fail_config("cfd_lrt requires a shadow ensemble");
    std::vector<std::optional<LogNormalFit>> fits(samples.size());
    parallel_for(samples.size(), c.workers, [&](std::size_t i) {
      try {
        const auto dists = build_shadow_distances(samples[i].point, *shadows, fnv1a(samples[i].point_id));
        fits[i] = fit_lognormal_mle(dists);
      } catch (const RuntimeError&) {
        fits[i].reset();
      }
    });
    AttackRun run;
    run.kind = AttackKind::kCfdLrt;
    std::vector<LogNormalFit> kept;
    std::vector<double> t0s;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!fits[i]) {
        ++run.excluded;
        continue;
      }
      const double t0 = cfd_statistic(samples[i].point, samples[i].recourse);
      run.forward.push_back({samples[i].point_id, AttackKind::kCfdLrt, t0, cfd_lrt_score(t0, *fits[i]), true, {}});
      run.membership.push_back(samples[i].membership);
      kept.push_back(*fits[i]);
      t0s.push_back(t0);
    }
    detail::finish_attack(run, alphas);
    for (std::size_t k = 0; k < run.forward.size(); ++k) {
      for (double a : alphas) {
        run.forward[k].guess_at[a] =
            t0s[k] > lognormal_quantile(kept[k], 1.0 - a) ? Guess::kMember : Guess::kNonMember;
        run.reversed[k].guess_at[a] = cfd_lrt_decide(t0s[k], kept[k], a, /*reverse=*/true);
      }
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

// Loss baselines: these assume query access to the owner model and true labels.
inline std::vector<AttackRun> run_loss_attacks(const ExperimentConfig& c, std::span<const GameSample> samples,
                                               const OwnerOracle& owner, const ShadowEnsemble* shadows) {
  std::vector<AttackRun> runs;
  const auto& alphas = c.attack.alphas;
  if (c.attack.wants(AttackKind::kLoss)) {
    const Model& m = owner.access();
    AttackRun run;
    run.kind = AttackKind::kLoss;
    for (const auto& s : samples) {
      const double l = loss_attack_score(m, s.point, s.label);
      run.forward.push_back({s.point_id, AttackKind::kLoss, l, l, false, {}});
      run.membership.push_back(s.membership);
    }
    detail::finish_attack(run, alphas);
    detail::add_threshold_guesses(run.forward, run.membership, alphas);
    detail::add_threshold_guesses(run.reversed, run.membership, alphas);
    runs.push_back(std::move(run));
  }
  if (c.attack.wants(AttackKind::kLossLrt)) {
    if (shadows == nullptr) fail_config("loss_lrt requires a shadow ensemble");
    const Model& m = owner.access();
    AttackRun run;
    run.kind = AttackKind::kLossLrt;
    std::vector<AttackScore> scores(samples.size());
    parallel_for(samples.size(), c.workers, [&](std::size_t i) {
      const auto& s = samples[i];
      const double conf = logit_confidence(m, s.point, s.label);
      const auto fit = fit_normal_mle(shadow_confidences(s.point, s.label, *shadows));
      scores[i] = {s.point_id, AttackKind::kLossLrt, conf, loss_lrt_score(conf, fit), true, {}};
    });
    run.forward = std::move(scores);
    for (const auto& s : samples) run.membership.push_back(s.membership);
    detail::finish_attack(run, alphas);
    for (std::size_t k = 0; k < run.forward.size(); ++k) {
      for (double a : alphas) {
        run.forward[k].guess_at[a] = run.forward[k].score > 1.0 - a ? Guess::kMember : Guess::kNonMember;
        run.reversed[k].guess_at[a] = run.forward[k].score < a ? Guess::kMember : Guess::kNonMember;
      }
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

struct AttackSummary {
  AttackKind kind = AttackKind::kCfd;
  MetricsReport forward;
  MetricsReport reversed;
  std::string selected_direction = "forward";
};

struct ExperimentReport {
  std::string experiment_id;
  nlohmann::json document;               // full report.json content, timing included
  std::vector<AttackSummary> attacks;
  std::vector<std::string> score_lines;  // scores.jsonl content, one record per line
  std::vector<std::pair<std::string, RocCurve>> curves;  // "<attack>_<direction>" -> curve
};

// Parses the attack metrics back out of a report.json document.
inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  try {
    r.experiment_id = j.at("experiment_id").get<std::string>();
    for (const auto& [name, a] : j.at("attacks").items()) {
      AttackSummary s;
      s.kind = parse_attack_kind(name);
      auto read = [](const nlohmann::json& m) {
        MetricsReport out;
        out.auc = m.at("auc").get<double>();
        out.balanced_accuracy = m.at("balanced_accuracy").get<double>();
        for (const auto& [k, v] : m.at("tpr_at_fpr").items()) out.tpr_at_fpr[std::stod(k)] = v.get<double>();
        return out;
      };
      s.forward = read(a.at("forward"));
      s.reversed = read(a.at("reversed"));
      s.selected_direction = a.at("selected_direction").get<std::string>();
      r.attacks.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail_config("malformed report: ", e.what());
  }
  r.document = j;
  return r;
}

inline const char* kSummaryHeader = "experiment_id,attack,direction,auc,ba,tpr_at_0.1,tpr_at_0.01";

// One row per (experiment, attack, direction).
inline void emit_summary(std::span<const ExperimentReport> reports, const std::string& path) {
  if (reports.empty()) fail_config("emit_summary: no reports");
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write '", path, "'");
  out << kSummaryHeader << '\n';
  char buf[256];
  auto tpr = [](const MetricsReport& m, double a) {
    const auto it = m.tpr_at_fpr.find(a);
    return it == m.tpr_at_fpr.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  };
  for (const auto& r : reports) {
    for (const auto& a : r.attacks) {
      for (const auto* dir : {"forward", "reversed"}) {
        const MetricsReport& m = std::string(dir) == "forward" ? a.forward : a.reversed;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", m.auc, m.balanced_accuracy, tpr(m, 0.1),
                      tpr(m, 0.01));
        out << r.experiment_id << ',' << to_string(a.kind) << ',' << dir << ',' << buf << '\n';
      }
    }
  }
  if (!out) fail_runtime("write to '", path, "' failed");
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) fail_runtime("cannot write '", p.string(), "'");
  out << text;
  if (!out) fail_runtime("write to '", p.string(), "' failed");
}

}  // namespace detail

// report.json, scores.jsonl, roc_<attack>_<direction>.csv and summary.csv.
inline void write_report(const ExperimentReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  detail::write_text(base / "report.json", r.document.dump(2) + "\n");
  std::string lines;
  for (const auto& l : r.score_lines) lines += l + "\n";
  detail::write_text(base / "scores.jsonl", lines);
  for (const auto& [name, curve] : r.curves) export_log_roc(curve, (base / ("roc_" + name + ".csv")).string());
  emit_summary(std::span<const ExperimentReport>(&r, 1), (base / "summary.csv").string());
}

struct StageTiming {
  double owner = 0.0;
  double game = 0.0;
  double shadows = 0.0;
  double attacks = 0.0;
};

// Shadow training, every configured attack in both directions, metrics and
// report assembly for an already played game.
inline ExperimentReport score_game(const ExperimentConfig& c, const OwnerSetup& owner, const OwnerOracle& oracle,
                                   const GameResult& game, StageTiming timing = {}) {
  using Clock = std::chrono::steady_clock;
  auto secs = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  if (game.count(Guess::kMember) == 0 || game.count(Guess::kNonMember) == 0) {
    fail_runtime("every recourse on one side of the game failed (", game.member_failures, " member, ",
                 game.non_member_failures, " non-member failures)");
  }
  const auto t2 = Clock::now();
  std::optional<ShadowEnsemble> shadows;
  if (c.attack.needs_shadows()) shadows = build_shadow_ensemble(c, owner);
  const auto t3 = Clock::now();

  const std::size_t queries_before = oracle.queries();
  auto runs = run_distance_attacks(c, game.samples, shadows ? &*shadows : nullptr);
  if (oracle.queries() != queries_before) fail_runtime("distance attacks queried the owner model");
  auto loss_runs = run_loss_attacks(c, game.samples, oracle, shadows ? &*shadows : nullptr);
  for (auto& r : loss_runs) runs.push_back(std::move(r));
  std::stable_sort(runs.begin(), runs.end(), [&](const AttackRun& a, const AttackRun& b) {
    auto pos = [&](AttackKind k) {
      return std::find(c.attack.attacks.begin(), c.attack.attacks.end(), k) - c.attack.attacks.begin();
    };
    return pos(a.kind) < pos(b.kind);
  });
  const auto t4 = Clock::now();
  timing.shadows = secs(t2, t3);
  timing.attacks = secs(t3, t4);

  ExperimentReport rep;
  rep.experiment_id = c.id;
  nlohmann::json attacks = nlohmann::json::object();
  for (const auto& run : runs) {
    const std::string name = to_string(run.kind);
    const bool conventionally_reversed = run.kind == AttackKind::kCfdLrt && c.recourse.algorithm == RecourseAlgorithm::kCchvae;
    attacks[name] = {{"forward", to_json(run.forward_metrics)},
                     {"reversed", to_json(run.reversed_metrics)},
                     {"selected_direction", run.selected_direction()},
                     {"conventional_direction", conventionally_reversed ? "reversed" : "forward"},
                     {"n_member", std::count(run.membership.begin(), run.membership.end(), Guess::kMember)},
                     {"n_non_member", std::count(run.membership.begin(), run.membership.end(), Guess::kNonMember)},
                     {"excluded", run.excluded}};
    rep.attacks.push_back({run.kind, run.forward_metrics, run.reversed_metrics, run.selected_direction()});
    for (std::size_t k = 0; k < run.forward.size(); ++k) {
      auto rec = to_json(run.forward[k], "forward");
      rec["membership"] = to_string(run.membership[k]);
      rep.score_lines.push_back(rec.dump());
    }
    for (std::size_t k = 0; k < run.reversed.size(); ++k) {
      auto rec = to_json(run.reversed[k], "reversed");
      rec["membership"] = to_string(run.membership[k]);
      rep.score_lines.push_back(rec.dump());
    }
    rep.curves.emplace_back(name + "_forward", run.forward_curve);
    rep.curves.emplace_back(name + "_reversed", run.reversed_curve);
  }
  nlohmann::json shadow_info = nullptr;
  if (shadows) {
    double acc = 0.0;
    for (const auto& m : shadows->models) acc += m.meta().train_accuracy;
    shadow_info = {{"n_models", shadows->size()},
                   {"pool_fraction", c.attack.pool_fraction},
                   {"mean_train_accuracy", acc / static_cast<double>(shadows->size())}};
  }
  nlohmann::json recourses = nlohmann::json::array();
  for (const auto& s : game.samples) {
    recourses.push_back({{"point_id", s.point_id}, {"membership", to_string(s.membership)},
                         {"cost", s.recourse.cost}, {"valid", s.recourse.valid}});
  }
  rep.document = {
      {"schema_version", kReportSchemaVersion},
      {"tool_version", kToolVersion},
      {"experiment_id", c.id},
      {"config", to_json(c)},
      {"provenance", to_json(owner.data.provenance())},
      {"owner_model", {{"architecture", c.model.architecture}, {"training_meta", to_json(owner.model.meta())}}},
      {"shadow_ensemble", shadow_info},
      {"game",
       {{"members", game.count(Guess::kMember)},
        {"non_members", game.count(Guess::kNonMember)},
        {"members_available", game.members_available},
        {"non_members_available", game.non_members_available},
        {"member_recourse_failures", game.member_failures},
        {"non_member_recourse_failures", game.non_member_failures},
        {"imbalance_flag", game.imbalanced()},
        {"recourse_algorithm", to_string(c.recourse.algorithm)},
        {"recourses", recourses}}},
      {"attacks", attacks},
      {"timing_seconds",
       {{"owner", timing.owner}, {"game", timing.game}, {"shadows", timing.shadows}, {"attacks", timing.attacks}}}};
  return rep;
}

// The whole pipeline: owner training, game, then score_game. Writes outputs
// to config.output_dir when `persist` is set.
inline ExperimentReport run_experiment(const ExperimentConfig& c, bool persist = true) {
  using Clock = std::chrono::steady_clock;
  StageTiming timing;
  const auto t0 = Clock::now();
  const OwnerSetup owner = prepare_owner(c);
  const auto t1 = Clock::now();
  const OwnerOracle oracle(owner.model);
  const GameResult game = play_game(c, owner, oracle);
  const auto t2 = Clock::now();
  timing.owner = std::chrono::duration<double>(t1 - t0).count();
  timing.game = std::chrono::duration<double>(t2 - t1).count();
  ExperimentReport rep = score_game(c, owner, oracle, game, timing);
  if (persist) write_report(rep, c.output_dir);
  return rep;
}

namespace detail {

inline void set_dotted(nlohmann::json& j, const std::string& path, const nlohmann::json& value) {
  nlohmann::json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) fail_config("config: bad sweep key '", path, "'");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

inline std::string value_label(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace detail

// Cartesian product of the sweep axes. Each variant gets id
// "<id>_<key>=<value>..." and output directory "<output_dir>/<variant id>".
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base) {
  nlohmann::json doc = to_json(base);
  doc.erase("sweep");
  std::vector<std::pair<nlohmann::json, std::string>> variants = {{doc, base.id}};
  for (const auto& [key, values] : base.sweep.items()) {
    std::vector<std::pair<nlohmann::json, std::string>> next;
    for (const auto& [v, id] : variants) {
      for (const auto& val : values) {
        nlohmann::json copy = v;
        detail::set_dotted(copy, key, val);
        std::string leaf = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
        next.emplace_back(std::move(copy), id + "_" + leaf + "=" + detail::value_label(val));
      }
    }
    variants = std::move(next);
  }
  std::vector<ExperimentConfig> out;
  for (auto& [j, id] : variants) {
    j["id"] = id;
    j["output_dir"] = (std::filesystem::path(base.output_dir) / id).string();
    out.push_back(parse_config(j));
  }
  return out;
}

inline std::vector<ExperimentReport> run_sweep(const ExperimentConfig& base) {
  std::vector<ExperimentReport> reports;
  for (const auto& c : expand_sweep(base)) reports.push_back(run_experiment(c, true));
  std::filesystem::create_directories(base.output_dir);
  emit_summary(reports, (std::filesystem::path(base.output_dir) / "summary.csv").string());
  return reports;
}

}  // namespace cfmia
