#pragma once

// Evaluation harness: adaptive score pooling, tier-stratified reporting,
// τ_M validation selection and the masking / depth / τ_L sweeps.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triage/metrics.hpp"
#include "triage/router.hpp"

namespace triage {

/// Class index of each outcome's ground-truth label.
inline std::vector<std::size_t> outcome_labels(std::span<const RoutingOutcome> outcomes,
                                               std::span<const std::string> class_names) {
  std::vector<std::size_t> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (!o.label) throw Error(ErrorKind::UnknownLabel, "outcome has no ground-truth label", o.sample_id);
    auto it = std::find(class_names.begin(), class_names.end(), *o.label);
    if (it == class_names.end()) throw Error(ErrorKind::UnknownLabel, "label '" + *o.label + "' not in class set", o.sample_id);
    out.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  return out;
}

inline std::vector<std::size_t> record_labels(std::span<const AudioRecord> records,
                                              std::span<const std::string> class_names) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw Error(ErrorKind::UnknownLabel, "record has no label", r.id);
    auto it = std::find(class_names.begin(), class_names.end(), *r.label);
    if (it == class_names.end()) throw Error(ErrorKind::UnknownLabel, "label '" + *r.label + "' not in class set", r.id);
    out.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  return out;
}

/// Tiers emit incommensurable scales (cosines, rule fractions, votes plus a
/// decision bonus). Within each finalizing-tier bucket every class score is
/// replaced by its fractional mid-rank (rank / bucket size), which preserves
/// within-bucket order and ties and makes the pooled scores scale-free.
inline std::vector<std::vector<double>> adaptive_scores(std::span<const RoutingOutcome> outcomes) {
  std::vector<std::vector<double>> out(outcomes.size());
  for (const Tier tier : {Tier::L, Tier::M, Tier::H}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].final_tier == tier) members.push_back(i);
    }
    if (members.empty()) continue;
    const std::size_t classes = outcomes[members.front()].final_scores.size();
    for (const auto i : members) out[i].assign(classes, 0.0);
    std::vector<double> column(members.size());
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t m = 0; m < members.size(); ++m) column[m] = outcomes[members[m]].final_scores.scores.at(c);
      const auto ranks = mid_ranks(column);
      for (std::size_t m = 0; m < members.size(); ++m) {
        out[members[m]][c] = ranks[m] / static_cast<double>(members.size());
      }
    }
  }
  return out;
}

namespace detail {

inline std::optional<double> try_macro(std::span<const std::vector<double>> scores, std::span<const std::size_t> labels,
                                       std::size_t classes) {
  try {
    return auroc_macro_ovr(scores, labels, classes).macro;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateLabels) return std::nullopt;
    throw;
  }
}

}  // namespace detail

struct StratumReport {
  Tier tier = Tier::L;
  std::size_t count = 0;
  double share_pct = 0.0;
  std::optional<double> tier_l_auroc;
  std::optional<double> adaptive_auroc;
  std::optional<double> relative_gain_pct;  // omitted for the L bucket
};

struct TierStratifiedReport {
  std::array<StratumReport, 3> buckets;  // L, M, H
};

/// Buckets are evaluated only when at least two classes are present in them.
inline TierStratifiedReport tier_stratified(std::span<const RoutingOutcome> outcomes,
                                            std::span<const std::size_t> labels, std::size_t num_classes) {
  if (outcomes.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "one label per outcome required");
  const auto pooled = adaptive_scores(outcomes);
  TierStratifiedReport report;
  const std::array<Tier, 3> tiers = {Tier::L, Tier::M, Tier::H};
  for (std::size_t b = 0; b < 3; ++b) {
    auto& row = report.buckets[b];
    row.tier = tiers[b];
    std::vector<std::vector<double>> tl, ad;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].final_tier != row.tier) continue;
      tl.push_back(outcomes[i].tier_l.scores.scores);
      ad.push_back(pooled[i]);
      ys.push_back(labels[i]);
    }
    row.count = ys.size();
    row.share_pct = outcomes.empty() ? 0.0 : 100.0 * static_cast<double>(row.count) / static_cast<double>(outcomes.size());
    if (ys.empty()) continue;
    row.tier_l_auroc = detail::try_macro(tl, ys, num_classes);
    row.adaptive_auroc = detail::try_macro(ad, ys, num_classes);
    if (row.tier != Tier::L && row.tier_l_auroc && row.adaptive_auroc && *row.tier_l_auroc > 0.0) {
      row.relative_gain_pct = 100.0 * (*row.adaptive_auroc - *row.tier_l_auroc) / *row.tier_l_auroc;
    }
  }
  return report;
}

struct EvalReport {
  std::string task_id;
  std::size_t n = 0;
  double auroc = 0.0;  // adaptive, macro one-vs-rest
  std::vector<std::optional<double>> per_class_auroc;
  std::optional<double> tier_l_auroc;
  TierStratifiedReport stratified;
  BatchStats stats;
};

inline EvalReport evaluate_outcomes(std::span<const RoutingOutcome> outcomes, std::span<const std::string> class_names,
                                    const std::string& task_id, const CostModel& cost) {
  const auto labels = outcome_labels(outcomes, class_names);
  EvalReport r;
  r.task_id = task_id;
  r.n = outcomes.size();
  const auto pooled = adaptive_scores(outcomes);
  const auto macro = auroc_macro_ovr(pooled, labels, class_names.size());
  r.auroc = macro.macro;
  r.per_class_auroc = macro.per_class;
  std::vector<std::vector<double>> tl;
  for (const auto& o : outcomes) tl.push_back(o.tier_l.scores.scores);
  r.tier_l_auroc = detail::try_macro(tl, labels, class_names.size());
  r.stratified = tier_stratified(outcomes, labels, class_names.size());
  r.stats = compute_stats(outcomes, cost);
  return r;
}

// ---------------------------------------------------------------------------
// τ_M selection on the validation split

inline const std::vector<double> kDefaultTauMGrid = {0.04, 0.08, 0.12, 0.16, 0.20};

/// Tier-L and Tier-M evidence for one validation recording.
struct ValidationPoint {
  double c_L = 0.0;
  TierMResult tier_m;
  std::size_t label = 0;
};

inline std::vector<ValidationPoint> validation_points(std::span<const AudioRecord> records, const TaskAssets& assets,
                                                     const GroupMask& mask = {}) {
  const auto labels = record_labels(records, assets.labels.class_names());
  std::vector<ValidationPoint> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto tl = tier_l_classify(records[i].embedding, assets.labels);
    out.push_back({tl.confidence, tier_m_classify(records[i].embedding, assets.taxonomy, assets.rules, mask), labels[i]});
  }
  return out;
}

struct SweepRow {
  double tau = 0.0;
  std::optional<double> metric;  // AUROC on the Tier-M-finalized subset
  std::size_t finalized = 0;
  double pct_l = 0.0;
  double pct_m = 0.0;
  double pct_h = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double selected = 0.0;
};

/// For each candidate τ_M, AUROC of Tier-M scores on validation samples with
/// c_L < τ_L and c_M ≥ τ_M. Picks the best; ties go to the smaller τ.
inline SweepResult select_tau_m(std::span<const ValidationPoint> points, double tau_l, std::span<const double> grid,
                                std::size_t num_classes) {
  if (points.empty()) throw Error(ErrorKind::EmptySweep, "validation split is empty");
  if (grid.empty()) throw Error(ErrorKind::EmptySweep, "candidate grid is empty");
  std::vector<double> candidates(grid.begin(), grid.end());
  std::sort(candidates.begin(), candidates.end());

  SweepResult result;
  std::optional<std::size_t> best;
  const auto n = static_cast<double>(points.size());
  for (const double tau : candidates) {
    SweepRow row;
    row.tau = tau;
    std::vector<std::vector<double>> scores;
    std::vector<std::size_t> ys;
    std::size_t at_l = 0, at_h = 0;
    for (const auto& p : points) {
      if (p.c_L >= tau_l) {
        ++at_l;
      } else if (p.tier_m.confidence >= tau) {
        scores.push_back(p.tier_m.rule_scores.scores);
        ys.push_back(p.label);
      } else {
        ++at_h;
      }
    }
    row.finalized = ys.size();
    row.pct_l = 100.0 * static_cast<double>(at_l) / n;
    row.pct_m = 100.0 * static_cast<double>(ys.size()) / n;
    row.pct_h = 100.0 * static_cast<double>(at_h) / n;
    if (!ys.empty()) row.metric = detail::try_macro(scores, ys, num_classes);
    result.rows.push_back(row);
    if (row.metric && (!best || *row.metric > *result.rows[*best].metric)) best = result.rows.size() - 1;
  }
  if (!best) throw Error(ErrorKind::EmptySweep, "no candidate finalized an evaluable Tier-M subset");
  result.selected = result.rows[*best].tau;
  return result;
}

// ---------------------------------------------------------------------------
// Ablations

struct MaskAblationRow {
  double rate = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation across seeds
  std::vector<double> per_seed;
};

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Tier-M-only AUROC per (rate, seed). One mask per run, applied to every
/// recording.
inline std::vector<MaskAblationRow> ablate_masking(const TaskAssets& assets, std::span<const AudioRecord> records,
                                                   std::span<const double> rates,
                                                   std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "masking ablation needs at least one seed");
  const auto labels = record_labels(records, assets.labels.class_names());
  std::vector<MaskAblationRow> rows;
  for (const double rate : rates) {
    MaskAblationRow row;
    row.rate = rate;
    for (const auto seed : seeds) {
      const auto mask = sample_mask(assets.taxonomy, rate, seed);
      std::vector<std::vector<double>> scores;
      scores.reserve(records.size());
      for (const auto& r : records) {
        scores.push_back(tier_m_classify(r.embedding, assets.taxonomy, assets.rules, mask).rule_scores.scores);
      }
      row.per_seed.push_back(auroc_macro_ovr(scores, labels, assets.labels.size()).macro);
    }
    // Identical per-seed values (e.g. rate 0) give an exact zero spread.
    const bool constant = std::all_of(row.per_seed.begin(), row.per_seed.end(),
                                      [&](double v) { return v == row.per_seed.front(); });
    row.mean = constant ? row.per_seed.front() : mean_of(row.per_seed);
    row.sd = constant ? 0.0 : sample_sd(row.per_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct DepthAblationRow {
  std::size_t depth = 0;
  double auroc = 0.0;
  std::size_t fallbacks = 0;
};

// Above the largest possible margins (2 for cosines, 1 for rule scores), so
// every sample is forced through Tier-H.
inline constexpr double kForceTierHTauL = 2.5;
inline constexpr double kForceTierHTauM = 1.5;

/// Tier-H-only AUROC per retrieval depth, single backend call (b = 1).
inline std::vector<DepthAblationRow> ablate_depth(const TaskAssets& assets, std::span<const AudioRecord> records,
                                                  std::span<const std::size_t> depths, const RoutingConfig& base,
                                                  const LlmBackend& backend, std::size_t parallelism = 1) {
  const auto labels = record_labels(records, assets.labels.class_names());
  std::vector<DepthAblationRow> rows;
  for (const auto d : depths) {
    if (d < 1) throw Error(ErrorKind::InvalidArgument, "depth must be at least 1");
    RoutingConfig cfg = base;
    cfg.tau_l = kForceTierHTauL;
    cfg.tau_m = kForceTierHTauM;
    cfg.tier_h.depth = d;
    cfg.tier_h.budget = 1;
    const auto batch = route_batch(records, assets, cfg, backend, {}, parallelism);
    if (!batch.errors.empty()) {
      const auto& e = batch.errors.front();
      throw Error(e.kind, e.message, e.sample_id);
    }
    DepthAblationRow row;
    row.depth = d;
    std::vector<std::vector<double>> scores;
    for (const auto& o : batch.outcomes) {
      scores.push_back(o.tier_h->score_vector.scores);
      row.fallbacks += o.tier_h->fallback_used;
    }
    row.auroc = auroc_macro_ovr(scores, labels, assets.labels.size()).macro;
    rows.push_back(row);
  }
  return rows;
}

struct TauSweepRow {
  double tau_l = 0.0;
  double auroc = 0.0;
  double pct_l = 0.0;
  double pct_m = 0.0;
  double pct_h = 0.0;
  double expected_cost = 0.0;
};

/// Full adaptive run per τ_L with τ_M held at `base.tau_m`.
inline std::vector<TauSweepRow> sweep_tau_l(const TaskAssets& assets, std::span<const AudioRecord> records,
                                            std::span<const double> taus, const RoutingConfig& base,
                                            const LlmBackend& backend, const CostModel& cost = {},
                                            std::size_t parallelism = 1) {
  const auto labels = record_labels(records, assets.labels.class_names());
  std::vector<TauSweepRow> rows;
  for (const double tau : taus) {
    RoutingConfig cfg = base;
    cfg.tau_l = tau;
    const auto batch = route_batch(records, assets, cfg, backend, cost, parallelism);
    if (!batch.errors.empty()) {
      const auto& e = batch.errors.front();
      throw Error(e.kind, e.message, e.sample_id);
    }
    TauSweepRow row;
    row.tau_l = tau;
    row.auroc = auroc_macro_ovr(adaptive_scores(batch.outcomes), labels, assets.labels.size()).macro;
    row.pct_l = 100.0 * batch.stats.frac_l;
    row.pct_m = 100.0 * batch.stats.frac_m;
    row.pct_h = 100.0 * batch.stats.frac_h;
    row.expected_cost = batch.stats.expected_cost;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace triage
