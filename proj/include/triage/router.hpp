#pragma once

// Gated escalation across the three tiers and the batch cost accounting.
//
//   final tier = L  if c_L ≥ τ_L
//              = M  if c_L < τ_L and c_M ≥ τ_M
//              = H  otherwise
//
//   expected cost T̄ = T_L + α_M·T_M + α_H·T_H

#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "triage/descriptors.hpp"
#include "triage/embedding_store.hpp"
#include "triage/llm_backend.hpp"
#include "triage/retrieval.hpp"
#include "triage/tier_h.hpp"
#include "triage/tier_l.hpp"

namespace triage {

enum class Tier { L, M, H };

constexpr std::string_view to_string(Tier t) noexcept {
  switch (t) {
    case Tier::L: return "L";
    case Tier::M: return "M";
    case Tier::H: return "H";
  }
  return "L";
}

inline Tier parse_tier(std::string_view text) {
  if (text == "L") return Tier::L;
  if (text == "M") return Tier::M;
  if (text == "H") return Tier::H;
  throw Error(ErrorKind::Parse, "unknown tier '" + std::string(text) + "'");
}

/// Everything a task needs to route a recording. Immutable once built and
/// shared read-only across threads.
struct TaskAssets {
  LabelSet labels;
  DescriptorTaxonomy taxonomy;
  RuleTable rules;
  RetrievalIndex index;

  TaskAssets(LabelSet l, DescriptorTaxonomy t, RuleTable r, RetrievalIndex i)
      : labels(std::move(l)), taxonomy(std::move(t)), rules(std::move(r)), index(std::move(i)) {
    if (rules.class_names() != labels.class_names()) {
      throw Error(ErrorKind::InvalidArgument, "rule table classes differ from the label set", labels.task_id());
    }
    if (taxonomy.dimension() != labels.dimension() || index.dimension() != labels.dimension()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "labels D=" + std::to_string(labels.dimension()) + ", taxonomy D=" +
                      std::to_string(taxonomy.dimension()) + ", corpus D=" + std::to_string(index.dimension()),
                  labels.task_id());
    }
  }

  std::size_t dimension() const noexcept { return labels.dimension(); }
};

struct RoutingConfig {
  double tau_l = 0.20;
  double tau_m = 0.08;
  GroupMask mask;  // empty = no group masked
  TierHConfig tier_h;

  void validate() const {
    if (!std::isfinite(tau_l) || !std::isfinite(tau_m) || tau_l < 0.0 || tau_m < 0.0) {
      throw Error(ErrorKind::InvalidArgument, "thresholds must be finite and non-negative");
    }
    if (tier_h.depth < 1) throw Error(ErrorKind::InvalidArgument, "retrieval depth must be at least 1");
    if (tier_h.budget < 1) throw Error(ErrorKind::InvalidArgument, "call budget must be at least 1");
  }
};

struct RoutingOutcome {
  std::string sample_id;
  std::optional<std::string> label;  // ground truth, when the record carries one
  Tier final_tier = Tier::L;
  std::size_t prediction = 0;
  ScoreVector final_scores;
  double c_L = 0.0;
  std::optional<double> c_M;
  TierLResult tier_l;
  std::optional<TierMResult> tier_m;
  std::optional<TierHResult> tier_h;
  double latency_ms = 0.0;  // wall clock; never part of the outcome file
};

inline RoutingOutcome route_one(const std::string& sample_id, const EmbeddingVector& audio, const TaskAssets& assets,
                                const RoutingConfig& cfg, const LlmBackend& backend) {
  const auto t0 = std::chrono::steady_clock::now();
  RoutingOutcome out;
  out.sample_id = sample_id;
  try {
    out.tier_l = tier_l_classify(audio, assets.labels);
    out.c_L = out.tier_l.confidence;
    if (out.c_L >= cfg.tau_l) {
      out.final_tier = Tier::L;
      out.prediction = out.tier_l.prediction;
      out.final_scores = out.tier_l.scores;
    } else {
      out.tier_m = tier_m_classify(audio, assets.taxonomy, assets.rules, cfg.mask);
      out.c_M = out.tier_m->confidence;
      if (*out.c_M >= cfg.tau_m) {
        out.final_tier = Tier::M;
        out.prediction = out.tier_m->prediction;
        out.final_scores = out.tier_m->rule_scores;
      } else {
        const auto summary = render_descriptor_summary(out.tier_m->profile, assets.taxonomy);
        out.tier_h = tier_h_classify(audio, assets.labels, assets.index, summary, out.tier_l, &*out.tier_m,
                                     cfg.tier_h, backend);
        out.final_tier = Tier::H;
        out.prediction = out.tier_h->prediction;
        out.final_scores = out.tier_h->score_vector;
      }
    }
  } catch (const Error& e) {
    const std::string detail = e.subject().empty() ? e.message() : e.subject() + ": " + e.message();
    throw Error(e.kind(), detail, sample_id);
  }
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct CostModel {
  double t_l = 1.0;
  double t_m = 4.0;
  double t_h = 40.0;

  /// T_H ≥ T_M ≥ T_L is expected but not enforced.
  bool is_ordered() const noexcept { return t_h >= t_m && t_m >= t_l; }
};

struct BatchStats {
  std::size_t n = 0;
  std::size_t count_l = 0;
  std::size_t count_m = 0;
  std::size_t count_h = 0;
  double frac_l = 0.0;
  double frac_m = 0.0;
  double frac_h = 0.0;
  double alpha_m = 0.0;  // reached Tier-M (finalized at M or H)
  double alpha_h = 0.0;  // reached Tier-H
  double expected_cost = 0.0;
};

inline double expected_cost(const BatchStats& stats, const CostModel& model) {
  return model.t_l + stats.alpha_m * model.t_m + stats.alpha_h * model.t_h;
}

/// Stats from tier counts. An empty batch has α = 0 and cost T_L.
inline BatchStats compute_stats(std::size_t count_l, std::size_t count_m, std::size_t count_h,
                                const CostModel& model) {
  BatchStats s;
  s.count_l = count_l;
  s.count_m = count_m;
  s.count_h = count_h;
  s.n = count_l + count_m + count_h;
  if (s.n > 0) {
    const auto n = static_cast<double>(s.n);
    s.frac_l = static_cast<double>(count_l) / n;
    s.frac_m = static_cast<double>(count_m) / n;
    s.frac_h = static_cast<double>(count_h) / n;
    s.alpha_m = static_cast<double>(count_m + count_h) / n;
    s.alpha_h = static_cast<double>(count_h) / n;
  }
  s.expected_cost = expected_cost(s, model);
  return s;
}

inline BatchStats compute_stats(std::span<const RoutingOutcome> outcomes, const CostModel& model) {
  std::size_t l = 0, m = 0, h = 0;
  for (const auto& o : outcomes) {
    switch (o.final_tier) {
      case Tier::L: ++l; break;
      case Tier::M: ++m; break;
      case Tier::H: ++h; break;
    }
  }
  return compute_stats(l, m, h, model);
}

struct SampleError {
  std::size_t index = 0;
  std::string sample_id;
  ErrorKind kind = ErrorKind::InvalidArgument;
  std::string message;
};

struct BatchResult {
  std::vector<RoutingOutcome> outcomes;  // successful samples, input order
  std::vector<SampleError> errors;
  BatchStats stats;
};

/// Routes every record, `parallelism` samples in flight at a time. Output
/// order and content do not depend on `parallelism`. Per-sample failures are
/// collected; the batch throws only when every sample failed.
inline BatchResult route_batch(std::span<const AudioRecord> records, const TaskAssets& assets,
                               const RoutingConfig& cfg, const LlmBackend& backend, const CostModel& cost = {},
                               std::size_t parallelism = 1) {
  if (records.empty()) throw Error(ErrorKind::EmptyCorpus, "no records to route");
  cfg.validate();
  std::vector<std::optional<RoutingOutcome>> slots(records.size());
  std::vector<std::optional<SampleError>> failures(records.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
      const auto& rec = records[i];
      try {
        auto o = route_one(rec.id, rec.embedding, assets, cfg, backend);
        o.label = rec.label;
        slots[i] = std::move(o);
      } catch (const Error& e) {
        failures[i] = SampleError{i, rec.id, e.kind(), e.what()};
      } catch (const std::exception& e) {
        failures[i] = SampleError{i, rec.id, ErrorKind::InvalidArgument, e.what()};
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(parallelism, records.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  BatchResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) result.outcomes.push_back(std::move(*slots[i]));
    if (failures[i]) result.errors.push_back(std::move(*failures[i]));
  }
  if (result.outcomes.empty()) {
    const auto& first = result.errors.front();
    throw Error(first.kind, "every sample failed; first: " + first.message, first.sample_id);
  }
  result.stats = compute_stats(result.outcomes, cost);
  return result;
}

}  // namespace triage
