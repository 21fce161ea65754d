#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "triage/descriptors.hpp"
#include "triage/llm_backend.hpp"
#include "triage/prompt.hpp"
#include "triage/retrieval.hpp"
#include "triage/sha256.hpp"
#include "triage/tier_l.hpp"

namespace triage {

struct TierHConfig {
  std::size_t depth = 3;
  int budget = 1;
  PromptMode prompt_mode = PromptMode::WithEvidence;
  double temperature = 0.0;
  int max_output_tokens = 256;
  RetryPolicy retry;
};

/// One backend round trip, kept for the transcript log.
struct LlmCall {
  std::string prompt_sha256;
  std::string raw_text;
  std::optional<std::string> parsed_result;
  double latency_ms = 0.0;
};

struct TierHResult {
  std::vector<Neighbor> neighbors;
  LlmReply reply;
  std::size_t prediction = 0;
  ScoreVector score_vector;
  bool fallback_used = false;
  std::vector<LlmCall> calls;
};

/// Added to the parsed class. Votes live in [0, 1], so a bonus above 1 keeps
/// the LLM decision the strict argmax even when every neighbor voted for
/// another class.
inline constexpr double kLlmDecisionBonus = 2.0;

/// Similarity-weighted label vote over neighbors, normalized to sum to 1 over
/// labeled neighbors. Negative similarities carry zero weight.
inline std::vector<double> neighbor_votes(std::span<const Neighbor> neighbors, const RetrievalIndex& index,
                                          const LabelSet& labels) {
  std::vector<double> votes(labels.size(), 0.0);
  double total = 0.0;
  for (const auto& n : neighbors) {
    const auto& entry = index.entry(n.entry_id);
    if (!entry.label) continue;
    const auto cls = labels.index_of(*entry.label);
    if (!cls) continue;
    const double w = std::max(n.similarity, 0.0);
    votes[*cls] += w;
    total += w;
  }
  if (total > 0.0) {
    for (auto& v : votes) v /= total;
  }
  return votes;
}

/// Retrieval + prompt + backend decision. `fallback` (usually the Tier-M
/// result) is used when no reply parses or the backend is unreachable; with
/// no fallback, backend failures propagate.
inline TierHResult tier_h_classify(const EmbeddingVector& audio, const LabelSet& labels, const RetrievalIndex& index,
                                   std::string_view descriptor_summary, const TierLResult& tier_l,
                                   const TierMResult* fallback, const TierHConfig& cfg, const LlmBackend& backend) {
  if (cfg.depth == 0) throw Error(ErrorKind::InvalidArgument, "retrieval depth must be at least 1");
  if (cfg.budget < 1) throw Error(ErrorKind::InvalidArgument, "call budget must be at least 1");

  TierHResult out;
  out.neighbors = index.query_topk(audio, cfg.depth);

  PromptContext ctx;
  for (const auto& n : out.neighbors) ctx.reports.push_back(index.entry(n.entry_id).report);
  ctx.class_names = labels.class_names();
  ctx.descriptor_summary = std::string(descriptor_summary);
  ctx.tier_l_scores = tier_l.scores;

  LlmRequest request;
  request.prompt = build_prompt(ctx, cfg.prompt_mode);
  request.temperature = cfg.temperature;
  request.max_output_tokens = cfg.max_output_tokens;
  request.calls_budget = cfg.budget;
  const std::string prompt_sha = sha256_hex(request.prompt);

  std::vector<LlmReply> replies;
  try {
    for (int b = 0; b < cfg.budget; ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      std::string raw = call_backend(request, backend, cfg.retry);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      replies.push_back(parse_reply(raw, labels.class_names()));
      out.calls.push_back({prompt_sha, std::move(raw), replies.back().parsed_result, ms});
    }
  } catch (const Error& e) {
    if (!fallback || (e.kind() != ErrorKind::BackendUnavailable && e.kind() != ErrorKind::BackendError)) throw;
  }

  // Majority over parsed results; ties go to the higher Tier-L score.
  std::vector<int> counts(labels.size(), 0);
  for (const auto& r : replies) {
    if (r.parsed_result) ++counts[*labels.index_of(*r.parsed_result)];
  }
  std::optional<std::size_t> winner;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    if (!winner || counts[c] > counts[*winner] ||
        (counts[c] == counts[*winner] && tier_l.scores[c] > tier_l.scores[*winner])) {
      winner = c;
    }
  }

  if (!winner) {
    if (!replies.empty()) out.reply = replies.front();
    if (!fallback) {
      throw Error(ErrorKind::BackendError, "no parsable reply and no fallback",
                  replies.empty() ? std::string() : replies.front().raw_text.substr(0, 80));
    }
    out.fallback_used = true;
    out.prediction = fallback->prediction;
    out.score_vector = fallback->rule_scores;
    return out;
  }

  for (const auto& r : replies) {
    if (r.parsed_result == labels.class_names()[*winner]) {
      out.reply = r;
      break;
    }
  }
  out.prediction = *winner;
  out.score_vector = ScoreVector{labels.task_id(), neighbor_votes(out.neighbors, index, labels)};
  out.score_vector.scores[*winner] += kLlmDecisionBonus;
  return out;
}

}  // namespace triage
