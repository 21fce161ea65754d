#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "triage/embedding.hpp"
#include "triage/error.hpp"

namespace triage {

/// Per-class scores for one task, indexed in LabelSet order.
struct ScoreVector {
  std::string task_id;
  std::vector<double> scores;

  std::size_t size() const noexcept { return scores.size(); }
  double operator[](std::size_t i) const noexcept { return scores[i]; }
  bool operator==(const ScoreVector&) const = default;
};

/// Left-to-right accumulation; the order is fixed so results are bit-stable.
inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

inline std::vector<double> score_against_texts(const EmbeddingVector& a,
                                               std::span<const EmbeddingVector> texts) {
  if (texts.empty()) throw Error(ErrorKind::EmptyQuerySet, "no text embeddings to score against");
  std::vector<double> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(cosine(a, t));
  return out;
}

struct MarginDecision {
  std::size_t argmax = 0;
  double margin = 0.0;
};

/// Argmax (ties to the lowest index) and the gap between the two largest
/// scores. For two classes this is |s₀ − s₁|.
inline MarginDecision top_two_margin(std::span<const double> scores) {
  if (scores.size() < 2) {
    throw Error(ErrorKind::DegenerateLabelSet, "margin needs at least 2 scores, got " +
                                                   std::to_string(scores.size()));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  bool have_second = false;
  double second = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == best) continue;
    if (!have_second || scores[i] > second) {
      second = scores[i];
      have_second = true;
    }
  }
  return {best, scores[best] - second};
}

}  // namespace triage
