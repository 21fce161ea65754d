#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "triage/error.hpp"

namespace triage {

/// Mid-ranks (1-based, ties share the mean rank) of `values`.
inline std::vector<double> mid_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

/// Mann-Whitney AUROC with half credit for ties, via the rank-sum identity
///   AUROC = (R₊ − P(P+1)/2) / (P·N).
/// `labels` are 0/1.
inline double auroc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::InvalidArgument, std::to_string(scores.size()) + " scores for " +
                                                std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::NonFiniteValue, "score " + std::to_string(i) + " is not finite");
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::InvalidArgument, "binary labels must be 0 or 1");
    pos += labels[i] == 1;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::DegenerateLabels, "AUROC needs both classes present");

  const auto ranks = mid_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

struct MacroAuroc {
  double macro = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt for classes absent from labels
};

/// One-vs-rest AUROC per class (score of class c against indicator(label = c)),
/// averaged without weights over the classes present in `labels`.
inline MacroAuroc auroc_macro_ovr(std::span<const std::vector<double>> score_vectors,
                                  std::span<const std::size_t> labels, std::size_t num_classes) {
  if (score_vectors.size() != labels.size()) {
    throw Error(ErrorKind::InvalidArgument, std::to_string(score_vectors.size()) + " score vectors for " +
                                                std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto y : labels) {
    if (y >= num_classes) throw Error(ErrorKind::UnknownLabel, "label index " + std::to_string(y) + " out of range");
    ++counts[y];
  }
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (present < 2) throw Error(ErrorKind::DegenerateLabels, "macro AUROC needs at least 2 classes present");

  MacroAuroc out;
  out.per_class.resize(num_classes);
  std::vector<double> column(labels.size());
  std::vector<int> indicator(labels.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (score_vectors[i].size() != num_classes) {
        throw Error(ErrorKind::DimensionMismatch, "score vector " + std::to_string(i) + " has " +
                                                      std::to_string(score_vectors[i].size()) + " entries");
      }
      column[i] = score_vectors[i][c];
      indicator[i] = labels[i] == c ? 1 : 0;
    }
    const double a = auroc_binary(column, indicator);
    out.per_class[c] = a;
    sum += a;
  }
  out.macro = sum / static_cast<double>(present);
  return out;
}

}  // namespace triage
