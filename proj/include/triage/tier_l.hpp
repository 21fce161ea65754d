#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "triage/embedding.hpp"
#include "triage/embedding_store.hpp"
#include "triage/similarity.hpp"

namespace triage {

/// Ordered class names for one task with one text embedding per class. The
/// order fixes the index of every score vector produced for the task.
class LabelSet {
 public:
  LabelSet(std::string task_id, std::vector<std::string> class_names,
           std::vector<EmbeddingVector> label_embeddings)
      : task_id_(std::move(task_id)),
        class_names_(std::move(class_names)),
        label_embeddings_(std::move(label_embeddings)) {
    if (class_names_.size() < 2) {
      throw Error(ErrorKind::DegenerateLabelSet, "a task needs at least 2 classes", task_id_);
    }
    if (class_names_.size() != label_embeddings_.size()) {
      throw Error(ErrorKind::InvalidArgument, "one label embedding per class required", task_id_);
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : class_names_) {
      if (!seen.insert(name).second) throw Error(ErrorKind::DuplicateId, "class name repeated", name);
    }
    for (const auto& e : label_embeddings_) {
      if (e.dimension() != label_embeddings_.front().dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "label embeddings differ in dimension", task_id_);
      }
    }
  }

  /// Class embeddings looked up by exact name in a text store.
  static LabelSet from_text_table(std::string task_id, std::vector<std::string> class_names,
                                  const TextEmbeddingTable& texts) {
    std::vector<EmbeddingVector> embeddings;
    embeddings.reserve(class_names.size());
    for (const auto& name : class_names) embeddings.push_back(texts.at(name));
    return LabelSet(std::move(task_id), std::move(class_names), std::move(embeddings));
  }

  const std::string& task_id() const noexcept { return task_id_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<EmbeddingVector>& label_embeddings() const noexcept { return label_embeddings_; }
  std::size_t size() const noexcept { return class_names_.size(); }
  std::size_t dimension() const noexcept { return label_embeddings_.front().dimension(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < class_names_.size(); ++i) {
      if (class_names_[i] == name) return i;
    }
    return std::nullopt;
  }

 private:
  std::string task_id_;
  std::vector<std::string> class_names_;
  std::vector<EmbeddingVector> label_embeddings_;
};

struct TierLResult {
  ScoreVector scores;
  std::size_t prediction = 0;
  double confidence = 0.0;
};

/// Label-name cosine scoring. Confidence is the top-two margin c_L.
inline TierLResult tier_l_classify(const EmbeddingVector& audio, const LabelSet& labels) {
  if (audio.dimension() != labels.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "audio dimension " + std::to_string(audio.dimension()) +
                                                  " vs label dimension " + std::to_string(labels.dimension()));
  }
  ScoreVector scores{labels.task_id(), score_against_texts(audio, labels.label_embeddings())};
  const auto decision = top_two_margin(scores.scores);
  return {std::move(scores), decision.argmax, decision.margin};
}

}  // namespace triage
