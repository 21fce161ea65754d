#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/embedding_store.hpp"
#include "triage/similarity.hpp"

namespace triage {

struct Neighbor {
  std::string entry_id;
  double similarity = 0.0;
  std::size_t rank = 0;  // 1-based
  bool operator==(const Neighbor&) const = default;
};

/// Exact cosine kNN over an immutable set of report-bearing embeddings.
/// Brute-force scan with partial selection; ties resolve by entry id.
class RetrievalIndex {
 public:
  static RetrievalIndex build(std::vector<RetrievalCorpusEntry> entries) {
    if (entries.empty()) throw Error(ErrorKind::EmptyCorpus, "retrieval corpus is empty");
    RetrievalIndex index;
    index.dimension_ = entries.front().embedding.dimension();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.embedding.dimension() != index.dimension_) {
        throw Error(ErrorKind::DimensionMismatch, "entry dimension differs from corpus", e.id);
      }
      if (!index.by_id_.emplace(e.id, i).second) throw Error(ErrorKind::DuplicateId, "entry id repeated", e.id);
    }
    index.entries_ = std::move(entries);
    return index;
  }

  std::vector<Neighbor> query_topk(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    if (query.dimension() != dimension_) {
      throw Error(ErrorKind::DimensionMismatch, "query dimension " + std::to_string(query.dimension()) +
                                                    " vs corpus dimension " + std::to_string(dimension_));
    }
    std::vector<double> sims(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) sims[i] = cosine(query, entries_[i].embedding);
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto before = [&](std::size_t a, std::size_t b) {
      if (sims[a] != sims[b]) return sims[a] > sims[b];
      return entries_[a].id < entries_[b].id;
    };
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);
    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r) out.push_back({entries_[order[r]].id, sims[order[r]], r + 1});
    return out;
  }

  const RetrievalCorpusEntry& entry(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error(ErrorKind::UnknownText, "no retrieval entry with id", id);
    return entries_[it->second];
  }

  const std::vector<RetrievalCorpusEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  RetrievalIndex() = default;

  std::vector<RetrievalCorpusEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t dimension_ = 0;
};

}  // namespace triage
