#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "triage/error.hpp"

namespace triage {

/// Unit-norm vector in the shared audio/text space. The only way to get one
/// is through `normalize`, so every instance satisfies |‖v‖₂ − 1| < 1e-9.
class EmbeddingVector {
 public:
  /// Scales `raw` to unit Euclidean norm. `subject` is attached to any error
  /// (typically the record id).
  static EmbeddingVector normalize(std::span<const double> raw,
                                   const std::string& subject = {}) {
    double sum_sq = 0.0;
    for (const double x : raw) {
      if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteValue, "embedding entry is not finite", subject);
      sum_sq += x * x;
    }
    if (raw.empty()) throw Error(ErrorKind::DimensionMismatch, "embedding is empty", subject);
    const double norm = std::sqrt(sum_sq);
    if (norm == 0.0) throw Error(ErrorKind::ZeroNorm, "cannot normalize a zero vector", subject);
    if (!std::isfinite(norm)) throw Error(ErrorKind::NonFiniteValue, "embedding norm overflows", subject);
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / norm;
    return EmbeddingVector(std::move(out));
  }

  static EmbeddingVector normalize(std::initializer_list<double> raw) {
    return normalize(std::span<const double>(raw.begin(), raw.size()));
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

  std::vector<double> values_;
};

inline EmbeddingVector normalize(std::span<const double> raw) {
  return EmbeddingVector::normalize(raw);
}

}  // namespace triage
