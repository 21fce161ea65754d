#pragma once

// On-disk embedding corpora.
//
//   manifest.json    {"dimension", "record_count", "embedding_file",
//                     "metadata_file", "checksum_sha256"}
//   embeddings.f32   record_count × dimension little-endian float32, row-major
//   metadata.jsonl   one {"id", "split"?, "label"?, "report"?} object per row
//
// Rows are widened to double and re-normalized on load.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "triage/embedding.hpp"
#include "triage/error.hpp"
#include "triage/sha256.hpp"

namespace triage {

enum class Split { Train, Valid, Test };

constexpr std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "test";
}

inline Split parse_split(std::string_view text, const std::string& subject = {}) {
  if (text == "train") return Split::Train;
  if (text == "valid") return Split::Valid;
  if (text == "test") return Split::Test;
  throw Error(ErrorKind::Parse, "unknown split '" + std::string(text) + "'", subject);
}

/// One row of a corpus as stored on disk. Audio records use split/label;
/// retrieval entries use report/label; text stores use the id as the text.
struct CorpusRecord {
  std::string id;
  std::optional<Split> split;
  std::optional<std::string> label;
  std::optional<std::string> report;
  EmbeddingVector embedding;
};

struct CorpusManifest {
  std::size_t dimension = 0;
  std::size_t record_count = 0;
  std::string embedding_file;
  std::string metadata_file;
  std::string checksum_sha256;
};

inline nlohmann::ordered_json manifest_to_json(const CorpusManifest& m) {
  return {{"dimension", m.dimension},
          {"record_count", m.record_count},
          {"embedding_file", m.embedding_file},
          {"metadata_file", m.metadata_file},
          {"checksum_sha256", m.checksum_sha256}};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open file for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed", path.string());
}

namespace detail {

inline void append_f32_le(std::string& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

inline float read_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<float>(bits);
}

inline CorpusManifest parse_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
  if (!j.is_object()) throw Error(ErrorKind::Parse, "manifest must be a JSON object", path.string());
  static const std::set<std::string> kRequired = {"dimension", "record_count", "embedding_file",
                                                  "metadata_file", "checksum_sha256"};
  for (const auto& key : kRequired) {
    if (!j.contains(key)) throw Error(ErrorKind::Parse, "manifest missing key '" + key + "'", path.string());
  }
  for (const auto& [key, _] : j.items()) {
    // "provenance" is free-form metadata written by exporters; anything else is rejected.
    if (!kRequired.contains(key) && key != "provenance") {
      throw Error(ErrorKind::Parse, "unexpected manifest key '" + key + "'", path.string());
    }
  }
  try {
    CorpusManifest m;
    const auto dim = j.at("dimension").get<std::int64_t>();
    const auto count = j.at("record_count").get<std::int64_t>();
    if (dim <= 0) throw Error(ErrorKind::Parse, "dimension must be positive", path.string());
    if (count < 0) throw Error(ErrorKind::Parse, "record_count must be non-negative", path.string());
    m.dimension = static_cast<std::size_t>(dim);
    m.record_count = static_cast<std::size_t>(count);
    m.embedding_file = j.at("embedding_file").get<std::string>();
    m.metadata_file = j.at("metadata_file").get<std::string>();
    m.checksum_sha256 = j.at("checksum_sha256").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
}

inline std::optional<std::string> optional_string(const nlohmann::json& row, const char* key,
                                                  const std::string& id) {
  if (!row.contains(key) || row.at(key).is_null()) return std::nullopt;
  if (!row.at(key).is_string()) throw Error(ErrorKind::Parse, std::string("'") + key + "' must be a string", id);
  return row.at(key).get<std::string>();
}

}  // namespace detail

inline CorpusManifest read_manifest(const std::filesystem::path& manifest_path) {
  return detail::parse_manifest(manifest_path);
}

/// Loads and validates a corpus. Records come back in metadata-file order.
inline std::vector<CorpusRecord> load_corpus(const std::filesystem::path& manifest_path) {
  const CorpusManifest m = detail::parse_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  const auto emb_path = base / m.embedding_file;
  const auto meta_path = base / m.metadata_file;

  const std::string blob = read_file(emb_path);
  std::string actual_sum = sha256_hex(blob);
  std::string expected_sum = m.checksum_sha256;
  for (auto& c : expected_sum) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (actual_sum != expected_sum) {
    throw Error(ErrorKind::ChecksumMismatch, "expected " + m.checksum_sha256 + ", got " + actual_sum,
                emb_path.string());
  }
  if (m.record_count == 0) throw Error(ErrorKind::EmptyCorpus, "manifest declares zero records", manifest_path.string());
  const std::size_t expected_bytes = m.record_count * m.dimension * 4;
  if (blob.size() != expected_bytes) {
    throw Error(ErrorKind::DimensionMismatch,
                "embedding file has " + std::to_string(blob.size()) + " bytes, expected " +
                    std::to_string(expected_bytes) + " (record_count × dimension × 4)",
                emb_path.string());
  }

  std::vector<nlohmann::json> rows;
  {
    std::istringstream meta(read_file(meta_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        rows.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what(), meta_path.string());
      }
    }
  }
  if (rows.size() != m.record_count) {
    throw Error(ErrorKind::RecordCountMismatch,
                "metadata has " + std::to_string(rows.size()) + " rows, manifest declares " +
                    std::to_string(m.record_count),
                meta_path.string());
  }

  std::vector<CorpusRecord> out;
  out.reserve(rows.size());
  std::unordered_set<std::string> seen;
  std::vector<double> raw(m.dimension);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (!row.is_object() || !row.contains("id") || !row.at("id").is_string()) {
      throw Error(ErrorKind::Parse, "row " + std::to_string(r) + " lacks a string 'id'", meta_path.string());
    }
    std::string id = row.at("id").get<std::string>();
    if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateId, "id appears more than once", id);

    const char* p = blob.data() + r * m.dimension * 4;
    for (std::size_t i = 0; i < m.dimension; ++i) raw[i] = static_cast<double>(detail::read_f32_le(p + 4 * i));

    auto split_text = detail::optional_string(row, "split", id);
    std::optional<Split> split;
    if (split_text) split = parse_split(*split_text, id);
    auto label = detail::optional_string(row, "label", id);
    auto report = detail::optional_string(row, "report", id);
    auto embedding = EmbeddingVector::normalize(raw, id);
    out.push_back(CorpusRecord{std::move(id), split, std::move(label), std::move(report), std::move(embedding)});
  }
  return out;
}

/// Writes manifest.json, embeddings.f32 and metadata.jsonl into `out_dir`.
inline CorpusManifest save_corpus(std::span<const CorpusRecord> records,
                                  const std::filesystem::path& out_dir) {
  if (records.empty()) throw Error(ErrorKind::EmptyCorpus, "nothing to save", out_dir.string());
  const std::size_t dim = records.front().embedding.dimension();
  std::string blob;
  blob.reserve(records.size() * dim * 4);
  std::string meta;
  for (const auto& rec : records) {
    if (rec.embedding.dimension() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "dimension " + std::to_string(rec.embedding.dimension()) + " differs from " + std::to_string(dim),
                  rec.id);
    }
    for (const double v : rec.embedding.values()) detail::append_f32_le(blob, static_cast<float>(v));
    nlohmann::ordered_json row = {{"id", rec.id}};
    if (rec.split) row["split"] = std::string(to_string(*rec.split));
    if (rec.label) row["label"] = *rec.label;
    if (rec.report) row["report"] = *rec.report;
    meta += row.dump();
    meta += '\n';
  }

  CorpusManifest m;
  m.dimension = dim;
  m.record_count = records.size();
  m.embedding_file = "embeddings.f32";
  m.metadata_file = "metadata.jsonl";
  m.checksum_sha256 = sha256_hex(blob);

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / m.embedding_file, blob);
  write_file(out_dir / m.metadata_file, meta);
  write_file(out_dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  return m;
}

struct AudioRecord {
  std::string id;
  Split split = Split::Test;
  std::optional<std::string> label;
  EmbeddingVector embedding;
};

struct RetrievalCorpusEntry {
  std::string id;
  EmbeddingVector embedding;
  std::string report;
  std::optional<std::string> label;
};

/// Missing split defaults to test.
inline std::vector<AudioRecord> to_audio_records(std::span<const CorpusRecord> records) {
  std::vector<AudioRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.id, r.split.value_or(Split::Test), r.label, r.embedding});
  return out;
}

inline std::vector<RetrievalCorpusEntry> to_retrieval_entries(std::span<const CorpusRecord> records) {
  std::vector<RetrievalCorpusEntry> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.report || r.report->empty()) throw Error(ErrorKind::Parse, "retrieval entry needs a non-empty report", r.id);
    out.push_back({r.id, r.embedding, *r.report, r.label});
  }
  return out;
}

/// Text → embedding lookup over a store whose ids are the encoded strings
/// (label names, descriptor option templates).
class TextEmbeddingTable {
 public:
  TextEmbeddingTable() = default;

  explicit TextEmbeddingTable(std::span<const CorpusRecord> records) {
    for (const auto& r : records) add(r.id, r.embedding);
  }

  void add(const std::string& text, EmbeddingVector embedding) {
    if (dimension_ == 0) dimension_ = embedding.dimension();
    if (embedding.dimension() != dimension_) {
      throw Error(ErrorKind::DimensionMismatch, "text embedding dimension differs from table", text);
    }
    if (!table_.emplace(text, std::move(embedding)).second) {
      throw Error(ErrorKind::DuplicateId, "text appears more than once", text);
    }
  }

  const EmbeddingVector& at(const std::string& text) const {
    auto it = table_.find(text);
    if (it == table_.end()) throw Error(ErrorKind::UnknownText, "no embedding for text", text);
    return it->second;
  }

  bool contains(const std::string& text) const { return table_.contains(text); }
  std::size_t size() const noexcept { return table_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::unordered_map<std::string, EmbeddingVector> table_;
  std::size_t dimension_ = 0;
};

}  // namespace triage
