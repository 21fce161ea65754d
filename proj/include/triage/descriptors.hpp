#pragma once

// Tier-M: clinician-style descriptor groups matched by cosine, then mapped to
// class scores through per-class prototype profiles.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "triage/embedding.hpp"
#include "triage/embedding_store.hpp"
#include "triage/random.hpp"
#include "triage/similarity.hpp"

namespace triage {

struct DescriptorGroup {
  std::string id;
  std::vector<std::string> option_texts;
  std::vector<EmbeddingVector> option_embeddings;
};

class DescriptorTaxonomy {
 public:
  explicit DescriptorTaxonomy(std::vector<DescriptorGroup> groups) : groups_(std::move(groups)) {
    if (groups_.empty()) throw Error(ErrorKind::InvalidArgument, "taxonomy needs at least one group");
    std::unordered_set<std::string> ids;
    const std::size_t dim = groups_.front().option_embeddings.empty()
                                ? 0
                                : groups_.front().option_embeddings.front().dimension();
    for (const auto& g : groups_) {
      if (!ids.insert(g.id).second) throw Error(ErrorKind::DuplicateId, "group id repeated", g.id);
      if (g.option_texts.size() < 2) throw Error(ErrorKind::InvalidArgument, "group needs at least 2 options", g.id);
      if (g.option_texts.size() != g.option_embeddings.size()) {
        throw Error(ErrorKind::InvalidArgument, "one embedding per option required", g.id);
      }
      std::unordered_set<std::string> texts(g.option_texts.begin(), g.option_texts.end());
      if (texts.size() != g.option_texts.size()) throw Error(ErrorKind::DuplicateId, "option text repeated", g.id);
      for (const auto& e : g.option_embeddings) {
        if (e.dimension() != dim) throw Error(ErrorKind::DimensionMismatch, "option embeddings differ in dimension", g.id);
      }
    }
    dimension_ = dim;
  }

  const std::vector<DescriptorGroup>& groups() const noexcept { return groups_; }
  const DescriptorGroup& group(std::size_t k) const { return groups_.at(k); }
  std::size_t size() const noexcept { return groups_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }

  std::optional<std::size_t> index_of(std::string_view group_id) const {
    for (std::size_t k = 0; k < groups_.size(); ++k) {
      if (groups_[k].id == group_id) return k;
    }
    return std::nullopt;
  }

 private:
  std::vector<DescriptorGroup> groups_;
  std::size_t dimension_ = 0;
};

/// true = group excluded. An empty mask means nothing is masked.
using GroupMask = std::vector<bool>;

struct DescriptorSelection {
  std::size_t option = 0;
  double similarity = 0.0;
  bool operator==(const DescriptorSelection&) const = default;
};

struct DescriptorProfile {
  std::vector<std::optional<DescriptorSelection>> selections;  // nullopt for masked groups
  GroupMask mask;

  std::size_t unmasked_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : selections) n += s.has_value();
    return n;
  }
  bool operator==(const DescriptorProfile&) const = default;
};

/// Prototype option index per (class, group). Rows follow the class order of
/// the task's LabelSet, columns the taxonomy's group order.
class RuleTable {
 public:
  RuleTable(std::string task_id, std::vector<std::string> class_names,
            std::vector<std::vector<std::size_t>> prototypes, const DescriptorTaxonomy& taxonomy)
      : task_id_(std::move(task_id)), class_names_(std::move(class_names)), prototypes_(std::move(prototypes)) {
    if (class_names_.size() < 2) throw Error(ErrorKind::DegenerateLabelSet, "rule table needs 2+ classes", task_id_);
    if (prototypes_.size() != class_names_.size()) {
      throw Error(ErrorKind::RuleCoverageGap, "one prototype per class required", task_id_);
    }
    for (std::size_t c = 0; c < prototypes_.size(); ++c) {
      if (prototypes_[c].size() != taxonomy.size()) {
        throw Error(ErrorKind::RuleCoverageGap, "prototype does not cover every group", class_names_[c]);
      }
      for (std::size_t k = 0; k < taxonomy.size(); ++k) {
        if (prototypes_[c][k] >= taxonomy.group(k).option_texts.size()) {
          throw Error(ErrorKind::InvalidArgument, "prototype option out of range for group " + taxonomy.group(k).id,
                      class_names_[c]);
        }
      }
    }
  }

  const std::string& task_id() const noexcept { return task_id_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::size_t group_count() const noexcept { return prototypes_.front().size(); }
  std::size_t prototype(std::size_t cls, std::size_t group) const { return prototypes_.at(cls).at(group); }
  const std::vector<std::vector<std::size_t>>& prototypes() const noexcept { return prototypes_; }

 private:
  std::string task_id_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<std::size_t>> prototypes_;
};

struct TierMResult {
  DescriptorProfile profile;
  ScoreVector rule_scores;
  std::size_t prediction = 0;
  double confidence = 0.0;
};

/// Per unmasked group, the option with the highest cosine to `audio` (ties to
/// the lowest option index).
inline DescriptorProfile descriptor_profile(const EmbeddingVector& audio, const DescriptorTaxonomy& taxonomy,
                                            const GroupMask& mask = {}) {
  if (!mask.empty() && mask.size() != taxonomy.size()) {
    throw Error(ErrorKind::InvalidArgument, "mask has " + std::to_string(mask.size()) + " entries for " +
                                                std::to_string(taxonomy.size()) + " groups");
  }
  if (audio.dimension() != taxonomy.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "audio dimension " + std::to_string(audio.dimension()) +
                                                  " vs taxonomy dimension " + std::to_string(taxonomy.dimension()));
  }
  DescriptorProfile p;
  p.mask = mask.empty() ? GroupMask(taxonomy.size(), false) : mask;
  p.selections.resize(taxonomy.size());
  for (std::size_t k = 0; k < taxonomy.size(); ++k) {
    if (p.mask[k]) continue;
    const auto sims = score_against_texts(audio, taxonomy.group(k).option_embeddings);
    std::size_t best = 0;
    for (std::size_t m = 1; m < sims.size(); ++m) {
      if (sims[m] > sims[best]) best = m;
    }
    p.selections[k] = DescriptorSelection{best, sims[best]};
  }
  if (p.unmasked_count() == 0) throw Error(ErrorKind::AllGroupsMasked, "every descriptor group is masked");
  return p;
}

/// score_y = (# unmasked groups whose selection equals class y's prototype
/// option) / (# unmasked groups).
inline ScoreVector rule_scores(const DescriptorProfile& profile, const RuleTable& table) {
  if (profile.selections.size() != table.group_count()) {
    throw Error(ErrorKind::RuleCoverageGap, "profile has " + std::to_string(profile.selections.size()) +
                                                " groups, rule table covers " + std::to_string(table.group_count()),
                table.task_id());
  }
  const std::size_t unmasked = profile.unmasked_count();
  if (unmasked == 0) throw Error(ErrorKind::AllGroupsMasked, "every descriptor group is masked");
  ScoreVector out{table.task_id(), std::vector<double>(table.class_names().size(), 0.0)};
  for (std::size_t c = 0; c < out.scores.size(); ++c) {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < profile.selections.size(); ++k) {
      const auto& sel = profile.selections[k];
      if (sel && sel->option == table.prototype(c, k)) ++hits;
    }
    out.scores[c] = static_cast<double>(hits) / static_cast<double>(unmasked);
  }
  return out;
}

inline TierMResult tier_m_classify(const EmbeddingVector& audio, const DescriptorTaxonomy& taxonomy,
                                   const RuleTable& table, const GroupMask& mask = {}) {
  TierMResult r;
  r.profile = descriptor_profile(audio, taxonomy, mask);
  r.rule_scores = rule_scores(r.profile, table);
  const auto decision = top_two_margin(r.rule_scores.scores);
  r.prediction = decision.argmax;
  r.confidence = decision.margin;
  return r;
}

/// Masks exactly floor(rate·K + 0.5) groups, drawn without replacement from
/// a stream keyed by `seed`.
inline GroupMask sample_mask(const DescriptorTaxonomy& taxonomy, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "mask rate must lie in [0, 1), got " + std::to_string(rate));
  }
  const std::size_t k = taxonomy.size();
  const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(k) + 0.5));
  if (count >= k) {
    throw Error(ErrorKind::AllGroupsMasked, "rate " + std::to_string(rate) + " masks all " + std::to_string(k) + " groups");
  }
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  CounterRng rng = CounterRng(seed).substream("descriptor-mask");
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(k - i));
    std::swap(order[i], order[j]);
  }
  GroupMask mask(k, false);
  for (std::size_t i = 0; i < count; ++i) mask[order[i]] = true;
  return mask;
}

/// "group_id: option text" per unmasked group, one per line.
inline std::string render_descriptor_summary(const DescriptorProfile& profile, const DescriptorTaxonomy& taxonomy) {
  std::string out;
  for (std::size_t k = 0; k < profile.selections.size(); ++k) {
    const auto& sel = profile.selections[k];
    if (!sel) continue;
    const auto& g = taxonomy.group(k);
    out += g.id + ": " + g.option_texts.at(sel->option) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Taxonomy + rule-table config file
//
// {"groups": [{"id": ..., "options": [...]}],
//  "tasks": {"<task>": {"classes": [...],
//                       "prototypes": {"<class>": {"<group_id>": "<option>"}}}}}

struct TaskRules {
  std::vector<std::string> classes;
  std::map<std::string, std::map<std::string, std::string>> prototypes;
};

struct TaxonomyConfig {
  struct Group {
    std::string id;
    std::vector<std::string> options;
  };
  std::vector<Group> groups;
  std::map<std::string, TaskRules> tasks;
};

inline TaxonomyConfig parse_taxonomy_config(const nlohmann::json& j, const std::string& source = {}) {
  try {
    TaxonomyConfig cfg;
    for (const auto& g : j.at("groups")) {
      cfg.groups.push_back({g.at("id").get<std::string>(), g.at("options").get<std::vector<std::string>>()});
    }
    if (j.contains("tasks")) {
      for (const auto& [task_id, t] : j.at("tasks").items()) {
        TaskRules rules;
        rules.classes = t.at("classes").get<std::vector<std::string>>();
        for (const auto& [cls, proto] : t.at("prototypes").items()) {
          rules.prototypes[cls] = proto.get<std::map<std::string, std::string>>();
        }
        cfg.tasks.emplace(task_id, std::move(rules));
      }
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), source);
  }
}

inline TaxonomyConfig load_taxonomy_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
  return parse_taxonomy_config(j, path.string());
}

inline nlohmann::ordered_json taxonomy_config_to_json(const TaxonomyConfig& cfg) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : cfg.groups) groups.push_back({{"id", g.id}, {"options", g.options}});
  nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
  for (const auto& [task_id, rules] : cfg.tasks) {
    nlohmann::ordered_json protos = nlohmann::ordered_json::object();
    for (const auto& cls : rules.classes) {
      nlohmann::ordered_json row = nlohmann::ordered_json::object();
      if (auto it = rules.prototypes.find(cls); it != rules.prototypes.end()) {
        for (const auto& g : cfg.groups) {
          if (auto opt = it->second.find(g.id); opt != it->second.end()) row[g.id] = opt->second;
        }
      }
      protos[cls] = std::move(row);
    }
    tasks[task_id] = {{"classes", rules.classes}, {"prototypes", std::move(protos)}};
  }
  return {{"groups", std::move(groups)}, {"tasks", std::move(tasks)}};
}

/// Option embeddings are looked up by exact text in `texts`.
inline DescriptorTaxonomy build_taxonomy(const TaxonomyConfig& cfg, const TextEmbeddingTable& texts) {
  std::vector<DescriptorGroup> groups;
  for (const auto& g : cfg.groups) {
    DescriptorGroup dg{g.id, g.options, {}};
    for (const auto& opt : g.options) dg.option_embeddings.push_back(texts.at(opt));
    groups.push_back(std::move(dg));
  }
  return DescriptorTaxonomy(std::move(groups));
}

inline RuleTable build_rule_table(const TaxonomyConfig& cfg, const std::string& task_id,
                                  const DescriptorTaxonomy& taxonomy) {
  auto it = cfg.tasks.find(task_id);
  if (it == cfg.tasks.end()) throw Error(ErrorKind::RuleCoverageGap, "no rule table for task", task_id);
  const TaskRules& rules = it->second;
  std::vector<std::vector<std::size_t>> prototypes;
  for (const auto& cls : rules.classes) {
    auto p = rules.prototypes.find(cls);
    if (p == rules.prototypes.end()) throw Error(ErrorKind::RuleCoverageGap, "class has no prototype", cls);
    if (p->second.size() != taxonomy.size()) {
      throw Error(ErrorKind::RuleCoverageGap,
                  "prototype names " + std::to_string(p->second.size()) + " groups, taxonomy has " +
                      std::to_string(taxonomy.size()),
                  cls);
    }
    std::vector<std::size_t> row(taxonomy.size());
    for (std::size_t k = 0; k < taxonomy.size(); ++k) {
      const auto& g = taxonomy.group(k);
      auto opt = p->second.find(g.id);
      if (opt == p->second.end()) throw Error(ErrorKind::RuleCoverageGap, "prototype misses group " + g.id, cls);
      auto pos = std::find(g.option_texts.begin(), g.option_texts.end(), opt->second);
      if (pos == g.option_texts.end()) {
        throw Error(ErrorKind::UnknownText, "option '" + opt->second + "' not in group " + g.id, cls);
      }
      row[k] = static_cast<std::size_t>(pos - g.option_texts.begin());
    }
    prototypes.push_back(std::move(row));
  }
  return RuleTable(task_id, rules.classes, std::move(prototypes), taxonomy);
}

}  // namespace triage
