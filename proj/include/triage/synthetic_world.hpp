#pragma once

// Seeded generator of embedding worlds with controllable difficulty.
//
// Class directions μ_y and option vectors are orthonormal. A recording of
// class y is
//   normalize(s·μ_y + q·mean(prototype options of y) + σ·g/√D),  g ~ N(0, I_D)
// and retrieval-corpus reports read "label=<class>; <descriptor summary>".

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "triage/descriptors.hpp"
#include "triage/embedding_store.hpp"
#include "triage/random.hpp"
#include "triage/respiratory_taxonomy.hpp"
#include "triage/retrieval.hpp"
#include "triage/router.hpp"
#include "triage/tier_l.hpp"

namespace triage {

struct WorldConfig {
  std::size_t dimension = 64;
  std::size_t num_classes = 2;
  double class_separation = 0.3;
  double descriptor_informativeness = 0.8;
  /// Empty = the built-in respiratory taxonomy; otherwise option counts per group.
  std::vector<std::size_t> taxonomy_shape;
  std::size_t corpus_size = 1000;
  std::size_t test_size = 500;
  std::size_t valid_size = 200;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  std::string task_id;                   // empty = derived default
  std::vector<std::string> class_names;  // empty = derived default

  void validate() const {
    const auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (dimension == 0) throw Error(ErrorKind::InvalidArgument, "dimension must be positive", "dimension");
    if (num_classes < 2) throw Error(ErrorKind::InvalidArgument, "at least 2 classes required", "num_classes");
    if (!unit(class_separation)) throw Error(ErrorKind::InvalidArgument, "must lie in [0, 1]", "class_separation");
    if (!unit(descriptor_informativeness)) {
      throw Error(ErrorKind::InvalidArgument, "must lie in [0, 1]", "descriptor_informativeness");
    }
    if (!std::isfinite(noise_scale) || noise_scale < 0.0) {
      throw Error(ErrorKind::InvalidArgument, "must be finite and non-negative", "noise_scale");
    }
    if (corpus_size == 0) throw Error(ErrorKind::InvalidArgument, "corpus must not be empty", "corpus_size");
    if (test_size == 0) throw Error(ErrorKind::InvalidArgument, "test split must not be empty", "test_size");
    if (!class_names.empty() && class_names.size() != num_classes) {
      throw Error(ErrorKind::InvalidArgument, "one name per class required", "class_names");
    }
    for (const auto m : taxonomy_shape) {
      if (m < num_classes) {
        throw Error(ErrorKind::InvalidArgument, "every group needs at least one option per class", "taxonomy");
      }
    }
  }
};

inline nlohmann::ordered_json world_config_to_json(const WorldConfig& c) {
  nlohmann::ordered_json j;
  j["dimension"] = c.dimension;
  j["num_classes"] = c.num_classes;
  j["class_separation"] = c.class_separation;
  j["descriptor_informativeness"] = c.descriptor_informativeness;
  if (c.taxonomy_shape.empty()) j["taxonomy"] = "respiratory";
  else j["taxonomy"] = c.taxonomy_shape;
  j["corpus_size"] = c.corpus_size;
  j["test_size"] = c.test_size;
  j["valid_size"] = c.valid_size;
  j["noise_scale"] = c.noise_scale;
  j["seed"] = c.seed;
  if (!c.task_id.empty()) j["task_id"] = c.task_id;
  if (!c.class_names.empty()) j["class_names"] = c.class_names;
  return j;
}

inline WorldConfig world_config_from_json(const nlohmann::json& j, const std::string& source = {}) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "world config must be an object", source);
  WorldConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dimension") c.dimension = v.get<std::size_t>();
      else if (key == "num_classes") c.num_classes = v.get<std::size_t>();
      else if (key == "class_separation") c.class_separation = v.get<double>();
      else if (key == "descriptor_informativeness") c.descriptor_informativeness = v.get<double>();
      else if (key == "taxonomy") {
        if (v.is_string()) {
          if (v.get<std::string>() != "respiratory") {
            throw Error(ErrorKind::InvalidArgument, "unknown built-in taxonomy '" + v.get<std::string>() + "'", source);
          }
          c.taxonomy_shape.clear();
        } else {
          c.taxonomy_shape = v.get<std::vector<std::size_t>>();
          if (c.taxonomy_shape.empty()) throw Error(ErrorKind::InvalidArgument, "taxonomy needs a group", source);
        }
      } else if (key == "corpus_size") c.corpus_size = v.get<std::size_t>();
      else if (key == "test_size") c.test_size = v.get<std::size_t>();
      else if (key == "valid_size") c.valid_size = v.get<std::size_t>();
      else if (key == "noise_scale") c.noise_scale = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "task_id") c.task_id = v.get<std::string>();
      else if (key == "class_names") c.class_names = v.get<std::vector<std::string>>();
      else throw Error(ErrorKind::InvalidArgument, "unknown world config key '" + key + "'", source);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), source);
  }
  return c;
}

/// TOML tables are converted to JSON and read through the same field parser.
inline nlohmann::json parse_config_text(const std::string& text, const std::filesystem::path& path) {
  if (path.extension() == ".toml") {
    try {
      const auto table = toml::parse(text, path.string());
      std::ostringstream os;
      os << toml::json_formatter{table};
      return nlohmann::json::parse(os.str());
    } catch (const toml::parse_error& e) {
      throw Error(ErrorKind::Parse, std::string(e.description()), path.string());
    }
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
}

inline WorldConfig load_world_config(const std::filesystem::path& path) {
  return world_config_from_json(parse_config_text(read_file(path), path), path.string());
}

struct World {
  WorldConfig config;
  std::string task_id;
  TaxonomyConfig taxonomy_config;
  std::vector<CorpusRecord> label_texts;   // id = class name
  std::vector<CorpusRecord> option_texts;  // id = option text
  std::vector<CorpusRecord> test;
  std::vector<CorpusRecord> valid;
  std::vector<CorpusRecord> corpus;
  std::vector<std::string> warnings;
};

namespace detail {

/// Modified Gram-Schmidt, run twice for orthogonality near machine precision.
inline void orthonormalize(std::vector<std::vector<double>>& vs) {
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        double d = 0.0;
        for (std::size_t t = 0; t < vs[i].size(); ++t) d += vs[i][t] * vs[j][t];
        for (std::size_t t = 0; t < vs[i].size(); ++t) vs[i][t] -= d * vs[j][t];
      }
    }
    double n = 0.0;
    for (const double x : vs[i]) n += x * x;
    n = std::sqrt(n);
    if (!(n > 1e-10)) throw Error(ErrorKind::InvalidArgument, "direction collapsed during orthogonalization");
    for (auto& x : vs[i]) x /= n;
  }
}

inline std::vector<double> gaussian_vector(CounterRng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

}  // namespace detail

inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World w;
  w.config = cfg;
  const std::size_t D = cfg.dimension;
  const std::size_t C = cfg.num_classes;
  if (D < C) {
    throw Error(ErrorKind::InvalidArgument,
                "cannot place " + std::to_string(C) + " orthogonal class directions in D=" + std::to_string(D),
                "dimension");
  }

  const CounterRng root(cfg.seed);

  // Taxonomy and class names.
  TaxonomyConfig tax;
  std::vector<std::string> names = cfg.class_names;
  if (cfg.taxonomy_shape.empty()) {
    tax = respiratory_taxonomy_config();
    const auto& builtin = tax.tasks.begin()->second;
    if (names.empty()) {
      if (C == builtin.classes.size()) names = builtin.classes;
      else for (std::size_t c = 0; c < C; ++c) names.push_back("class_" + std::to_string(c + 1));
    }
    for (const auto& g : tax.groups) {
      if (g.options.size() < C) throw Error(ErrorKind::InvalidArgument, "group has fewer options than classes", g.id);
    }
    w.task_id = cfg.task_id.empty() ? std::string(kRespiratoryTaskId) : cfg.task_id;
  } else {
    for (std::size_t k = 0; k < cfg.taxonomy_shape.size(); ++k) {
      TaxonomyConfig::Group g;
      g.id = "group_" + std::to_string(k + 1);
      for (std::size_t m = 0; m < cfg.taxonomy_shape[k]; ++m) {
        g.options.push_back(g.id + " option " + std::to_string(m + 1));
      }
      tax.groups.push_back(std::move(g));
    }
    if (names.empty()) for (std::size_t c = 0; c < C; ++c) names.push_back("class_" + std::to_string(c + 1));
    w.task_id = cfg.task_id.empty() ? std::string("synthetic") : cfg.task_id;
  }

  // Prototypes: the built-in table when its classes are in use, otherwise a
  // seeded assignment of distinct options per class within every group.
  TaskRules rules;
  rules.classes = names;
  const bool builtin_rules = cfg.taxonomy_shape.empty() && !tax.tasks.empty() &&
                             tax.tasks.begin()->second.classes == names;
  if (builtin_rules) {
    rules.prototypes = tax.tasks.begin()->second.prototypes;
  } else {
    auto rng = root.substream("prototypes");
    for (const auto& g : tax.groups) {
      std::vector<std::size_t> perm(g.options.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      for (std::size_t i = 0; i < C; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(perm.size() - i));
        std::swap(perm[i], perm[j]);
        rules.prototypes[names[i]][g.id] = g.options[perm[i]];
      }
    }
  }
  tax.tasks.clear();
  tax.tasks.emplace(w.task_id, rules);
  w.taxonomy_config = tax;

  // Directions.
  std::size_t total_options = 0;
  for (const auto& g : tax.groups) total_options += g.options.size();
  std::vector<std::vector<double>> dirs;
  auto dir_rng = root.substream("directions");
  for (std::size_t i = 0; i < C + total_options; ++i) dirs.push_back(detail::gaussian_vector(dir_rng, D));
  if (D < C + total_options) {
    w.warnings.push_back("D=" + std::to_string(D) + " is below C + total options (" +
                         std::to_string(C + total_options) + "); option vectors are not mutually orthogonal");
    std::vector<std::vector<double>> head(dirs.begin(), dirs.begin() + static_cast<std::ptrdiff_t>(C));
    detail::orthonormalize(head);
    std::copy(head.begin(), head.end(), dirs.begin());
    for (std::size_t i = C; i < dirs.size(); ++i) {
      double n = 0.0;
      for (const double x : dirs[i]) n += x * x;
      n = std::sqrt(n);
      for (auto& x : dirs[i]) x /= n;
    }
  } else {
    detail::orthonormalize(dirs);
  }

  for (std::size_t c = 0; c < C; ++c) {
    w.label_texts.push_back({names[c], std::nullopt, std::nullopt, std::nullopt, EmbeddingVector::normalize(dirs[c])});
  }
  std::vector<std::vector<std::size_t>> option_dir(tax.groups.size());
  std::size_t next = C;
  for (std::size_t k = 0; k < tax.groups.size(); ++k) {
    for (const auto& text : tax.groups[k].options) {
      option_dir[k].push_back(next);
      w.option_texts.push_back({text, std::nullopt, std::nullopt, std::nullopt, EmbeddingVector::normalize(dirs[next])});
      ++next;
    }
  }

  // Per-class prototype mean μ'_y.
  std::vector<std::vector<double>> proto_mean(C, std::vector<double>(D, 0.0));
  for (std::size_t c = 0; c < C; ++c) {
    const auto& proto = rules.prototypes.at(names[c]);
    for (std::size_t k = 0; k < tax.groups.size(); ++k) {
      const auto& opts = tax.groups[k].options;
      const auto pos = static_cast<std::size_t>(std::find(opts.begin(), opts.end(), proto.at(tax.groups[k].id)) - opts.begin());
      const auto& v = dirs[option_dir[k][pos]];
      for (std::size_t t = 0; t < D; ++t) proto_mean[c][t] += v[t];
    }
    for (auto& x : proto_mean[c]) x /= static_cast<double>(tax.groups.size());
  }

  const double s = cfg.class_separation;
  const double q = cfg.descriptor_informativeness;
  const double noise = cfg.noise_scale / std::sqrt(static_cast<double>(D));
  const auto draw = [&](const CounterRng& stream, std::size_t i, std::size_t& label) {
    auto rng = stream.substream(static_cast<std::uint64_t>(i));
    label = static_cast<std::size_t>(rng.below(C));
    std::vector<double> v(D);
    for (std::size_t t = 0; t < D; ++t) {
      v[t] = s * dirs[label][t] + q * proto_mean[label][t] + noise * rng.gaussian();
    }
    double n = 0.0;
    for (const double x : v) n += x * x;
    if (!(n > 0.0)) v[0] = 1.0;  // s = q = σ = 0 leaves no signal at all
    return EmbeddingVector::normalize(v);
  };

  const auto make_split = [&](std::string_view stream_name, std::string_view prefix, Split split, std::size_t n,
                              std::vector<CorpusRecord>& out) {
    const auto stream = root.substream(stream_name);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t y = 0;
      auto e = draw(stream, i, y);
      char id[32];
      std::snprintf(id, sizeof id, "%.*s%05zu", static_cast<int>(prefix.size()), prefix.data(), i);
      out.push_back({id, split, names[y], std::nullopt, std::move(e)});
    }
  };
  make_split("test", "t", Split::Test, cfg.test_size, w.test);
  make_split("valid", "v", Split::Valid, cfg.valid_size, w.valid);
  make_split("corpus", "r", Split::Train, cfg.corpus_size, w.corpus);

  // Reports describe each corpus entry through its own descriptor profile.
  TextEmbeddingTable texts(w.option_texts);
  const auto taxonomy = build_taxonomy(tax, texts);
  for (auto& r : w.corpus) {
    const auto profile = descriptor_profile(r.embedding, taxonomy);
    std::string report = "label=" + *r.label;
    for (std::size_t k = 0; k < taxonomy.size(); ++k) {
      report += "; " + taxonomy.group(k).id + ": " + taxonomy.group(k).option_texts[profile.selections[k]->option];
    }
    r.report = std::move(report);
  }
  return w;
}

// ---------------------------------------------------------------------------
// On-disk layout of an exported world
//
//   world.json  taxonomy.json  labels/  templates/  test/  valid/  corpus/
// Each sub-directory is an embedding-store corpus (manifest.json + data).

struct TaskPaths {
  std::string task_id;
  std::filesystem::path labels;     // manifest of class-name embeddings
  std::filesystem::path templates;  // manifest of descriptor option embeddings
  std::filesystem::path taxonomy;   // taxonomy + rule table config
  std::filesystem::path corpus;     // retrieval corpus manifest
  std::filesystem::path test;       // records to route
  std::optional<std::filesystem::path> valid;

  /// Each referenced path must exist; the first missing one is named.
  void validate() const {
    const auto check = [](const std::filesystem::path& p, const char* what) {
      if (!std::filesystem::exists(p)) throw Error(ErrorKind::Io, std::string(what) + " not found", p.string());
    };
    check(labels, "label manifest");
    check(templates, "template manifest");
    check(taxonomy, "taxonomy file");
    check(corpus, "corpus manifest");
    check(test, "test manifest");
    if (valid) check(*valid, "validation manifest");
  }
};

inline TaskPaths world_paths(const std::filesystem::path& dir, const std::string& task_id) {
  TaskPaths p;
  p.task_id = task_id;
  p.labels = dir / "labels" / "manifest.json";
  p.templates = dir / "templates" / "manifest.json";
  p.taxonomy = dir / "taxonomy.json";
  p.corpus = dir / "corpus" / "manifest.json";
  p.test = dir / "test" / "manifest.json";
  if (std::filesystem::exists(dir / "valid" / "manifest.json")) p.valid = dir / "valid" / "manifest.json";
  return p;
}

/// Task id recorded in an exported world's world.json.
inline std::string world_task_id(const std::filesystem::path& dir) {
  const auto path = dir / "world.json";
  try {
    return nlohmann::json::parse(read_file(path)).at("task_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
}

inline TaskPaths export_world(const World& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto meta = world_config_to_json(w.config);
  meta["task_id"] = w.task_id;
  write_file(dir / "world.json", meta.dump(2) + "\n");
  write_file(dir / "taxonomy.json", taxonomy_config_to_json(w.taxonomy_config).dump(2) + "\n");
  save_corpus(w.label_texts, dir / "labels");
  save_corpus(w.option_texts, dir / "templates");
  save_corpus(w.test, dir / "test");
  if (!w.valid.empty()) save_corpus(w.valid, dir / "valid");
  save_corpus(w.corpus, dir / "corpus");
  return world_paths(dir, w.task_id);
}

// ---------------------------------------------------------------------------
// Task assembly

inline TaskAssets build_task_assets(const std::string& task_id, std::span<const CorpusRecord> label_texts,
                                    std::span<const CorpusRecord> option_texts, const TaxonomyConfig& tax,
                                    std::span<const CorpusRecord> corpus) {
  auto it = tax.tasks.find(task_id);
  if (it == tax.tasks.end()) throw Error(ErrorKind::RuleCoverageGap, "taxonomy file has no rules for task", task_id);
  const TextEmbeddingTable labels(label_texts);
  const TextEmbeddingTable options(option_texts);
  auto label_set = LabelSet::from_text_table(task_id, it->second.classes, labels);
  auto taxonomy = build_taxonomy(tax, options);
  auto rules = build_rule_table(tax, task_id, taxonomy);
  return TaskAssets(std::move(label_set), std::move(taxonomy), std::move(rules),
                    RetrievalIndex::build(to_retrieval_entries(corpus)));
}

/// In-memory assets of a generated world, without a disk round trip.
inline TaskAssets world_assets(const World& w) {
  return build_task_assets(w.task_id, w.label_texts, w.option_texts, w.taxonomy_config, w.corpus);
}

struct LoadedTask {
  TaskAssets assets;
  std::vector<AudioRecord> test;
  std::vector<AudioRecord> valid;
};

inline LoadedTask load_task(const TaskPaths& paths) {
  paths.validate();
  const auto labels = load_corpus(paths.labels);
  const auto options = load_corpus(paths.templates);
  const auto corpus = load_corpus(paths.corpus);
  const auto tax = load_taxonomy_config(paths.taxonomy);
  auto assets = build_task_assets(paths.task_id, labels, options, tax, corpus);
  const auto test = load_corpus(paths.test);
  std::vector<AudioRecord> valid;
  if (paths.valid) valid = to_audio_records(load_corpus(*paths.valid));
  LoadedTask out{std::move(assets), to_audio_records(test), std::move(valid)};
  for (const auto* split : {&out.test, &out.valid}) {
    for (const auto& r : *split) {
      if (r.embedding.dimension() != out.assets.dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "record dimension differs from task assets", r.id);
      }
      if (r.label && !out.assets.labels.index_of(*r.label)) {
        throw Error(ErrorKind::UnknownLabel, "label '" + *r.label + "' not in the task's class set", r.id);
      }
    }
  }
  return out;
}

inline std::vector<AudioRecord> world_records(std::span<const CorpusRecord> split) { return to_audio_records(split); }

}  // namespace triage
