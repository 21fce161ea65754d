#pragma once

// Routing run artifact: one JSON object per routed sample followed by a
// trailing {"summary": {...}} object carrying BatchStats. Wall-clock data
// goes to separate sidecar files so the artifact itself is reproducible.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "triage/router.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

struct RunSummary {
  std::string task_id;
  std::vector<std::string> class_names;
  BatchStats stats;
  CostModel cost;
  RoutingConfig config;
  std::string backend;
  std::vector<SampleError> errors;
};

namespace detail {

inline std::vector<double> as_doubles(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

}  // namespace detail

inline ojson outcome_to_json(const RoutingOutcome& o, std::span<const std::string> class_names) {
  ojson j;
  j["sample_id"] = o.sample_id;
  if (o.label) j["label"] = *o.label;
  j["final_tier"] = std::string(to_string(o.final_tier));
  j["prediction"] = class_names[o.prediction];
  j["prediction_index"] = o.prediction;
  j["c_L"] = o.c_L;
  if (o.c_M) j["c_M"] = *o.c_M;
  j["scores"] = o.final_scores.scores;
  j["tier_l"] = {{"scores", o.tier_l.scores.scores},
                 {"prediction", o.tier_l.prediction},
                 {"confidence", o.tier_l.confidence}};
  if (o.tier_m) {
    ojson sel = ojson::array();
    for (const auto& s : o.tier_m->profile.selections) {
      if (s) sel.push_back({{"option", s->option}, {"similarity", s->similarity}});
      else sel.push_back(nullptr);
    }
    j["tier_m"] = {{"selections", std::move(sel)},
                   {"rule_scores", o.tier_m->rule_scores.scores},
                   {"prediction", o.tier_m->prediction},
                   {"confidence", o.tier_m->confidence}};
  }
  if (o.tier_h) {
    ojson nbrs = ojson::array();
    for (const auto& n : o.tier_h->neighbors) {
      nbrs.push_back({{"id", n.entry_id}, {"similarity", n.similarity}, {"rank", n.rank}});
    }
    ojson reply = {{"raw_text", o.tier_h->reply.raw_text}};
    if (o.tier_h->reply.parsed_result) reply["result"] = *o.tier_h->reply.parsed_result;
    if (o.tier_h->reply.justification) reply["justification"] = *o.tier_h->reply.justification;
    j["tier_h"] = {{"neighbors", std::move(nbrs)},
                   {"reply", std::move(reply)},
                   {"prediction", o.tier_h->prediction},
                   {"scores", o.tier_h->score_vector.scores},
                   {"fallback_used", o.tier_h->fallback_used}};
  }
  return j;
}

inline RoutingOutcome outcome_from_json(const nlohmann::json& j, const std::string& task_id) {
  RoutingOutcome o;
  o.sample_id = j.at("sample_id").get<std::string>();
  if (j.contains("label")) o.label = j.at("label").get<std::string>();
  o.final_tier = parse_tier(j.at("final_tier").get<std::string>());
  o.prediction = j.at("prediction_index").get<std::size_t>();
  o.c_L = j.at("c_L").get<double>();
  if (j.contains("c_M")) o.c_M = j.at("c_M").get<double>();
  o.final_scores = {task_id, detail::as_doubles(j.at("scores"))};
  const auto& tl = j.at("tier_l");
  o.tier_l = {{task_id, detail::as_doubles(tl.at("scores"))}, tl.at("prediction").get<std::size_t>(),
              tl.at("confidence").get<double>()};
  if (j.contains("tier_m")) {
    const auto& tm = j.at("tier_m");
    TierMResult m;
    for (const auto& s : tm.at("selections")) {
      if (s.is_null()) {
        m.profile.selections.emplace_back(std::nullopt);
        m.profile.mask.push_back(true);
      } else {
        m.profile.selections.emplace_back(
            DescriptorSelection{s.at("option").get<std::size_t>(), s.at("similarity").get<double>()});
        m.profile.mask.push_back(false);
      }
    }
    m.rule_scores = {task_id, detail::as_doubles(tm.at("rule_scores"))};
    m.prediction = tm.at("prediction").get<std::size_t>();
    m.confidence = tm.at("confidence").get<double>();
    o.tier_m = std::move(m);
  }
  if (j.contains("tier_h")) {
    const auto& th = j.at("tier_h");
    TierHResult h;
    for (const auto& n : th.at("neighbors")) {
      h.neighbors.push_back({n.at("id").get<std::string>(), n.at("similarity").get<double>(),
                             n.at("rank").get<std::size_t>()});
    }
    const auto& reply = th.at("reply");
    h.reply.raw_text = reply.at("raw_text").get<std::string>();
    if (reply.contains("result")) h.reply.parsed_result = reply.at("result").get<std::string>();
    if (reply.contains("justification")) h.reply.justification = reply.at("justification").get<std::string>();
    h.prediction = th.at("prediction").get<std::size_t>();
    h.score_vector = {task_id, detail::as_doubles(th.at("scores"))};
    h.fallback_used = th.at("fallback_used").get<bool>();
    o.tier_h = std::move(h);
  }
  return o;
}

inline ojson summary_to_json(const RunSummary& s) {
  ojson mask = ojson::array();
  for (const bool b : s.config.mask) mask.push_back(b);
  ojson errors = ojson::array();
  for (const auto& e : s.errors) {
    errors.push_back({{"sample_id", e.sample_id}, {"kind", std::string(to_string(e.kind))}, {"message", e.message}});
  }
  const auto& st = s.stats;
  return {{"summary",
           {{"task_id", s.task_id},
            {"class_names", s.class_names},
            {"n", st.n},
            {"count_l", st.count_l},
            {"count_m", st.count_m},
            {"count_h", st.count_h},
            {"frac_l", st.frac_l},
            {"frac_m", st.frac_m},
            {"frac_h", st.frac_h},
            {"alpha_m", st.alpha_m},
            {"alpha_h", st.alpha_h},
            {"expected_cost", st.expected_cost},
            {"cost_model", {{"t_l", s.cost.t_l}, {"t_m", s.cost.t_m}, {"t_h", s.cost.t_h}}},
            {"config",
             {{"tau_l", s.config.tau_l},
              {"tau_m", s.config.tau_m},
              {"depth", s.config.tier_h.depth},
              {"budget", s.config.tier_h.budget},
              {"prompt_mode", std::string(to_string(s.config.tier_h.prompt_mode))},
              {"mask", std::move(mask)}}},
            {"backend", s.backend},
            {"errors", std::move(errors)}}}};
}

inline RunSummary summary_from_json(const nlohmann::json& wrapper) {
  const auto& j = wrapper.at("summary");
  RunSummary s;
  s.task_id = j.at("task_id").get<std::string>();
  s.class_names = j.at("class_names").get<std::vector<std::string>>();
  auto& st = s.stats;
  st.n = j.at("n").get<std::size_t>();
  st.count_l = j.at("count_l").get<std::size_t>();
  st.count_m = j.at("count_m").get<std::size_t>();
  st.count_h = j.at("count_h").get<std::size_t>();
  st.frac_l = j.at("frac_l").get<double>();
  st.frac_m = j.at("frac_m").get<double>();
  st.frac_h = j.at("frac_h").get<double>();
  st.alpha_m = j.at("alpha_m").get<double>();
  st.alpha_h = j.at("alpha_h").get<double>();
  st.expected_cost = j.at("expected_cost").get<double>();
  const auto& c = j.at("cost_model");
  s.cost = {c.at("t_l").get<double>(), c.at("t_m").get<double>(), c.at("t_h").get<double>()};
  const auto& cfg = j.at("config");
  s.config.tau_l = cfg.at("tau_l").get<double>();
  s.config.tau_m = cfg.at("tau_m").get<double>();
  s.config.tier_h.depth = cfg.at("depth").get<std::size_t>();
  s.config.tier_h.budget = cfg.at("budget").get<int>();
  s.config.tier_h.prompt_mode = parse_prompt_mode(cfg.at("prompt_mode").get<std::string>());
  s.config.mask = cfg.at("mask").get<std::vector<bool>>();
  s.backend = j.at("backend").get<std::string>();
  for (const auto& e : j.at("errors")) {
    s.errors.push_back({0, e.at("sample_id").get<std::string>(), ErrorKind::InvalidArgument,
                        e.at("message").get<std::string>()});
  }
  return s;
}

inline std::string render_outcomes_jsonl(std::span<const RoutingOutcome> outcomes, const RunSummary& summary) {
  std::string out;
  for (const auto& o : outcomes) {
    out += outcome_to_json(o, summary.class_names).dump();
    out += '\n';
  }
  out += summary_to_json(summary).dump();
  out += '\n';
  return out;
}

struct RunArtifact {
  std::vector<RoutingOutcome> outcomes;
  RunSummary summary;
};

inline RunArtifact read_outcomes_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<nlohmann::json> rows;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      rows.push_back(nlohmann::json::parse(line));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
  if (rows.empty() || !rows.back().contains("summary")) {
    throw Error(ErrorKind::Parse, "outcome file lacks a trailing summary object", path.string());
  }
  RunArtifact art;
  try {
    art.summary = summary_from_json(rows.back());
    rows.pop_back();
    for (const auto& r : rows) art.outcomes.push_back(outcome_from_json(r, art.summary.task_id));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), path.string());
  }
  return art;
}

/// Sidecar: one line per backend call.
inline std::string render_transcript_jsonl(std::span<const RoutingOutcome> outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    if (!o.tier_h) continue;
    for (const auto& call : o.tier_h->calls) {
      ojson j = {{"sample_id", o.sample_id},
                 {"prompt_sha256", call.prompt_sha256},
                 {"raw_text", call.raw_text},
                 {"parsed_result", call.parsed_result ? ojson(*call.parsed_result) : ojson(nullptr)},
                 {"latency_ms", call.latency_ms}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

/// Sidecar: per-sample wall clock.
inline std::string render_timing_jsonl(std::span<const RoutingOutcome> outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    out += ojson{{"sample_id", o.sample_id}, {"final_tier", std::string(to_string(o.final_tier))},
                 {"latency_ms", o.latency_ms}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace triage
