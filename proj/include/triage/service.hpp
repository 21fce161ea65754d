#pragma once

// HTTP front end over route_one. Assets and config are fixed at startup; the
// only mutable state is the tier tally and the request log.

#include <atomic>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "triage/outcome_io.hpp"
#include "triage/router.hpp"

namespace triage {

struct HttpResponse {
  int status = 200;
  std::string body;
};

struct ServiceLogEntry {
  std::string sample_id;
  Tier final_tier = Tier::L;
};

class ClassificationService {
 public:
  ClassificationService(const TaskAssets& assets, std::span<const AudioRecord> records, RoutingConfig cfg,
                        const LlmBackend& backend, CostModel cost = {})
      : assets_(assets), cfg_(std::move(cfg)), backend_(backend), cost_(cost) {
    cfg_.validate();
    for (const auto& r : records) records_.emplace(r.id, &r);
  }

  /// Body: {"embedding": [...]} or {"record_id": "..."}; optional "sample_id".
  HttpResponse handle_classify(const std::string& body) {
    const auto req = nlohmann::json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error(400, "Parse", "body is not a JSON object");

    std::string sample_id;
    std::optional<EmbeddingVector> owned;
    const EmbeddingVector* audio = nullptr;
    std::optional<std::string> label;
    if (req.contains("record_id")) {
      if (!req["record_id"].is_string()) return error(400, "Parse", "record_id must be a string");
      const auto id = req["record_id"].get<std::string>();
      auto it = records_.find(id);
      if (it == records_.end()) return error(400, "UnknownRecord", "record '" + id + "' is not in the loaded split");
      sample_id = id;
      audio = &it->second->embedding;
      label = it->second->label;
    } else if (req.contains("embedding")) {
      const auto& e = req["embedding"];
      if (!e.is_array() || !std::all_of(e.begin(), e.end(), [](const auto& x) { return x.is_number(); })) {
        return error(400, "Parse", "embedding must be an array of numbers");
      }
      if (e.size() != assets_.dimension()) {
        ojson j = {{"error", "DimensionMismatch"}, {"expected", assets_.dimension()}, {"received", e.size()}};
        return {400, j.dump()};
      }
      try {
        owned = EmbeddingVector::normalize(e.get<std::vector<double>>(), "embedding");
      } catch (const Error& err) {
        return error(400, std::string(to_string(err.kind())), err.message());
      }
      audio = &*owned;
      sample_id = req.value("sample_id", std::string());
    } else {
      return error(400, "Parse", "body needs 'embedding' or 'record_id'");
    }

    RoutingOutcome o;
    try {
      o = route_one(sample_id, *audio, assets_, cfg_, backend_);
    } catch (const Error& err) {
      const bool unavailable = err.kind() == ErrorKind::BackendUnavailable || err.kind() == ErrorKind::BackendError;
      return error(unavailable ? 503 : 500, std::string(to_string(err.kind())), err.message());
    }
    o.label = label;
    record(o);

    ojson j;
    if (!sample_id.empty()) j["sample_id"] = sample_id;
    j["prediction"] = assets_.labels.class_names()[o.prediction];
    j["prediction_index"] = o.prediction;
    j["final_tier"] = std::string(to_string(o.final_tier));
    j["c_L"] = o.c_L;
    if (o.c_M) j["c_M"] = *o.c_M;
    j["scores"] = o.final_scores.scores;
    j["fallback_used"] = o.tier_h ? o.tier_h->fallback_used : false;
    j["latency_ms"] = o.latency_ms;
    return {200, j.dump()};
  }

  BatchStats stats() const {
    std::lock_guard lock(log_mutex_);
    return compute_stats(count_l_.load(), count_m_.load(), count_h_.load(), cost_);
  }

  HttpResponse handle_stats() const {
    const auto s = stats();
    ojson j = {{"n", s.n},
               {"count_l", s.count_l},
               {"count_m", s.count_m},
               {"count_h", s.count_h},
               {"frac_l", s.frac_l},
               {"frac_m", s.frac_m},
               {"frac_h", s.frac_h},
               {"alpha_m", s.alpha_m},
               {"alpha_h", s.alpha_h},
               {"expected_cost", s.expected_cost},
               {"cost_model", {{"t_l", cost_.t_l}, {"t_m", cost_.t_m}, {"t_h", cost_.t_h}}}};
    return {200, j.dump()};
  }

  HttpResponse handle_healthz() const {
    const bool ok = backend_.probe();
    ojson j = {{"status", ok ? "ok" : "backend unavailable"}, {"task_id", assets_.labels.task_id()}};
    return {ok ? 200 : 503, j.dump()};
  }

  std::vector<ServiceLogEntry> log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
  }

  /// Registers /classify, /stats and /healthz on `server`.
  void mount(httplib::Server& server) {
    const auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Post("/classify", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, handle_classify(req.body));
    });
    server.Get("/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_stats()); });
    server.Get("/healthz",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_healthz()); });
  }

 private:
  static HttpResponse error(int status, const std::string& kind, const std::string& message) {
    return {status, ojson{{"error", kind}, {"message", message}}.dump()};
  }

  void record(const RoutingOutcome& o) {
    std::lock_guard lock(log_mutex_);
    switch (o.final_tier) {
      case Tier::L: ++count_l_; break;
      case Tier::M: ++count_m_; break;
      case Tier::H: ++count_h_; break;
    }
    log_.push_back({o.sample_id, o.final_tier});
  }

  const TaskAssets& assets_;
  RoutingConfig cfg_;
  const LlmBackend& backend_;
  CostModel cost_;
  std::unordered_map<std::string, const AudioRecord*> records_;

  std::atomic<std::size_t> count_l_{0};
  std::atomic<std::size_t> count_m_{0};
  std::atomic<std::size_t> count_h_{0};
  mutable std::mutex log_mutex_;
  std::vector<ServiceLogEntry> log_;
};

}  // namespace triage
