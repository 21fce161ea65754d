#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "triage/error.hpp"

namespace triage {

struct LlmRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 256;
  int calls_budget = 1;
};

/// Thrown by backends for failures worth retrying (transport errors, 5xx).
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Returns the model's text. Throws TransientBackendError for retryable
  /// failures and Error(BackendError) for permanent ones. Must be safe to
  /// call concurrently.
  virtual std::string complete(const LlmRequest& request) const = 0;

  /// Cheap liveness check used by /healthz.
  virtual bool probe() const { return true; }

  virtual std::string describe() const = 0;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

/// At most 1 + max_retries attempts; transient failures back off
/// exponentially, exhaustion raises BackendUnavailable.
inline std::string call_backend(const LlmRequest& request, const LlmBackend& backend,
                                const RetryPolicy& retry = {}) {
  std::string last_error;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      const double scale = std::pow(retry.multiplier, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration_cast<std::chrono::milliseconds>(
          retry.initial_backoff * scale));
    }
    try {
      return backend.complete(request);
    } catch (const TransientBackendError& e) {
      last_error = e.what();
    }
  }
  throw Error(ErrorKind::BackendUnavailable,
              "gave up after " + std::to_string(retry.max_retries + 1) + " attempts: " + last_error,
              backend.describe());
}

// ---------------------------------------------------------------------------
// Deterministic mock. It reads the "label=<class>" tokens that synthetic
// reports carry, so no language understanding is involved.

class MockBackend final : public LlmBackend {
 public:
  enum class Mode { Majority, Fixed, Garbage, EchoFirst };

  explicit MockBackend(Mode mode, std::string fixed_class = {})
      : mode_(mode), fixed_class_(std::move(fixed_class)) {}

  /// "majority", "fixed:<class>", "garbage" or "echo_first".
  static MockBackend parse(std::string_view spec) {
    if (spec == "majority") return MockBackend(Mode::Majority);
    if (spec == "garbage") return MockBackend(Mode::Garbage);
    if (spec == "echo_first") return MockBackend(Mode::EchoFirst);
    if (spec.starts_with("fixed:") && spec.size() > 6) return MockBackend(Mode::Fixed, std::string(spec.substr(6)));
    throw Error(ErrorKind::InvalidArgument, "unknown mock mode '" + std::string(spec) + "'");
  }

  std::string complete(const LlmRequest& request) const override {
    switch (mode_) {
      case Mode::Garbage:
        return "I am not sure, the recording could be several things.";
      case Mode::Fixed:
        return reply(fixed_class_, "fixed");
      case Mode::EchoFirst: {
        const auto labels = report_labels(request.prompt);
        return reply(labels.empty() ? std::string("unknown") : labels.front(), "echo_first");
      }
      case Mode::Majority: {
        const auto labels = report_labels(request.prompt);
        return reply(labels.empty() ? std::string("unknown") : majority(labels), "majority");
      }
    }
    return {};
  }

  std::string describe() const override {
    switch (mode_) {
      case Mode::Majority: return "mock:majority";
      case Mode::Fixed: return "mock:fixed:" + fixed_class_;
      case Mode::Garbage: return "mock:garbage";
      case Mode::EchoFirst: return "mock:echo_first";
    }
    return "mock";
  }

  /// Labels of the "- " bullets under "Reports:", in bullet order.
  static std::vector<std::string> report_labels(std::string_view prompt) {
    std::vector<std::string> labels;
    auto pos = prompt.find("Reports:\n");
    if (pos == std::string_view::npos) return labels;
    pos += 9;
    while (pos < prompt.size() && prompt.substr(pos, 2) == "- ") {
      auto eol = prompt.find('\n', pos);
      if (eol == std::string_view::npos) eol = prompt.size();
      const auto line = prompt.substr(pos, eol - pos);
      if (auto t = line.find("label="); t != std::string_view::npos) {
        auto start = t + 6;
        auto stop = line.find_first_of(";\n", start);
        std::string_view value = line.substr(start, stop == std::string_view::npos ? line.size() - start : stop - start);
        while (!value.empty() && value.back() == ' ') value.remove_suffix(1);
        if (!value.empty()) labels.emplace_back(value);
      }
      pos = eol + 1;
    }
    return labels;
  }

  /// Most frequent label; ties go to the label seen first (nearest report).
  static std::string majority(const std::vector<std::string>& labels) {
    std::map<std::string, int> counts;
    for (const auto& l : labels) ++counts[l];
    std::string best;
    int best_count = 0;
    for (const auto& l : labels) {
      if (counts[l] > best_count) {
        best = l;
        best_count = counts[l];
      }
    }
    return best;
  }

 private:
  static std::string reply(const std::string& result, const std::string& justification) {
    nlohmann::ordered_json j = {{"result", result}, {"justification", justification}};
    return j.dump();
  }

  Mode mode_;
  std::string fixed_class_;
};

}  // namespace triage
