#pragma once

// Tier-H prompt layout and reply contract.
//
// The model sees the retrieved reports as "- " bullets, optionally the
// descriptor profile and Tier-L scores, the allowed classes, and an
// instruction to answer with {"result": ..., "justification": ...} only.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "triage/error.hpp"
#include "triage/similarity.hpp"

namespace triage {

enum class PromptMode {
  WithEvidence,  // reports + descriptor profile + Tier-L scores
  ReportsOnly,   // reports only
};

constexpr std::string_view to_string(PromptMode mode) noexcept {
  return mode == PromptMode::ReportsOnly ? "reports_only" : "with_evidence";
}

inline PromptMode parse_prompt_mode(std::string_view text) {
  if (text == "reports_only") return PromptMode::ReportsOnly;
  if (text == "with_evidence") return PromptMode::WithEvidence;
  throw Error(ErrorKind::Parse, "unknown prompt mode '" + std::string(text) + "'");
}

struct PromptContext {
  std::vector<std::string> reports;  // neighbor rank order
  std::vector<std::string> class_names;
  std::string descriptor_summary;
  ScoreVector tier_l_scores;
};

inline constexpr std::string_view kPromptPreamble =
    "You are a highly experienced cardiopulmonary doctor. Given the following reports, select the most "
    "likely/probable diagnosis from the given classes below and write very few words justification.";
inline constexpr std::string_view kReplyInstruction =
    "Your output should be JSON of the following structure:\n"
    "{\"result\": ..., \"justification\": ...}. Do not provide any other explanation.";

namespace detail {

inline std::string single_line(std::string_view text) {
  std::string out(text);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

/// End (exclusive) of the brace-balanced object starting at `open`, honoring
/// JSON string escapes; npos if unbalanced.
inline std::size_t match_object(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace detail

/// Byte-deterministic in `ctx`.
inline std::string build_prompt(const PromptContext& ctx, PromptMode mode = PromptMode::WithEvidence) {
  if (ctx.reports.empty()) throw Error(ErrorKind::InvalidArgument, "prompt needs at least one report");
  std::string p(kPromptPreamble);
  p += "\n\nReports:\n";
  for (const auto& r : ctx.reports) p += "- " + detail::single_line(r) + "\n";

  if (mode == PromptMode::WithEvidence) {
    if (!ctx.descriptor_summary.empty()) {
      p += "\nDescriptor profile:\n" + ctx.descriptor_summary;
      if (ctx.descriptor_summary.back() != '\n') p += '\n';
    }
    if (!ctx.tier_l_scores.scores.empty()) {
      p += "\nLabel similarity scores:\n";
      for (std::size_t i = 0; i < ctx.tier_l_scores.scores.size() && i < ctx.class_names.size(); ++i) {
        p += ctx.class_names[i] + ": " + detail::fixed4(ctx.tier_l_scores.scores[i]) + "\n";
      }
    }
  }

  p += "\nClasses: ";
  for (std::size_t i = 0; i < ctx.class_names.size(); ++i) {
    if (i) p += ", ";
    p += ctx.class_names[i];
  }
  p += "\n\n";
  p += kReplyInstruction;
  p += "\n";
  return p;
}

struct LlmReply {
  std::string raw_text;
  std::optional<std::string> parsed_result;  // canonical class name
  std::optional<std::string> justification;
};

/// Never throws. Takes the first JSON object in the text and matches its
/// "result" against `class_names` case-insensitively after trimming.
inline LlmReply parse_reply(std::string_view raw_text, std::span<const std::string> class_names) {
  LlmReply reply{std::string(raw_text), std::nullopt, std::nullopt};
  for (std::size_t open = raw_text.find('{'); open != std::string_view::npos;
       open = raw_text.find('{', open + 1)) {
    const std::size_t end = detail::match_object(raw_text, open);
    if (end == std::string_view::npos) break;
    auto obj = nlohmann::json::parse(raw_text.substr(open, end - open), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    if (auto it = obj.find("justification"); it != obj.end() && it->is_string()) {
      reply.justification = it->get<std::string>();
    }
    if (auto it = obj.find("result"); it != obj.end() && it->is_string()) {
      const std::string wanted = detail::trim(it->get<std::string>());
      for (const auto& name : class_names) {
        if (detail::iequals(wanted, detail::trim(name))) {
          reply.parsed_result = name;
          break;
        }
      }
    }
    break;
  }
  return reply;
}

}  // namespace triage
