#pragma once

// Text tables, JSON and CSV for evaluation reports and sweeps.

#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "triage/evaluation.hpp"
#include "triage/outcome_io.hpp"

namespace triage {

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v, const char* format = "%.4f") {
  return v ? fmt(format, *v) : std::string("-");
}

inline ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

/// Left-aligned first column, right-aligned rest.
inline std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string pad(width[c] - cells[c].size(), ' ');
      if (c > 0) out += "  ";
      out += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (const auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

inline std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += ',';
      out += cells[c] == "-" ? std::string() : cells[c];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tier-stratified report

inline std::vector<std::vector<std::string>> stratified_rows(const TierStratifiedReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& b : r.buckets) {
    rows.push_back({std::string(to_string(b.tier)), std::to_string(b.count), detail::fmt("%.1f", b.share_pct),
                    detail::fmt_opt(b.tier_l_auroc), detail::fmt_opt(b.adaptive_auroc),
                    detail::fmt_opt(b.relative_gain_pct, "%+.1f")});
  }
  return rows;
}

inline const std::vector<std::string> kStratifiedHeader = {"Stop tier", "n", "Share (%)", "Tier-L AUROC",
                                                           "Adaptive AUROC", "Rel. gain (%)"};

inline std::string render_stratified_text(const TierStratifiedReport& r) {
  return detail::render_table(kStratifiedHeader, stratified_rows(r));
}

inline ojson stratified_to_json(const TierStratifiedReport& r) {
  ojson rows = ojson::array();
  for (const auto& b : r.buckets) {
    rows.push_back({{"tier", std::string(to_string(b.tier))},
                    {"count", b.count},
                    {"share_pct", b.share_pct},
                    {"tier_l_auroc", detail::opt_json(b.tier_l_auroc)},
                    {"adaptive_auroc", detail::opt_json(b.adaptive_auroc)},
                    {"relative_gain_pct", detail::opt_json(b.relative_gain_pct)}});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Evaluation report

inline ojson eval_to_json(const EvalReport& r, const RunSummary& summary) {
  ojson per_class = ojson::object();
  for (std::size_t c = 0; c < r.per_class_auroc.size(); ++c) {
    per_class[summary.class_names.at(c)] = detail::opt_json(r.per_class_auroc[c]);
  }
  return {{"task_id", r.task_id},
          {"n", r.n},
          {"averaging", "macro one-vs-rest"},
          {"pooling", "within-tier fractional rank"},
          {"auroc", r.auroc},
          {"tier_l_auroc", detail::opt_json(r.tier_l_auroc)},
          {"per_class_auroc", std::move(per_class)},
          {"stratified", stratified_to_json(r.stratified)},
          {"usage",
           {{"frac_l", r.stats.frac_l},
            {"frac_m", r.stats.frac_m},
            {"frac_h", r.stats.frac_h},
            {"alpha_m", r.stats.alpha_m},
            {"alpha_h", r.stats.alpha_h},
            {"expected_cost", r.stats.expected_cost}}},
          {"config", summary_to_json(summary).at("summary").at("config")},
          {"backend", summary.backend}};
}

inline std::string render_eval_text(const EvalReport& r, const RunSummary& summary) {
  std::string out;
  out += "task " + r.task_id + "  n=" + std::to_string(r.n) + "  backend " + summary.backend + "\n";
  out += "thresholds tau_L=" + detail::fmt("%.4g", summary.config.tau_l) +
         " tau_M=" + detail::fmt("%.4g", summary.config.tau_m) +
         "  depth=" + std::to_string(summary.config.tier_h.depth) +
         " budget=" + std::to_string(summary.config.tier_h.budget) + "\n";
  out += "AUROC (macro one-vs-rest, rank-pooled across tiers): " + detail::fmt("%.4f", r.auroc) + "\n";
  out += "Tier-L AUROC on the same samples: " + detail::fmt_opt(r.tier_l_auroc) + "\n";
  if (r.per_class_auroc.size() > 2) {
    for (std::size_t c = 0; c < r.per_class_auroc.size(); ++c) {
      out += "  " + summary.class_names.at(c) + ": " + detail::fmt_opt(r.per_class_auroc[c]) + "\n";
    }
  }
  out += "usage L/M/H: " + detail::fmt("%.1f", 100 * r.stats.frac_l) + "% / " +
         detail::fmt("%.1f", 100 * r.stats.frac_m) + "% / " + detail::fmt("%.1f", 100 * r.stats.frac_h) +
         "%   expected cost " + detail::fmt("%.4f", r.stats.expected_cost) + " (T_L=" +
         detail::fmt("%g", summary.cost.t_l) + " T_M=" + detail::fmt("%g", summary.cost.t_m) +
         " T_H=" + detail::fmt("%g", summary.cost.t_h) + ")\n\n";
  out += render_stratified_text(r.stratified);
  return out;
}

inline std::string render_eval_csv(const EvalReport& r) {
  return detail::render_csv({"tier", "n", "share_pct", "tier_l_auroc", "adaptive_auroc", "relative_gain_pct"},
                            stratified_rows(r.stratified));
}

// ---------------------------------------------------------------------------
// Sweeps and ablations. Each has a row builder shared by text and CSV output.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  ojson json;

  std::string text() const { return detail::render_table(header, rows); }
  std::string csv() const { return detail::render_csv(header, rows); }
};

inline Table tau_m_table(const SweepResult& r) {
  Table t;
  t.header = {"tau_M", "finalized", "AUROC", "%T-L", "%T-M", "%T-H", "selected"};
  t.json = {{"selected", r.selected}, {"rows", ojson::array()}};
  for (const auto& row : r.rows) {
    t.rows.push_back({detail::fmt("%.4g", row.tau), std::to_string(row.finalized), detail::fmt_opt(row.metric),
                      detail::fmt("%.1f", row.pct_l), detail::fmt("%.1f", row.pct_m), detail::fmt("%.1f", row.pct_h),
                      row.tau == r.selected ? "*" : ""});
    t.json["rows"].push_back({{"tau_m", row.tau},
                              {"finalized", row.finalized},
                              {"auroc", detail::opt_json(row.metric)},
                              {"pct_l", row.pct_l},
                              {"pct_m", row.pct_m},
                              {"pct_h", row.pct_h}});
  }
  return t;
}

inline Table tau_l_table(std::span<const TauSweepRow> rows, double tau_m) {
  Table t;
  t.header = {"tau_L", "AUROC", "%T-L", "%T-M", "%T-H", "cost"};
  t.json = {{"tau_m", tau_m}, {"rows", ojson::array()}};
  for (const auto& r : rows) {
    t.rows.push_back({detail::fmt("%.4g", r.tau_l), detail::fmt("%.4f", r.auroc), detail::fmt("%.1f", r.pct_l),
                      detail::fmt("%.1f", r.pct_m), detail::fmt("%.1f", r.pct_h), detail::fmt("%.4f", r.expected_cost)});
    t.json["rows"].push_back({{"tau_l", r.tau_l},
                              {"auroc", r.auroc},
                              {"pct_l", r.pct_l},
                              {"pct_m", r.pct_m},
                              {"pct_h", r.pct_h},
                              {"expected_cost", r.expected_cost}});
  }
  return t;
}

inline Table mask_table(std::span<const MaskAblationRow> rows) {
  Table t;
  t.header = {"mask rate", "runs", "Tier-M AUROC mean", "sd"};
  t.json = ojson::array();
  for (const auto& r : rows) {
    t.rows.push_back({detail::fmt("%.0f%%", 100 * r.rate), std::to_string(r.per_seed.size()),
                      detail::fmt("%.4f", r.mean), detail::fmt("%.4f", r.sd)});
    t.json.push_back({{"rate", r.rate}, {"mean", r.mean}, {"sd", r.sd}, {"per_seed", r.per_seed}});
  }
  return t;
}

inline Table depth_table(std::span<const DepthAblationRow> rows) {
  Table t;
  t.header = {"depth", "Tier-H AUROC", "fallbacks"};
  t.json = ojson::array();
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.depth), detail::fmt("%.4f", r.auroc), std::to_string(r.fallbacks)});
    t.json.push_back({{"depth", r.depth}, {"auroc", r.auroc}, {"fallbacks", r.fallbacks}});
  }
  return t;
}

}  // namespace triage
