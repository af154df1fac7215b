// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Rendering run reports (Markdown, CSV, JSON), relative-improvement lines,
// and best-checkpoint selection over a data-scale sweep.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "segbench/errors.hpp"
#include "segbench/image.hpp"
#include "segbench/metrics.hpp"
#include "segbench/runner.hpp"

namespace segbench {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(v, 2));
  return buf;
}

struct Improvement {
  double absolute = 0.0;
  double relative = 0.0;  // fraction of the old value
};

inline Improvement relative_improvement(double old_value, double new_value) {
  if (old_value <= 0.0) throw DomainError("relative improvement needs a positive baseline");
  return {new_value - old_value, (new_value - old_value) / old_value};
}

/// "WMDC 0.78 -> 0.92: +0.14 absolute, +17.9% relative".
inline std::string improvement_line(double old_value, double new_value) {
  const Improvement imp = relative_improvement(old_value, new_value);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "WMDC %s -> %s: %s%s absolute, %s%.1f%% relative",
                fixed2(old_value).c_str(), fixed2(new_value).c_str(),
                imp.absolute >= 0 ? "+" : "-", fixed2(std::abs(imp.absolute)).c_str(),
                imp.relative >= 0 ? "+" : "-",
                round_half_up(std::abs(imp.relative) * 100.0, 1));
  return buf;
}

struct RenderOptions {
  /// Baseline WMDC to print a relative-improvement line against, compared
  /// at the largest prompt count of the report.
  std::optional<double> baseline_wmdc;
  std::string baseline_label = "baseline";
};

/// Throws if a stored aggregate disagrees with the one recomputed from the
/// class rows of the same report.
inline void check_self_consistency(const RunReport& r) {
  for (const auto& [k, stored] : r.aggregates) {
    const AggregateScores fresh = r.recompute_aggregate(k, r.config.class_filter);
    if (std::abs(fresh.wmdc - stored.wmdc) > 1e-12 || std::abs(fresh.mdc - stored.mdc) > 1e-12 ||
        fresh.total_examples != stored.total_examples || fresh.class_count != stored.class_count) {
      throw Error("report aggregate at k=" + std::to_string(k) +
                  " does not match its class rows");
    }
  }
}

inline std::string render_markdown(const RunReport& r, const RenderOptions& options = {}) {
  check_self_consistency(r);
  const auto& ks = r.config.prompt_counts;
  std::string out = "| Class (n) |";
  std::string rule = "|---|";
  for (auto k : ks) {
    out += " " + std::to_string(k) + " |";
    rule += "---|";
  }
  out += "\n" + rule + "\n";

  std::string current_dataset;
  for (const auto& row : r.classes) {
    if (row.dataset_id != current_dataset) {
      current_dataset = row.dataset_id;
      std::size_t n = 0;
      for (const auto& other : r.classes) {
        if (other.dataset_id == current_dataset) n += other.examples;
      }
      out += "| **" + current_dataset + "** (" + std::to_string(n) + ") |";
      for (std::size_t i = 0; i < ks.size(); ++i) out += " |";
      out += "\n";
    }
    out += "| " + row.class_id + (row.instrument ? " [instrument]" : "") + " (" +
           std::to_string(row.examples) + ") |";
    for (auto k : ks) {
      const auto& s = row.by_prompt_count.at(k);
      out += " " + (s.mean_dice ? fixed2(*s.mean_dice) : std::string("n/a")) + " |";
    }
    out += "\n";
  }
  const std::string scope = r.config.class_filter == ClassScope::tissue
                                ? "for all tissue classes"
                                : "for tissue and instrument classes";
  out += "| Weighted mean Dice coefficient (" + scope + ") |";
  for (auto k : ks) {
    auto it = r.aggregates.find(k);
    out += " " + (it == r.aggregates.end() ? std::string("n/a") : fixed2(it->second.wmdc)) + " |";
  }
  out += "\n| Mean Dice coefficient (" + scope + ") |";
  for (auto k : ks) {
    auto it = r.aggregates.find(k);
    out += " " + (it == r.aggregates.end() ? std::string("n/a") : fixed2(it->second.mdc)) + " |";
  }
  out += "\n\n";

  out += "Examples: " + std::to_string(r.example_count) +
         ", failures: " + std::to_string(r.failures.size()) + " of " +
         std::to_string(r.prediction_count) + " predictions";
  out += r.valid ? "\n" : " (RUN INVALID)\n";
  if (options.baseline_wmdc) {
    const auto k = ks.back();
    if (auto it = r.aggregates.find(k); it != r.aggregates.end()) {
      out += "Relative improvement over " + options.baseline_label + " at " + std::to_string(k) +
             " prompts: " + improvement_line(*options.baseline_wmdc, it->second.wmdc) + "\n";
    }
  }
  return out;
}

namespace detail {
inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}
}  // namespace detail

inline std::string render_csv(const RunReport& r) {
  check_self_consistency(r);
  std::string out =
      "row,dataset_id,class_id,instrument,prompt_count,n,mean_dice,mean_iou,mean_precision,"
      "mean_recall\n";
  for (const auto& row : r.classes) {
    for (const auto& [k, s] : row.by_prompt_count) {
      out += "class," + detail::csv_field(row.dataset_id) + "," + detail::csv_field(row.class_id) +
             "," + (row.instrument ? "1" : "0") + "," + std::to_string(k) + "," +
             std::to_string(s.n) + "," + detail::csv_number(s.mean_dice) + "," +
             detail::csv_number(s.mean_iou) + "," + detail::csv_number(s.mean_precision) + "," +
             detail::csv_number(s.mean_recall) + "\n";
    }
  }
  for (const auto& [k, a] : r.aggregates) {
    out += "wmdc,,,," + std::to_string(k) + "," + std::to_string(a.total_examples) + "," +
           detail::csv_number(a.wmdc) + ",,,\n";
    out += "mdc,,,," + std::to_string(k) + "," + std::to_string(a.class_count) + "," +
           detail::csv_number(a.mdc) + ",,,\n";
  }
  return out;
}

inline std::string render_json(const RunReport& r) {
  check_self_consistency(r);
  return to_json(r).dump(2) + "\n";
}

/// Writes <prefix>.md / .csv / .json for each requested format ("md",
/// "csv", "json") and returns the written paths.
inline std::vector<std::filesystem::path> render_report(const RunReport& r,
                                                        const std::vector<std::string>& formats,
                                                        const std::filesystem::path& prefix,
                                                        const RenderOptions& options = {}) {
  std::vector<std::filesystem::path> written;
  for (const auto& f : formats) {
    std::filesystem::path path = prefix;
    path += "." + f;
    if (f == "md") {
      write_text(path, render_markdown(r, options));
    } else if (f == "csv") {
      write_text(path, render_csv(r));
    } else if (f == "json") {
      write_text(path, render_json(r));
    } else {
      throw ConfigError("unknown report format '" + f + "'");
    }
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Checkpoint selection

namespace detail {

/// Trailing integer of a label ("epoch10" -> 10).
inline std::optional<long> trailing_number(const std::string& s) {
  std::size_t i = s.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
  if (i == s.size()) return std::nullopt;
  return std::stol(s.substr(i));
}

/// Numbered labels first in numeric order, then the rest lexicographically.
inline bool label_less(const std::string& a, const std::string& b) {
  const auto na = trailing_number(a), nb = trailing_number(b);
  if (na && nb && *na != *nb) return *na < *nb;
  if (na.has_value() != nb.has_value()) return na.has_value();
  return a < b;
}

inline int data_scale_rank(const std::string& s) {
  if (s == "full") return 1'000'000;
  if (s == "n/a") return 1'000'001;
  return std::stoi(s);
}

}  // namespace detail

struct BestCheckpoint {
  std::size_t index = 0;  // into the input list
  std::string data_scale;
  std::string checkpoint;
  double wmdc = 0.0;
  std::size_t prompt_count = 0;
};

/// Tissue-class WMDC at the largest prompt count decides; ties go to the
/// earliest checkpoint, then the smallest data scale.
inline BestCheckpoint select_best_checkpoint(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw DomainError("no reports to select from");
  const auto& first = reports.front().config;
  for (const auto& r : reports) {
    if (r.config.split != first.split) throw DomainError("reports cover different splits");
    if (r.config.prompt_counts != first.prompt_counts) {
      throw DomainError("reports use different prompt-count sets");
    }
  }
  const std::size_t k = first.prompt_counts.back();
  std::vector<BestCheckpoint> candidates;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& c = reports[i].config;
    candidates.push_back({i, c.data_scale, c.checkpoint,
                          reports[i].recompute_aggregate(k, ClassScope::tissue).wmdc, k});
  }
  auto better = [](const BestCheckpoint& a, const BestCheckpoint& b) {
    if (a.wmdc != b.wmdc) return a.wmdc > b.wmdc;
    if (a.checkpoint != b.checkpoint) return detail::label_less(a.checkpoint, b.checkpoint);
    return detail::data_scale_rank(a.data_scale) < detail::data_scale_rank(b.data_scale);
  };
  return *std::min_element(candidates.begin(), candidates.end(), better);
}

/// WMDC series across checkpoints per data scale, tissue-only and with
/// instruments, one CSV row per (data_scale, checkpoint, prompt_count).
inline std::string render_scale_series_csv(const std::vector<RunReport>& reports) {
  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = reports[a].config;
    const auto& cb = reports[b].config;
    if (ca.data_scale != cb.data_scale) {
      return detail::data_scale_rank(ca.data_scale) < detail::data_scale_rank(cb.data_scale);
    }
    return detail::label_less(ca.checkpoint, cb.checkpoint);
  });
  std::string out = "data_scale,checkpoint,prompt_count,wmdc_tissue,wmdc_tissue_and_instrument\n";
  for (auto i : order) {
    const auto& r = reports[i];
    for (auto k : r.config.prompt_counts) {
      std::string all;
      if (auto it = r.aggregates_all_classes.find(k); it != r.aggregates_all_classes.end()) {
        all = detail::csv_number(it->second.wmdc);
      }
      out += r.config.data_scale + "," + detail::csv_field(r.config.checkpoint) + "," +
             std::to_string(k) + "," +
             detail::csv_number(r.recompute_aggregate(k, ClassScope::tissue).wmdc) + "," + all +
             "\n";
    }
  }
  return out;
}

}  // namespace segbench
