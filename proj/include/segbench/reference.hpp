// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Published reference scores (prior state of the art, baselines, fine-tuned
// results) and the per-class comparison against them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"
#include "segbench/json_util.hpp"
#include "segbench/image.hpp"
#include "segbench/metrics.hpp"
#include "segbench/runner.hpp"

namespace segbench {

struct ReferenceEntry {
  std::string class_key;  // dataset/class, matched against report rows
  std::string display_name;
  std::optional<double> prior_sota;
  std::string prior_sota_model;
  std::optional<double> medsam;
  std::optional<double> baseline;  // zero-shot score of the base model
  /// Named published score columns, e.g. "scale_50", "test_10pt".
  std::map<std::string, double> scores;
  std::optional<double> published_delta;
  bool unseen = false;  // class held out of fine-tuning
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::string note;
};

struct ReferenceTable {
  std::string name;
  std::string version;
  std::vector<ReferenceEntry> entries;
  /// Published aggregate rows, e.g. "wmdc.test_10pt" -> 0.91.
  std::map<std::string, double> published;

  const ReferenceEntry* find(const std::string& class_key) const {
    for (const auto& e : entries) {
      if (e.class_key == class_key) return &e;
    }
    return nullptr;
  }

  /// Class -> published score column, skipping entries without that column.
  std::map<std::string, double> column(const std::string& name) const {
    std::map<std::string, double> out;
    for (const auto& e : entries) {
      if (auto it = e.scores.find(name); it != e.scores.end()) out[e.class_key] = it->second;
    }
    return out;
  }
};

namespace detail {
inline std::optional<double> optional_score(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const double v = j.at(key).get<double>();
  if (v < 0.0 || v > 1.0) {
    throw ParseError(std::string("reference score '") + key + "' outside [0, 1]");
  }
  return v;
}
}  // namespace detail

inline ReferenceTable reference_table_from_json(const nlohmann::json& j) {
  try {
    ReferenceTable t;
    t.name = j.value("name", std::string{});
    t.version = j.value("version", std::string{});
    for (const auto& c : j.at("classes")) {
      ReferenceEntry e;
      e.class_key = c.at("class_key").get<std::string>();
      e.display_name = c.value("name", e.class_key);
      if (c.contains("prior_sota") && !c.at("prior_sota").is_null()) {
        const auto& s = c.at("prior_sota");
        e.prior_sota = detail::optional_score(s, "dice");
        e.prior_sota_model = s.value("model", std::string{});
      }
      e.medsam = detail::optional_score(c, "medsam");
      e.baseline = detail::optional_score(c, "baseline");
      for (const auto& [name, v] : member_or_empty(c, "scores").items()) {
        if (v.is_null()) continue;
        const double d = v.get<double>();
        if (d < 0.0 || d > 1.0) throw ParseError("reference score outside [0, 1]: " + name);
        e.scores[name] = d;
      }
      if (c.contains("published_delta") && !c.at("published_delta").is_null()) {
        e.published_delta = c.at("published_delta").get<double>();
      }
      e.unseen = c.value("unseen", false);
      e.n_val = c.value("n_val", std::size_t{0});
      e.n_test = c.value("n_test", std::size_t{0});
      e.note = c.value("note", std::string{});
      t.entries.push_back(std::move(e));
    }
    for (const auto& [k, v] : member_or_empty(j, "published").items()) {
      if (v.is_number()) t.published[k] = v.get<double>();
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed reference table: ") + e.what());
  }
}

inline ReferenceTable load_reference_table(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return reference_table_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Published column as class summaries weighted by the validation or test
/// counts, ready for aggregate().
inline std::vector<ClassSummary> reference_summaries(const ReferenceTable& t,
                                                     const std::string& column, bool test_counts) {
  std::vector<ClassSummary> out;
  for (const auto& e : t.entries) {
    auto it = e.scores.find(column);
    if (it == e.scores.end()) continue;
    ClassSummary s;
    s.class_id = e.class_key;
    s.n = test_counts ? e.n_test : e.n_val;
    s.mean_dice = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

// Zero-shot Dice per class and prompt count for one or more backbones.

struct ZeroShotClass {
  std::string class_key;
  std::string dataset_id;
  std::string class_id;
  std::size_t n = 0;
  std::map<std::string, std::vector<double>> dice;  // backbone -> one value per prompt count
};

struct ZeroShotTable {
  std::vector<std::size_t> prompt_counts;
  std::vector<ZeroShotClass> classes;
  std::map<std::string, std::size_t> dataset_header_n;
  /// backbone -> {"wmdc" | "mdc" -> one value per prompt count}
  std::map<std::string, std::map<std::string, std::vector<double>>> published;

  std::vector<ClassSummary> summaries(const std::string& backbone, std::size_t prompt_count) const {
    auto pos = std::find(prompt_counts.begin(), prompt_counts.end(), prompt_count);
    if (pos == prompt_counts.end()) {
      throw DomainError("no column for " + std::to_string(prompt_count) + " prompts");
    }
    const auto col = static_cast<std::size_t>(pos - prompt_counts.begin());
    std::vector<ClassSummary> out;
    for (const auto& c : classes) {
      auto it = c.dice.find(backbone);
      if (it == c.dice.end()) throw DomainError("unknown backbone '" + backbone + "'");
      ClassSummary s;
      s.class_id = c.class_key;
      s.n = c.n;
      s.mean_dice = it->second.at(col);
      out.push_back(std::move(s));
    }
    return out;
  }
};

inline ZeroShotTable zero_shot_table_from_json(const nlohmann::json& j) {
  try {
    ZeroShotTable t;
    t.prompt_counts = j.at("prompt_counts").get<std::vector<std::size_t>>();
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      t.dataset_header_n[d.at("dataset_id").get<std::string>()] = d.value("header_n", std::size_t{0});
    }
    for (const auto& c : j.at("classes")) {
      ZeroShotClass z;
      z.class_key = c.at("class_key").get<std::string>();
      z.dataset_id = c.at("dataset_id").get<std::string>();
      z.class_id = c.at("class_id").get<std::string>();
      z.n = c.at("n").get<std::size_t>();
      for (const auto& [backbone, values] : c.at("dice").items()) {
        auto v = values.get<std::vector<double>>();
        if (v.size() != t.prompt_counts.size()) {
          throw ParseError(z.class_key + ": " + backbone + " has " + std::to_string(v.size()) +
                           " values for " + std::to_string(t.prompt_counts.size()) + " prompt counts");
        }
        z.dice[backbone] = std::move(v);
      }
      t.classes.push_back(std::move(z));
    }
    for (const auto& [backbone, rows] : member_or_empty(j, "published").items()) {
      for (const auto& [row, values] : rows.items()) {
        t.published[backbone][row] = values.get<std::vector<double>>();
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed zero-shot table: ") + e.what());
  }
}

inline ZeroShotTable load_zero_shot_table(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return zero_shot_table_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

enum class Outcome { above, meets, below, no_reference };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::above: return "above";
    case Outcome::meets: return "meets";
    case Outcome::below: return "below";
    case Outcome::no_reference: return "no_reference";
  }
  return "no_reference";
}

struct ComparisonRow {
  std::string class_key;
  double dice = 0.0;
  std::optional<double> prior_sota;
  std::string prior_sota_model;
  std::optional<double> delta;  // dice - prior_sota
  Outcome outcome = Outcome::no_reference;
  bool unseen = false;
};

struct OutcomeTally {
  std::size_t above = 0;
  std::size_t meets = 0;
  std::size_t below = 0;
  std::size_t no_reference = 0;

  std::size_t total() const { return above + meets + below + no_reference; }
  /// At least as good as the prior score.
  std::size_t at_or_above() const { return above + meets; }
  /// Classes where no prior reported score matches or exceeds the model:
  /// strictly better, or no prior score published at all.
  std::size_t outperformed() const { return above + no_reference; }

  void add(Outcome o) {
    switch (o) {
      case Outcome::above: ++above; break;
      case Outcome::meets: ++meets; break;
      case Outcome::below: ++below; break;
      case Outcome::no_reference: ++no_reference; break;
    }
  }
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  OutcomeTally all;
  OutcomeTally unseen;
  std::vector<std::string> unmatched_report;     // in scores, not in reference
  std::vector<std::string> unmatched_reference;  // in reference, not in scores
};

/// Deltas closer to zero than this count as ties.
inline constexpr double kTieTolerance = 1e-9;

inline Comparison compare_scores(const std::map<std::string, double>& scores,
                                 const ReferenceTable& reference) {
  Comparison out;
  for (const auto& [key, dice_value] : scores) {
    const ReferenceEntry* e = reference.find(key);
    if (e == nullptr) {
      out.unmatched_report.push_back(key);
      continue;
    }
    ComparisonRow row{key, dice_value, e->prior_sota, e->prior_sota_model, {},
                      Outcome::no_reference, e->unseen};
    if (e->prior_sota) {
      row.delta = dice_value - *e->prior_sota;
      if (std::abs(*row.delta) <= kTieTolerance) {
        row.outcome = Outcome::meets;
      } else {
        row.outcome = *row.delta > 0 ? Outcome::above : Outcome::below;
      }
    }
    out.all.add(row.outcome);
    if (row.unseen) out.unseen.add(row.outcome);
    out.rows.push_back(std::move(row));
  }
  for (const auto& e : reference.entries) {
    if (!scores.contains(e.class_key)) out.unmatched_reference.push_back(e.class_key);
  }
  return out;
}

inline Comparison compare_to_reference(const RunReport& report, const ReferenceTable& reference,
                                       std::size_t prompt_count) {
  std::map<std::string, double> scores;
  bool found = false;
  for (const auto& row : report.classes) {
    auto it = row.by_prompt_count.find(prompt_count);
    if (it == row.by_prompt_count.end()) continue;
    found = true;
    if (it->second.mean_dice) scores[row.class_key] = *it->second.mean_dice;
  }
  if (!found) {
    throw DomainError("report has no results at " + std::to_string(prompt_count) + " prompts");
  }
  return compare_scores(scores, reference);
}

/// "+0.13", "-0.02", "0.00".
inline std::string format_delta(double delta) {
  const double r = round_half_up(std::abs(delta), 2);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", r);
  if (r == 0.0) return buf;
  return (delta > 0 ? "+" : "-") + std::string(buf);
}

inline std::string format_fraction(std::size_t count, std::size_t total) {
  char buf[64];
  const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  if (std::abs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%zu/%zu (%.0f%%)", count, total, pct);
  } else {
    std::snprintf(buf, sizeof(buf), "%zu/%zu (%.1f%%)", count, total, round_half_up(pct, 1));
  }
  return buf;
}

inline std::string headline(const Comparison& c) {
  return format_fraction(c.all.outperformed(), c.all.total());
}

inline nlohmann::json to_json(const Comparison& c) {
  auto tally = [](const OutcomeTally& t) {
    return nlohmann::json{{"above", t.above},
                          {"meets", t.meets},
                          {"below", t.below},
                          {"no_reference", t.no_reference},
                          {"at_or_above", t.at_or_above()},
                          {"outperformed", t.outperformed()},
                          {"total", t.total()},
                          {"headline", format_fraction(t.outperformed(), t.total())}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"class_key", r.class_key},
                    {"dice", r.dice},
                    {"prior_sota", r.prior_sota ? nlohmann::json(*r.prior_sota) : nlohmann::json()},
                    {"prior_sota_model", r.prior_sota_model},
                    {"delta", r.delta ? nlohmann::json(*r.delta) : nlohmann::json()},
                    {"delta_text", r.delta ? format_delta(*r.delta) : ""},
                    {"outcome", to_string(r.outcome)},
                    {"unseen", r.unseen}});
  }
  return {{"rows", std::move(rows)},
          {"all_classes", tally(c.all)},
          {"unseen_classes", tally(c.unseen)},
          {"unmatched_report", c.unmatched_report},
          {"unmatched_reference", c.unmatched_reference}};
}

inline std::string render_comparison_markdown(const Comparison& c) {
  std::string out = "| Class | Dice | Prior SOTA | Model | Delta | Outcome |\n";
  out += "|---|---|---|---|---|---|\n";
  char buf[32];
  for (const auto& r : c.rows) {
    std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(r.dice, 2));
    std::string sota = "-";
    if (r.prior_sota) {
      char s[32];
      std::snprintf(s, sizeof(s), "%.2f", *r.prior_sota);
      sota = s;
    }
    out += "| " + r.class_key + (r.unseen ? " †" : "") + " | " + buf + " | " + sota + " | " +
           (r.prior_sota_model.empty() ? "-" : r.prior_sota_model) + " | " +
           (r.delta ? format_delta(*r.delta) : "-") + " | " + to_string(r.outcome) + " |\n";
  }
  out += "\nOutperformed prior SOTA: " + headline(c) + " (" + std::to_string(c.all.above) +
         " above, " + std::to_string(c.all.no_reference) + " without a prior score, " +
         std::to_string(c.all.meets) + " tied, " + std::to_string(c.all.below) + " below)\n";
  if (c.unseen.total() > 0) {
    out += "Unseen classes: " + format_fraction(c.unseen.outperformed(), c.unseen.total()) + "\n";
  }
  for (const auto& k : c.unmatched_report) out += "Unmatched report class: " + k + "\n";
  for (const auto& k : c.unmatched_reference) out += "Unmatched reference class: " + k + "\n";
  return out;
}

}  // namespace segbench
