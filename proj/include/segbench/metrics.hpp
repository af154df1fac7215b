// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"
#include "segbench/mask.hpp"

namespace segbench {

// Each metric is defined as 0 when its denominator is 0. Counts are exact
// integers; the single division happens last, in double precision.

inline double iou(const PixelCounts& c) {
  return c.union_ > 0 ? static_cast<double>(c.intersection) /
                            static_cast<double>(c.union_)
                      : 0.0;
}

inline double dice(const PixelCounts& c) {
  const std::uint64_t denom = c.predicted_sum + c.ground_truth_sum;
  return denom > 0 ? 2.0 * static_cast<double>(c.intersection) /
                         static_cast<double>(denom)
                   : 0.0;
}

inline double precision(const PixelCounts& c) {
  return c.predicted_sum > 0 ? static_cast<double>(c.intersection) /
                                   static_cast<double>(c.predicted_sum)
                             : 0.0;
}

inline double recall(const PixelCounts& c) {
  return c.ground_truth_sum > 0 ? static_cast<double>(c.intersection) /
                                      static_cast<double>(c.ground_truth_sum)
                                : 0.0;
}

struct ExampleMetrics {
  std::string example_id;
  std::string class_id;
  PixelCounts counts;
  double iou = 0.0;
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const ExampleMetrics&, const ExampleMetrics&) = default;
};

inline ExampleMetrics compute_metrics(std::string example_id, std::string class_id,
                                      const PixelCounts& c) {
  return {std::move(example_id), std::move(class_id), c,
          iou(c), dice(c), precision(c), recall(c)};
}

inline ExampleMetrics compute_metrics(std::string example_id, std::string class_id,
                                      const BinaryMask& pred, const BinaryMask& gt) {
  return compute_metrics(std::move(example_id), std::move(class_id),
                         pixel_counts(pred, gt));
}

/// Per-class means. Means are empty when n == 0; such classes are reported
/// but never enter an aggregate.
struct ClassSummary {
  std::string class_id;
  std::size_t n = 0;
  std::optional<double> mean_dice;
  std::optional<double> mean_iou;
  std::optional<double> mean_precision;
  std::optional<double> mean_recall;

  friend bool operator==(const ClassSummary&, const ClassSummary&) = default;
};

/// Running sums so a class can be accumulated across several calls and
/// merged; the means depend only on the multiset of examples.
struct ClassAccumulator {
  std::string class_id;
  std::size_t n = 0;
  double sum_dice = 0.0;
  double sum_iou = 0.0;
  double sum_precision = 0.0;
  double sum_recall = 0.0;

  void add(const ExampleMetrics& m) {
    ++n;
    sum_dice += m.dice;
    sum_iou += m.iou;
    sum_precision += m.precision;
    sum_recall += m.recall;
  }

  void merge(const ClassAccumulator& other) {
    n += other.n;
    sum_dice += other.sum_dice;
    sum_iou += other.sum_iou;
    sum_precision += other.sum_precision;
    sum_recall += other.sum_recall;
  }

  ClassSummary summary() const {
    ClassSummary s{class_id, n, {}, {}, {}, {}};
    if (n > 0) {
      const double d = static_cast<double>(n);
      s.mean_dice = sum_dice / d;
      s.mean_iou = sum_iou / d;
      s.mean_precision = sum_precision / d;
      s.mean_recall = sum_recall / d;
    }
    return s;
  }
};

inline ClassSummary class_mean(std::span<const ExampleMetrics> examples,
                               std::string class_id = {}) {
  if (!examples.empty() && class_id.empty()) class_id = examples.front().class_id;
  ClassAccumulator acc{class_id};
  for (const auto& m : examples) {
    if (m.class_id != class_id) {
      throw DomainError("class_mean over mixed classes: '" + m.class_id +
                        "' vs '" + class_id + "'");
    }
    acc.add(m);
  }
  return acc.summary();
}

struct AggregateScores {
  double wmdc = 0.0;  // sum(n_i * Dice_i) / N
  double mdc = 0.0;   // unweighted mean of Dice_i
  std::size_t total_examples = 0;  // N
  std::size_t class_count = 0;     // C

  friend bool operator==(const AggregateScores&, const AggregateScores&) = default;
};

using ClassFilter = std::function<bool(const ClassSummary&)>;

inline bool include_all(const ClassSummary&) { return true; }

/// Weighted and unweighted mean Dice over the classes passing `include`.
/// Classes with n == 0 are skipped.
inline AggregateScores aggregate(std::span<const ClassSummary> summaries,
                                 const ClassFilter& include = include_all) {
  AggregateScores out;
  double weighted = 0.0;
  double unweighted = 0.0;
  for (const auto& s : summaries) {
    if (s.n == 0 || !s.mean_dice || !include(s)) continue;
    weighted += static_cast<double>(s.n) * *s.mean_dice;
    unweighted += *s.mean_dice;
    out.total_examples += s.n;
    ++out.class_count;
  }
  if (out.class_count == 0) {
    throw EmptyAggregateError("no classes with examples left after filtering");
  }
  out.wmdc = weighted / static_cast<double>(out.total_examples);
  out.mdc = unweighted / static_cast<double>(out.class_count);
  return out;
}

/// Round half up to `digits` decimals. Used only when rendering tables.
inline double round_half_up(double value, int digits = 2) {
  const double scale = std::pow(10.0, digits);
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

inline nlohmann::json to_json(const PixelCounts& c) {
  return {{"intersection", c.intersection},
          {"union", c.union_},
          {"predicted_sum", c.predicted_sum},
          {"ground_truth_sum", c.ground_truth_sum}};
}

inline nlohmann::json to_json(const ExampleMetrics& m) {
  return {{"example_id", m.example_id}, {"class_id", m.class_id},
          {"counts", to_json(m.counts)}, {"iou", m.iou},
          {"dice", m.dice},             {"precision", m.precision},
          {"recall", m.recall}};
}

namespace detail {
inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline std::optional<double> number_or_null(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const ClassSummary& s) {
  return {{"class_id", s.class_id},
          {"n", s.n},
          {"mean_dice", detail::optional_number(s.mean_dice)},
          {"mean_iou", detail::optional_number(s.mean_iou)},
          {"mean_precision", detail::optional_number(s.mean_precision)},
          {"mean_recall", detail::optional_number(s.mean_recall)}};
}

inline ClassSummary class_summary_from_json(const nlohmann::json& j) {
  return {j.at("class_id").get<std::string>(),
          j.at("n").get<std::size_t>(),
          detail::number_or_null(j.at("mean_dice")),
          detail::number_or_null(j.at("mean_iou")),
          detail::number_or_null(j.at("mean_precision")),
          detail::number_or_null(j.at("mean_recall"))};
}

inline nlohmann::json to_json(const AggregateScores& a) {
  return {{"wmdc", a.wmdc},
          {"mdc", a.mdc},
          {"N", a.total_examples},
          {"C", a.class_count}};
}

inline AggregateScores aggregate_from_json(const nlohmann::json& j) {
  return {j.at("wmdc").get<double>(), j.at("mdc").get<double>(),
          j.at("N").get<std::size_t>(), j.at("C").get<std::size_t>()};
}

}  // namespace segbench
