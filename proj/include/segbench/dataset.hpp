// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset manifests, mask quality control, patient-wise splitting and
// per-class training subsets.
//
// A manifest is a JSON header plus a JSON Lines record file:
//
//   {
//     "records": "records.jsonl",
//     "class_color_maps": {"dresden": {"colon": 3}},
//     "split_ratios": {"dresden": {"unit": "percent", "train": 90, "val": 5, "test": 5},
//                      "cholecseg8k": {"unit": "patients", "train": 13, "val": 2, "test": 2}},
//     "instrument_classes": {"cholecseg8k": ["grasper", "l_hook"]},
//     "qc_min_area": {"m2caiseg": true}
//   }
//
// Record paths are relative to the header's directory.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"
#include "segbench/json_util.hpp"
#include "segbench/image.hpp"
#include "segbench/mask.hpp"
#include "segbench/parallel.hpp"
#include "segbench/prompts.hpp"

namespace segbench {

enum class Split { train, val, test, unassigned };

inline constexpr std::array<Split, 3> kSplitBuckets{Split::train, Split::val,
                                                    Split::test};

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned" || s.empty()) return Split::unassigned;
  throw ParseError("unknown split '" + s + "'");
}

struct SampleRecord {
  std::string dataset_id;
  std::string image_ref;
  std::string mask_ref;
  std::string class_id;
  std::string patient_id;
  Split split = Split::unassigned;

  /// (dataset_id, image_ref, class_id) identifies a record in a manifest.
  auto key() const { return std::tie(dataset_id, image_ref, class_id); }
  /// "dataset/class", the id classes are reported under.
  std::string class_key() const { return dataset_id + "/" + class_id; }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline bool record_key_less(const SampleRecord& a, const SampleRecord& b) {
  return a.key() < b.key();
}

inline nlohmann::json to_json(const SampleRecord& r) {
  return {{"dataset_id", r.dataset_id}, {"image_ref", r.image_ref},
          {"mask_ref", r.mask_ref},     {"class_id", r.class_id},
          {"patient_id", r.patient_id}, {"split", to_string(r.split)}};
}

inline SampleRecord sample_record_from_json(const nlohmann::json& j) {
  try {
    SampleRecord r{j.at("dataset_id").get<std::string>(),
                   j.at("image_ref").get<std::string>(),
                   j.at("mask_ref").get<std::string>(),
                   j.at("class_id").get<std::string>(),
                   j.value("patient_id", std::string{}),
                   split_from_string(j.value("split", std::string{"unassigned"}))};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what());
  }
}

/// Train/val/test targets, either as fractions of patients or as exact
/// patient counts.
struct SplitRatios {
  enum class Unit { fraction, patients };
  Unit unit = Unit::fraction;
  std::array<double, 3> values{1.0, 0.0, 0.0};

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

inline SplitRatios split_ratios_from_json(const nlohmann::json& j) {
  SplitRatios r;
  const std::string unit = j.value("unit", std::string{"fraction"});
  try {
    r.values = {j.at("train").get<double>(), j.at("val").get<double>(),
                j.at("test").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split ratios need train/val/test: ") + e.what());
  }
  for (double v : r.values) {
    if (v < 0) throw RatioSumError("split ratios must be non-negative");
  }
  const double sum = r.values[0] + r.values[1] + r.values[2];
  if (unit == "fraction" || unit == "percent") {
    const double expected = unit == "percent" ? 100.0 : 1.0;
    if (std::abs(sum - expected) > 1e-9 * expected) {
      throw RatioSumError("split ratios sum to " + std::to_string(sum) +
                          ", expected " + std::to_string(expected));
    }
    if (unit == "percent") {
      for (auto& v : r.values) v /= 100.0;
    }
    r.unit = SplitRatios::Unit::fraction;
  } else if (unit == "patients") {
    for (double v : r.values) {
      if (v != std::floor(v)) throw RatioSumError("patient counts must be integers");
    }
    r.unit = SplitRatios::Unit::patients;
  } else {
    throw ParseError("unknown split ratio unit '" + unit + "'");
  }
  return r;
}

inline nlohmann::json to_json(const SplitRatios& r) {
  return {{"unit", r.unit == SplitRatios::Unit::patients ? "patients" : "fraction"},
          {"train", r.values[0]},
          {"val", r.values[1]},
          {"test", r.values[2]}};
}

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<SampleRecord> records;
  std::map<std::string, ClassColorMap> class_color_maps;
  std::map<std::string, SplitRatios> split_ratios;
  std::map<std::string, std::set<std::string>> instrument_classes;
  std::map<std::string, bool> qc_min_area;

  std::filesystem::path resolve(const std::string& ref) const {
    const std::filesystem::path p(ref);
    return p.is_absolute() ? p : base_dir / p;
  }

  bool is_instrument(const std::string& dataset_id, const std::string& class_id) const {
    auto it = instrument_classes.find(dataset_id);
    return it != instrument_classes.end() && it->second.contains(class_id);
  }

  /// Min-area QC is on for m2caiSeg unless the header says otherwise, and off
  /// for every other dataset unless enabled.
  bool min_area_enabled(const std::string& dataset_id) const {
    if (auto it = qc_min_area.find(dataset_id); it != qc_min_area.end()) {
      return it->second;
    }
    std::string lower = dataset_id;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "m2caiseg";
  }
};

inline std::set<std::string> patients_of(const std::vector<SampleRecord>& records,
                                         const std::string& dataset_id) {
  std::set<std::string> out;
  for (const auto& r : records) {
    if (r.dataset_id == dataset_id) out.insert(r.patient_id);
  }
  return out;
}

/// Checks record-level invariants and ratio consistency.
inline void validate_manifest(const DatasetManifest& m) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& r : m.records) {
    if (r.patient_id.empty()) {
      throw ParseError("record " + r.dataset_id + "/" + r.image_ref + "/" +
                       r.class_id + " has no patient_id");
    }
    if (!seen.emplace(r.dataset_id, r.image_ref, r.class_id).second) {
      throw DuplicateKeyError("duplicate record (" + r.dataset_id + ", " +
                              r.image_ref + ", " + r.class_id + ")");
    }
  }
  for (const auto& [ds, ratios] : m.split_ratios) {
    if (ratios.unit != SplitRatios::Unit::patients) continue;
    const auto patients = patients_of(m.records, ds).size();
    const double sum = ratios.values[0] + ratios.values[1] + ratios.values[2];
    if (patients > 0 && sum != static_cast<double>(patients)) {
      throw RatioSumError("dataset '" + ds + "': patient counts sum to " +
                          std::to_string(static_cast<long long>(sum)) + " but it has " +
                          std::to_string(patients) + " patients");
    }
  }
}

inline std::vector<SampleRecord> load_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(sample_record_from_json(j));
  }
  return out;
}

inline void write_records_jsonl(const std::filesystem::path& path,
                                const std::vector<SampleRecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  write_text(path, text);
}

/// Loads the header and its record file. Mask and image files are not opened.
inline DatasetManifest load_manifest(const std::filesystem::path& header_path) {
  nlohmann::json header;
  {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open manifest " + header_path.string());
    try {
      header = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(header_path.string() + ": " + e.what());
    }
  }
  if (!header.is_object()) throw ParseError("manifest header must be an object");
  DatasetManifest m;
  m.base_dir = header_path.parent_path();
  try {
    const auto records_ref = header.at("records").get<std::string>();
    m.records = load_records_jsonl(m.resolve(records_ref));
    for (const auto& [ds, map] : member_or_empty(header, "class_color_maps").items()) {
      m.class_color_maps.emplace(ds, class_color_map_from_json(map));
    }
    for (const auto& [ds, r] : member_or_empty(header, "split_ratios").items()) {
      m.split_ratios.emplace(ds, split_ratios_from_json(r));
    }
    for (const auto& [ds, list] : member_or_empty(header, "instrument_classes").items()) {
      m.instrument_classes.emplace(ds, list.get<std::set<std::string>>());
    }
    for (const auto& [ds, flag] : member_or_empty(header, "qc_min_area").items()) {
      m.qc_min_area.emplace(ds, flag.get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(header_path.string() + ": " + e.what());
  }
  validate_manifest(m);
  return m;
}

/// Writes header + records next to each other; returns the header path.
inline std::filesystem::path write_manifest(const std::filesystem::path& header_path,
                                            const DatasetManifest& m,
                                            const std::string& records_name = "records.jsonl") {
  nlohmann::json header;
  header["records"] = records_name;
  header["class_color_maps"] = nlohmann::json::object();
  for (const auto& [ds, map] : m.class_color_maps) {
    header["class_color_maps"][ds] = class_color_map_to_json(map);
  }
  header["split_ratios"] = nlohmann::json::object();
  for (const auto& [ds, r] : m.split_ratios) header["split_ratios"][ds] = to_json(r);
  header["instrument_classes"] = nlohmann::json::object();
  for (const auto& [ds, list] : m.instrument_classes) header["instrument_classes"][ds] = list;
  header["qc_min_area"] = nlohmann::json::object();
  for (const auto& [ds, flag] : m.qc_min_area) header["qc_min_area"][ds] = flag;
  write_text(header_path, header.dump(2) + "\n");
  write_records_jsonl(header_path.parent_path() / records_name, m.records);
  return header_path;
}

// ---------------------------------------------------------------------------
// Quality control

enum class QcReason { empty_mask, size_mismatch, min_area, unreadable };

inline std::string to_string(QcReason r) {
  switch (r) {
    case QcReason::empty_mask: return "empty_mask";
    case QcReason::size_mismatch: return "size_mismatch";
    case QcReason::min_area: return "min_area";
    case QcReason::unreadable: return "unreadable";
  }
  return "unreadable";
}

struct QcRejection {
  SampleRecord record;
  QcReason reason;
  std::string detail;
};

struct QcReport {
  std::vector<SampleRecord> kept;
  std::vector<QcRejection> rejected;
};

struct QcOptions {
  std::size_t min_area = 50;
  std::uint8_t threshold = 128;
  std::size_t workers = 4;
  /// Datasets for which min_area applies; null falls back to the manifest
  /// default (m2caiSeg only).
  std::function<bool(const std::string&)> min_area_enabled;
};

/// Rejects, in this order of precedence: unreadable files, masks whose size
/// differs from their image, empty masks, masks with area < min_area. Output
/// order follows record key order regardless of I/O completion order.
inline QcReport apply_qc(std::vector<SampleRecord> records,
                         const std::filesystem::path& base_dir,
                         const QcOptions& options = {}) {
  std::sort(records.begin(), records.end(), record_key_less);
  struct Verdict {
    std::optional<QcReason> reason;
    std::string detail;
  };
  std::vector<Verdict> verdicts(records.size());
  auto resolve = [&](const std::string& ref) {
    const std::filesystem::path p(ref);
    return p.is_absolute() ? p : base_dir / p;
  };
  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    const auto& r = records[i];
    Verdict& v = verdicts[i];
    try {
      const BinaryMask mask = load_mask(resolve(r.mask_ref), options.threshold);
      const auto [ih, iw] = image_dimensions(resolve(r.image_ref));
      const std::size_t area = mask.area();
      const bool min_area_on = options.min_area_enabled
                                   ? options.min_area_enabled(r.dataset_id)
                                   : DatasetManifest{}.min_area_enabled(r.dataset_id);
      if (ih != mask.height() || iw != mask.width()) {
        v = {QcReason::size_mismatch, "mask " + std::to_string(mask.height()) + "x" +
                                          std::to_string(mask.width()) + " vs image " +
                                          std::to_string(ih) + "x" + std::to_string(iw)};
      } else if (area == 0) {
        v = {QcReason::empty_mask, ""};
      } else if (min_area_on && area < options.min_area) {
        v = {QcReason::min_area, "area " + std::to_string(area)};
      }
    } catch (const Error& e) {
      v = {QcReason::unreadable, e.what()};
    }
  });
  QcReport report;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (verdicts[i].reason) {
      report.rejected.push_back({records[i], *verdicts[i].reason, verdicts[i].detail});
    } else {
      report.kept.push_back(records[i]);
    }
  }
  return report;
}

inline QcReport apply_qc(const DatasetManifest& manifest, std::size_t min_area = 50,
                         std::size_t workers = 4) {
  QcOptions options;
  options.min_area = min_area;
  options.workers = workers;
  options.min_area_enabled = [&manifest](const std::string& ds) {
    return manifest.min_area_enabled(ds);
  };
  return apply_qc(manifest.records, manifest.base_dir, options);
}

inline nlohmann::json to_json(const QcReport& report) {
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& r : report.kept) kept.push_back(to_json(r));
  nlohmann::json rejected = nlohmann::json::array();
  std::map<std::string, std::size_t> by_reason;
  for (const auto& rej : report.rejected) {
    rejected.push_back({{"record", to_json(rej.record)},
                        {"reason", to_string(rej.reason)},
                        {"detail", rej.detail}});
    ++by_reason[to_string(rej.reason)];
  }
  return {{"kept", report.kept.size()},
          {"rejected_count", report.rejected.size()},
          {"rejected_by_reason", by_reason},
          {"kept_records", std::move(kept)},
          {"rejected", std::move(rejected)}};
}

// ---------------------------------------------------------------------------
// Patient-wise splitting

/// Assigns every record a split so that each patient lands in exactly one
/// bucket. Per dataset, patients are shuffled by the seed, stably sorted by
/// descending record count, then each goes to the bucket with the largest
/// remaining patient deficit (ties: train, val, test).
inline DatasetManifest split_patientwise(DatasetManifest manifest, std::uint64_t seed) {
  std::map<std::string, std::map<std::string, std::size_t>> sizes;
  for (const auto& r : manifest.records) ++sizes[r.dataset_id][r.patient_id];

  std::map<std::pair<std::string, std::string>, Split> assignment;
  for (const auto& [ds, per_patient] : sizes) {
    auto ratios_it = manifest.split_ratios.find(ds);
    if (ratios_it == manifest.split_ratios.end()) {
      throw ConfigError("no split ratios for dataset '" + ds + "'");
    }
    const SplitRatios& ratios = ratios_it->second;
    const std::size_t patient_count = per_patient.size();

    std::array<double, 3> target{};
    for (std::size_t b = 0; b < 3; ++b) {
      target[b] = ratios.unit == SplitRatios::Unit::patients
                      ? ratios.values[b]
                      : ratios.values[b] * static_cast<double>(patient_count);
    }
    const auto nonzero = static_cast<std::size_t>(
        std::count_if(ratios.values.begin(), ratios.values.end(), [](double v) { return v > 0; }));
    if (patient_count < nonzero) {
      throw InfeasibleSplitError("dataset '" + ds + "' has " + std::to_string(patient_count) +
                                 " patients for " + std::to_string(nonzero) +
                                 " nonzero split buckets");
    }

    std::vector<std::pair<std::string, std::size_t>> order(per_patient.begin(), per_patient.end());
    SplitMix64 rng(fnv1a64(std::to_string(seed) + "|" + ds));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next() % i]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::array<double, 3> assigned{};
    for (const auto& [patient, count] : order) {
      std::size_t best = 0;
      for (std::size_t b = 1; b < 3; ++b) {
        if (target[b] - assigned[b] > target[best] - assigned[best]) best = b;
      }
      assigned[best] += 1.0;
      assignment[{ds, patient}] = kSplitBuckets[best];
    }
  }
  for (auto& r : manifest.records) r.split = assignment.at({r.dataset_id, r.patient_id});
  return manifest;
}

struct SplitSummary {
  std::string dataset_id;
  std::array<std::size_t, 3> patients{};
  std::array<std::size_t, 3> records{};
  std::array<double, 3> target_patients{};
};

inline std::vector<SplitSummary> summarize_split(const DatasetManifest& m) {
  std::map<std::string, SplitSummary> out;
  std::map<std::string, std::array<std::set<std::string>, 3>> patients;
  for (const auto& r : m.records) {
    auto& s = out[r.dataset_id];
    s.dataset_id = r.dataset_id;
    if (r.split == Split::unassigned) continue;
    const auto b = static_cast<std::size_t>(r.split);
    ++s.records[b];
    patients[r.dataset_id][b].insert(r.patient_id);
  }
  std::vector<SplitSummary> result;
  for (auto& [ds, s] : out) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      s.patients[b] = patients[ds][b].size();
      total += s.patients[b];
    }
    if (auto it = m.split_ratios.find(ds); it != m.split_ratios.end()) {
      for (std::size_t b = 0; b < 3; ++b) {
        s.target_patients[b] = it->second.unit == SplitRatios::Unit::patients
                                   ? it->second.values[b]
                                   : it->second.values[b] * static_cast<double>(total);
      }
    }
    result.push_back(s);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training subsets for the data-scale ablation

struct SubsetSelection {
  std::vector<SampleRecord> records;
  /// class -> requested minus available, only for classes that fell short.
  std::map<std::string, std::size_t> shortfall;
};

/// Picks min(per_class_n, available) train records per class, uniformly
/// without replacement. A class is named either "class_id" (all datasets)
/// or "dataset_id/class_id".
inline SubsetSelection select_training_subset(const DatasetManifest& manifest,
                                              const std::vector<std::string>& classes,
                                              std::size_t per_class_n, std::uint64_t seed) {
  SubsetSelection out;
  for (const auto& cls : classes) {
    const bool qualified = cls.find('/') != std::string::npos;
    auto matches = [&](const SampleRecord& r) {
      return qualified ? r.class_key() == cls : r.class_id == cls;
    };
    if (std::none_of(manifest.records.begin(), manifest.records.end(), matches)) {
      throw DomainError("class '" + cls + "' does not occur in the manifest");
    }
    std::vector<SampleRecord> pool;
    for (const auto& r : manifest.records) {
      if (r.split == Split::train && matches(r)) pool.push_back(r);
    }
    std::sort(pool.begin(), pool.end(), record_key_less);
    const std::size_t take = std::min(per_class_n, pool.size());
    if (take < per_class_n) out.shortfall[cls] = per_class_n - take;

    SplitMix64 rng(derive_seed(seed, "training-subset", cls, std::to_string(per_class_n)));
    std::vector<SampleRecord> chosen;
    for (std::size_t t = 0; t < take; ++t) {
      const auto index = static_cast<std::ptrdiff_t>(rng.next() % pool.size());
      chosen.push_back(std::move(pool[static_cast<std::size_t>(index)]));
      pool.erase(pool.begin() + index);
    }
    std::sort(chosen.begin(), chosen.end(), record_key_less);
    out.records.insert(out.records.end(), chosen.begin(), chosen.end());
  }
  return out;
}

}  // namespace segbench
