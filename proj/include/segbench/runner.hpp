// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment orchestration: one evaluation run sweeps prompt counts over the
// examples of a split, drives a predictor, and rolls metrics up per class and
// per prompt count.

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "segbench/dataset.hpp"
#include "segbench/errors.hpp"
#include "segbench/image.hpp"
#include "segbench/metrics.hpp"
#include "segbench/parallel.hpp"
#include "segbench/predictor.hpp"
#include "segbench/prompts.hpp"

namespace segbench {

inline constexpr const char* kToolVersion = "segbench 0.1.0";
inline const std::vector<std::size_t> kDefaultPromptCounts{1, 2, 4, 6, 8, 10};
inline const std::set<std::string> kDataScales{"50", "100", "200", "400", "full", "n/a"};

enum class ClassScope { tissue, tissue_and_instrument };

inline std::string to_string(ClassScope s) {
  return s == ClassScope::tissue ? "tissue" : "tissue+instrument";
}

inline ClassScope class_scope_from_string(const std::string& s) {
  if (s == "tissue") return ClassScope::tissue;
  if (s == "tissue+instrument" || s == "all") return ClassScope::tissue_and_instrument;
  throw ConfigError("class_filter must be 'tissue' or 'tissue+instrument', got '" + s + "'");
}

struct PredictorConfig {
  std::string kind = "oracle";  // oracle | http | stdio | stub
  PerturbationSpec perturbation;
  std::string endpoint;
  std::vector<std::string> command;
  std::filesystem::path prediction_dir;
  ClientOptions client;

  friend bool operator==(const PredictorConfig& a, const PredictorConfig& b) {
    return a.kind == b.kind && a.perturbation == b.perturbation &&
           a.endpoint == b.endpoint && a.command == b.command &&
           a.prediction_dir == b.prediction_dir && a.client.timeout == b.client.timeout &&
           a.client.retry.max_retries == b.client.retry.max_retries &&
           a.client.retry.backoff == b.client.retry.backoff &&
           a.client.inline_images == b.client.inline_images;
  }
};

struct RunConfig {
  std::filesystem::path manifest;
  Split split = Split::val;
  std::vector<std::size_t> prompt_counts = kDefaultPromptCounts;
  std::uint64_t run_seed = 0;
  PredictorConfig predictor;
  ClassScope class_filter = ClassScope::tissue;
  std::string data_scale = "n/a";
  std::string checkpoint;
  std::size_t concurrency = 4;
  double failure_threshold = 0.05;

  void validate() {
    if (split != Split::val && split != Split::test) {
      throw ConfigError("split must be 'val' or 'test'");
    }
    if (prompt_counts.empty()) throw ConfigError("prompt_counts must not be empty");
    std::sort(prompt_counts.begin(), prompt_counts.end());
    prompt_counts.erase(std::unique(prompt_counts.begin(), prompt_counts.end()),
                        prompt_counts.end());
    if (prompt_counts.front() < 1 || prompt_counts.back() > 10) {
      throw ConfigError("prompt_counts must lie in [1, 10]");
    }
    if (!kDataScales.contains(data_scale)) {
      throw ConfigError("data_scale must be one of 50, 100, 200, 400, full, n/a; got '" +
                        data_scale + "'");
    }
    if (failure_threshold < 0.0 || failure_threshold > 1.0) {
      throw ConfigError("failure_threshold must be in [0, 1]");
    }
    if (concurrency == 0) throw ConfigError("concurrency must be >= 1");
    const auto& k = predictor.kind;
    if (k != "oracle" && k != "http" && k != "stdio" && k != "stub") {
      throw ConfigError("unknown predictor kind '" + k + "'");
    }
    if (k == "http" && predictor.endpoint.empty()) throw ConfigError("http predictor needs endpoint");
    if (k == "stdio" && predictor.command.empty()) throw ConfigError("stdio predictor needs command");
    if (k == "stub" && predictor.prediction_dir.empty()) {
      throw ConfigError("stub predictor needs prediction_dir");
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses "1,2,4", "1..10" or a mix ("1..4,8,10").
inline std::vector<std::size_t> parse_prompt_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    try {
      if (auto dots = item.find(".."); dots != std::string::npos) {
        const auto lo = std::stoul(item.substr(0, dots));
        const auto hi = std::stoul(item.substr(dots + 2));
        if (lo > hi) throw ConfigError("empty range '" + item + "'");
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoul(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad prompt count list '" + text + "'");
    }
    start = end + 1;
  }
  return out;
}

namespace detail {

template <class T>
T toml_get(const toml::table& t, std::string_view key, T fallback) {
  if (auto v = t[key].value<T>()) return *v;
  if (t.contains(key)) throw ConfigError("config key '" + std::string(key) + "' has the wrong type");
  return fallback;
}

inline std::filesystem::path relative_to(const std::filesystem::path& base,
                                         const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// TOML run configuration. Relative paths resolve against the config file.
inline RunConfig parse_run_config(std::string_view toml_text,
                                  const std::filesystem::path& base_dir = {}) {
  toml::table t;
  try {
    t = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
  }
  RunConfig c;
  const auto manifest = detail::toml_get<std::string>(t, "manifest", "");
  if (manifest.empty()) throw ConfigError("config needs 'manifest'");
  c.manifest = detail::relative_to(base_dir, manifest);
  try {
    c.split = split_from_string(detail::toml_get<std::string>(t, "split", "val"));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (auto* arr = t["prompt_counts"].as_array()) {
    c.prompt_counts.clear();
    for (const auto& v : *arr) {
      auto n = v.value<std::int64_t>();
      if (!n || *n < 0) throw ConfigError("prompt_counts must be non-negative integers");
      c.prompt_counts.push_back(static_cast<std::size_t>(*n));
    }
  } else if (auto s = t["prompt_counts"].value<std::string>()) {
    c.prompt_counts = parse_prompt_counts(*s);
  }
  const auto seed = detail::toml_get<std::int64_t>(t, "run_seed", 0);
  if (seed < 0) throw ConfigError("run_seed must be non-negative");
  c.run_seed = static_cast<std::uint64_t>(seed);
  c.class_filter = class_scope_from_string(detail::toml_get<std::string>(t, "class_filter", "tissue"));
  if (auto n = t["data_scale"].value<std::int64_t>()) {
    c.data_scale = std::to_string(*n);
  } else {
    c.data_scale = detail::toml_get<std::string>(t, "data_scale", "n/a");
  }
  c.checkpoint = detail::toml_get<std::string>(t, "checkpoint", "");
  c.concurrency = static_cast<std::size_t>(detail::toml_get<std::int64_t>(t, "concurrency", 4));
  c.failure_threshold = detail::toml_get<double>(t, "failure_threshold", 0.05);

  if (auto* p = t["predictor"].as_table()) {
    auto& pc = c.predictor;
    pc.kind = detail::toml_get<std::string>(*p, "kind", "oracle");
    const auto magnitude = detail::toml_get<std::int64_t>(*p, "magnitude", 0);
    if (magnitude < 0) throw ConfigError("perturbation magnitude must be >= 0");
    pc.perturbation = PerturbationSpec(
        perturbation_kind_from_string(detail::toml_get<std::string>(*p, "perturbation", "none")),
        static_cast<std::size_t>(magnitude));
    pc.endpoint = detail::toml_get<std::string>(*p, "endpoint", "");
    if (auto* cmd = (*p)["command"].as_array()) {
      for (const auto& v : *cmd) pc.command.push_back(v.value_or(std::string{}));
    }
    pc.prediction_dir =
        detail::relative_to(base_dir, detail::toml_get<std::string>(*p, "prediction_dir", ""));
    pc.client.timeout = std::chrono::milliseconds(detail::toml_get<std::int64_t>(*p, "timeout_ms", 30'000));
    pc.client.retry.max_retries = static_cast<std::size_t>(detail::toml_get<std::int64_t>(*p, "max_retries", 3));
    pc.client.retry.backoff = std::chrono::milliseconds(detail::toml_get<std::int64_t>(*p, "backoff_ms", 50));
    pc.client.inline_images = detail::toml_get<bool>(*p, "inline_images", false);
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                          path.parent_path());
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"manifest", c.manifest.string()},
          {"split", to_string(c.split)},
          {"prompt_counts", c.prompt_counts},
          {"run_seed", c.run_seed},
          {"class_filter", to_string(c.class_filter)},
          {"data_scale", c.data_scale},
          {"checkpoint", c.checkpoint},
          {"concurrency", c.concurrency},
          {"failure_threshold", c.failure_threshold},
          {"predictor",
           {{"kind", c.predictor.kind},
            {"perturbation", to_string(c.predictor.perturbation.kind)},
            {"magnitude", c.predictor.perturbation.magnitude},
            {"endpoint", c.predictor.endpoint},
            {"command", c.predictor.command},
            {"prediction_dir", c.predictor.prediction_dir.string()},
            {"timeout_ms", c.predictor.client.timeout.count()},
            {"max_retries", c.predictor.client.retry.max_retries},
            {"backoff_ms", c.predictor.client.retry.backoff.count()},
            {"inline_images", c.predictor.client.inline_images}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.manifest = j.at("manifest").get<std::string>();
  c.split = split_from_string(j.at("split").get<std::string>());
  c.prompt_counts = j.at("prompt_counts").get<std::vector<std::size_t>>();
  c.run_seed = j.at("run_seed").get<std::uint64_t>();
  c.class_filter = class_scope_from_string(j.at("class_filter").get<std::string>());
  c.data_scale = j.at("data_scale").get<std::string>();
  c.checkpoint = j.at("checkpoint").get<std::string>();
  c.concurrency = j.at("concurrency").get<std::size_t>();
  c.failure_threshold = j.at("failure_threshold").get<double>();
  const auto& p = j.at("predictor");
  c.predictor.kind = p.at("kind").get<std::string>();
  c.predictor.perturbation =
      PerturbationSpec(perturbation_kind_from_string(p.at("perturbation").get<std::string>()),
                       p.at("magnitude").get<std::size_t>());
  c.predictor.endpoint = p.at("endpoint").get<std::string>();
  c.predictor.command = p.at("command").get<std::vector<std::string>>();
  c.predictor.prediction_dir = p.at("prediction_dir").get<std::string>();
  c.predictor.client.timeout = std::chrono::milliseconds(p.at("timeout_ms").get<std::int64_t>());
  c.predictor.client.retry.max_retries = p.at("max_retries").get<std::size_t>();
  c.predictor.client.retry.backoff = std::chrono::milliseconds(p.at("backoff_ms").get<std::int64_t>());
  c.predictor.client.inline_images = p.at("inline_images").get<bool>();
  return c;
}

inline std::unique_ptr<Predictor> make_predictor(const PredictorConfig& pc) {
  if (pc.kind == "oracle") return std::make_unique<OraclePredictor>(pc.perturbation);
  if (pc.kind == "http") return std::make_unique<HttpPredictor>(pc.endpoint, pc.client);
  if (pc.kind == "stdio") return std::make_unique<StdioPredictor>(pc.command, pc.client);
  if (pc.kind == "stub") return std::make_unique<StubPredictor>(pc.prediction_dir);
  throw ConfigError("unknown predictor kind '" + pc.kind + "'");
}

// ---------------------------------------------------------------------------
// Report

/// One class of the evaluated split with its summary per prompt count.
struct ClassRow {
  std::string class_key;  // dataset/class
  std::string dataset_id;
  std::string class_id;
  bool instrument = false;
  std::size_t examples = 0;  // records of this class in the split
  std::map<std::size_t, ClassSummary> by_prompt_count;

  friend bool operator==(const ClassRow&, const ClassRow&) = default;
};

struct FailureRecord {
  std::string example_id;
  std::size_t prompt_count = 0;
  std::string code;
  std::string message;

  friend bool operator==(const FailureRecord&, const FailureRecord&) = default;
};

struct Provenance {
  std::string started_at;
  std::string finished_at;
  std::string tool = kToolVersion;
  std::string predictor;
  std::uint64_t run_seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct RunReport {
  RunConfig config;
  std::vector<ClassRow> classes;  // sorted by class_key
  /// Per prompt count, over the classes selected by config.class_filter.
  std::map<std::size_t, AggregateScores> aggregates;
  /// Per prompt count, tissue and instrument classes together.
  std::map<std::size_t, AggregateScores> aggregates_all_classes;
  std::vector<FailureRecord> failures;
  std::size_t example_count = 0;
  std::size_t prediction_count = 0;  // examples x prompt counts
  std::size_t prompt_shortfalls = 0;
  bool valid = true;
  Provenance provenance;
  /// Per-example metrics, keyed by prompt count. Streamed to JSONL, not
  /// part of the report JSON.
  std::map<std::size_t, std::vector<ExampleMetrics>> example_metrics;

  double failure_rate() const {
    return prediction_count == 0 ? 0.0
                                 : static_cast<double>(failures.size()) /
                                       static_cast<double>(prediction_count);
  }

  std::vector<ClassSummary> summaries_at(std::size_t k) const {
    std::vector<ClassSummary> out;
    for (const auto& row : classes) {
      if (auto it = row.by_prompt_count.find(k); it != row.by_prompt_count.end()) {
        ClassSummary s = it->second;
        s.class_id = row.class_key;
        out.push_back(std::move(s));
      }
    }
    return out;
  }

  /// Aggregate recomputed from the class rows at prompt count k.
  AggregateScores recompute_aggregate(std::size_t k, ClassScope scope) const {
    std::set<std::string> instruments;
    for (const auto& row : classes) {
      if (row.instrument) instruments.insert(row.class_key);
    }
    const auto summaries = summaries_at(k);
    return aggregate(summaries, [&](const ClassSummary& s) {
      return scope == ClassScope::tissue_and_instrument || !instruments.contains(s.class_id);
    });
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string example_id_of(const SampleRecord& r) {
  return r.dataset_id + "/" + r.class_id + "/" + r.image_ref;
}

inline std::string request_id_of(const SampleRecord& r, std::size_t k) {
  return example_id_of(r) + "#k" + std::to_string(k);
}

/// Runs the sweep against an already loaded manifest and predictor. The
/// result depends only on (config, manifest, predictor behaviour).
inline RunReport run_eval(RunConfig config, const DatasetManifest& manifest,
                          Predictor& predictor) {
  config.validate();
  RunReport report;
  report.provenance.started_at = utc_timestamp();
  report.provenance.predictor = predictor.name();
  report.provenance.run_seed = config.run_seed;

  std::vector<SampleRecord> records;
  for (const auto& r : manifest.records) {
    if (r.split == config.split) records.push_back(r);
  }
  if (records.empty()) {
    throw DomainError("split '" + to_string(config.split) + "' has no records");
  }
  std::sort(records.begin(), records.end(), record_key_less);

  const auto& counts = config.prompt_counts;
  struct Outcome {
    std::vector<std::optional<ExampleMetrics>> metrics;  // per prompt count
    std::vector<FailureRecord> failures;
    std::size_t shortfalls = 0;
  };
  std::vector<Outcome> outcomes(records.size());

  parallel_for(records.size(), config.concurrency, [&](std::size_t i) {
    const SampleRecord& rec = records[i];
    Outcome& out = outcomes[i];
    out.metrics.resize(counts.size());
    const std::string example_id = example_id_of(rec);
    auto fail_all = [&](const std::string& code, const std::string& msg) {
      for (auto k : counts) out.failures.push_back({example_id, k, code, msg});
    };

    std::optional<BinaryMask> gt;
    try {
      gt = load_mask(manifest.resolve(rec.mask_ref));
    } catch (const Error& e) {
      fail_all("unreadable_ground_truth", e.what());
      return;
    }
    if (gt->area() == 0) {
      fail_all("empty_pool", "ground-truth mask is empty");
      return;
    }
    const std::filesystem::path image_path =
        std::filesystem::absolute(manifest.resolve(rec.image_ref)).lexically_normal();
    ImageRef image = ImagePath{image_path.string()};
    if (predictor.wants_inline_images()) {
      try {
        image = InlinePng{read_file(image_path)};
      } catch (const Error& e) {
        fail_all("unreadable_image", e.what());
        return;
      }
    }
    const std::uint64_t seed =
        derive_seed(config.run_seed, rec.dataset_id, rec.image_ref, rec.class_id);
    const ExampleContext ctx{rec, image_path, *gt};

    for (std::size_t c = 0; c < counts.size(); ++c) {
      const std::size_t k = counts[c];
      PredictRequest request{request_id_of(rec, k), image, sample_points(*gt, k, seed)};
      if (request.prompts.shortfall()) ++out.shortfalls;
      try {
        const BinaryMask pred = predictor.predict(request, ctx);
        out.metrics[c] = compute_metrics(example_id, rec.class_key(), pred, *gt);
      } catch (const PredictorError& e) {
        out.failures.push_back({example_id, k, e.code(), e.what()});
      } catch (const Error& e) {
        out.failures.push_back({example_id, k, "error", e.what()});
      }
    }
  });

  // Canonical merge: records are in key order, classes keyed by name.
  std::map<std::string, ClassRow> rows;
  std::map<std::pair<std::string, std::size_t>, ClassAccumulator> acc;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto& row = rows[rec.class_key()];
    row.class_key = rec.class_key();
    row.dataset_id = rec.dataset_id;
    row.class_id = rec.class_id;
    row.instrument = manifest.is_instrument(rec.dataset_id, rec.class_id);
    ++row.examples;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      auto& a = acc[{rec.class_key(), counts[c]}];
      a.class_id = rec.class_key();
      if (outcomes[i].metrics[c]) {
        a.add(*outcomes[i].metrics[c]);
        report.example_metrics[counts[c]].push_back(*outcomes[i].metrics[c]);
      }
    }
    report.failures.insert(report.failures.end(), outcomes[i].failures.begin(),
                           outcomes[i].failures.end());
    report.prompt_shortfalls += outcomes[i].shortfalls;
  }
  for (auto& [key, row] : rows) {
    for (auto k : counts) {
      ClassSummary s = acc[{key, k}].summary();
      s.class_id = row.class_id;
      row.by_prompt_count[k] = s;
    }
    report.classes.push_back(std::move(row));
  }

  report.config = config;
  report.example_count = records.size();
  report.prediction_count = records.size() * counts.size();
  for (auto k : counts) {
    try {
      report.aggregates[k] = report.recompute_aggregate(k, config.class_filter);
    } catch (const EmptyAggregateError&) {
      report.valid = false;
    }
    try {
      report.aggregates_all_classes[k] =
          report.recompute_aggregate(k, ClassScope::tissue_and_instrument);
    } catch (const EmptyAggregateError&) {
    }
  }
  if (report.failure_rate() > config.failure_threshold) report.valid = false;
  report.provenance.finished_at = utc_timestamp();
  return report;
}

inline RunReport run_eval(const RunConfig& config) {
  const DatasetManifest manifest = load_manifest(config.manifest);
  auto predictor = make_predictor(config.predictor);
  return run_eval(config, manifest, *predictor);
}

// ---------------------------------------------------------------------------
// Report JSON

namespace detail {
inline nlohmann::json aggregates_to_json(const std::map<std::size_t, AggregateScores>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, a] : m) j[std::to_string(k)] = to_json(a);
  return j;
}
inline std::map<std::size_t, AggregateScores> aggregates_from_json(const nlohmann::json& j) {
  std::map<std::size_t, AggregateScores> m;
  for (const auto& [k, a] : j.items()) m[std::stoul(k)] = aggregate_from_json(a);
  return m;
}
}  // namespace detail

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& row : r.classes) {
    nlohmann::json per_k = nlohmann::json::object();
    for (const auto& [k, s] : row.by_prompt_count) per_k[std::to_string(k)] = to_json(s);
    classes.push_back({{"class_key", row.class_key},
                       {"dataset_id", row.dataset_id},
                       {"class_id", row.class_id},
                       {"instrument", row.instrument},
                       {"examples", row.examples},
                       {"by_prompt_count", per_k}});
  }
  nlohmann::json failures = nlohmann::json::array();
  std::map<std::string, std::size_t> by_code;
  for (const auto& f : r.failures) {
    failures.push_back({{"example_id", f.example_id},
                        {"prompt_count", f.prompt_count},
                        {"code", f.code},
                        {"message", f.message}});
    ++by_code[f.code];
  }
  return {{"format", "segbench.run_report/1"},
          {"config", to_json(r.config)},
          {"classes", std::move(classes)},
          {"aggregates", detail::aggregates_to_json(r.aggregates)},
          {"aggregates_all_classes", detail::aggregates_to_json(r.aggregates_all_classes)},
          {"failure_tally",
           {{"count", r.failures.size()}, {"by_code", by_code}, {"failures", std::move(failures)}}},
          {"example_count", r.example_count},
          {"prediction_count", r.prediction_count},
          {"failure_rate", r.failure_rate()},
          {"prompt_shortfalls", r.prompt_shortfalls},
          {"valid", r.valid},
          {"provenance",
           {{"started_at", r.provenance.started_at},
            {"finished_at", r.provenance.finished_at},
            {"tool", r.provenance.tool},
            {"predictor", r.provenance.predictor},
            {"run_seed", r.provenance.run_seed}}}};
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.config = run_config_from_json(j.at("config"));
    for (const auto& c : j.at("classes")) {
      ClassRow row;
      row.class_key = c.at("class_key").get<std::string>();
      row.dataset_id = c.at("dataset_id").get<std::string>();
      row.class_id = c.at("class_id").get<std::string>();
      row.instrument = c.at("instrument").get<bool>();
      row.examples = c.at("examples").get<std::size_t>();
      for (const auto& [k, s] : c.at("by_prompt_count").items()) {
        row.by_prompt_count[std::stoul(k)] = class_summary_from_json(s);
      }
      r.classes.push_back(std::move(row));
    }
    r.aggregates = detail::aggregates_from_json(j.at("aggregates"));
    r.aggregates_all_classes = detail::aggregates_from_json(j.at("aggregates_all_classes"));
    for (const auto& f : j.at("failure_tally").at("failures")) {
      r.failures.push_back({f.at("example_id").get<std::string>(),
                            f.at("prompt_count").get<std::size_t>(),
                            f.at("code").get<std::string>(), f.at("message").get<std::string>()});
    }
    r.example_count = j.at("example_count").get<std::size_t>();
    r.prediction_count = j.at("prediction_count").get<std::size_t>();
    r.prompt_shortfalls = j.at("prompt_shortfalls").get<std::size_t>();
    r.valid = j.at("valid").get<bool>();
    const auto& p = j.at("provenance");
    r.provenance = {p.at("started_at").get<std::string>(), p.at("finished_at").get<std::string>(),
                    p.at("tool").get<std::string>(), p.at("predictor").get<std::string>(),
                    p.at("run_seed").get<std::uint64_t>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run report: ") + e.what());
  }
}

inline RunReport load_run_report(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return run_report_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Report JSON without the timestamp fields, for byte comparisons of runs.
inline nlohmann::json without_timestamps(nlohmann::json j) {
  if (j.contains("provenance")) {
    j["provenance"].erase("started_at");
    j["provenance"].erase("finished_at");
  }
  return j;
}

inline std::string example_metrics_jsonl(const RunReport& r) {
  std::string out;
  for (const auto& [k, list] : r.example_metrics) {
    for (const auto& m : list) {
      auto j = to_json(m);
      j["prompt_count"] = k;
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace segbench
