// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 runtime error,
// 2 invalid run (failure rate above threshold), 3 configuration error.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "segbench/dataset.hpp"
#include "segbench/reference.hpp"
#include "segbench/report.hpp"
#include "segbench/runner.hpp"
#include "segbench/synthetic.hpp"
#include "segbench/video.hpp"

namespace sb = segbench;
namespace fs = std::filesystem;

namespace {

constexpr int kInvalidRun = 2;
constexpr int kConfigError = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    if (end > start) out.push_back(text.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  sb::write_text(path, j.dump(2) + "\n");
}

int cmd_ingest(const fs::path& manifest_path, std::size_t min_area, const fs::path& out,
               const fs::path& kept_manifest) {
  auto manifest = sb::load_manifest(manifest_path);
  const auto qc = sb::apply_qc(manifest, min_area);
  write_json(out, sb::to_json(qc));
  if (!kept_manifest.empty()) {
    manifest.records = qc.kept;
    sb::write_manifest(kept_manifest, manifest);
  }
  std::printf("kept %zu, rejected %zu\n", qc.kept.size(), qc.rejected.size());
  return 0;
}

int cmd_split(const fs::path& manifest_path, std::uint64_t seed, const fs::path& out) {
  const auto split = sb::split_patientwise(sb::load_manifest(manifest_path), seed);
  sb::write_records_jsonl(out, split.records);
  for (const auto& s : sb::summarize_split(split)) {
    std::printf("%s: patients %zu/%zu/%zu, records %zu/%zu/%zu\n", s.dataset_id.c_str(),
                s.patients[0], s.patients[1], s.patients[2], s.records[0], s.records[1],
                s.records[2]);
  }
  return 0;
}

int cmd_subset(const fs::path& manifest_path, const std::string& classes, std::size_t per_class,
               std::uint64_t seed, const fs::path& out) {
  const auto subset = sb::select_training_subset(sb::load_manifest(manifest_path),
                                                 split_list(classes), per_class, seed);
  sb::write_records_jsonl(out, subset.records);
  std::printf("selected %zu records\n", subset.records.size());
  for (const auto& [cls, missing] : subset.shortfall) {
    std::printf("shortfall %s: %zu\n", cls.c_str(), missing);
  }
  return 0;
}

int cmd_eval(const fs::path& config_path, const fs::path& out, const fs::path& metrics_out) {
  const auto config = sb::load_run_config(config_path);
  const auto report = sb::run_eval(config);
  write_json(out, sb::to_json(report));
  if (!metrics_out.empty()) sb::write_text(metrics_out, sb::example_metrics_jsonl(report));
  for (const auto& [k, a] : report.aggregates) {
    std::printf("k=%zu WMDC %.4f MDC %.4f\n", k, a.wmdc, a.mdc);
  }
  std::printf("failures %zu of %zu predictions\n", report.failures.size(),
              report.prediction_count);
  if (!report.valid) {
    std::fprintf(stderr, "run invalid: failure rate %.4f above threshold %.4f\n",
                 report.failure_rate(), report.config.failure_threshold);
    return kInvalidRun;
  }
  return 0;
}

int cmd_compare(const fs::path& report_path, const fs::path& reference_path, std::size_t k,
                const fs::path& out) {
  const auto comparison = sb::compare_to_reference(
      sb::load_run_report(report_path), sb::load_reference_table(reference_path), k);
  std::cout << sb::render_comparison_markdown(comparison);
  if (!out.empty()) write_json(out, sb::to_json(comparison));
  return 0;
}

int cmd_report(const fs::path& in, const std::string& formats, fs::path prefix,
               std::optional<double> baseline) {
  if (prefix.empty()) prefix = fs::path(in).replace_extension();
  sb::RenderOptions options;
  options.baseline_wmdc = baseline;
  for (const auto& p : sb::render_report(sb::load_run_report(in), split_list(formats), prefix, options)) {
    std::printf("wrote %s\n", p.string().c_str());
  }
  return 0;
}

int cmd_select_best(const std::vector<fs::path>& paths, const fs::path& series_csv) {
  std::vector<sb::RunReport> reports;
  for (const auto& p : paths) reports.push_back(sb::load_run_report(p));
  const auto best = sb::select_best_checkpoint(reports);
  std::printf("best: %s (data scale %s, checkpoint %s) WMDC %.4f at k=%zu\n",
              paths[best.index].string().c_str(), best.data_scale.c_str(),
              best.checkpoint.c_str(), best.wmdc, best.prompt_count);
  if (!series_csv.empty()) sb::write_text(series_csv, sb::render_scale_series_csv(reports));
  return 0;
}

int cmd_video_eval(const fs::path& clips_path, const std::string& prompts, const fs::path& out,
                   const std::string& tracker_name, const std::string& endpoint,
                   std::uint64_t seed, std::size_t concurrency, bool exclude_frame0) {
  std::unique_ptr<sb::Tracker> tracker;
  if (!endpoint.empty()) {
    tracker = std::make_unique<sb::HttpTracker>(endpoint);
  } else if (tracker_name == "echo") {
    tracker = std::make_unique<sb::EchoTracker>();
  } else if (tracker_name == "frozen") {
    tracker = std::make_unique<sb::FrozenTracker>();
  } else {
    throw sb::ConfigError("video-eval needs --endpoint or --tracker echo|frozen");
  }
  const auto report = sb::run_video_eval(sb::load_clips_jsonl(clips_path),
                                         sb::parse_prompt_counts(prompts), seed, *tracker,
                                         concurrency, !exclude_frame0);
  write_json(out, sb::to_json(report));
  for (const auto& c : report.classes) {
    std::printf("%s k=%zu frames %zu Dice %.4f (clip-weighted %.4f)\n", c.class_id.c_str(),
                c.prompt_count, c.frames, c.frame_weighted, c.clip_weighted);
  }
  std::printf("failures %zu\n", report.failures.size());
  return 0;
}

int cmd_synth(const fs::path& out, std::size_t images_per_class, std::uint64_t seed) {
  sb::SyntheticOptions o;
  o.images_per_class = images_per_class;
  o.seed = seed;
  const auto header = sb::write_synthetic_dataset(out, o);
  std::printf("wrote %s\n", header.string().c_str());

  // One static and one translating clip, with refs relative to the manifest.
  const fs::path clip_dir = out / "clips";
  std::string jsonl;
  for (auto clip : {sb::write_clip(clip_dir, "static", "liver", sb::static_block_masks(4)),
                    sb::write_clip(clip_dir, "moving", "liver", sb::translating_block_masks(3))}) {
    for (auto& f : clip.frames) f = fs::relative(f, clip_dir);
    for (auto& m : clip.masks) m = fs::relative(m, clip_dir);
    jsonl += sb::to_json(clip).dump() + "\n";
  }
  sb::write_text(clip_dir / "clips.jsonl", jsonl);
  std::printf("wrote %s\n", (clip_dir / "clips.jsonl").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segbench: promptable segmentation benchmark harness"};
  app.require_subcommand(1);

  fs::path manifest, out, kept, config, metrics_out, report_in, reference, prefix, clips,
      series_csv;
  std::size_t min_area = 50, prompt_k = 10, per_class = 50, concurrency = 4, images = 20;
  std::uint64_t seed = 0;
  std::string classes, formats = "md,csv", prompts = "1..10", tracker = "echo", endpoint;
  std::optional<double> baseline;
  std::vector<fs::path> reports;
  bool exclude_frame0 = false;

  auto* ingest = app.add_subcommand("ingest", "Run mask QC over a manifest");
  ingest->alias("qc");
  ingest->add_option("--manifest", manifest, "Manifest header JSON")->required();
  ingest->add_option("--qc-min-area", min_area, "Minimum mask area where enabled");
  ingest->add_option("--out", out, "QC report JSON")->required();
  ingest->add_option("--kept-manifest", kept, "Write a manifest of kept records here");

  auto* split = app.add_subcommand("split", "Patient-wise train/val/test split");
  split->add_option("--manifest", manifest)->required();
  split->add_option("--seed", seed);
  split->add_option("--out", out, "Records JSONL with splits")->required();

  auto* subset = app.add_subcommand("subset", "Per-class training subset");
  subset->add_option("--manifest", manifest)->required();
  subset->add_option("--classes", classes, "Comma-separated class ids")->required();
  subset->add_option("--per-class", per_class);
  subset->add_option("--seed", seed);
  subset->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Run a prompt-count sweep");
  eval->add_option("--config", config, "Run config TOML")->required();
  eval->add_option("--out", out, "Report JSON")->required();
  eval->add_option("--metrics-out", metrics_out, "Per-example metrics JSONL");

  auto* compare = app.add_subcommand("compare", "Compare a report against reference scores");
  compare->add_option("--report", report_in)->required();
  compare->add_option("--reference", reference)->required();
  compare->add_option("--prompts", prompt_k);
  compare->add_option("--out", out, "Comparison JSON");

  auto* report = app.add_subcommand("report", "Render a report");
  report->add_option("--in", report_in)->required();
  report->add_option("--format", formats, "Comma-separated: md, csv, json");
  report->add_option("--prefix", prefix, "Output path without extension");
  report->add_option("--baseline-wmdc", baseline, "Print relative improvement over this WMDC");

  auto* select = app.add_subcommand("select-best", "Pick the best checkpoint among reports");
  select->add_option("--reports", reports)->required()->expected(1, -1);
  select->add_option("--series-csv", series_csv);

  auto* video = app.add_subcommand("video-eval", "Score mask propagation on clips");
  video->add_option("--clips", clips, "Clip manifest JSONL")->required();
  video->add_option("--prompts", prompts, "Prompt counts, e.g. 1..10 or 1,4,10");
  video->add_option("--out", out)->required();
  video->add_option("--endpoint", endpoint, "Tracking server base URL");
  video->add_option("--tracker", tracker, "In-process tracker when no endpoint: echo|frozen");
  video->add_option("--seed", seed);
  video->add_option("--concurrency", concurrency);
  video->add_flag("--exclude-frame0", exclude_frame0);

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and clip manifest");
  synth->add_option("--out", out)->required();
  synth->add_option("--images-per-class", images);
  synth->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*ingest) return cmd_ingest(manifest, min_area, out, kept);
    if (*split) return cmd_split(manifest, seed, out);
    if (*subset) return cmd_subset(manifest, classes, per_class, seed, out);
    if (*eval) return cmd_eval(config, out, metrics_out);
    if (*compare) return cmd_compare(report_in, reference, prompt_k, out);
    if (*report) return cmd_report(report_in, formats, prefix, baseline);
    if (*select) return cmd_select_best(reports, series_csv);
    if (*video) {
      return cmd_video_eval(clips, prompts, out, tracker, endpoint, seed, concurrency,
                            exclude_frame0);
    }
    if (*synth) return cmd_synth(out, images, seed);
  } catch (const sb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
