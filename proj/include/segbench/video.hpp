// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Mask propagation scoring on short clips. Frame 0 is prompted with points
// sampled from its ground truth, a tracker returns one mask per frame, and
// every frame is scored with Dice.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"
#include "segbench/image.hpp"
#include "segbench/mask.hpp"
#include "segbench/metrics.hpp"
#include "segbench/parallel.hpp"
#include "segbench/predictor.hpp"
#include "segbench/prompts.hpp"

namespace segbench {

struct ClipRecord {
  std::string clip_id;
  std::string class_id;
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> masks;
  double fps = 0.0;  // metadata only

  void validate() const {
    if (clip_id.empty()) throw FormatError("clip without clip_id");
    if (frames.size() < 2) throw FormatError("clip " + clip_id + " has fewer than 2 frames");
    if (frames.size() != masks.size()) {
      throw FormatError("clip " + clip_id + " has " + std::to_string(frames.size()) +
                        " frames but " + std::to_string(masks.size()) + " masks");
    }
  }
};

inline nlohmann::json to_json(const ClipRecord& c) {
  nlohmann::json frames = nlohmann::json::array(), masks = nlohmann::json::array();
  for (const auto& f : c.frames) frames.push_back(f.generic_string());
  for (const auto& m : c.masks) masks.push_back(m.generic_string());
  return {{"clip_id", c.clip_id}, {"class_id", c.class_id}, {"frames", frames},
          {"masks", masks},       {"fps", c.fps}};
}

/// Relative frame and mask refs are resolved against `base_dir`.
inline ClipRecord clip_record_from_json(const nlohmann::json& j,
                                        const std::filesystem::path& base_dir = {}) {
  ClipRecord c;
  try {
    c.clip_id = j.at("clip_id").get<std::string>();
    c.class_id = j.at("class_id").get<std::string>();
    auto resolve = [&](const std::string& ref) {
      std::filesystem::path p(ref);
      return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    for (const auto& f : j.at("frames")) c.frames.push_back(resolve(f.get<std::string>()));
    for (const auto& m : j.at("masks")) c.masks.push_back(resolve(m.get<std::string>()));
    c.fps = j.value("fps", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed clip record: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::vector<ClipRecord> load_clips_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ClipRecord> clips;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      clips.push_back(clip_record_from_json(nlohmann::json::parse(line), path.parent_path()));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return clips;
}

enum class PromptKind { points, mask };

inline std::string to_string(PromptKind k) { return k == PromptKind::points ? "points" : "mask"; }

struct TrackRequest {
  std::string request_id;
  std::vector<std::filesystem::path> frames;
  PromptSet prompts;  // on frame 0
};

inline nlohmann::json to_json(const TrackRequest& r) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.frames) frames.push_back(f.generic_string());
  return {{"request_id", r.request_id}, {"frames", frames}, {"prompts", to_json(r.prompts)}};
}

/// Ground truth is passed alongside so in-process trackers can answer
/// without a model; remote trackers ignore it.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual std::vector<BinaryMask> track(const TrackRequest& request,
                                        const std::vector<BinaryMask>& ground_truth) = 0;
  virtual std::string name() const = 0;
};

class EchoTracker : public Tracker {
 public:
  std::vector<BinaryMask> track(const TrackRequest&,
                                const std::vector<BinaryMask>& gt) override {
    return gt;
  }
  std::string name() const override { return "echo"; }
};

/// Repeats the frame-0 ground truth on every frame.
class FrozenTracker : public Tracker {
 public:
  std::vector<BinaryMask> track(const TrackRequest&,
                                const std::vector<BinaryMask>& gt) override {
    return std::vector<BinaryMask>(gt.size(), gt.front());
  }
  std::string name() const override { return "frozen"; }
};

class HttpTracker : public Tracker {
 public:
  explicit HttpTracker(std::string endpoint, ClientOptions options = {})
      : endpoint_(std::move(endpoint)), options_(options) {}

  std::vector<BinaryMask> track(const TrackRequest& request,
                                const std::vector<BinaryMask>& gt) override {
    const nlohmann::json body = to_json(request);
    const nlohmann::json reply = with_retries(options_.retry, [&] {
      auto [status, json] = post_json(endpoint_, "/v1/track", body, options_);
      if (status != 200) {
        throw_if_error_payload(json, status);
        throw ProtocolError("HTTP " + std::to_string(status) + " without error payload");
      }
      return json;
    });
    std::vector<BinaryMask> masks;
    try {
      if (reply.value("request_id", request.request_id) != request.request_id) {
        throw ProtocolError("track reply request_id mismatch");
      }
      for (const auto& m : reply.at("masks")) masks.push_back(decode_rle(rle_from_json(m)));
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed track reply: ") + e.what());
    } catch (const CorruptionError& e) {
      throw ProtocolError(std::string("corrupt mask in track reply: ") + e.what());
    }
    if (masks.size() != gt.size()) {
      throw ProtocolError("track reply has " + std::to_string(masks.size()) + " masks for " +
                          std::to_string(gt.size()) + " frames");
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (!masks[i].same_shape(gt[i])) {
        throw ProtocolError("track reply mask " + std::to_string(i) + " has the wrong size");
      }
    }
    return masks;
  }
  std::string name() const override { return "http:" + endpoint_; }

 private:
  std::string endpoint_;
  ClientOptions options_;
};

struct ClipScore {
  std::string clip_id;
  std::string class_id;
  std::vector<double> dice;  // one per scored frame
  double mean = 0.0;
  std::size_t prompt_count = 0;
  PromptKind prompt_kind = PromptKind::points;
};

/// Scores one clip. With include_frame0 off, frame 0 is dropped from the
/// per-frame list (it is still prompted).
inline ClipScore score_clip(const ClipRecord& clip, const std::vector<BinaryMask>& gt,
                            std::size_t prompt_count, std::uint64_t run_seed, Tracker& tracker,
                            bool include_frame0 = true) {
  if (gt.size() != clip.frames.size()) throw DomainError("ground truth count != frame count");
  const std::uint64_t seed = derive_seed(run_seed, "video", clip.clip_id, clip.class_id);
  TrackRequest request{clip.clip_id + "#k" + std::to_string(prompt_count), clip.frames,
                       sample_points(gt.front(), prompt_count, seed)};
  const auto predicted = tracker.track(request, gt);
  if (predicted.size() != gt.size()) {
    throw ProtocolError("tracker returned " + std::to_string(predicted.size()) + " masks for " +
                        std::to_string(gt.size()) + " frames");
  }
  ClipScore s{clip.clip_id, clip.class_id, {}, 0.0, prompt_count, PromptKind::points};
  for (std::size_t f = include_frame0 ? 0 : 1; f < gt.size(); ++f) {
    s.dice.push_back(dice(pixel_counts(predicted[f], gt[f])));
  }
  double sum = 0.0;
  for (double d : s.dice) sum += d;
  s.mean = s.dice.empty() ? 0.0 : sum / static_cast<double>(s.dice.size());
  return s;
}

inline std::vector<BinaryMask> load_clip_masks(const ClipRecord& clip) {
  std::vector<BinaryMask> gt;
  gt.reserve(clip.masks.size());
  for (const auto& m : clip.masks) gt.push_back(load_mask(m));
  return gt;
}

inline ClipScore run_clip(const ClipRecord& clip, std::size_t prompt_count,
                          std::uint64_t run_seed, Tracker& tracker, bool include_frame0 = true) {
  clip.validate();
  return score_clip(clip, load_clip_masks(clip), prompt_count, run_seed, tracker, include_frame0);
}

struct ClassClipSummary {
  std::string class_id;
  std::size_t prompt_count = 0;
  std::size_t clips = 0;
  std::size_t frames = 0;
  double frame_weighted = 0.0;
  double clip_weighted = 0.0;
};

/// Per (class, prompt count) means; the result is sorted by key, so input
/// order does not matter.
inline std::vector<ClassClipSummary> aggregate_clips(const std::vector<ClipScore>& scores) {
  if (scores.empty()) throw EmptyAggregateError("no clip scores to aggregate");
  std::vector<const ClipScore*> sorted;
  for (const auto& s : scores) sorted.push_back(&s);
  // Summation order is fixed so results are bit-identical under reordering.
  std::sort(sorted.begin(), sorted.end(), [](const ClipScore* a, const ClipScore* b) {
    return std::tie(a->class_id, a->prompt_count, a->clip_id) <
           std::tie(b->class_id, b->prompt_count, b->clip_id);
  });
  std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> sums;
  std::map<std::pair<std::string, std::size_t>, ClassClipSummary> out;
  for (const ClipScore* s : sorted) {
    const auto key = std::make_pair(s->class_id, s->prompt_count);
    auto& row = out[key];
    row.class_id = s->class_id;
    row.prompt_count = s->prompt_count;
    ++row.clips;
    row.frames += s->dice.size();
    for (double d : s->dice) sums[key].first += d;
    sums[key].second += s->mean;
  }
  std::vector<ClassClipSummary> rows;
  for (auto& [key, row] : out) {
    row.frame_weighted = row.frames == 0 ? 0.0 : sums[key].first / static_cast<double>(row.frames);
    row.clip_weighted = sums[key].second / static_cast<double>(row.clips);
    rows.push_back(row);
  }
  return rows;
}

struct ClipFailure {
  std::string clip_id;
  std::size_t prompt_count = 0;
  std::string code;
  std::string message;
};

struct VideoReport {
  std::vector<std::size_t> prompt_counts;
  std::uint64_t run_seed = 0;
  std::string tracker;
  bool include_frame0 = true;
  std::vector<ClipScore> clips;  // sorted by (clip_id, prompt_count)
  std::vector<ClassClipSummary> classes;
  std::vector<ClipFailure> failures;
};

/// Clips run in parallel; each clip walks the prompt counts in order.
/// Failing clips are recorded and the run continues.
inline VideoReport run_video_eval(const std::vector<ClipRecord>& clips,
                                  const std::vector<std::size_t>& prompt_counts,
                                  std::uint64_t run_seed, Tracker& tracker,
                                  std::size_t concurrency = 4, bool include_frame0 = true) {
  struct Slot {
    std::vector<ClipScore> scores;
    std::vector<ClipFailure> failures;
  };
  std::vector<Slot> slots(clips.size());
  parallel_for(clips.size(), concurrency, [&](std::size_t i) {
    const auto& clip = clips[i];
    std::vector<BinaryMask> gt;
    try {
      clip.validate();
      gt = load_clip_masks(clip);
    } catch (const Error& e) {
      for (auto k : prompt_counts) slots[i].failures.push_back({clip.clip_id, k, "unreadable_clip", e.what()});
      return;
    }
    for (auto k : prompt_counts) {
      try {
        slots[i].scores.push_back(score_clip(clip, gt, k, run_seed, tracker, include_frame0));
      } catch (const PredictorError& e) {
        slots[i].failures.push_back({clip.clip_id, k, e.code(), e.what()});
      } catch (const EmptyPoolError& e) {
        slots[i].failures.push_back({clip.clip_id, k, "empty_pool", e.what()});
      } catch (const Error& e) {
        slots[i].failures.push_back({clip.clip_id, k, "error", e.what()});
      }
    }
  });
  VideoReport report{prompt_counts, run_seed, tracker.name(), include_frame0, {}, {}, {}};
  for (auto& slot : slots) {
    for (auto& s : slot.scores) report.clips.push_back(std::move(s));
    for (auto& f : slot.failures) report.failures.push_back(std::move(f));
  }
  auto by_clip = [](const auto& a, const auto& b) {
    return std::tie(a.clip_id, a.prompt_count) < std::tie(b.clip_id, b.prompt_count);
  };
  std::stable_sort(report.clips.begin(), report.clips.end(), by_clip);
  std::stable_sort(report.failures.begin(), report.failures.end(), by_clip);
  if (!report.clips.empty()) report.classes = aggregate_clips(report.clips);
  return report;
}

inline nlohmann::json to_json(const VideoReport& r) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : r.clips) {
    clips.push_back({{"clip_id", c.clip_id},
                     {"class_id", c.class_id},
                     {"prompt_count", c.prompt_count},
                     {"prompt_kind", to_string(c.prompt_kind)},
                     {"dice", c.dice},
                     {"mean", c.mean}});
  }
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& s : r.classes) {
    classes.push_back({{"class_id", s.class_id},
                       {"prompt_count", s.prompt_count},
                       {"clips", s.clips},
                       {"frames", s.frames},
                       {"frame_weighted_dice", s.frame_weighted},
                       {"clip_weighted_dice", s.clip_weighted}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"clip_id", f.clip_id},
                        {"prompt_count", f.prompt_count},
                        {"code", f.code},
                        {"message", f.message}});
  }
  return {{"format", "segbench.video_report/1"},
          {"prompt_counts", r.prompt_counts},
          {"run_seed", r.run_seed},
          {"tracker", r.tracker},
          {"include_frame0", r.include_frame0},
          {"clips", clips},
          {"classes", classes},
          {"failures", failures}};
}

}  // namespace segbench
