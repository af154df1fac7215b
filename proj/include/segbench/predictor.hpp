// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Predictor wire protocol and the predictors the runner can drive:
//
//   POST /v1/predict
//     {"request_id": "...",
//      "image": {"path": "..."} | {"png_base64": "..."},
//      "prompts": {"points": [{"x": 3, "y": 2, "label": 1}, ...]}}
//   200 -> {"request_id": "...", "mask": {"size": [h, w], "counts": [...]},
//           "score": 0.93}
//   4xx/5xx -> {"error": {"code": "...", "message": "..."}}
//
// The stdio transport exchanges the same JSON bodies, one per line.
// Coordinates are zero-based, x = column, y = row.

#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "segbench/dataset.hpp"
#include "segbench/errors.hpp"
#include "segbench/image.hpp"
#include "segbench/mask.hpp"
#include "segbench/prompts.hpp"
#include "segbench/subprocess.hpp"

namespace segbench {

// ---------------------------------------------------------------------------
// Base64 for inline images

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParseError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t size = static_cast<std::size_t>(n);
  if (!text.empty() && text.back() == '=') --size;
  if (text.size() > 1 && text[text.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

// ---------------------------------------------------------------------------
// Wire messages

struct ImagePath {
  std::string path;
  friend bool operator==(const ImagePath&, const ImagePath&) = default;
};
struct InlinePng {
  std::vector<std::uint8_t> bytes;
  friend bool operator==(const InlinePng&, const InlinePng&) = default;
};
using ImageRef = std::variant<ImagePath, InlinePng>;

struct PredictRequest {
  std::string request_id;
  ImageRef image;
  PromptSet prompts;
};

struct PredictResponse {
  std::string request_id;
  RleMask mask;
  std::optional<double> score;

  friend bool operator==(const PredictResponse&, const PredictResponse&) = default;
};

inline nlohmann::json image_ref_to_json(const ImageRef& image) {
  if (const auto* p = std::get_if<ImagePath>(&image)) return {{"path", p->path}};
  return {{"png_base64", base64_encode(std::get<InlinePng>(image).bytes)}};
}

inline ImageRef image_ref_from_json(const nlohmann::json& j) {
  if (j.contains("path")) return ImagePath{j.at("path").get<std::string>()};
  if (j.contains("png_base64")) {
    return InlinePng{base64_decode(j.at("png_base64").get<std::string>())};
  }
  throw ParseError("image must carry \"path\" or \"png_base64\"");
}

inline nlohmann::json to_json(const PredictRequest& r) {
  return {{"request_id", r.request_id},
          {"image", image_ref_to_json(r.image)},
          {"prompts", to_json(r.prompts)}};
}

inline PredictRequest predict_request_from_json(const nlohmann::json& j) {
  try {
    return {j.at("request_id").get<std::string>(), image_ref_from_json(j.at("image")),
            prompt_set_from_json(j.at("prompts"))};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed predict request: ") + e.what());
  }
}

inline nlohmann::json to_json(const PredictResponse& r) {
  nlohmann::json j{{"request_id", r.request_id}, {"mask", rle_to_json(r.mask)}};
  if (r.score) j["score"] = *r.score;
  return j;
}

inline nlohmann::json error_json(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

/// Raises ServerError when the body carries an error payload.
inline void throw_if_error_payload(const nlohmann::json& j, int http_status = 0) {
  if (j.is_object() && j.contains("error")) {
    const auto& e = j.at("error");
    throw ServerError(e.value("code", std::string{"unknown"}),
                      e.value("message", std::string{}), http_status);
  }
}

inline PredictResponse predict_response_from_json(const nlohmann::json& j,
                                                  int http_status = 0) {
  throw_if_error_payload(j, http_status);
  try {
    PredictResponse r;
    r.request_id = j.at("request_id").get<std::string>();
    r.mask = rle_from_json(j.at("mask"));
    if (j.contains("score") && !j.at("score").is_null()) {
      r.score = j.at("score").get<double>();
      if (*r.score < 0.0 || *r.score > 1.0) {
        throw ProtocolError("score " + std::to_string(*r.score) + " outside [0, 1]");
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed predict response: ") + e.what());
  } catch (const ParseError& e) {
    throw ProtocolError(e.what());
  }
}

/// Points must be inside a height x width image.
inline void check_prompts_in_bounds(const PromptSet& prompts, std::size_t height,
                                    std::size_t width) {
  for (const auto& p : prompts.points) {
    if (p.x >= width || p.y >= height) {
      throw DomainError("prompt (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") outside " + std::to_string(height) + "x" +
                        std::to_string(width) + " image");
    }
  }
}

/// Client-side contract checks; returns the decoded mask.
inline BinaryMask validate_response(const PredictRequest& request,
                                    const PredictResponse& response,
                                    std::size_t height, std::size_t width) {
  if (response.request_id != request.request_id) {
    throw ProtocolError("response id '" + response.request_id + "' does not match request '" +
                        request.request_id + "'");
  }
  if (response.mask.height != height || response.mask.width != width) {
    throw ProtocolError("mask is " + std::to_string(response.mask.height) + "x" +
                        std::to_string(response.mask.width) + ", image is " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
  try {
    return decode_rle(response.mask);
  } catch (const Error& e) {
    throw ProtocolError(std::string("undecodable mask: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Oracle perturbations

enum class PerturbationKind { none, dilate, erode, translate };

inline std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::none: return "none";
    case PerturbationKind::dilate: return "dilate";
    case PerturbationKind::erode: return "erode";
    case PerturbationKind::translate: return "translate";
  }
  return "none";
}

inline PerturbationKind perturbation_kind_from_string(const std::string& s) {
  if (s == "none") return PerturbationKind::none;
  if (s == "dilate") return PerturbationKind::dilate;
  if (s == "erode") return PerturbationKind::erode;
  if (s == "translate") return PerturbationKind::translate;
  throw ConfigError("unknown perturbation '" + s + "'");
}

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::none;
  std::size_t magnitude = 0;

  PerturbationSpec() = default;
  PerturbationSpec(PerturbationKind k, std::size_t m) : kind(k), magnitude(m) {
    if (k == PerturbationKind::none && m != 0) {
      throw ConfigError("perturbation 'none' must have magnitude 0");
    }
  }

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

namespace detail {

// Separable square-window max (dilate) or min (erode) with radius r. Pixels
// outside the image count as background for both.
inline BinaryMask square_filter(const BinaryMask& in, std::size_t r, bool dilate) {
  const std::size_t h = in.height(), w = in.width();
  std::vector<std::uint8_t> a = in.to_bytes();
  std::vector<std::uint8_t> b(a.size());
  auto window = [&](const std::vector<std::uint8_t>& src, std::vector<std::uint8_t>& dst,
                    bool horizontal) {
    const std::size_t lines = horizontal ? h : w;
    const std::size_t len = horizontal ? w : h;
    for (std::size_t line = 0; line < lines; ++line) {
      auto at = [&](std::size_t i) {
        return horizontal ? src[line * w + i] : src[i * w + line];
      };
      // prefix sums give O(1) window counts
      std::vector<std::size_t> prefix(len + 1, 0);
      for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + at(i);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i >= r ? i - r : 0;
        const std::size_t hi = std::min(len - 1, i + r);
        const std::size_t count = prefix[hi + 1] - prefix[lo];
        const std::uint8_t v =
            dilate ? (count > 0) : (count == 2 * r + 1);  // window clipped => erode to 0
        if (horizontal) {
          dst[line * w + i] = v;
        } else {
          dst[i * w + line] = v;
        }
      }
    }
  };
  window(a, b, true);
  window(b, a, false);
  return BinaryMask::from_bytes(h, w, a);
}

}  // namespace detail

inline BinaryMask dilate(const BinaryMask& mask, std::size_t radius) {
  if (radius == 0) return mask;
  return detail::square_filter(mask, radius, true);
}

inline BinaryMask erode(const BinaryMask& mask, std::size_t radius) {
  if (radius == 0) return mask;
  return detail::square_filter(mask, radius, false);
}

/// Shifts right by `columns` (negative: left); vacated pixels are background.
inline BinaryMask translate(const BinaryMask& mask, long columns, long rows = 0) {
  BinaryMask out(mask.height(), mask.width());
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      if (!mask.get(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
      const long nr = r + rows, nc = c + columns;
      if (nr >= 0 && nr < h && nc >= 0 && nc < w) {
        out.set(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
      }
    }
  }
  return out;
}

inline BinaryMask oracle_predict(const BinaryMask& gt, const PerturbationSpec& spec) {
  switch (spec.kind) {
    case PerturbationKind::none: return gt;
    case PerturbationKind::dilate: return dilate(gt, spec.magnitude);
    case PerturbationKind::erode: return erode(gt, spec.magnitude);
    case PerturbationKind::translate:
      return translate(gt, static_cast<long>(spec.magnitude));
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Predictors

/// What an in-process predictor may know about the example beyond the wire
/// request. Remote predictors only see the request.
struct ExampleContext {
  const SampleRecord& record;
  std::filesystem::path image_path;
  const BinaryMask& ground_truth;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Returns a mask with the ground truth's dimensions or throws a
  /// PredictorError subclass. Must be safe to call concurrently.
  virtual BinaryMask predict(const PredictRequest& request, const ExampleContext& ctx) = 0;
  virtual std::string name() const = 0;
  /// Whether requests should carry inline image bytes instead of a path.
  virtual bool wants_inline_images() const { return false; }
};

class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(PerturbationSpec spec = {}) : spec_(spec) {}

  BinaryMask predict(const PredictRequest&, const ExampleContext& ctx) override {
    return oracle_predict(ctx.ground_truth, spec_);
  }
  std::string name() const override {
    return "oracle:" + to_string(spec_.kind) + ":" + std::to_string(spec_.magnitude);
  }

 private:
  PerturbationSpec spec_;
};

/// Precomputed predictions at <dir>/<dataset>/<class>/<image stem>.png.
inline BinaryMask stub_predict(const std::filesystem::path& prediction_dir,
                               const std::string& dataset_id, const std::string& image_id,
                               const std::string& class_id, std::uint8_t threshold = 128) {
  const auto path = prediction_dir / dataset_id / class_id /
                    (std::filesystem::path(image_id).stem().string() + ".png");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError&) {
    throw ExampleFailure("missing_prediction", "no prediction at " + path.string());
  }
  try {
    return decode_mask(bytes, threshold);
  } catch (const Error& e) {
    throw ExampleFailure("corrupt_prediction", path.string() + ": " + e.what());
  }
}

class StubPredictor : public Predictor {
 public:
  explicit StubPredictor(std::filesystem::path dir) : dir_(std::move(dir)) {}

  BinaryMask predict(const PredictRequest&, const ExampleContext& ctx) override {
    BinaryMask mask =
        stub_predict(dir_, ctx.record.dataset_id, ctx.record.image_ref, ctx.record.class_id);
    if (!mask.same_shape(ctx.ground_truth)) {
      throw ExampleFailure("size_mismatch", "stub prediction size differs from ground truth");
    }
    return mask;
  }
  std::string name() const override { return "stub:" + dir_.string(); }

 private:
  std::filesystem::path dir_;
};

/// Bounded retries for transport failures. Attempt k (0-based) sleeps
/// backoff * 2^k before retrying; only TransportError is retried.
struct RetryPolicy {
  std::size_t max_retries = 3;
  std::chrono::milliseconds backoff{50};
};

template <class Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy.max_retries) throw;
      std::this_thread::sleep_for(policy.backoff * (1u << std::min<std::size_t>(attempt, 16)));
    }
  }
}

struct ClientOptions {
  std::chrono::milliseconds timeout{30'000};
  RetryPolicy retry;
  bool inline_images = false;
};

/// POSTs `body` to endpoint+path and returns (status, parsed body). Transport
/// failures and 503 raise TransportError; non-JSON bodies raise
/// ProtocolError.
inline std::pair<int, nlohmann::json> post_json(const std::string& endpoint,
                                                const std::string& path,
                                                const nlohmann::json& body,
                                                const ClientOptions& options) {
  httplib::Client client(endpoint);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError(endpoint + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 503) throw TransportError(endpoint + path + ": 503 unavailable");
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(endpoint + path + ": response is not JSON (" + e.what() + ")");
  }
  return {res->status, std::move(parsed)};
}

class HttpPredictor : public Predictor {
 public:
  HttpPredictor(std::string endpoint, ClientOptions options = {})
      : endpoint_(std::move(endpoint)), options_(options) {}

  PredictResponse send(const PredictRequest& request) const {
    const nlohmann::json body = to_json(request);
    return with_retries(options_.retry, [&] {
      auto [status, json] = post_json(endpoint_, "/v1/predict", body, options_);
      if (status != 200) {
        throw_if_error_payload(json, status);
        throw ProtocolError("HTTP " + std::to_string(status) + " without error payload");
      }
      return predict_response_from_json(json, status);
    });
  }

  BinaryMask predict(const PredictRequest& request, const ExampleContext& ctx) override {
    return validate_response(request, send(request), ctx.ground_truth.height(),
                             ctx.ground_truth.width());
  }
  std::string name() const override { return "http:" + endpoint_; }
  bool wants_inline_images() const override { return options_.inline_images; }

 private:
  std::string endpoint_;
  ClientOptions options_;
};

/// Subprocess speaking one JSON message per line on stdin/stdout. Requests
/// are serialized; replies to requests abandoned after a timeout are
/// skipped when they arrive late.
class StdioPredictor : public Predictor {
 public:
  StdioPredictor(std::vector<std::string> command, ClientOptions options = {})
      : command_(std::move(command)), options_(options) {}

  PredictResponse send(const PredictRequest& request) {
    const std::string line = to_json(request).dump();
    std::lock_guard lock(mutex_);
    return with_retries(options_.retry, [&] {
      if (!process_) process_ = std::make_unique<Subprocess>(command_);
      try {
        process_->write_line(line);
        for (;;) {
          auto reply = process_->read_line(options_.timeout);
          if (!reply) {
            abandoned_.insert(request.request_id);
            throw TransportError("stdio predictor timed out on " + request.request_id);
          }
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(*reply);
          } catch (const nlohmann::json::parse_error& e) {
            throw ProtocolError(std::string("stdio reply is not JSON: ") + e.what());
          }
          const std::string id = j.value("request_id", std::string{});
          if (id != request.request_id && abandoned_.erase(id) > 0) continue;
          return predict_response_from_json(j);
        }
      } catch (const TransportError&) {
        if (!abandoned_.contains(request.request_id)) process_.reset();
        throw;
      }
    });
  }

  BinaryMask predict(const PredictRequest& request, const ExampleContext& ctx) override {
    return validate_response(request, send(request), ctx.ground_truth.height(),
                             ctx.ground_truth.width());
  }
  std::string name() const override {
    return "stdio:" + (command_.empty() ? std::string{} : command_.front());
  }
  bool wants_inline_images() const override { return options_.inline_images; }

 private:
  std::vector<std::string> command_;
  ClientOptions options_;
  std::mutex mutex_;
  std::unique_ptr<Subprocess> process_;
  std::set<std::string> abandoned_;
};

}  // namespace segbench
