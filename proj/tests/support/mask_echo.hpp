// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// A model stand-in for protocol tests: the "prediction" is the request
// image thresholded at 128, which for the synthetic images equals the
// ground truth.

#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/image.hpp"
#include "segbench/mask.hpp"
#include "segbench/predictor.hpp"

namespace segbench::testing {

inline std::pair<int, nlohmann::json> echo_predict(const nlohmann::json& body) {
  PredictRequest request;
  try {
    request = predict_request_from_json(body);
  } catch (const Error& e) {
    return {400, error_json("bad_request", e.what())};
  }
  BinaryMask mask(1, 1);
  try {
    if (const auto* p = std::get_if<ImagePath>(&request.image)) {
      mask = binarize(decode_png(read_file(p->path)));
    } else {
      mask = binarize(decode_png(std::get<InlinePng>(request.image).bytes));
    }
  } catch (const Error& e) {
    return {400, error_json("unreadable_image", e.what())};
  }
  try {
    check_prompts_in_bounds(request.prompts, mask.height(), mask.width());
  } catch (const Error& e) {
    return {400, error_json("bad_prompt", e.what())};
  }
  return {200, to_json(PredictResponse{request.request_id, encode_rle(mask), 1.0})};
}

inline std::pair<int, nlohmann::json> echo_track(const nlohmann::json& body) {
  try {
    nlohmann::json masks = nlohmann::json::array();
    for (const auto& f : body.at("frames")) {
      masks.push_back(rle_to_json(encode_rle(binarize(decode_png(read_file(f.get<std::string>()))))));
    }
    return {200, {{"request_id", body.at("request_id")}, {"masks", masks}}};
  } catch (const nlohmann::json::exception& e) {
    return {400, error_json("bad_request", e.what())};
  } catch (const Error& e) {
    return {400, error_json("unreadable_image", e.what())};
  }
}

}  // namespace segbench::testing
