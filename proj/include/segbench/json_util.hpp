// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"

namespace segbench {

/// Member `key` of `j` if present, else a shared empty object. Returns a
/// reference, so it is safe to iterate `.items()` of the result in a
/// range-for (unlike `j.value(key, json::object())`, which is a temporary).
inline const nlohmann::json& member_or_empty(const nlohmann::json& j, const std::string& key) {
  static const nlohmann::json empty = nlohmann::json::object();
  const auto it = j.find(key);
  return it == j.end() ? empty : *it;
}

/// Non-negative integer member; nlohmann would otherwise wrap -1 around to
/// SIZE_MAX on get<std::size_t>().
inline std::size_t unsigned_at(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw ParseError("\"" + key + "\" must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace segbench
