// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// stdio predictor used by the tests. Reads one request per line and writes
// one reply per line. With --slow-first MS the first reply is delayed, and
// with --garbage the process answers with a line that is not JSON.

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

#include "mask_echo.hpp"

int main(int argc, char** argv) {
  long slow_first_ms = 0;
  bool garbage = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--slow-first") == 0 && i + 1 < argc) {
      slow_first_ms = std::atol(argv[++i]);
    } else if (std::strcmp(argv[i], "--garbage") == 0) {
      garbage = true;
    }
  }
  std::string line;
  bool first = true;
  while (std::getline(std::cin, line)) {
    if (garbage) {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (first && slow_first_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(slow_first_ms));
    }
    first = false;
    nlohmann::json reply;
    try {
      reply = segbench::testing::echo_predict(nlohmann::json::parse(line)).second;
    } catch (const nlohmann::json::parse_error& e) {
      reply = segbench::error_json("bad_request", e.what());
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
