// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "segbench/metrics.hpp"
#include "segbench/predictor.hpp"
#include "segbench/synthetic.hpp"
#include "support/http_echo_server.hpp"
#include "support/temp_dir.hpp"

namespace sb = segbench;
using sb::testing::EchoServer;
using sb::testing::TempDir;

namespace {

const std::filesystem::path kFixtures =
    std::filesystem::path(SEGBENCH_SOURCE_DIR) / "tests/fixtures/protocol";

nlohmann::json fixture(const std::string& name) {
  std::ifstream in(kFixtures / name);
  return nlohmann::json::parse(in);
}

double dice_of(const sb::BinaryMask& pred, const sb::BinaryMask& gt) {
  return sb::dice(sb::pixel_counts(pred, gt));
}

// One synthetic image on disk plus everything needed to call a predictor.
struct Example {
  sb::SampleRecord record;
  std::filesystem::path image_path;
  sb::BinaryMask gt;

  sb::ExampleContext context() const { return {record, image_path, gt}; }

  sb::PredictRequest request(const std::string& id, bool inline_image = false) const {
    sb::PredictRequest r;
    r.request_id = id;
    if (inline_image) {
      r.image = sb::InlinePng{sb::read_file(image_path)};
    } else {
      r.image = sb::ImagePath{image_path.string()};
    }
    r.prompts = sb::sample_points(gt, 2, sb::fnv1a64(id));
    return r;
  }
};

Example make_example(const std::filesystem::path& dir, const std::string& name,
                     std::size_t top = 3, std::size_t left = 4) {
  Example e{{"synthetic", "images/" + name + ".png", "masks/" + name + ".png", "liver", "p0",
             sb::Split::val},
            dir / "images" / (name + ".png"),
            sb::rectangle(12, 16, top, left, 5, 7)};
  sb::write_file(e.image_path, sb::encode_png(sb::gray_image(e.gt, 200, 40)));
  return e;
}

sb::BinaryMask centered_2x2() { return sb::rectangle(6, 6, 2, 2, 2, 2); }

}  // namespace

TEST(Base64, RoundTripsAllLengths) {
  std::mt19937_64 rng(9);
  for (std::size_t n = 0; n < 70; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(sb::base64_decode(sb::base64_encode(bytes)), bytes) << "length " << n;
  }
  const std::string hello = "hello";
  EXPECT_EQ(sb::base64_encode({reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size()}),
            "aGVsbG8=");
  EXPECT_THROW(sb::base64_decode("abc"), sb::ParseError);
  EXPECT_THROW(sb::base64_decode("a$c="), sb::ParseError);
}

TEST(Oracle, NoneIsIdentity) {
  const auto gt = centered_2x2();
  EXPECT_EQ(sb::oracle_predict(gt, {}), gt);
  EXPECT_EQ(dice_of(sb::oracle_predict(gt, {}), gt), 1.0);
}

TEST(Oracle, DilateRadiusOneOnCenteredBlock) {
  const auto gt = centered_2x2();
  const auto pred = sb::oracle_predict(gt, {sb::PerturbationKind::dilate, 1});
  EXPECT_EQ(pred, sb::rectangle(6, 6, 1, 1, 4, 4));
  EXPECT_DOUBLE_EQ(dice_of(pred, gt), 0.4);
}

TEST(Oracle, ErodeToEmptyGivesZeroDice) {
  const auto gt = centered_2x2();
  const auto pred = sb::oracle_predict(gt, {sb::PerturbationKind::erode, 1});
  EXPECT_EQ(pred.area(), 0u);
  EXPECT_EQ(dice_of(pred, gt), 0.0);
  // A 5x5 block erodes to its 3x3 core.
  EXPECT_EQ(sb::erode(sb::rectangle(9, 9, 2, 2, 5, 5), 1), sb::rectangle(9, 9, 3, 3, 3, 3));
}

TEST(Oracle, DilateClipsAtBorderAndErodeTreatsOutsideAsBackground) {
  const auto corner = sb::rectangle(5, 5, 0, 0, 1, 1);
  EXPECT_EQ(sb::dilate(corner, 2), sb::rectangle(5, 5, 0, 0, 3, 3));
  sb::BinaryMask full(4, 4);
  for (std::size_t i = 0; i < 16; ++i) full.set_index(i, true);
  EXPECT_EQ(sb::erode(full, 1), sb::rectangle(4, 4, 1, 1, 2, 2));
}

TEST(Oracle, TranslateShiftsColumnsWithZeroFill) {
  const auto gt = sb::rectangle(6, 6, 2, 0, 2, 4);
  EXPECT_EQ(sb::oracle_predict(gt, {sb::PerturbationKind::translate, 1}),
            sb::rectangle(6, 6, 2, 1, 2, 4));
  EXPECT_EQ(sb::translate(gt, 4).area(), 4u);
  EXPECT_EQ(sb::translate(gt, 6).area(), 0u);
  EXPECT_EQ(sb::translate(gt, -1), sb::rectangle(6, 6, 2, 0, 2, 3));
}

TEST(Oracle, DilationMatchesNaiveWindowMax) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution fg(0.1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 3 + trial % 11, w = 2 + trial % 13, r = trial % 4;
    sb::BinaryMask m(h, w);
    for (std::size_t i = 0; i < h * w; ++i) m.set_index(i, fg(rng));
    const auto d = sb::dilate(m, r);
    const auto e = sb::erode(m, r);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        bool any = false, all = true;
        for (long dy = -long(r); dy <= long(r); ++dy) {
          for (long dx = -long(r); dx <= long(r); ++dx) {
            const long yy = long(y) + dy, xx = long(x) + dx;
            const bool inside = yy >= 0 && yy < long(h) && xx >= 0 && xx < long(w);
            const bool v = inside && m.get(std::size_t(yy), std::size_t(xx));
            any = any || v;
            all = all && v;
          }
        }
        ASSERT_EQ(d.get(y, x), any);
        ASSERT_EQ(e.get(y, x), all);
      }
    }
  }
}

TEST(Oracle, PerturbationSpecValidation) {
  EXPECT_THROW(sb::PerturbationSpec(sb::PerturbationKind::none, 2), sb::ConfigError);
  EXPECT_EQ(sb::perturbation_kind_from_string("erode"), sb::PerturbationKind::erode);
  EXPECT_THROW(sb::perturbation_kind_from_string("blur"), sb::ConfigError);
}

TEST(Stub, PresentMissingCorruptAndMismatched) {
  TempDir dir;
  const auto gt = sb::rectangle(8, 8, 1, 1, 3, 3);
  sb::write_file(dir / "d/liver/img1.png", sb::encode_mask_png(gt));
  sb::write_text((dir / "d/liver/img2.png").string(), "not a png");
  sb::write_file(dir / "d/liver/img3.png", sb::encode_mask_png(sb::BinaryMask(4, 4)));
  EXPECT_EQ(sb::stub_predict(dir.path(), "d", "frames/img1.jpg", "liver"), gt);

  sb::StubPredictor stub(dir.path());
  auto run = [&](const std::string& image) -> std::string {
    const sb::SampleRecord rec{"d", image, "m.png", "liver", "p", sb::Split::test};
    try {
      stub.predict({}, {rec, {}, gt});
      return "ok";
    } catch (const sb::PredictorError& e) {
      return e.code();
    }
  };
  EXPECT_EQ(run("img1.png"), "ok");
  EXPECT_EQ(run("missing.png"), "missing_prediction");
  EXPECT_EQ(run("img2.png"), "corrupt_prediction");
  EXPECT_EQ(run("img3.png"), "size_mismatch");
}

TEST(Protocol, FixturesParseAndReencodeExactly) {
  for (const char* name : {"predict_request_path.json", "predict_request_inline.json"}) {
    const auto j = fixture(name);
    EXPECT_EQ(sb::to_json(sb::predict_request_from_json(j)), j) << name;
  }
  for (const char* name : {"predict_response.json", "predict_response_no_score.json"}) {
    const auto j = fixture(name);
    EXPECT_EQ(sb::to_json(sb::predict_response_from_json(j)), j) << name;
  }
  const auto resp = sb::predict_response_from_json(fixture("predict_response.json"));
  EXPECT_EQ(sb::decode_rle(resp.mask).area(), 4u);
  EXPECT_EQ(resp.score, 0.93);

  const auto inline_req = sb::predict_request_from_json(fixture("predict_request_inline.json"));
  const auto img = sb::decode_png(std::get<sb::InlinePng>(inline_req.image).bytes);
  EXPECT_EQ(img.height, 4u);
  EXPECT_EQ(img.width, 4u);
}

TEST(Protocol, ErrorAndInvalidFixtures) {
  try {
    sb::predict_response_from_json(fixture("error_bad_prompt.json"), 400);
    FAIL() << "expected ServerError";
  } catch (const sb::ServerError& e) {
    EXPECT_EQ(e.code(), "server:bad_prompt");
    EXPECT_EQ(e.http_status(), 400);
    EXPECT_FALSE(e.server_message().empty());
  }
  EXPECT_THROW(sb::predict_response_from_json(fixture("invalid_score_out_of_range.json")),
               sb::ProtocolError);
  EXPECT_THROW(sb::predict_request_from_json(fixture("invalid_missing_request_id.json")),
               sb::ParseError);
  EXPECT_THROW(sb::predict_request_from_json(fixture("invalid_negative_point.json")),
               sb::ParseError);
}

TEST(Protocol, ClientSideContractChecks) {
  const auto gt = sb::rectangle(4, 4, 1, 1, 2, 2);
  sb::PredictRequest req;
  req.request_id = "a#k1";
  EXPECT_EQ(sb::validate_response(req, {"a#k1", sb::encode_rle(gt), {}}, 4, 4), gt);
  EXPECT_THROW(sb::validate_response(req, {"b#k1", sb::encode_rle(gt), {}}, 4, 4),
               sb::ProtocolError);
  EXPECT_THROW(sb::validate_response(req, {"a#k1", sb::encode_rle(gt), {}}, 4, 5),
               sb::ProtocolError);
  sb::RleMask corrupt{4, 4, {3, 3}};
  EXPECT_THROW(sb::validate_response(req, {"a#k1", corrupt, {}}, 4, 4), sb::ProtocolError);
  EXPECT_THROW(sb::check_prompts_in_bounds(sb::PromptSet{{{4, 0, 1}}, 1, {}}, 4, 4),
               sb::DomainError);
}

TEST(Http, EchoServerMatchesGroundTruth) {
  TempDir dir;
  EchoServer server;
  sb::HttpPredictor client(server.endpoint());
  const auto e = make_example(dir.path(), "a");
  EXPECT_EQ(client.predict(e.request("a#k2"), e.context()), e.gt);
  EXPECT_EQ(client.predict(e.request("a-inline#k2", true), e.context()), e.gt);
  const auto resp = client.send(e.request("a#k2"));
  EXPECT_EQ(resp.request_id, "a#k2");
  EXPECT_EQ(resp.score, 1.0);
}

TEST(Http, ServerErrorPayloadIsSurfaced) {
  TempDir dir;
  EchoServer server;
  sb::HttpPredictor client(server.endpoint());
  const auto e = make_example(dir.path(), "a");
  auto req = e.request("a#k1");
  req.prompts.points = {{99, 0, 1}};
  try {
    client.predict(req, e.context());
    FAIL() << "expected ServerError";
  } catch (const sb::ServerError& err) {
    EXPECT_EQ(err.code(), "server:bad_prompt");
    EXPECT_EQ(err.http_status(), 400);
  }
  req = e.request("b#k1");
  req.image = sb::ImagePath{(dir / "nope.png").string()};
  try {
    client.predict(req, e.context());
    FAIL() << "expected ServerError";
  } catch (const sb::ServerError& err) {
    EXPECT_EQ(err.server_code(), "unreadable_image");
  }
  EXPECT_EQ(server.requests(), 2u);  // server errors are not retried
}

TEST(Http, SizeMismatchIsProtocolViolation) {
  TempDir dir;
  EchoServer server;
  sb::HttpPredictor client(server.endpoint());
  const auto e = make_example(dir.path(), "a");
  const sb::BinaryMask other_gt(5, 5);
  EXPECT_THROW(client.predict(e.request("a#k1"), {e.record, e.image_path, other_gt}),
               sb::ProtocolError);
}

TEST(Http, UnreachableEndpointFailsAfterBoundedRetries) {
  sb::ClientOptions options;
  options.timeout = std::chrono::milliseconds(200);
  options.retry = {2, std::chrono::milliseconds(1)};
  // Port 9 on loopback is the discard service; nothing listens in the sandbox.
  sb::HttpPredictor client("http://127.0.0.1:9", options);
  TempDir dir;
  const auto e = make_example(dir.path(), "a");
  EXPECT_THROW(client.predict(e.request("a#k1"), e.context()), sb::TransportError);
}

TEST(Http, RetryPolicyBoundsAttempts) {
  int calls = 0;
  EXPECT_THROW(sb::with_retries({3, std::chrono::milliseconds(0)},
                                [&]() -> int {
                                  ++calls;
                                  throw sb::TransportError("down");
                                }),
               sb::TransportError);
  EXPECT_EQ(calls, 4);
  calls = 0;
  EXPECT_THROW(sb::with_retries({3, std::chrono::milliseconds(0)},
                                [&]() -> int {
                                  ++calls;
                                  throw sb::ProtocolError("bad");
                                }),
               sb::ProtocolError);
  EXPECT_EQ(calls, 1);
  calls = 0;
  EXPECT_EQ(sb::with_retries({3, std::chrono::milliseconds(0)},
                             [&] {
                               if (++calls < 3) throw sb::TransportError("flaky");
                               return 7;
                             }),
            7);
}

// Transport faults on the first attempt of ~10% of ids must not change any
// returned mask once the retries succeed.
void expect_faulty_run_matches_clean(bool stall) {
  TempDir dir;
  std::vector<Example> examples;
  for (int i = 0; i < 40; ++i) {
    examples.push_back(make_example(dir.path(), "img" + std::to_string(i), i % 6, i % 8));
  }
  EchoServer clean;
  EchoServer faulty({0.10, stall, std::chrono::milliseconds(600)});
  sb::ClientOptions options;
  options.timeout = std::chrono::milliseconds(200);
  options.retry = {3, std::chrono::milliseconds(5)};
  sb::HttpPredictor a(clean.endpoint(), options), b(faulty.endpoint(), options);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto req = examples[i].request("synthetic/liver/img" + std::to_string(i) + "#k2");
    const auto ma = a.predict(req, examples[i].context());
    const auto mb = b.predict(req, examples[i].context());
    ASSERT_EQ(ma, mb);
    ASSERT_EQ(ma, examples[i].gt);
  }
  EXPECT_GT(faulty.injected(), 0u);
  EXPECT_EQ(faulty.requests(), examples.size() + faulty.injected());
}

TEST(Http, StallFaultsAreRetriedTransparently) { expect_faulty_run_matches_clean(true); }

TEST(Http, UnavailableFaultsAreRetriedTransparently) { expect_faulty_run_matches_clean(false); }

TEST(Stdio, EchoSubprocessRoundTrip) {
  TempDir dir;
  sb::StdioPredictor client({SEGBENCH_ECHO_STDIO});
  for (int i = 0; i < 5; ++i) {
    const auto e = make_example(dir.path(), "s" + std::to_string(i), i, i);
    EXPECT_EQ(client.predict(e.request("s" + std::to_string(i) + "#k1", i % 2 == 1), e.context()),
              e.gt);
  }
}

TEST(Stdio, TimeoutRetriesAndSkipsLateReply) {
  TempDir dir;
  sb::ClientOptions options;
  options.timeout = std::chrono::milliseconds(300);
  options.retry = {3, std::chrono::milliseconds(5)};
  sb::StdioPredictor client({SEGBENCH_ECHO_STDIO, "--slow-first", "500"}, options);
  for (int i = 0; i < 4; ++i) {
    const auto e = make_example(dir.path(), "t" + std::to_string(i), i, 2 * i);
    const std::string id = "t" + std::to_string(i) + "#k1";
    const auto resp = client.send(e.request(id));
    ASSERT_EQ(resp.request_id, id);
    ASSERT_EQ(sb::decode_rle(resp.mask), e.gt);
  }
}

TEST(Stdio, GarbageReplyIsProtocolError) {
  TempDir dir;
  sb::StdioPredictor client({SEGBENCH_ECHO_STDIO, "--garbage"});
  const auto e = make_example(dir.path(), "g");
  EXPECT_THROW(client.predict(e.request("g#k1"), e.context()), sb::ProtocolError);
}

TEST(Stdio, MissingExecutableIsTransportError) {
  sb::ClientOptions options;
  options.timeout = std::chrono::milliseconds(200);
  options.retry = {1, std::chrono::milliseconds(1)};
  sb::StdioPredictor client({"/nonexistent/segbench-model"}, options);
  TempDir dir;
  const auto e = make_example(dir.path(), "m");
  EXPECT_THROW(client.predict(e.request("m#k1"), e.context()), sb::TransportError);
}
