#include <doctest.h>

#include <cmath>
#include <random>

#include "textspot/corpus.hpp"
#include "textspot/error.hpp"
#include "textspot/geometry.hpp"

using namespace textspot;

namespace {

double brute_coverage(const std::vector<BoxShape>& gt, const std::vector<BoxShape>& anchors,
                      double min_iou) {
  std::size_t hit = 0;
  for (const auto& g : gt) {
    bool any = false;
    for (const auto& a : anchors) {
      const double inter = std::min(g.w, a.w) * std::min(g.h, a.h);
      if (inter / (g.w * g.h + a.w * a.h - inter) >= min_iou) any = true;
    }
    hit += any ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(gt.size());
}

}  // namespace

TEST_CASE("box iou") {
  const BoundingBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {5, 5, 1, 1}) == 0.0);
  CHECK(iou(a, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou({1, 1, 2, 2}, a) == iou(a, {1, 1, 2, 2}));
}

TEST_CASE("shape iou") {
  CHECK(shape_iou({2, 2}, {2, 2}) == 1.0);
  CHECK(shape_iou({2, 2}, {4, 4}) == doctest::Approx(0.25));
  CHECK(shape_iou({10, 2}, {2, 10}) == doctest::Approx(4.0 / 36.0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.5, 50.0);
  for (int i = 0; i < 200; ++i) {
    const BoxShape a{d(rng), d(rng)};
    const BoxShape b{d(rng), d(rng)};
    const double v = shape_iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == shape_iou(b, a));
  }
}

TEST_CASE("coverage") {
  const std::vector<BoxShape> gt{{4, 4}, {40, 4}, {10, 3}};
  CHECK(coverage(gt, AnchorSet{gt}, 0.6) == 1.0);
  const std::vector<BoxShape> big{{100, 100}};
  CHECK(coverage(big, AnchorSet{{{1, 1}}}, 0.6) == 0.0);

  std::mt19937_64 rng(4);
  const auto shapes = synthetic_text_shapes(300, 9);
  const auto anchors = synthetic_text_shapes(5, 10);
  CHECK(coverage(shapes, AnchorSet{anchors}, 0.6) == brute_coverage(shapes, anchors, 0.6));
}

TEST_CASE("best anchor assignment") {
  const AnchorSet anchors{{{5, 5}, {10, 2}, {20, 4}, {8, 3}, {8, 3}}};
  CHECK(assign_best_anchor({20, 4}, anchors) == 2);
  CHECK(assign_best_anchor({8, 3}, anchors) == 3);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(1.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const BoxShape g{d(rng), d(rng)};
    std::size_t best = 0;
    for (std::size_t a = 1; a < anchors.size(); ++a) {
      if (shape_iou(g, anchors.shapes[a]) > shape_iou(g, anchors.shapes[best])) best = a;
    }
    CHECK(assign_best_anchor(g, anchors) == best);
  }
}

TEST_CASE("anchor selection") {
  AnchorSearchOptions opt;
  const std::vector<BoxShape> same(100, BoxShape{4, 4});
  auto set = select_anchors(same, opt);
  REQUIRE(set.size() == 1);
  CHECK(set.shapes[0] == BoxShape{4, 4});

  // One anchor cannot cover both: shape_iou = 0.1.
  const std::vector<BoxShape> two{{4, 4}, {40, 4}};
  for (const auto& candidate : two) {
    CHECK(coverage(two, AnchorSet{{candidate}}, 0.6) < 1.0);
  }
  set = select_anchors(two, opt);
  REQUIRE(set.size() == 2);
  CHECK(coverage(two, set, 0.6) == 1.0);

  const auto shapes = synthetic_text_shapes(2000, 1);
  set = select_anchors(shapes, opt);
  CHECK(coverage(shapes, set, 0.6) == 1.0);
  std::size_t wide = 0;
  for (const auto& a : set.shapes) wide += a.w >= a.h ? 1 : 0;
  CHECK(static_cast<double>(wide) >= 0.9 * static_cast<double>(set.size()));

  // Same seed, same result.
  const auto again = select_anchors(shapes, opt);
  CHECK(again.shapes == set.shapes);

  opt.max_k = 1;
  try {
    select_anchors(two, opt);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCoverageUnreachable);
  }
}

TEST_CASE("grid decoding") {
  GridDecodeConfig cfg;
  cfg.input_width = 64;
  cfg.input_height = 64;
  cfg.anchors = AnchorSet{{{32, 16}, {10, 10}}};
  RawGrid raw(2, 2, 2, 3);

  SUBCASE("zero activations emit every proposal at its prior") {
    const auto dets = decode_grid(raw, cfg, "img");
    CHECK(dets.size() == 8);
    for (const auto& d : dets) {
      CHECK(d.objectness == doctest::Approx(0.5));
      for (float v : d.phoc.values) CHECK(v == doctest::Approx(0.5));
      CHECK(d.phoc.kind == PhocKind::kPrediction);
    }
  }

  SUBCASE("single confident cell") {
    for (auto& v : raw.values) v = 0.0f;
    for (int cx = 0; cx < 2; ++cx) {
      for (int cy = 0; cy < 2; ++cy) {
        for (int a = 0; a < 2; ++a) raw.cell(cx, cy, a)[4] = -10.0f;
      }
    }
    raw.cell(1, 1, 0)[4] = 2.0f;
    const auto dets = decode_grid(raw, cfg, "img");
    REQUIRE(dets.size() == 1);
    const auto& d = dets[0];
    CHECK(d.box.x + d.box.w / 2 == doctest::Approx(48.0));
    CHECK(d.box.y + d.box.h / 2 == doctest::Approx(48.0));
    CHECK(d.box.w == doctest::Approx(32.0));
    CHECK(d.box.h == doctest::Approx(16.0));
    CHECK(d.objectness == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(d.image_id == "img");
  }

  SUBCASE("all suppressed") {
    for (int cx = 0; cx < 2; ++cx) {
      for (int cy = 0; cy < 2; ++cy) {
        for (int a = 0; a < 2; ++a) raw.cell(cx, cy, a)[4] = -10.0f;
      }
    }
    CHECK(decode_grid(raw, cfg, "img").empty());
  }

  SUBCASE("shape and config errors") {
    RawGrid wrong(3, 2, 2, 3);
    CHECK_THROWS_AS(decode_grid(wrong, cfg, "img"), Error);
    cfg.apply_nms = true;
    CHECK_THROWS_AS(decode_grid(raw, cfg, "img"), Error);
  }
}

TEST_CASE("emitted objectness respects the threshold") {
  GridDecodeConfig cfg;
  cfg.input_width = 96;
  cfg.input_height = 64;
  cfg.anchors = AnchorSet{{{32, 16}, {10, 10}, {50, 8}}};
  cfg.objectness_threshold = 0.3;
  RawGrid raw(3, 2, 3, 4);
  std::mt19937_64 rng(6);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (auto& v : raw.values) v = n(rng);
  const auto dets = decode_grid(raw, cfg, "x");
  CHECK(dets.size() <= 18);
  for (const auto& d : dets) CHECK(d.objectness >= 0.3f);
}
