#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace boxseg;

TEST(Normalize, CubStyleBox) {
  const auto n = to_normalized({60, 27, 385, 331}, {500, 375});
  EXPECT_NEAR(n.cx, 0.445, 1e-12);
  EXPECT_NEAR(n.cy, 0.4773333333333333, 1e-12);
  EXPECT_NEAR(n.w, 0.65, 1e-12);
  EXPECT_NEAR(n.h, 0.8106666666666666, 1e-12);
}

TEST(Normalize, FullImageBox) {
  const auto n = to_normalized({0, 0, 100, 50}, {100, 50});
  EXPECT_DOUBLE_EQ(n.cx, 0.5);
  EXPECT_DOUBLE_EQ(n.cy, 0.5);
  EXPECT_DOUBLE_EQ(n.w, 1.0);
  EXPECT_DOUBLE_EQ(n.h, 1.0);
}

TEST(Normalize, DegenerateBoxNamesImage) {
  try {
    to_normalized({10, 10, 10, 20}, {100, 100}, "42");
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
  EXPECT_THROW(to_normalized({5, 5, 4, 9}, {100, 100}), GeometryError);
  EXPECT_THROW(to_normalized({0, 0, 1, 1}, {0, 100}), GeometryError);
}

TEST(Normalize, RoundTripProperty) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 10000; ++i) {
    const ImageDims dims{1 + int(gen() % 2000), 1 + int(gen() % 2000)};
    std::uniform_real_distribution<double> ux(0, dims.width), uy(0, dims.height);
    double a = ux(gen), b = ux(gen), c = uy(gen), d = uy(gen);
    if (a == b || c == d) continue;
    const BoxXYXY box{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
    const auto back = to_absolute(to_normalized(box, dims), dims);
    ASSERT_NEAR(back.x1, box.x1, 1e-9);
    ASSERT_NEAR(back.y1, box.y1, 1e-9);
    ASSERT_NEAR(back.x2, box.x2, 1e-9);
    ASSERT_NEAR(back.y2, box.y2, 1e-9);
  }
}

TEST(Clip, ClampsAndReportsChange) {
  bool changed = false;
  const auto c = clip({-5, 3, 120, 40}, {100, 50}, &changed);
  EXPECT_TRUE(changed);
  EXPECT_EQ(c, (BoxXYXY{0, 3, 100, 40}));
  clip({1, 1, 2, 2}, {100, 50}, &changed);
  EXPECT_FALSE(changed);
  EXPECT_TRUE(clip({200, 0, 300, 10}, {100, 50}).degenerate());
}

TEST(BoxIou, OverlappingSquaresIsOneSeventh) {
  const BoxXYXY a{0, 0, 2, 2}, b{1, 1, 3, 3};
  EXPECT_NEAR(box_iou(a, b), 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(oracle::raster_box_iou(a, b), box_iou(a, b), 1e-3);
}

TEST(BoxIou, IdenticalDisjointTouchingAndEmpty) {
  EXPECT_DOUBLE_EQ(box_iou({1, 2, 5, 9}, {1, 2, 5, 9}), 1.0);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 0, 5}, {0, 0, 0, 5}), 0.0);
}

TEST(BoxIou, NestedBoxIsAreaRatio) {
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 10, 10}, {2, 2, 7, 7}), 25.0 / 100.0);
}

TEST(BoxIou, SymmetryBoundsAndRasterAgreementProperty) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 10000; ++i) {
    const auto a = testkit::random_box(gen), b = testkit::random_box(gen);
    const double ab = box_iou(a, b), ba = box_iou(b, a);
    ASSERT_EQ(ab, ba);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
    ASSERT_NEAR(ab, oracle::formula_iou(a, b), 1e-12);
    if (!a.degenerate()) {
      ASSERT_DOUBLE_EQ(box_iou(a, a), 1.0);
    }
  }
  for (int i = 0; i < 50; ++i) {
    const auto a = testkit::random_box(gen, 4.0), b = testkit::random_box(gen, 4.0);
    ASSERT_NEAR(box_iou(a, b), oracle::raster_box_iou(a, b, 4e-3), 2e-2);
  }
}

TEST(Nms, SuppressesHeavyOverlap) {
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0.9, "a"}, {{1, 1, 10, 10}, 0.8, "b"}};
  EXPECT_NEAR(oracle::formula_iou(dets[0].box, dets[1].box), 0.81, 1e-12);
  const auto kept = nms(dets, 0.45);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].label, "a");
}

TEST(Nms, KeepsBoundaryIouAndSortsByScore) {
  // IoU exactly 0.5 survives a 0.5 threshold.
  const std::vector<Detection> dets{{{0, 0, 2, 1}, 0.3, "low"}, {{0, 0, 1, 1}, 0.6, "high"}};
  const auto kept = nms(dets, 0.5);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].label, "high");
  EXPECT_EQ(kept[1].label, "low");
}

TEST(Nms, EqualScoresFollowInputOrder) {
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0.5, "first"}, {{0, 0, 10, 10}, 0.5, "second"}};
  const auto kept = nms(dets, 0.45);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].label, "first");
}

TEST(Nms, EmptyInput) { EXPECT_TRUE(nms({}, 0.45).empty()); }

TEST(Nms, SubsetPairwiseCleanIdempotentProperty) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> score(0, 1);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<Detection> dets(gen() % 8);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      dets[i] = Detection{testkit::random_box(gen, 20.0), std::round(score(gen) * 10) / 10,
                 std::to_string(i)};
    }
    const double thr = 0.3 + 0.1 * double(gen() % 4);
    const auto kept = nms(dets, thr);
    const auto ref = oracle::nms_reference(dets, thr);
    ASSERT_EQ(kept.size(), ref.size());
    for (std::size_t i = 0; i < kept.size(); ++i) ASSERT_EQ(kept[i], dets[ref[i]]);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        ASSERT_LE(box_iou(kept[i].box, kept[j].box), thr);
      }
    }
    ASSERT_EQ(nms(kept, thr), kept);
  }
}

TEST(Rng, EngineMatchesStandardSequence) {
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, BelowAndUniformStayInRange) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    ASSERT_LT(rng.below(7), 7u);
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(rng.below(0), 0u);
  EXPECT_FALSE(rng.bernoulli(0.0));
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(3, 4), derive_seed(3, 4));
}

TEST(Fnv, KnownVectors) {
  Fnv1a empty;
  EXPECT_EQ(empty.digest(), 0xcbf29ce484222325ULL);
  Fnv1a a;
  a.update(std::string("a"));
  EXPECT_EQ(a.digest(), 0xaf63dc4c8601ec8cULL);
}
