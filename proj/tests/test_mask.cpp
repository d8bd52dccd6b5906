#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace boxseg;

namespace {

BinaryMask mask_from_rows(std::initializer_list<const char*> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(std::strlen(*rows.begin()));
  Bitmap bm({w, h});
  int y = 0;
  for (const char* row : rows) {
    for (int x = 0; x < w; ++x) bm.at(x, y) = row[x] == '#' ? 1 : 0;
    ++y;
  }
  return rle_encode(bm);
}

}  // namespace

TEST(Rle, AllBackground) {
  EXPECT_EQ(rle_encode(Bitmap({4, 4})).counts(), (std::vector<std::uint64_t>{16}));
}

TEST(Rle, FirstRowForeground) {
  const auto m = mask_from_rows({"####", "....", "....", "...."});
  EXPECT_EQ(m.counts(), (std::vector<std::uint64_t>{0, 4, 12}));
  EXPECT_EQ(m.foreground(), 4u);
}

TEST(Rle, AllForegroundAndTrailingRun) {
  EXPECT_EQ(rle_encode(Bitmap({3, 2}, 1)).counts(), (std::vector<std::uint64_t>{0, 6}));
  const auto m = mask_from_rows({"..", ".#"});
  EXPECT_EQ(m.counts(), (std::vector<std::uint64_t>{3, 1}));
}

TEST(Rle, RunsCrossRowBoundaries) {
  const auto m = mask_from_rows({"..##", "#...", "...."});
  EXPECT_EQ(m.counts(), (std::vector<std::uint64_t>{2, 3, 7}));
}

TEST(Rle, InvariantViolationsRejected) {
  EXPECT_THROW(BinaryMask({2, 2}, {3}), DataError);
  EXPECT_THROW(BinaryMask({2, 2}, {2, 0, 2}), DataError);
  EXPECT_THROW(BinaryMask({2, 2}, {4, 0}), DataError);
  EXPECT_THROW(BinaryMask({2, 2}, {}), DataError);
  EXPECT_THROW(BinaryMask({0, 2}, {0}), DataError);
  EXPECT_NO_THROW(BinaryMask({2, 2}, {0, 4}));
}

TEST(Rle, EncodeRejectsSizeMismatch) {
  Bitmap bm({4, 4});
  bm.pixels.pop_back();
  EXPECT_THROW(rle_encode(bm), DataError);
}

TEST(Rle, RoundTripProperty) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 10000; ++i) {
    const ImageDims dims{1 + int(gen() % 24), 1 + int(gen() % 24)};
    const double density = double(gen() % 11) / 10.0;
    const auto bm = testkit::random_bitmap(gen, dims, density);
    const auto m = rle_encode(bm);
    ASSERT_EQ(m.decode(), bm);
    ASSERT_EQ(parse_mask(format_mask(m)), m);
    std::uint64_t sum = 0;
    for (std::size_t k = 0; k < m.counts().size(); ++k) {
      ASSERT_TRUE(k == 0 || m.counts()[k] > 0);
      sum += m.counts()[k];
    }
    ASSERT_EQ(sum, static_cast<std::uint64_t>(dims.pixels()));
  }
}

TEST(MaskFile, FormatAndParse) {
  const auto m = mask_from_rows({"####", "....", "....", "...."});
  EXPECT_EQ(format_mask(m), "4 4\n0 4 12\n");
  EXPECT_EQ(parse_mask("4 4\n0 4 12\n"), m);
  EXPECT_EQ(parse_mask("4 4\n0 4 12"), m);
}

TEST(MaskFile, ParseErrorsNameSourceAndLine) {
  try {
    parse_mask("4 4\n0 4 x\n", "pred/7.mask");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("pred/7.mask:2"), std::string::npos);
  }
  EXPECT_THROW(parse_mask("4\n16\n"), DataError);
  EXPECT_THROW(parse_mask("4 4\n"), DataError);
  EXPECT_THROW(parse_mask("4 4\n15\n"), DataError);
  EXPECT_THROW(parse_mask("4 4 1\n16\n"), DataError);
}

TEST(MaskFile, WriteReadRoundTrip) {
  testkit::TempDir dir;
  const auto m = mask_from_rows({".#.", "##."});
  const auto path = (dir / "m.mask").string();
  write_mask_file(path, m);
  EXPECT_EQ(read_mask_file(path), m);
  EXPECT_THROW(read_mask_file((dir / "absent.mask").string()), DataError);
}

TEST(Union, SingleAndEmpty) {
  const auto m = mask_from_rows({".#.", "##."});
  EXPECT_EQ(mask_union(std::vector{m}, m.dims()), m);
  EXPECT_EQ(mask_union({}, {3, 2}), BinaryMask::background({3, 2}));
}

TEST(Union, WithComplementIsFull) {
  const auto m = mask_from_rows({".#.", "##."});
  EXPECT_EQ(mask_union(std::vector{m, mask_complement(m)}, m.dims()), rle_encode(Bitmap({3, 2}, 1)));
}

TEST(Union, DisjointTwoPixelMasks) {
  const auto a = mask_from_rows({"##..", "...."});
  const auto b = mask_from_rows({"....", "..##"});
  const auto u = mask_union(std::vector{a, b}, a.dims());
  EXPECT_EQ(u.foreground(), 4u);
  const auto bu = u.decode(), ba = a.decode(), bb = b.decode();
  for (std::size_t i = 0; i < bu.pixels.size(); ++i) {
    EXPECT_EQ(bu.pixels[i], (ba.pixels[i] | bb.pixels[i]));
  }
}

TEST(Union, DimensionMismatchNamesBothDims) {
  const auto a = BinaryMask::background({4, 4});
  const auto b = BinaryMask::background({5, 3});
  try {
    mask_union(std::vector{a, b}, a.dims());
    FAIL();
  } catch (const DimensionMismatch& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("4x4"), std::string::npos);
    EXPECT_NE(msg.find("5x3"), std::string::npos);
  }
}

TEST(Union, AlgebraicLawsProperty) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 2000; ++i) {
    const ImageDims dims{1 + int(gen() % 12), 1 + int(gen() % 12)};
    const auto a = rle_encode(testkit::random_bitmap(gen, dims, 0.3));
    const auto b = rle_encode(testkit::random_bitmap(gen, dims, 0.3));
    const auto c = rle_encode(testkit::random_bitmap(gen, dims, 0.3));
    auto u = [&](const BinaryMask& x, const BinaryMask& y) {
      return mask_union(std::vector{x, y}, dims);
    };
    ASSERT_EQ(u(a, b), u(b, a));
    ASSERT_EQ(u(u(a, b), c), u(a, u(b, c)));
    ASSERT_EQ(u(a, a), a);
    ASSERT_EQ(mask_union(std::vector{a, b, c}, dims), u(u(a, b), c));
    ASSERT_EQ(mask_complement(mask_complement(a)), a);
  }
}

TEST(Intersection, MatchesPixelAnd) {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 500; ++i) {
    const ImageDims dims{1 + int(gen() % 10), 1 + int(gen() % 10)};
    const auto ba = testkit::random_bitmap(gen, dims), bb = testkit::random_bitmap(gen, dims);
    const auto got = mask_intersection(rle_encode(ba), rle_encode(bb)).decode();
    for (std::size_t k = 0; k < got.pixels.size(); ++k) {
      ASSERT_EQ(got.pixels[k], (ba.pixels[k] & bb.pixels[k]));
    }
  }
}

TEST(Confusion, IdenticalMasks) {
  const auto gt = mask_from_rows({"####", "####", "....", "...."});
  EXPECT_EQ(confusion(gt, gt), (ConfusionCounts{8, 0, 0, 8}));
}

TEST(Confusion, EmptyPrediction) {
  const auto gt = mask_from_rows({"####", "####", "....", "...."});
  EXPECT_EQ(confusion(BinaryMask::background({4, 4}), gt), (ConfusionCounts{0, 0, 8, 8}));
}

TEST(Confusion, PredictionInsideGroundTruth) {
  const auto gt = mask_from_rows({"####", "####", "....", "...."});
  const auto pred = mask_from_rows({"##..", "##..", "....", "...."});
  const auto c = confusion(pred, gt);
  EXPECT_EQ(c, oracle::pixel_confusion(pred.decode(), gt.decode()));
  EXPECT_EQ(c, (ConfusionCounts{4, 0, 4, 8}));
}

TEST(Confusion, DimensionMismatch) {
  EXPECT_THROW(confusion(BinaryMask::background({4, 4}), BinaryMask::background({4, 5})),
               DimensionMismatch);
}

TEST(Confusion, OracleAndSwapProperty) {
  std::mt19937_64 gen(17);
  for (int i = 0; i < 5000; ++i) {
    const ImageDims dims{1 + int(gen() % 20), 1 + int(gen() % 20)};
    const auto bp = testkit::random_bitmap(gen, dims, double(gen() % 5) / 4);
    const auto bg = testkit::random_bitmap(gen, dims, double(gen() % 5) / 4);
    const auto p = rle_encode(bp), g = rle_encode(bg);
    const auto c = confusion(p, g);
    ASSERT_EQ(c, oracle::pixel_confusion(bp, bg));
    ASSERT_EQ(c.total(), static_cast<std::uint64_t>(dims.pixels()));
    const auto s = confusion(g, p);
    ASSERT_EQ(s.tp, c.tp);
    ASSERT_EQ(s.tn, c.tn);
    ASSERT_EQ(s.fp, c.fn);
    ASSERT_EQ(s.fn, c.fp);
  }
}

TEST(BoxMask, PixelCentersInsideBox) {
  const auto m = box_mask({1, 1, 3, 4}, {5, 5});
  EXPECT_EQ(m.foreground(), 6u);
  const auto bm = m.decode();
  EXPECT_EQ(bm.at(1, 1), 1);
  EXPECT_EQ(bm.at(2, 3), 1);
  EXPECT_EQ(bm.at(3, 3), 0);
  EXPECT_EQ(bm.at(0, 0), 0);
}

TEST(BoxMask, FractionalEdgesUseCenters) {
  // centers at 0.5, 1.5, 2.5: [0.6, 2.5) holds 1.5 only
  EXPECT_EQ(box_mask({0.6, 0, 2.5, 1}, {4, 1}).foreground(), 1u);
  EXPECT_EQ(box_mask({0.5, 0, 2.51, 1}, {4, 1}).foreground(), 3u);
  EXPECT_EQ(box_mask({-10, -10, 100, 100}, {4, 3}).foreground(), 12u);
  EXPECT_TRUE(box_mask({2, 2, 2, 3}, {4, 4}).empty());
}

TEST(BoxMask, BruteForceCenterRule) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 1000; ++i) {
    const ImageDims dims{1 + int(gen() % 15), 1 + int(gen() % 15)};
    const auto box = testkit::random_box(gen, 15.0);
    const auto bm = box_mask(box, dims).decode();
    for (int y = 0; y < dims.height; ++y) {
      for (int x = 0; x < dims.width; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        const bool in = cx >= box.x1 && cx < box.x2 && cy >= box.y1 && cy < box.y2;
        ASSERT_EQ(bm.at(x, y), in ? 1 : 0);
      }
    }
  }
}

TEST(ForegroundBounds, TightBox) {
  const auto m = mask_from_rows({".....", "..#..", ".##..", "....."});
  EXPECT_EQ(foreground_bounds(m.decode()), (BoxXYXY{1, 1, 3, 3}));
  EXPECT_FALSE(foreground_bounds(Bitmap({3, 3})).has_value());
}
