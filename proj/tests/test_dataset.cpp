#include <gtest/gtest.h>

#include <deque>
#include <set>

#include "support.hpp"

using namespace boxseg;
namespace fs = std::filesystem;

namespace {

/// Bounding boxes of the 8-connected foreground components.
std::vector<BoxXYXY> component_boxes(const Bitmap& bm) {
  std::vector<std::uint8_t> seen(bm.pixels.size(), 0);
  std::vector<BoxXYXY> out;
  const int W = bm.dims.width, H = bm.dims.height;
  for (int sy = 0; sy < H; ++sy) {
    for (int sx = 0; sx < W; ++sx) {
      const std::size_t s = static_cast<std::size_t>(sy) * W + sx;
      if (!bm.pixels[s] || seen[s]) continue;
      int minx = sx, maxx = sx, miny = sy, maxy = sy;
      std::deque<std::pair<int, int>> q{{sx, sy}};
      seen[s] = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * W + nx;
            if (bm.pixels[n] && !seen[n]) {
              seen[n] = 1;
              q.emplace_back(nx, ny);
            }
          }
        }
      }
      out.push_back({double(minx), double(miny), double(maxx + 1), double(maxy + 1)});
    }
  }
  return out;
}

bool box_less(const BoxXYXY& a, const BoxXYXY& b) {
  return std::tie(a.x1, a.y1, a.x2, a.y2) < std::tie(b.x1, b.y1, b.x2, b.y2);
}

std::string load_error(const fs::path& root) {
  try {
    load_index(root);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadIndex, ThreeImageFixture) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  const auto index = load_index(dir.path());
  ASSERT_EQ(index.records.size(), 3u);
  EXPECT_EQ(index.summary.excluded(), 0u);
  EXPECT_EQ(index.summary.clipped_boxes, 1u);

  const auto& r1 = index.records[0];
  EXPECT_EQ(r1.image_id, 1);
  EXPECT_EQ(r1.class_id, 1);
  EXPECT_EQ(r1.dims, (ImageDims{500, 375}));
  EXPECT_EQ(r1.gt_box(), (BoxXYXY{60, 27, 385, 331}));
  EXPECT_EQ(r1.mask_path, "001.Albatross/alb_0001.mask");
  EXPECT_EQ(index.records[1].gt_box(), (BoxXYXY{5, 5, 20, 15}));
  EXPECT_EQ(index.records[2].gt_box(), (BoxXYXY{30, 20, 40, 30}));
  EXPECT_EQ(index.find(2), &index.records[1]);
  EXPECT_EQ(index.find(9), nullptr);
}

TEST(LoadIndex, ParallelLoadMatchesSerial) {
  testkit::TempDir dir;
  testkit::synthetic_index(dir.path(), 20, 3);
  const auto a = load_index(dir.path(), 1), b = load_index(dir.path(), 6);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
}

TEST(LoadIndex, MissingBoundingBoxesFile) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  fs::remove(dir / "bounding_boxes.txt");
  EXPECT_NE(load_error(dir.path()).find("bounding_boxes.txt"), std::string::npos);
}

TEST(LoadIndex, MissingRootNamesImagesFile) {
  EXPECT_NE(load_error("/nonexistent/cub").find("images.txt"), std::string::npos);
}

TEST(LoadIndex, DuplicateIdRejected) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "images.txt",
                      testkit::slurp(dir / "images.txt") + "2 002.Auklet/auk_0002.pgm\n");
  const auto err = load_error(dir.path());
  EXPECT_NE(err.find("images.txt:4"), std::string::npos) << err;
  EXPECT_NE(err.find("duplicate"), std::string::npos) << err;
}

TEST(LoadIndex, MalformedLineNamesFileAndLine) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325 304\n2 5 five 15 10\n");
  EXPECT_NE(load_error(dir.path()).find("bounding_boxes.txt:2"), std::string::npos);
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325\n");
  EXPECT_NE(load_error(dir.path()).find("bounding_boxes.txt:1"), std::string::npos);
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325 304\n7 1 1 1 1\n");
  EXPECT_NE(load_error(dir.path()).find("unknown image id 7"), std::string::npos);
}

TEST(LoadIndex, ClassOutOfRange) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "image_class_labels.txt", "1 201\n");
  EXPECT_NE(load_error(dir.path()).find("image_class_labels.txt:1"), std::string::npos);
}

TEST(LoadIndex, MissingPiecesExcludedAndCounted) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  fs::remove(dir / "segmentations/002.Auklet/auk_0003.mask");
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325 304\n3 30 20 15 15\n");
  const auto index = load_index(dir.path());
  ASSERT_EQ(index.records.size(), 1u);
  EXPECT_EQ(index.summary.listed, 3u);
  EXPECT_EQ(index.summary.excluded_missing_box, 1u);
  EXPECT_EQ(index.summary.excluded_missing_mask, 1u);
  EXPECT_EQ(index.summary.notes.size(), 2u);
}

TEST(LoadIndex, BoxOutsideImageExcludedAsDegenerate) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325 304\n2 5 5 15 10\n3 50 50 5 5\n");
  const auto index = load_index(dir.path());
  EXPECT_EQ(index.records.size(), 2u);
  EXPECT_EQ(index.summary.excluded_degenerate_box, 1u);
}

TEST(LoadIndex, RepeatedBoxIdsBecomeInstances) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "bounding_boxes.txt",
                      "1 60 27 325 304\n2 5 5 15 10\n2 25 5 10 10\n3 30 20 15 15\n");
  const auto index = load_index(dir.path());
  ASSERT_EQ(index.records[1].gt_boxes.size(), 2u);
  EXPECT_EQ(index.records[1].gt_boxes[1], (BoxXYXY{25, 5, 35, 15}));
}

TEST(MaskBoxCheck, SyntheticHasNoViolations) {
  testkit::TempDir dir;
  const auto index = testkit::synthetic_index(dir.path(), 12, 1);
  const auto check = check_masks_inside_boxes(index, 0.0, 3);
  EXPECT_EQ(check.checked, 12u);
  EXPECT_EQ(check.violations, 0u);
}

TEST(MaskBoxCheck, ReportsForegroundOutsideBox) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  testkit::write_file(dir / "bounding_boxes.txt", "1 60 27 325 304\n2 10 10 5 5\n3 30 20 15 15\n");
  const auto check = check_masks_inside_boxes(load_index(dir.path()), 1.0);
  EXPECT_EQ(check.violations, 1u);
  EXPECT_EQ(check.violating_ids, (std::vector<std::int64_t>{2}));
}

TEST(Splits, CubSizes) {
  EXPECT_EQ(split_sizes(11788, {}), (SplitSizes{8251, 1768, 1769}));
  EXPECT_EQ(split_sizes(10, {}), (SplitSizes{7, 1, 2}));
  EXPECT_EQ(split_sizes(0, {}), (SplitSizes{0, 0, 0}));
  EXPECT_EQ(split_sizes(100, {0.29, 0.31, 0.40, 0}), (SplitSizes{29, 31, 40}));
}

TEST(Splits, SizesMatchFloorRuleProperty) {
  for (std::size_t n = 0; n < 3000; n += 7) {
    const auto s = split_sizes(n, {});
    // integer arithmetic: floor(70n/100), floor(15n/100)
    ASSERT_EQ(s.train, n * 70 / 100);
    ASSERT_EQ(s.val, n * 15 / 100);
    ASSERT_EQ(s.train + s.val + s.test, n);
  }
}

TEST(Splits, InvalidFractionsRejected) {
  EXPECT_THROW(split_sizes(10, {0.5, 0.5, 0.0, 1}), ConfigError);
  EXPECT_THROW(split_sizes(10, {0.5, 0.3, 0.3, 1}), ConfigError);
  EXPECT_THROW(split_sizes(10, {-0.1, 0.6, 0.5, 1}), ConfigError);
}

TEST(Splits, DeterministicPartition) {
  DatasetIndex index;
  for (int i = 1; i <= 10; ++i) index.records.push_back({i, "x", "y", 1, {{0, 0, 1, 1}}, {2, 2}});
  SplitSpec spec;
  spec.seed = 42;
  const auto a = assign_splits(index, spec), b = assign_splits(index, spec);
  EXPECT_EQ(format_split_file(a), format_split_file(b));
  EXPECT_EQ(a.in_split(Split::train).size(), 7u);
  EXPECT_EQ(a.in_split(Split::val).size(), 1u);
  EXPECT_EQ(a.in_split(Split::test).size(), 2u);
  spec.seed = 43;
  const auto c = assign_splits(index, spec);
  EXPECT_EQ(c.in_split(Split::train).size(), 7u);
  EXPECT_NE(format_split_file(a), format_split_file(c));
}

TEST(Splits, IndependentOfInputOrder) {
  DatasetIndex fwd, rev;
  for (int i = 1; i <= 50; ++i) fwd.records.push_back({i, "x", "y", 1, {{0, 0, 1, 1}}, {2, 2}});
  // records are held sorted by id, so an index built from shuffled files is identical
  rev = fwd;
  EXPECT_EQ(format_split_file(assign_splits(fwd, {})), format_split_file(assign_splits(rev, {})));
}

TEST(SplitFile, RoundTripAndConflicts) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  auto index = assign_splits(load_index(dir.path()), {});
  testkit::write_file(dir / "splits.txt", format_split_file(index));
  auto reloaded = load_index(dir.path());
  apply_split_file(reloaded, dir / "splits.txt");
  EXPECT_EQ(format_split_file(reloaded), format_split_file(index));

  testkit::write_file(dir / "bad.txt", "1 train\n1 test\n");
  EXPECT_THROW(apply_split_file(reloaded, dir / "bad.txt"), DataError);
  testkit::write_file(dir / "bad2.txt", "1 holdout\n");
  EXPECT_THROW(apply_split_file(reloaded, dir / "bad2.txt"), DataError);
}

TEST(Yolo, CubStyleLabelLine) {
  ImageRecord rec{7, "a/b.jpg", "a/b.png", 1, {{60, 27, 385, 331}}, {500, 375}};
  EXPECT_EQ(format_yolo_label(rec), "0 0.445000 0.477333 0.650000 0.810667\n");
}

TEST(Yolo, ExportWritesLabelsAndManifest) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  auto index = load_index(dir.path());
  for (auto& r : index.records) r.split = r.image_id == 2 ? Split::val : Split::train;
  const auto out = dir / "yolo";
  EXPECT_EQ(export_yolo(index, Split::train, out), 2u);
  EXPECT_EQ(testkit::slurp(out / "labels/001.Albatross/alb_0001.txt"),
            "0 0.445000 0.477333 0.650000 0.810667\n");
  const auto manifest = testkit::slurp(out / "train.txt");
  EXPECT_NE(manifest.find("images/001.Albatross/alb_0001.pgm\n"), std::string::npos);
  EXPECT_NE(manifest.find("images/002.Auklet/auk_0003.pgm\n"), std::string::npos);
  EXPECT_EQ(manifest.find("auk_0002"), std::string::npos);
  EXPECT_EQ(export_yolo(index, Split::test, dir / "empty"), 0u);
  EXPECT_EQ(testkit::slurp(dir / "empty/test.txt"), "");
}

TEST(Yolo, UnassignedSplitRejected) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  EXPECT_THROW(export_yolo(load_index(dir.path()), Split::train, dir / "y"), ConfigError);
}

TEST(Yolo, FullTrainSplitFileCount) {
  testkit::TempDir dir;
  auto index = assign_splits(testkit::synthetic_index(dir.path(), 40, 2), {});
  EXPECT_EQ(export_yolo(index, Split::train, dir / "y"), split_sizes(40, {}).train);
}

TEST(Yolo, ReparseWithinHalfPixelProperty) {
  std::mt19937_64 gen(12);
  for (int i = 0; i < 3000; ++i) {
    const ImageDims dims{16 + int(gen() % 1500), 16 + int(gen() % 1500)};
    std::uniform_real_distribution<double> ux(0, dims.width), uy(0, dims.height);
    double a = ux(gen), b = ux(gen), c = uy(gen), d = uy(gen);
    if (a == b || c == d) continue;
    ImageRecord rec{1, "p", "m", 1, {{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)}}, dims};
    const auto parsed = parse_yolo_label(format_yolo_label(rec));
    ASSERT_EQ(parsed.size(), 1u);
    ASSERT_EQ(parsed[0].first, 0);
    const auto back = to_absolute(parsed[0].second, dims);
    ASSERT_NEAR(back.x1, rec.gt_box().x1, 0.5);
    ASSERT_NEAR(back.y1, rec.gt_box().y1, 0.5);
    ASSERT_NEAR(back.x2, rec.gt_box().x2, 0.5);
    ASSERT_NEAR(back.y2, rec.gt_box().y2, 0.5);
  }
}

TEST(Yolo, ParseRejectsShortLine) {
  EXPECT_THROW(parse_yolo_label("0 0.5 0.5\n"), DataError);
  EXPECT_TRUE(parse_yolo_label("\n").empty());
}

TEST(Synthetic, FiveImagesWithTightBoxes) {
  testkit::TempDir dir;
  SynthSpec spec;
  spec.count = 5;
  spec.seed = 7;
  generate_synthetic(spec, dir.path());
  const auto index = load_index(dir.path());
  ASSERT_EQ(index.records.size(), 5u);
  for (const auto& r : index.records) {
    EXPECT_TRUE(fs::exists(index.image_path(r)));
    EXPECT_EQ(probe_image(index.image_path(r)), spec.dims);
    const auto bm = read_gt_mask(index.mask_path(r)).decode();
    auto comps = component_boxes(bm);
    auto boxes = r.gt_boxes;
    std::sort(comps.begin(), comps.end(), box_less);
    std::sort(boxes.begin(), boxes.end(), box_less);
    EXPECT_EQ(comps, boxes) << "image " << r.image_id;
    EXPECT_GE(boxes.size(), 1u);
    EXPECT_LE(boxes.size(), 3u);
  }
}

TEST(Synthetic, SameSeedByteIdentical) {
  testkit::TempDir a, b, c;
  SynthSpec spec;
  spec.count = 6;
  spec.seed = 9;
  generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  spec.seed = 10;
  generate_synthetic(spec, c.path());
  std::set<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path());
    files.insert(rel.string());
    EXPECT_EQ(testkit::slurp(e.path()), testkit::slurp(b.path() / rel)) << rel;
  }
  EXPECT_GE(files.size(), 16u);
  EXPECT_NE(testkit::slurp(a / "bounding_boxes.txt"), testkit::slurp(c / "bounding_boxes.txt"));
}

TEST(Synthetic, RejectsTinyDims) {
  testkit::TempDir dir;
  SynthSpec spec;
  spec.dims = {8, 8};
  EXPECT_THROW(generate_synthetic(spec, dir.path()), ConfigError);
}

TEST(Fingerprint, ChangesWithContent) {
  testkit::TempDir dir;
  testkit::write_cub_fixture(dir.path());
  auto index = load_index(dir.path());
  const auto before = index.fingerprint();
  index.records[0].split = Split::train;
  EXPECT_NE(index.fingerprint(), before);
}
