#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "boxseg/boxseg.hpp"

namespace boxseg::testkit {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "boxseg") {
    std::string templ = (std::filesystem::temp_directory_path() / (tag + "-XXXXXX")).string();
    if (::mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Bitmap random_bitmap(std::mt19937_64& gen, ImageDims dims, double density = 0.5) {
  Bitmap bm(dims);
  std::bernoulli_distribution px(density);
  for (auto& p : bm.pixels) p = px(gen) ? 1 : 0;
  return bm;
}

inline BoxXYXY random_box(std::mt19937_64& gen, double extent = 50.0) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> size(0.0, extent / 2);
  const double x = pos(gen), y = pos(gen);
  return {x, y, x + size(gen), y + size(gen)};
}

/// Synthetic root plus split file with every image in `split`.
inline DatasetIndex synthetic_index(const std::filesystem::path& root, std::size_t n,
                                    std::uint64_t seed, Split split = Split::test,
                                    ImageDims dims = {128, 96}) {
  SynthSpec spec;
  spec.count = n;
  spec.seed = seed;
  spec.dims = dims;
  generate_synthetic(spec, root);
  auto index = load_index(root);
  for (auto& r : index.records) r.split = split;
  return index;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct FixtureImage {
  std::int64_t id;
  std::string rel;  // image path under images/, extension .pgm
  ImageDims dims;
  BoxXYXY mask_box;  // foreground of the GT mask
  std::string box_line;
  int class_id;
};

/// Three hand-authored CUB-style records.
inline std::vector<FixtureImage> cub_fixture_images() {
  return {
      {1, "001.Albatross/alb_0001.pgm", {500, 375}, {100, 50, 300, 300}, "1 60 27 325 304", 1},
      {2, "002.Auklet/auk_0002.pgm", {40, 30}, {6, 6, 18, 14}, "2 5 5 15 10", 2},
      {3, "002.Auklet/auk_0003.pgm", {40, 30}, {31, 21, 39, 29}, "3 30 20 15 15", 2},
  };
}

inline void write_cub_fixture(const std::filesystem::path& root) {
  std::string images, boxes, labels;
  for (const auto& f : cub_fixture_images()) {
    Image img{f.dims, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(f.dims.pixels()), 90)};
    std::filesystem::create_directories((root / "images" / f.rel).parent_path());
    write_pnm(root / "images" / f.rel, img);
    auto mask_rel = std::filesystem::path(f.rel).replace_extension(".mask");
    std::filesystem::create_directories((root / "segmentations" / mask_rel).parent_path());
    write_mask_file((root / "segmentations" / mask_rel).string(), box_mask(f.mask_box, f.dims));
    images += std::to_string(f.id) + " " + f.rel + "\n";
    boxes += f.box_line + "\n";
    labels += std::to_string(f.id) + " " + std::to_string(f.class_id) + "\n";
  }
  write_file(root / "images.txt", images);
  write_file(root / "bounding_boxes.txt", boxes);
  write_file(root / "image_class_labels.txt", labels);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Path of the built CLI and the fake backend, injected by CMake.
inline std::string cli_path() { return BOXSEG_CLI_PATH; }
inline std::string fake_backend_path() { return BOXSEG_FAKE_BACKEND_PATH; }
inline std::filesystem::path fixture_dir() { return BOXSEG_FIXTURE_DIR; }

inline int run_command(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace boxseg::testkit
