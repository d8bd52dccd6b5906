#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/image_io.hpp"
#include "boxseg/mask.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {

namespace fs = std::filesystem;

enum class Split { unassigned, train, val, test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: break;
  }
  return "unassigned";
}

inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train|val|test)");
}

/// One annotated image. CUB carries exactly one box per image; synthetic
/// roots may list several boxes for the same id (one per instance).
struct ImageRecord {
  std::int64_t image_id = 0;
  std::string path;       // relative to <root>/images
  std::string mask_path;  // relative to <root>/segmentations
  int class_id = 0;
  std::vector<BoxXYXY> gt_boxes;
  ImageDims dims;
  Split split = Split::unassigned;

  const BoxXYXY& gt_box() const { return gt_boxes.front(); }
};

struct LoadSummary {
  std::size_t listed = 0;
  std::size_t excluded_missing_mask = 0;
  std::size_t excluded_missing_box = 0;
  std::size_t excluded_missing_class = 0;
  std::size_t excluded_degenerate_box = 0;
  std::size_t clipped_boxes = 0;
  std::vector<std::string> notes;

  std::size_t excluded() const noexcept {
    return excluded_missing_mask + excluded_missing_box + excluded_missing_class +
           excluded_degenerate_box;
  }
};

/// Immutable list of records sorted by image_id, plus the dataset root.
struct DatasetIndex {
  fs::path root;
  std::vector<ImageRecord> records;
  LoadSummary summary;

  fs::path image_path(const ImageRecord& r) const { return root / "images" / r.path; }
  fs::path mask_path(const ImageRecord& r) const { return root / "segmentations" / r.mask_path; }

  const ImageRecord* find(std::int64_t id) const {
    auto it = std::lower_bound(records.begin(), records.end(), id,
                               [](const ImageRecord& r, std::int64_t v) { return r.image_id < v; });
    return it != records.end() && it->image_id == id ? &*it : nullptr;
  }

  std::vector<const ImageRecord*> in_split(Split s) const {
    std::vector<const ImageRecord*> out;
    for (const auto& r : records) {
      if (r.split == s) out.push_back(&r);
    }
    return out;
  }

  /// FNV-1a over ids, paths, classes, boxes and splits.
  std::uint64_t fingerprint() const {
    Fnv1a h;
    for (const auto& r : records) {
      std::ostringstream ss;
      ss.precision(17);
      ss << r.image_id << '|' << r.path << '|' << r.mask_path << '|' << r.class_id << '|'
         << r.dims.width << 'x' << r.dims.height << '|' << split_name(r.split);
      for (const auto& b : r.gt_boxes) ss << '|' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2;
      ss << '\n';
      h.update(ss.str());
    }
    return h.digest();
  }
};

namespace detail {

template <typename Fn>
void for_each_parallel(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Calls fn(line_no, fields) for every non-blank line of a whitespace
/// separated text file; the file must exist.
template <typename Fn>
void read_table(const fs::path& path, std::size_t min_fields, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("missing required file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string tok; ls >> tok;) fields.push_back(tok);
    if (fields.empty()) continue;
    if (fields.size() < min_fields) {
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(min_fields) + " fields, got " + std::to_string(fields.size()));
    }
    fn(line_no, fields);
  }
}

template <typename T>
T parse_field(const std::string& tok, const fs::path& file, std::size_t line_no) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(tok, &used));
      if (!std::isfinite(v)) used = 0;
    } else {
      v = static_cast<T>(std::stoll(tok, &used));
    }
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(file.filename().string() + ":" + std::to_string(line_no) + ": malformed value '" +
                  tok + "'");
}

inline std::optional<std::string> find_mask(const fs::path& seg_root, const std::string& rel) {
  static constexpr const char* exts[] = {".png", ".pgm", ".pbm", ".ppm", ".mask"};
  fs::path stem = fs::path(rel).replace_extension();
  for (const char* ext : exts) {
    fs::path candidate = stem;
    candidate += ext;
    if (fs::is_regular_file(seg_root / candidate)) return candidate.generic_string();
  }
  return std::nullopt;
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace detail

/// Read a CUB-200-2011 style root: images.txt, bounding_boxes.txt,
/// image_class_labels.txt, images/ and segmentations/. Records without a
/// mask, box or class label are excluded and counted in the summary.
/// Image dims come from the mask file header.
inline DatasetIndex load_index(const fs::path& root, unsigned jobs = 1) {
  DatasetIndex index;
  index.root = root;
  auto& summary = index.summary;

  std::map<std::int64_t, ImageRecord> by_id;
  const fs::path images_txt = root / "images.txt";
  detail::read_table(images_txt, 2, [&](std::size_t ln, const std::vector<std::string>& f) {
    const auto id = detail::parse_field<std::int64_t>(f[0], images_txt, ln);
    ImageRecord rec;
    rec.image_id = id;
    rec.path = f[1];
    if (!by_id.emplace(id, std::move(rec)).second) {
      throw DataError("images.txt:" + std::to_string(ln) + ": duplicate image id " +
                      std::to_string(id));
    }
  });
  summary.listed = by_id.size();

  const fs::path boxes_txt = root / "bounding_boxes.txt";
  detail::read_table(boxes_txt, 5, [&](std::size_t ln, const std::vector<std::string>& f) {
    const auto id = detail::parse_field<std::int64_t>(f[0], boxes_txt, ln);
    const double x = detail::parse_field<double>(f[1], boxes_txt, ln);
    const double y = detail::parse_field<double>(f[2], boxes_txt, ln);
    const double w = detail::parse_field<double>(f[3], boxes_txt, ln);
    const double h = detail::parse_field<double>(f[4], boxes_txt, ln);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("bounding_boxes.txt:" + std::to_string(ln) + ": unknown image id " +
                      std::to_string(id));
    }
    if (w < 0 || h < 0) {
      throw DataError("bounding_boxes.txt:" + std::to_string(ln) + ": negative box size");
    }
    it->second.gt_boxes.push_back({x, y, x + w, y + h});
  });

  const fs::path labels_txt = root / "image_class_labels.txt";
  detail::read_table(labels_txt, 2, [&](std::size_t ln, const std::vector<std::string>& f) {
    const auto id = detail::parse_field<std::int64_t>(f[0], labels_txt, ln);
    const int cls = detail::parse_field<int>(f[1], labels_txt, ln);
    if (cls < 1 || cls > 200) {
      throw DataError("image_class_labels.txt:" + std::to_string(ln) + ": class id " +
                      std::to_string(cls) + " outside 1..200");
    }
    if (auto it = by_id.find(id); it != by_id.end()) it->second.class_id = cls;
  });

  std::vector<ImageRecord> candidates;
  for (auto& [id, rec] : by_id) {
    if (rec.gt_boxes.empty()) {
      ++summary.excluded_missing_box;
      summary.notes.push_back("image " + std::to_string(id) + ": no bounding box");
    } else if (rec.class_id == 0) {
      ++summary.excluded_missing_class;
      summary.notes.push_back("image " + std::to_string(id) + ": no class label");
    } else {
      candidates.push_back(std::move(rec));
    }
  }

  // Mask lookup and header probing dominate load time on the full corpus.
  const fs::path seg_root = root / "segmentations";
  std::vector<std::optional<std::string>> problems(candidates.size());
  detail::for_each_parallel(candidates.size(), jobs, [&](std::size_t i) {
    auto& rec = candidates[i];
    auto mask = detail::find_mask(seg_root, rec.path);
    if (!mask) {
      problems[i] = "missing mask";
      return;
    }
    rec.mask_path = *mask;
    try {
      rec.dims = rec.mask_path.ends_with(".mask") ? read_mask_file((seg_root / *mask).string()).dims()
                                                  : probe_image(seg_root / *mask);
    } catch (const DataError& e) {
      problems[i] = std::string("unreadable mask: ") + e.what();
    }
  });

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& rec = candidates[i];
    if (problems[i]) {
      ++summary.excluded_missing_mask;
      summary.notes.push_back("image " + std::to_string(rec.image_id) + ": " + *problems[i]);
      continue;
    }
    bool degenerate = false;
    for (auto& box : rec.gt_boxes) {
      bool changed = false;
      box = clip(box, rec.dims, &changed);
      if (changed) ++summary.clipped_boxes;
      degenerate = degenerate || box.degenerate();
    }
    if (degenerate) {
      ++summary.excluded_degenerate_box;
      summary.notes.push_back("image " + std::to_string(rec.image_id) +
                              ": box degenerate after clipping");
      continue;
    }
    index.records.push_back(std::move(rec));
  }
  return index;
}


/// Records whose reference foreground pokes outside every GT box grown by
/// `tolerance_px`. Synthetic data has none; real annotations report a rate.
struct MaskBoxCheck {
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::size_t unreadable = 0;
  std::vector<std::int64_t> violating_ids;
};

inline MaskBoxCheck check_masks_inside_boxes(const DatasetIndex& index, double tolerance_px = 1.0,
                                             unsigned jobs = 1) {
  const std::size_t n = index.records.size();
  std::vector<int> status(n, 0);  // 0 ok, 1 violation, 2 unreadable
  detail::for_each_parallel(n, jobs, [&](std::size_t i) {
    const auto& rec = index.records[i];
    Bitmap bm;
    try {
      bm = read_gt_mask(index.mask_path(rec)).decode();
    } catch (const Error&) {
      status[i] = 2;
      return;
    }
    for (int y = 0; y < bm.dims.height && status[i] == 0; ++y) {
      for (int x = 0; x < bm.dims.width; ++x) {
        if (bm.at(x, y) == 0) continue;
        const bool inside = std::any_of(rec.gt_boxes.begin(), rec.gt_boxes.end(), [&](const BoxXYXY& b) {
          return x >= b.x1 - tolerance_px && x + 1 <= b.x2 + tolerance_px &&
                 y >= b.y1 - tolerance_px && y + 1 <= b.y2 + tolerance_px;
        });
        if (!inside) {
          status[i] = 1;
          break;
        }
      }
    }
  });
  MaskBoxCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] == 2) {
      ++out.unreadable;
      continue;
    }
    ++out.checked;
    if (status[i] == 1) {
      ++out.violations;
      out.violating_ids.push_back(index.records[i].image_id);
    }
  }
  return out;
}

/// Split fractions plus the permutation seed.
struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train > 0 && val > 0 && test > 0)) {
      throw ConfigError("split fractions must all be positive");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) {
      throw ConfigError("split fractions must sum to 1");
    }
  }
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

/// Floor allocation; the remainder goes to test. The 1e-9 slack absorbs
/// representation error such as 0.29 * 100 = 28.999999999999996.
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto take = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  SplitSizes s;
  s.train = std::min(n, take(spec.train));
  s.val = std::min(n - s.train, take(spec.val));
  s.test = n - s.train - s.val;
  return s;
}

/// Deterministic split: ids in ascending order are shuffled by Fisher-Yates
/// driven by Rng(seed) (mt19937_64, rejection-sampled bounds), then the
/// first floor(train*N) go to train, the next floor(val*N) to val and the
/// rest to test.
inline DatasetIndex assign_splits(DatasetIndex index, const SplitSpec& spec) {
  const auto sizes = split_sizes(index.records.size(), spec);
  std::vector<std::size_t> perm(index.records.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(spec.seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  for (std::size_t k = 0; k < perm.size(); ++k) {
    auto& rec = index.records[perm[k]];
    rec.split = k < sizes.train ? Split::train
                : k < sizes.train + sizes.val ? Split::val
                                              : Split::test;
  }
  return index;
}

inline std::string format_split_file(const DatasetIndex& index) {
  std::string out;
  for (const auto& r : index.records) {
    out += std::to_string(r.image_id);
    out += ' ';
    out += split_name(r.split);
    out += '\n';
  }
  return out;
}

/// Apply an "image_id split_name" file. Ids not in the index are ignored.
inline void apply_split_file(DatasetIndex& index, const fs::path& path) {
  std::map<std::int64_t, Split> seen;
  detail::read_table(path, 2, [&](std::size_t ln, const std::vector<std::string>& f) {
    const auto id = detail::parse_field<std::int64_t>(f[0], path, ln);
    Split s;
    try {
      s = parse_split(f[1]);
    } catch (const ConfigError&) {
      throw DataError(path.filename().string() + ":" + std::to_string(ln) + ": bad split '" +
                      f[1] + "'");
    }
    if (auto [it, fresh] = seen.emplace(id, s); !fresh && it->second != s) {
      throw DataError(path.filename().string() + ":" + std::to_string(ln) +
                      ": conflicting split for image " + std::to_string(id));
    }
  });
  for (auto& r : index.records) {
    if (auto it = seen.find(r.image_id); it != seen.end()) r.split = it->second;
  }
}

/// "0 cx cy w h" with six decimals, one line per GT box.
inline std::string format_yolo_label(const ImageRecord& rec) {
  std::string out;
  for (const auto& box : rec.gt_boxes) {
    const auto n = to_normalized(box, rec.dims, std::to_string(rec.image_id));
    out += "0 " + detail::fmt_fixed(n.cx, 6) + " " + detail::fmt_fixed(n.cy, 6) + " " +
           detail::fmt_fixed(n.w, 6) + " " + detail::fmt_fixed(n.h, 6) + "\n";
  }
  return out;
}

/// Parse one YOLO label file's lines back to (class, box) pairs.
inline std::vector<std::pair<int, BoxCXCYWH>> parse_yolo_label(std::string_view text) {
  std::vector<std::pair<int, BoxCXCYWH>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    std::istringstream ls(line);
    int cls;
    BoxCXCYWH b;
    if (!(ls >> cls)) continue;
    if (!(ls >> b.cx >> b.cy >> b.w >> b.h)) {
      throw DataError("yolo label:" + std::to_string(ln) + ": expected 5 fields");
    }
    out.emplace_back(cls, b);
  }
  return out;
}

/// Write one label file per record of `split` under out/labels/ (mirroring
/// the image tree) and out/<split>.txt listing the image paths. Native
/// image dims are kept; resizing is the trainer's business.
inline std::size_t export_yolo(const DatasetIndex& index, Split split, const fs::path& out) {
  if (split == Split::unassigned) throw ConfigError("export_yolo: no split requested");
  for (const auto& r : index.records) {
    if (r.split == Split::unassigned) {
      throw ConfigError("export_yolo: image " + std::to_string(r.image_id) +
                        " has no split assigned; run prepare first");
    }
  }
  fs::create_directories(out / "labels");
  std::ofstream manifest(out / (std::string(split_name(split)) + ".txt"),
                         std::ios::binary | std::ios::trunc);
  if (!manifest) throw DataError("cannot write manifest under " + out.string());
  std::size_t files = 0;
  for (const auto* r : index.in_split(split)) {
    fs::path label = out / "labels" / fs::path(r->path).replace_extension(".txt");
    fs::create_directories(label.parent_path());
    std::ofstream lf(label, std::ios::binary | std::ios::trunc);
    if (!lf) throw DataError("cannot write " + label.string());
    lf << format_yolo_label(*r);
    manifest << fs::absolute(index.image_path(*r)).generic_string() << '\n';
    ++files;
  }
  return files;
}

// ---------------------------------------------------------------------------
// Synthetic desk-scale corpus

struct SynthSpec {
  std::size_t count = 50;
  ImageDims dims{128, 96};
  std::uint64_t seed = 0;
  int classes = 5;
};

struct SynthInstance {
  double cx, cy, rx, ry;
};

/// Render a CUB-layout root with 1-3 filled ellipses per image on a noisy
/// striped background. Instance boxes are pairwise disjoint and tight
/// around the rendered pixels; the GT mask is the union of all instances.
inline void generate_synthetic(const SynthSpec& spec, const fs::path& out) {
  if (!spec.dims.valid() || spec.dims.width < 16 || spec.dims.height < 16) {
    throw ConfigError("synthetic dims must be at least 16x16");
  }
  if (spec.classes < 1 || spec.classes > 200) throw ConfigError("classes must be in 1..200");
  fs::create_directories(out);
  std::ofstream images_txt(out / "images.txt", std::ios::binary | std::ios::trunc);
  std::ofstream boxes_txt(out / "bounding_boxes.txt", std::ios::binary | std::ios::trunc);
  std::ofstream labels_txt(out / "image_class_labels.txt", std::ios::binary | std::ios::trunc);
  std::ofstream classes_txt(out / "classes.txt", std::ios::binary | std::ios::trunc);
  for (int c = 1; c <= spec.classes; ++c) {
    char name[64];
    std::snprintf(name, sizeof name, "%03d.Synthetic_%d", c, c);
    classes_txt << c << ' ' << name << '\n';
  }

  const int W = spec.dims.width, H = spec.dims.height;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::int64_t id = static_cast<std::int64_t>(i) + 1;
    Rng rng(derive_seed(spec.seed, i));
    const int cls = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.classes)));
    char dir[64], file[64];
    std::snprintf(dir, sizeof dir, "%03d.Synthetic_%d", cls, cls);
    std::snprintf(file, sizeof file, "synth_%05lld", static_cast<long long>(id));
    const std::string rel_img = std::string(dir) + "/" + file + ".ppm";
    const std::string rel_mask = std::string(dir) + "/" + file + ".pgm";

    // Background: stripes plus per-pixel noise.
    Image img{spec.dims, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H * 3)};
    const int base[3] = {int(90 + rng.below(60)), int(120 + rng.below(60)), int(80 + rng.below(50))};
    const int period = 6 + static_cast<int>(rng.below(10));
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const int stripe = ((x + y) / period) % 2 == 0 ? 12 : -12;
        for (int ch = 0; ch < 3; ++ch) {
          const int v = base[ch] + stripe + static_cast<int>(rng.below(31)) - 15;
          img.data[(static_cast<std::size_t>(y) * W + x) * 3 + ch] =
              static_cast<std::uint8_t>(std::clamp(v, 0, 255));
        }
      }
    }

    // Instances: rejection-sample ellipses whose bounding rectangles (with a
    // one pixel margin) do not touch.
    const int wanted = 1 + static_cast<int>(rng.below(3));
    std::vector<SynthInstance> birds;
    std::vector<BoxXYXY> reserved;
    for (int attempt = 0; attempt < 64 && static_cast<int>(birds.size()) < wanted; ++attempt) {
      SynthInstance b;
      b.rx = rng.uniform(0.10, 0.22) * W;
      b.ry = rng.uniform(0.10, 0.24) * H;
      b.cx = rng.uniform(b.rx + 1, W - b.rx - 1);
      b.cy = rng.uniform(b.ry + 1, H - b.ry - 1);
      const BoxXYXY outer{b.cx - b.rx - 1, b.cy - b.ry - 1, b.cx + b.rx + 1, b.cy + b.ry + 1};
      const bool clash = std::any_of(reserved.begin(), reserved.end(),
                                     [&](const BoxXYXY& r) { return box_iou(r, outer) > 0; });
      if (clash) continue;
      reserved.push_back(outer);
      birds.push_back(b);
    }

    Image mask{spec.dims, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H, 0)};
    std::vector<BoxXYXY> boxes;
    for (std::size_t k = 0; k < birds.size(); ++k) {
      const auto& b = birds[k];
      const int colour[3] = {int(20 + rng.below(80)), int(20 + rng.below(60)), int(40 + rng.below(120))};
      int minx = W, miny = H, maxx = -1, maxy = -1;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const double dx = (x + 0.5 - b.cx) / b.rx;
          const double dy = (y + 0.5 - b.cy) / b.ry;
          if (dx * dx + dy * dy > 1.0) continue;
          const std::size_t p = static_cast<std::size_t>(y) * W + x;
          mask.data[p] = 255;
          for (int ch = 0; ch < 3; ++ch) img.data[p * 3 + ch] = static_cast<std::uint8_t>(colour[ch]);
          minx = std::min(minx, x);
          maxx = std::max(maxx, x);
          miny = std::min(miny, y);
          maxy = std::max(maxy, y);
        }
      }
      if (maxx < 0) continue;
      boxes.push_back({double(minx), double(miny), double(maxx + 1), double(maxy + 1)});
    }

    fs::create_directories(out / "images" / dir);
    fs::create_directories(out / "segmentations" / dir);
    write_pnm(out / "images" / rel_img, img);
    write_pnm(out / "segmentations" / rel_mask, mask);
    images_txt << id << ' ' << rel_img << '\n';
    labels_txt << id << ' ' << cls << '\n';
    for (const auto& bx : boxes) {
      boxes_txt << id << ' ' << detail::fmt_fixed(bx.x1, 1) << ' ' << detail::fmt_fixed(bx.y1, 1)
                << ' ' << detail::fmt_fixed(bx.width(), 1) << ' '
                << detail::fmt_fixed(bx.height(), 1) << '\n';
    }
  }
}

}  // namespace boxseg
