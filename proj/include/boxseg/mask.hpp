#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"

namespace boxseg {

/// Row-major binary bitmap, one byte per pixel (0 = background).
struct Bitmap {
  ImageDims dims;
  std::vector<std::uint8_t> pixels;

  Bitmap() = default;
  explicit Bitmap(ImageDims d, std::uint8_t fill = 0)
      : dims(d), pixels(static_cast<std::size_t>(d.pixels()), fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * dims.width + x]; }
  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * dims.width + x];
  }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

/// Pixel-level confusion between a predicted and a reference mask.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Binary mask stored in its canonical run-length form: row-major scan,
/// runs alternate background/foreground starting with background. A leading
/// zero marks a mask whose first pixel is foreground; no other zero runs.
class BinaryMask {
 public:
  BinaryMask() = default;

  /// Validates the run-length invariants; throws DataError when violated.
  BinaryMask(ImageDims dims, std::vector<std::uint64_t> counts)
      : dims_(dims), counts_(std::move(counts)) {
    validate();
  }

  static BinaryMask background(ImageDims dims) {
    return BinaryMask(dims, {static_cast<std::uint64_t>(dims.pixels())});
  }

  ImageDims dims() const noexcept { return dims_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t foreground() const noexcept {
    std::uint64_t n = 0;
    for (std::size_t i = 1; i < counts_.size(); i += 2) n += counts_[i];
    return n;
  }
  bool empty() const noexcept { return foreground() == 0; }

  Bitmap decode() const {
    Bitmap out(dims_);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      const auto run = static_cast<std::size_t>(counts_[i]);
      if (i % 2 == 1) std::fill_n(out.pixels.begin() + static_cast<std::ptrdiff_t>(pos), run, 1);
      pos += run;
    }
    return out;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  void validate() const {
    if (!dims_.valid()) throw DataError("mask: invalid dims " + to_string(dims_));
    if (counts_.empty()) throw DataError("mask: empty run-length counts");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] == 0 && i != 0) {
        throw DataError("mask: zero-length run at position " + std::to_string(i));
      }
      sum += counts_[i];
    }
    if (sum != static_cast<std::uint64_t>(dims_.pixels())) {
      throw DataError("mask: run lengths sum to " + std::to_string(sum) + ", expected " +
                      std::to_string(dims_.pixels()) + " for " + to_string(dims_));
    }
    if (counts_.size() == 1 && counts_[0] == 0) throw DataError("mask: zero-length run");
  }

  ImageDims dims_{};
  std::vector<std::uint64_t> counts_;
};

inline BinaryMask rle_encode(const Bitmap& bitmap) {
  if (!bitmap.dims.valid() ||
      bitmap.pixels.size() != static_cast<std::size_t>(bitmap.dims.pixels())) {
    throw DataError("rle_encode: bitmap size does not match dims " + to_string(bitmap.dims));
  }
  std::vector<std::uint64_t> counts;
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (std::uint8_t px : bitmap.pixels) {
    const std::uint8_t v = px != 0 ? 1 : 0;
    if (v != current) {
      counts.push_back(run);
      current = v;
      run = 0;
    }
    ++run;
  }
  counts.push_back(run);
  return BinaryMask(bitmap.dims, std::move(counts));
}

inline void require_same_dims(ImageDims a, ImageDims b, std::string_view what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": dimension mismatch " + to_string(a) + " vs " +
                            to_string(b));
  }
}

/// Pixel-wise OR. An empty list yields the all-background mask of `dims`.
inline BinaryMask mask_union(std::span<const BinaryMask> masks, ImageDims dims) {
  Bitmap acc(dims);
  for (const auto& m : masks) {
    require_same_dims(dims, m.dims(), "union");
    std::size_t pos = 0;
    const auto& c = m.counts();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i % 2 == 1) {
        std::fill_n(acc.pixels.begin() + static_cast<std::ptrdiff_t>(pos), c[i], 1);
      }
      pos += c[i];
    }
  }
  return rle_encode(acc);
}

inline BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.dims(), b.dims(), "intersection");
  Bitmap x = a.decode();
  const Bitmap y = b.decode();
  for (std::size_t i = 0; i < x.pixels.size(); ++i) x.pixels[i] &= y.pixels[i];
  return rle_encode(x);
}

inline BinaryMask mask_complement(const BinaryMask& m) {
  auto counts = m.counts();
  if (counts.front() == 0) {
    counts.erase(counts.begin());
  } else {
    counts.insert(counts.begin(), 0);
  }
  return BinaryMask(m.dims(), std::move(counts));
}

/// Confusion counts by sweeping both run lists in lockstep.
inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_dims(pred.dims(), gt.dims(), "confusion");
  ConfusionCounts cc;
  const auto& pc = pred.counts();
  const auto& gc = gt.counts();
  std::size_t pi = 0, gi = 0;
  std::uint64_t prem = pc[0], grem = gc[0];
  auto advance = [](const std::vector<std::uint64_t>& c, std::size_t& i, std::uint64_t& rem) {
    while (rem == 0 && i + 1 < c.size()) rem = c[++i];
  };
  advance(pc, pi, prem);
  advance(gc, gi, grem);
  while (prem > 0 && grem > 0) {
    const std::uint64_t step = std::min(prem, grem);
    const bool p = pi % 2 == 1;
    const bool g = gi % 2 == 1;
    (p ? (g ? cc.tp : cc.fp) : (g ? cc.fn : cc.tn)) += step;
    prem -= step;
    grem -= step;
    advance(pc, pi, prem);
    advance(gc, gi, grem);
  }
  return cc;
}

/// Rasterize a box: pixel (x, y) is inside iff its center (x+.5, y+.5) lies
/// in [x1, x2) x [y1, y2).
inline BinaryMask box_mask(const BoxXYXY& box, ImageDims dims) {
  Bitmap bm(dims);
  const auto lo = [](double v, int n) {
    return std::clamp(static_cast<long long>(std::ceil(v - 0.5)), 0LL, static_cast<long long>(n));
  };
  const long long x0 = lo(box.x1, dims.width), x1 = lo(box.x2, dims.width);
  const long long y0 = lo(box.y1, dims.height), y1 = lo(box.y2, dims.height);
  for (long long y = y0; y < y1; ++y) {
    for (long long x = x0; x < x1; ++x) bm.at(static_cast<int>(x), static_cast<int>(y)) = 1;
  }
  return rle_encode(bm);
}

/// Tight pixel-coverage box of the foreground, or nullopt for an empty mask.
inline std::optional<BoxXYXY> foreground_bounds(const Bitmap& bm) {
  int minx = bm.dims.width, miny = bm.dims.height, maxx = -1, maxy = -1;
  for (int y = 0; y < bm.dims.height; ++y) {
    for (int x = 0; x < bm.dims.width; ++x) {
      if (bm.at(x, y) == 0) continue;
      minx = std::min(minx, x);
      maxx = std::max(maxx, x);
      miny = std::min(miny, y);
      maxy = std::max(maxy, y);
    }
  }
  if (maxx < 0) return std::nullopt;
  return BoxXYXY{double(minx), double(miny), double(maxx + 1), double(maxy + 1)};
}

// Mask fixture text format: "width height\n" then the counts on one line.

inline std::string format_mask(const BinaryMask& m) {
  std::string out = std::to_string(m.dims().width) + " " + std::to_string(m.dims().height) + "\n";
  bool first = true;
  for (auto c : m.counts()) {
    if (!first) out += ' ';
    out += std::to_string(c);
    first = false;
  }
  out += '\n';
  return out;
}

inline BinaryMask parse_mask(std::string_view text, std::string_view source = "mask") {
  std::istringstream in{std::string(text)};
  std::string line;
  ImageDims dims;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ":1: missing dims line");
  {
    std::istringstream ls(line);
    std::string extra;
    if (!(ls >> dims.width >> dims.height) || (ls >> extra) || !dims.valid()) {
      throw DataError(std::string(source) + ":1: expected \"width height\"");
    }
  }
  std::vector<std::uint64_t> counts;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ":2: missing counts line");
  {
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      if (tok.find_first_not_of("0123456789") != std::string::npos) {
        throw DataError(std::string(source) + ":2: bad count '" + tok + "'");
      }
      counts.push_back(std::stoull(tok));
    }
  }
  try {
    return BinaryMask(dims, std::move(counts));
  } catch (const DataError& e) {
    throw DataError(std::string(source) + ":2: " + e.what());
  }
}

inline void write_mask_file(const std::string& path, const BinaryMask& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << format_mask(m);
  if (!out) throw DataError("write failed: " + path);
}

inline BinaryMask read_mask_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mask(ss.str(), path);
}

}  // namespace boxseg
