#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boxseg/error.hpp"

namespace boxseg {

/// Image size in pixels.
struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const noexcept { return width >= 1 && height >= 1; }
  long long pixels() const noexcept { return static_cast<long long>(width) * height; }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

inline std::string to_string(ImageDims d) {
  return std::to_string(d.width) + "x" + std::to_string(d.height);
}

/// Axis-aligned box in absolute pixel coordinates. Pixel (x, y) covers
/// [x, x+1) x [y, y+1), so a box tightly enclosing pixels 0..W-1 is (0, 0, W, H).
struct BoxXYXY {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool degenerate() const noexcept { return !(x2 > x1 && y2 > y1); }
  bool valid() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 <= x2 && y1 <= y2;
  }

  friend bool operator==(const BoxXYXY&, const BoxXYXY&) = default;
};

/// Center/size box normalized by image width and height (YOLO label layout).
struct BoxCXCYWH {
  double cx = 0, cy = 0, w = 0, h = 0;
};

/// A scored, labelled box produced by a detector.
struct Detection {
  BoxXYXY box;
  double score = 0;
  std::string label;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Clip a box to [0,width] x [0,height]. `changed` reports whether any
/// coordinate moved.
inline BoxXYXY clip(const BoxXYXY& box, ImageDims dims, bool* changed = nullptr) {
  const double w = dims.width;
  const double h = dims.height;
  BoxXYXY out{std::clamp(box.x1, 0.0, w), std::clamp(box.y1, 0.0, h), std::clamp(box.x2, 0.0, w),
              std::clamp(box.y2, 0.0, h)};
  if (changed != nullptr) *changed = !(out == box);
  return out;
}

/// Absolute corners to normalized center/size. Throws GeometryError for a
/// degenerate box; `where` (usually the image id) prefixes the diagnostic.
inline BoxCXCYWH to_normalized(const BoxXYXY& box, ImageDims dims, std::string_view where = {}) {
  if (!dims.valid()) {
    throw GeometryError(std::string(where) + ": invalid image dims " + to_string(dims));
  }
  if (!box.valid() || box.degenerate()) {
    throw GeometryError((where.empty() ? std::string("box") : "image " + std::string(where)) +
                        ": degenerate box (" + std::to_string(box.x1) + ", " +
                        std::to_string(box.y1) + ", " + std::to_string(box.x2) + ", " +
                        std::to_string(box.y2) + ")");
  }
  const double w = dims.width;
  const double h = dims.height;
  return {(box.x1 + box.x2) / (2.0 * w), (box.y1 + box.y2) / (2.0 * h), (box.x2 - box.x1) / w,
          (box.y2 - box.y1) / h};
}

inline BoxXYXY to_absolute(const BoxCXCYWH& box, ImageDims dims) {
  const double w = dims.width;
  const double h = dims.height;
  const double cx = box.cx * w;
  const double cy = box.cy * h;
  const double bw = box.w * w;
  const double bh = box.h * h;
  return {cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0};
}

/// Intersection-over-union with continuous areas. Zero-area boxes give 0.
inline double box_iou(const BoxXYXY& a, const BoxXYXY& b) noexcept {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Greedy class-agnostic NMS. Sorted by score descending with ties kept in
/// input order; a detection survives iff its IoU with every kept detection
/// is <= iou_threshold.
inline std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const auto& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return box_iou(k.box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

/// Stable sort by score, highest first.
inline void sort_by_score(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
}

}  // namespace boxseg
