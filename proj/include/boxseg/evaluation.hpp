#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxseg/dataset.hpp"
#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/mask.hpp"
#include "boxseg/pipeline.hpp"

namespace boxseg {

/// Pixel-level scores with foreground as the positive class.
struct SegMetrics {
  double iou = 0, dice = 0, precision = 0, recall = 0, f1 = 0;
};

/// Scores from integer counts.
///
/// Empty denominators: both masks empty scores 1 everywhere; an empty
/// prediction against a non-empty reference has precision 0; a non-empty
/// prediction against an empty reference has recall 0. F1 uses the Dice
/// expression, so the two are bit-identical.
inline SegMetrics metrics_from_counts(const ConfusionCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return {1, 1, 1, 1, 1};
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  SegMetrics m;
  m.iou = tp / (tp + fp + fn);
  m.dice = 2 * tp / (2 * tp + fp + fn);
  m.f1 = m.dice;
  m.precision = c.tp + c.fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? tp / (tp + fn) : 0.0;
  return m;
}

inline SegMetrics seg_metrics(const BinaryMask& pred, const BinaryMask& gt) {
  return metrics_from_counts(confusion(pred, gt));
}

/// Dice implied by an IoU value.
constexpr double dice_from_iou(double iou) noexcept { return 2 * iou / (1 + iou); }

struct PerImageEval {
  std::int64_t image_id = 0;
  int class_id = 0;
  ConfusionCounts counts;
  SegMetrics metrics;
  std::size_t detections = 0;
  bool missing_prediction = false;
};

struct AggregateReport {
  std::size_t images = 0;
  SegMetrics macro;
  SegMetrics micro;
  ConfusionCounts pooled;
  std::size_t no_detection = 0;
  std::size_t multi_detection = 0;
  std::size_t missing_predictions = 0;
  std::optional<double> ap50;  // ratio in [0,1]
};

/// Macro = mean of per-image scores in ascending image_id order; micro =
/// scores of the summed confusion counts.
inline AggregateReport aggregate(std::span<const PerImageEval> per_image) {
  if (per_image.empty()) throw ConfigError("aggregate: no images to aggregate");
  std::vector<const PerImageEval*> order;
  for (const auto& p : per_image) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const PerImageEval* a, const PerImageEval* b) { return a->image_id < b->image_id; });
  AggregateReport r;
  r.images = order.size();
  for (const auto* p : order) {
    r.macro.iou += p->metrics.iou;
    r.macro.dice += p->metrics.dice;
    r.macro.precision += p->metrics.precision;
    r.macro.recall += p->metrics.recall;
    r.macro.f1 += p->metrics.f1;
    r.pooled += p->counts;
    if (p->detections == 0) ++r.no_detection;
    if (p->detections > 1) ++r.multi_detection;
    if (p->missing_prediction) ++r.missing_predictions;
  }
  const double n = static_cast<double>(r.images);
  r.macro.iou /= n;
  r.macro.dice /= n;
  r.macro.precision /= n;
  r.macro.recall /= n;
  r.macro.f1 /= n;
  r.micro = metrics_from_counts(r.pooled);
  return r;
}

struct ImageDetection {
  std::int64_t image_id = 0;
  Detection detection;
};

/// Detector AP at IoU 0.5, single class, all-point interpolation.
///
/// Detections are pooled and sorted by score (ties: image_id, then input
/// order). Each takes the highest-IoU unmatched GT box of its image if that
/// IoU is >= 0.5, otherwise it is a false positive. AP sums the precision
/// envelope over recall increments. Returns a ratio; reports print x100.
inline double ap50(std::span<const ImageDetection> dets,
                   const std::map<std::int64_t, std::vector<BoxXYXY>>& gt) {
  std::size_t total_gt = 0;
  for (const auto& [id, boxes] : gt) total_gt += boxes.size();
  if (total_gt == 0) throw ConfigError("ap50: no ground-truth boxes");

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].detection.score != dets[b].detection.score) {
      return dets[a].detection.score > dets[b].detection.score;
    }
    return dets[a].image_id < dets[b].image_id;
  });

  std::map<std::int64_t, std::vector<bool>> matched;
  for (const auto& [id, boxes] : gt) matched[id].assign(boxes.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (std::size_t idx : order) {
    const auto& d = dets[idx];
    bool hit = false;
    if (auto it = gt.find(d.image_id); it != gt.end()) {
      auto& used = matched[d.image_id];
      double best = 0.5;
      std::optional<std::size_t> best_gt;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double iou = box_iou(d.detection.box, it->second[g]);
        if (iou >= best && (!best_gt || iou > best)) {
          best = iou;
          best_gt = g;
        }
      }
      if (best_gt) {
        used[*best_gt] = true;
        hit = true;
      }
    }
    hit ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }

  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct ClassRow {
  int class_id = 0;
  std::size_t images = 0;
  double mean_iou = 0;
};

struct PerClassTable {
  std::vector<ClassRow> rows;     // ascending class_id
  std::size_t above = 0;          // classes with mean_iou > threshold
  double threshold = 0.85;
  std::vector<int> omitted;       // classes in the index without evaluated images
};

inline PerClassTable per_class_summary(std::span<const PerImageEval> per_image,
                                       const DatasetIndex& index, double threshold = 0.85) {
  std::map<int, std::pair<std::size_t, double>> acc;
  std::vector<const PerImageEval*> order;
  for (const auto& p : per_image) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->image_id < b->image_id; });
  for (const auto* p : order) {
    auto& [count, sum] = acc[p->class_id];
    ++count;
    sum += p->metrics.iou;
  }
  PerClassTable t;
  t.threshold = threshold;
  for (const auto& [cls, cs] : acc) {
    ClassRow row{cls, cs.first, cs.second / static_cast<double>(cs.first)};
    if (row.mean_iou > threshold) ++t.above;
    t.rows.push_back(row);
  }
  std::map<int, bool> known;
  for (const auto& r : index.records) known[r.class_id] = true;
  for (const auto& [cls, _] : known) {
    if (!acc.contains(cls)) t.omitted.push_back(cls);
  }
  return t;
}

struct FpsSummary {
  std::size_t samples = 0;
  double detect_ms = 0, segment_ms = 0, overhead_ms = 0, total_ms = 0;
  long long fps = 0;           // floor(1000 / mean total)
  double fps_unrounded = 0;    // truncated to one decimal
};

/// Mean stage latencies and throughput. FPS is floor(1000 / mean total ms),
/// which reproduces integer throughput columns computed from rounded totals.
inline FpsSummary fps_summary(std::span<const StageTimings> timings) {
  if (timings.empty()) throw ConfigError("fps_summary: no timings");
  FpsSummary s;
  s.samples = timings.size();
  for (const auto& t : timings) {
    s.detect_ms += t.detect_ms;
    s.segment_ms += t.segment_ms;
    s.total_ms += t.total_ms;
  }
  const double n = static_cast<double>(s.samples);
  s.detect_ms /= n;
  s.segment_ms /= n;
  s.total_ms /= n;
  s.overhead_ms = s.total_ms - s.detect_ms - s.segment_ms;
  if (!(s.total_ms > 0)) throw ConfigError("fps_summary: mean total latency must be positive");
  s.fps = static_cast<long long>(std::floor(1000.0 / s.total_ms + 1e-9));
  s.fps_unrounded = std::floor(10000.0 / s.total_ms + 1e-9) / 10.0;
  return s;
}

// ---------------------------------------------------------------------------
// Report emission

inline std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// One row of the method comparison table.
struct TableRow {
  std::string method;
  std::optional<SegMetrics> metrics;
  std::optional<double> ap50;  // ratio
  std::optional<long long> fps;
};

inline std::string format_table(std::span<const TableRow> rows) {
  std::string out = "method,IoU,Dice,F1,Precision,Recall,mAP50,FPS\n";
  for (const auto& r : rows) {
    std::string name = r.method;
    std::replace(name.begin(), name.end(), ',', ';');
    out += name;
    if (r.metrics) {
      for (double v : {r.metrics->iou, r.metrics->dice, r.metrics->f1, r.metrics->precision,
                       r.metrics->recall}) {
        out += "," + fmt(v, 4);
      }
    } else {
      out += ",-,-,-,-,-";
    }
    out += "," + (r.ap50 ? fmt(*r.ap50 * 100.0, 1) : std::string("-"));
    out += "," + (r.fps ? std::to_string(*r.fps) : std::string("-"));
    out += "\n";
  }
  return out;
}

inline std::string format_per_class(const PerClassTable& t) {
  std::string out = "class_id,images,mean_iou\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.class_id) + "," + std::to_string(r.images) + "," + fmt(r.mean_iou, 4) + "\n";
  }
  out += "# classes with mean IoU > " + fmt(t.threshold, 2) + ": " + std::to_string(t.above) +
         " of " + std::to_string(t.rows.size()) + "\n";
  if (!t.omitted.empty()) {
    out += "# omitted (no evaluated images):";
    for (int c : t.omitted) out += " " + std::to_string(c);
    out += "\n";
  }
  return out;
}

inline constexpr const char* kConventionsFooter =
    "Conventions:\n"
    "  - Pixel metrics use foreground as the positive class; F1 equals Dice per image by definition.\n"
    "  - Both masks empty scores 1 on every metric; empty prediction vs non-empty reference has\n"
    "    precision 0; non-empty prediction vs empty reference has recall 0.\n"
    "  - Macro = mean over images (headline); micro = pooled pixel counts.\n"
    "  - A reported F1 that differs from Dice for the same predictions cannot come from these\n"
    "    definitions; it implies a different averaging or a two-class F1.\n"
    "  - mAP50: single class, greedy highest-IoU matching at IoU >= 0.5, all-point interpolation.\n"
    "  - FPS = floor(1000 / mean total ms).\n"
    "  - Missing predictions are scored as all-background masks.\n";

inline nlohmann::json to_json(const SegMetrics& m) {
  return {{"iou", m.iou}, {"dice", m.dice}, {"f1", m.f1}, {"precision", m.precision}, {"recall", m.recall}};
}

inline nlohmann::json to_json(const FpsSummary& s) {
  return {{"samples", s.samples},       {"detect_ms", s.detect_ms},   {"segment_ms", s.segment_ms},
          {"overhead_ms", s.overhead_ms}, {"total_ms", s.total_ms},   {"fps", s.fps},
          {"fps_unrounded", s.fps_unrounded}};
}

inline std::string format_summary(const std::string& method, const AggregateReport& r,
                                  const std::optional<FpsSummary>& fps,
                                  const std::string& manifest_ref) {
  std::string out = "Evaluation: " + method + "\n";
  out += "Images: " + std::to_string(r.images) + " (no detection: " + std::to_string(r.no_detection) +
         ", multiple detections: " + std::to_string(r.multi_detection) +
         ", missing predictions: " + std::to_string(r.missing_predictions) + ")\n";
  auto line = [&](const char* name, const SegMetrics& m) {
    out += std::string(name) + "  IoU " + fmt(m.iou, 4) + "  Dice " + fmt(m.dice, 4) + "  F1 " +
           fmt(m.f1, 4) + "  Precision " + fmt(m.precision, 4) + "  Recall " + fmt(m.recall, 4) + "\n";
  };
  line("Macro", r.macro);
  line("Micro", r.micro);
  out += "mAP50: " + (r.ap50 ? fmt(*r.ap50 * 100.0, 1) : std::string("n/a")) + "\n";
  if (fps) {
    out += "Latency (mean ms): detect " + fmt(fps->detect_ms, 1) + ", segment " +
           fmt(fps->segment_ms, 1) + ", overhead " + fmt(fps->overhead_ms, 1) + ", total " +
           fmt(fps->total_ms, 1) + "  ->  " + std::to_string(fps->fps) + " FPS (" +
           fmt(fps->fps_unrounded, 1) + ")\n";
  }
  out += "Run manifest: " + manifest_ref + "\n\n";
  out += kConventionsFooter;
  return out;
}


// ---------------------------------------------------------------------------
// Scoring whole runs

struct Evaluation {
  std::vector<PerImageEval> per_image;  // ascending image_id
  AggregateReport report;
  std::optional<FpsSummary> fps;
  std::vector<std::string> warnings;
};

namespace detail {

inline Evaluation finish_evaluation(const DatasetIndex& index, Split split,
                                    std::vector<PerImageEval> per_image,
                                    const std::vector<ImageDetection>& dets, bool have_dets,
                                    const std::vector<StageTimings>& timings,
                                    std::vector<std::string> warnings) {
  Evaluation ev;
  ev.per_image = std::move(per_image);
  ev.report = aggregate(ev.per_image);
  if (have_dets) {
    std::map<std::int64_t, std::vector<BoxXYXY>> gt;
    for (const auto* r : index.in_split(split)) gt[r->image_id] = r->gt_boxes;
    ev.report.ap50 = ap50(dets, gt);
  }
  if (!timings.empty()) ev.fps = fps_summary(timings);
  ev.warnings = std::move(warnings);
  return ev;
}

inline PerImageEval score_image(const DatasetIndex& index, const ImageRecord& rec,
                                const std::optional<BinaryMask>& pred, std::size_t detections) {
  const BinaryMask gt = read_gt_mask(index.mask_path(rec));
  require_same_dims(gt.dims(), rec.dims, "reference mask");
  PerImageEval e;
  e.image_id = rec.image_id;
  e.class_id = rec.class_id;
  e.detections = detections;
  e.missing_prediction = !pred.has_value();
  e.counts = confusion(pred ? *pred : BinaryMask::background(rec.dims), gt);
  e.metrics = metrics_from_counts(e.counts);
  return e;
}

}  // namespace detail

/// Score an in-memory run. Images that failed are scored as all-background.
inline Evaluation evaluate_run(const DatasetIndex& index, Split split, const SplitRun& run,
                               const PipelineConfig& config) {
  std::map<std::int64_t, const PipelineResult*> by_id;
  for (const auto& r : run.results) by_id[r.image_id] = &r;
  std::vector<PerImageEval> per_image;
  std::vector<ImageDetection> dets;
  std::vector<StageTimings> timings;
  std::vector<std::string> warnings;
  for (const auto* rec : index.in_split(split)) {
    auto it = by_id.find(rec->image_id);
    if (it == by_id.end()) {
      warnings.push_back("image " + std::to_string(rec->image_id) +
                         ": no prediction, scored as all-background");
      per_image.push_back(detail::score_image(index, *rec, std::nullopt, 0));
      continue;
    }
    const auto& res = *it->second;
    per_image.push_back(detail::score_image(index, *rec, res.aggregate, res.detections.size()));
    for (const auto& d : res.detections) dets.push_back({rec->image_id, d});
    if (config.timing) timings.push_back(res.timings);
  }
  return detail::finish_evaluation(index, split, std::move(per_image), dets, true, timings,
                                   std::move(warnings));
}

/// Score a predictions directory written by write_predictions. Missing or
/// wrong-sized masks are scored as all-background with a warning.
inline Evaluation evaluate_prediction_dir(const DatasetIndex& index, Split split,
                                          const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::map<std::int64_t, std::vector<Detection>> dets_by_id;
  const bool have_dets = fs::is_regular_file(dir / "detections.jsonl");
  if (have_dets) {
    std::istringstream in(read_text(dir / "detections.jsonl"));
    std::size_t ln = 0;
    for (std::string line; std::getline(in, line);) {
      ++ln;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        auto& v = dets_by_id[j.at("image_id").get<std::int64_t>()];
        for (const auto& d : j.at("detections")) {
          const auto& b = d.at("box");
          v.push_back({{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                        b.at(3).get<double>()},
                       d.at("score").get<double>(),
                       d.value("label", std::string())});
        }
      } catch (const nlohmann::json::exception& e) {
        throw DataError("detections.jsonl:" + std::to_string(ln) + ": " + e.what());
      }
    }
  }
  std::map<std::int64_t, StageTimings> timing_by_id;
  if (fs::is_regular_file(dir / "timings.csv")) {
    std::istringstream in(read_text(dir / "timings.csv"));
    std::string line;
    std::getline(in, line);  // header
    std::size_t ln = 1;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty()) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      std::int64_t id;
      StageTimings t;
      if (!(ls >> id >> t.detect_ms >> t.segment_ms >> t.total_ms)) {
        throw DataError("timings.csv:" + std::to_string(ln) + ": malformed row");
      }
      timing_by_id[id] = t;
    }
  }

  std::vector<PerImageEval> per_image;
  std::vector<ImageDetection> dets;
  std::vector<StageTimings> timings;
  std::vector<std::string> warnings;
  for (const auto* rec : index.in_split(split)) {
    const auto id = std::to_string(rec->image_id);
    std::optional<BinaryMask> pred;
    const fs::path mask_file = dir / "masks" / (id + ".mask");
    if (!fs::is_regular_file(mask_file)) {
      warnings.push_back("image " + id + ": no prediction, scored as all-background");
    } else {
      try {
        pred = read_mask_file(mask_file.string());
        if (pred->dims() != rec->dims) {
          warnings.push_back("image " + id + ": predicted mask is " + to_string(pred->dims()) +
                             ", image is " + to_string(rec->dims) +
                             "; rejected and scored as all-background");
          pred.reset();
        }
      } catch (const DataError& e) {
        warnings.push_back("image " + id + ": unreadable prediction (" + e.what() +
                           "), scored as all-background");
        pred.reset();
      }
    }
    std::size_t ndet = 0;
    if (auto it = dets_by_id.find(rec->image_id); it != dets_by_id.end()) {
      ndet = it->second.size();
      for (const auto& d : it->second) dets.push_back({rec->image_id, d});
    }
    auto e = detail::score_image(index, *rec, pred, ndet);
    per_image.push_back(e);
    if (auto it = timing_by_id.find(rec->image_id); it != timing_by_id.end()) {
      timings.push_back(it->second);
    }
  }
  return detail::finish_evaluation(index, split, std::move(per_image), dets, have_dets, timings,
                                   std::move(warnings));
}

}  // namespace boxseg
