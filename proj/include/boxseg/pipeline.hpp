#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boxseg/backends.hpp"
#include "boxseg/dataset.hpp"
#include "boxseg/error.hpp"
#include "boxseg/mask.hpp"

namespace boxseg {

inline constexpr const char* kVersion = "0.3.0";

enum class Aggregation { union_mask, per_instance };

inline std::string_view aggregation_name(Aggregation a) {
  return a == Aggregation::union_mask ? "union" : "per-instance";
}

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "union") return Aggregation::union_mask;
  if (s == "per-instance") return Aggregation::per_instance;
  throw ConfigError("unknown aggregation '" + std::string(s) + "' (union|per-instance)");
}

struct PipelineConfig {
  DetectorConfig detector;
  Aggregation aggregation = Aggregation::union_mask;
  CandidateSelection selection = CandidateSelection::highest_score;
  bool timing = true;

  void validate() const { detector.validate(); }
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"mode", std::string(mode_name(c.detector.mode))},
          {"prompt", c.detector.text_prompt},
          {"box_threshold", c.detector.box_threshold},
          {"text_threshold", c.detector.text_threshold},
          {"conf_threshold", c.detector.conf_threshold},
          {"nms_iou", c.detector.nms_iou},
          {"aggregation", std::string(aggregation_name(c.aggregation))},
          {"selection", std::string(selection_name(c.selection))},
          {"timing", c.timing}};
}

/// Overlay the keys present in `j` onto `base`. Unknown keys are errors.
inline PipelineConfig apply_config_json(PipelineConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "mode") base.detector.mode = parse_mode(v.get<std::string>());
      else if (k == "prompt") base.detector.text_prompt = v.get<std::string>();
      else if (k == "box_threshold") base.detector.box_threshold = v.get<double>();
      else if (k == "text_threshold") base.detector.text_threshold = v.get<double>();
      else if (k == "conf_threshold") base.detector.conf_threshold = v.get<double>();
      else if (k == "nms_iou") base.detector.nms_iou = v.get<double>();
      else if (k == "aggregation") base.aggregation = parse_aggregation(v.get<std::string>());
      else if (k == "selection") base.selection = parse_selection(v.get<std::string>());
      else if (k == "timing") base.timing = v.get<bool>();
      else throw ConfigError("unknown pipeline config key '" + k + "'");
    }
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  base.validate();
  return base;
}

struct StageTimings {
  double detect_ms = 0;
  double segment_ms = 0;
  double total_ms = 0;

  /// Whatever the total holds beyond the two model stages.
  double overhead_ms() const noexcept { return total_ms - detect_ms - segment_ms; }
};

struct PipelineResult {
  std::int64_t image_id = 0;
  std::vector<Detection> detections;
  std::vector<BinaryMask> instance_masks;  // aligned with detections
  BinaryMask aggregate;
  StageTimings timings;

  bool no_detection() const noexcept { return detections.empty(); }
};

/// A failure tied to one image; the message carries the image id.
class ImageError : public Error {
 public:
  ImageError(std::int64_t image_id, const std::string& message)
      : Error("image " + std::to_string(image_id) + ": " + message), image_id_(image_id) {}
  std::int64_t image_id() const noexcept { return image_id_; }

 private:
  std::int64_t image_id_;
};

/// Detect, prompt the segmenter with every surviving box, union the masks.
inline PipelineResult run_image(const DatasetIndex& index, const ImageRecord& record,
                                const PipelineConfig& config, Detector& detector,
                                Segmenter& segmenter) {
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  try {
    const ImageContext ctx{record, index.image_path(record), index.mask_path(record)};
    const ImageDims actual = probe_image(ctx.image_path);
    if (actual != record.dims) {
      throw DimensionMismatch("image is " + to_string(actual) + " but its mask is " +
                              to_string(record.dims));
    }

    PipelineResult result;
    result.image_id = record.image_id;
    const auto t0 = clock::now();
    result.detections = detect(detector, ctx, config.detector);
    const auto t1 = clock::now();
    std::vector<BoxXYXY> prompts;
    prompts.reserve(result.detections.size());
    for (const auto& d : result.detections) prompts.push_back(d.box);
    auto masks = segment(segmenter, ctx, prompts, config.selection);
    const auto t2 = clock::now();
    result.instance_masks.reserve(masks.size());
    for (auto& m : masks) result.instance_masks.push_back(std::move(m.mask));
    result.aggregate = mask_union(result.instance_masks, record.dims);
    const auto t3 = clock::now();
    if (config.timing) result.timings = {ms(t1 - t0), ms(t2 - t1), ms(t3 - t0)};
    return result;
  } catch (const ImageError&) {
    throw;
  } catch (const std::exception& e) {
    throw ImageError(record.image_id, e.what());
  }
}

using DetectorFactory = std::function<std::unique_ptr<Detector>()>;
using SegmenterFactory = std::function<std::unique_ptr<Segmenter>()>;

struct Failure {
  std::int64_t image_id;
  std::string message;
};

struct SplitRun {
  std::vector<PipelineResult> results;  // ascending image_id
  std::vector<Failure> failures;        // ascending image_id
  std::string detector_identity;
  std::string segmenter_identity;
};

/// Run every record of `split` on a pool of `jobs` workers. Each worker owns
/// its own backend instances; per-image errors are collected, not thrown.
inline SplitRun run_split(const DatasetIndex& index, Split split, const PipelineConfig& config,
                          const DetectorFactory& make_det, const SegmenterFactory& make_seg,
                          unsigned jobs = 1) {
  config.validate();
  const auto records = index.in_split(split);
  const std::size_t n = records.size();
  std::vector<std::optional<PipelineResult>> slots(n);
  std::vector<std::optional<std::string>> errors(n);
  std::vector<std::string> det_ids, seg_ids;

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  det_ids.resize(jobs);
  seg_ids.resize(jobs);
  std::vector<std::exception_ptr> fatal(jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&](unsigned w) {
    try {
      auto det = make_det();
      auto seg = make_seg();
      det_ids[w] = det->identity();
      seg_ids[w] = seg->identity();
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          slots[i] = run_image(index, *records[i], config, *det, *seg);
        } catch (const ImageError& e) {
          errors[i] = e.what();
        }
      }
    } catch (...) {
      fatal[w] = std::current_exception();
    }
  };

  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& f : fatal) {
    if (f) std::rethrow_exception(f);
  }

  SplitRun run;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) run.results.push_back(std::move(*slots[i]));
    if (errors[i]) run.failures.push_back({records[i]->image_id, *errors[i]});
  }
  run.detector_identity = det_ids.front();
  run.segmenter_identity = seg_ids.front();
  if (run.detector_identity.empty()) {
    run.detector_identity = make_det()->identity();
    run.segmenter_identity = make_seg()->identity();
  }
  return run;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const Detection& d) {
  return {{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}, {"score", d.score}, {"label", d.label}};
}

inline nlohmann::json to_json(const BinaryMask& m) {
  return {{"dims", {m.dims().width, m.dims().height}}, {"rle", m.counts()}};
}

inline nlohmann::json to_json(const PipelineResult& r, const PipelineConfig& config) {
  nlohmann::json j;
  j["image_id"] = r.image_id;
  j["detections"] = nlohmann::json::array();
  for (const auto& d : r.detections) j["detections"].push_back(to_json(d));
  j["mask"] = to_json(r.aggregate);
  if (config.aggregation == Aggregation::per_instance) {
    j["instances"] = nlohmann::json::array();
    for (const auto& m : r.instance_masks) j["instances"].push_back(to_json(m));
  }
  if (config.timing) {
    j["timing_ms"] = {{"detect", r.timings.detect_ms},
                      {"segment", r.timings.segment_ms},
                      {"overhead", r.timings.overhead_ms()},
                      {"total", r.timings.total_ms}};
  }
  return j;
}

/// One JSON line per result, then one per failure. Byte-identical for
/// identical inputs when timing is disabled.
inline std::string serialize_run(const SplitRun& run, const PipelineConfig& config) {
  std::string out;
  for (const auto& r : run.results) out += to_json(r, config).dump() + "\n";
  for (const auto& f : run.failures) {
    out += nlohmann::json{{"image_id", f.image_id}, {"failure", f.message}}.dump() + "\n";
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Provenance record for a run: configuration, backends, seeds, dataset.
inline nlohmann::json make_manifest(const DatasetIndex& index, Split split,
                                    const PipelineConfig& config, const std::string& detector,
                                    const std::string& segmenter, std::uint64_t seed) {
  return {{"tool", "boxseg"},
          {"version", kVersion},
          {"config", to_json(config)},
          {"detector", detector},
          {"segmenter", segmenter},
          {"seed", seed},
          {"dataset",
           {{"root", index.root.generic_string()},
            {"fingerprint", hex64(index.fingerprint())},
            {"split", std::string(split_name(split))},
            {"images", index.in_split(split).size()}}},
          {"conventions",
           {{"mask_rle", "row-major, background-first, decimal counts"},
            {"gt_binarization", ">=128 of 255"}}}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Lay out a predictions directory:
///   masks/<id>.mask          aggregate mask per image
///   instances/<id>_<k>.mask  per-instance masks (per-instance mode only)
///   detections.jsonl         {"image_id":..,"detections":[..]} per image
///   timings.csv              image_id,detect_ms,segment_ms,total_ms
///   results.jsonl            serialize_run output
///   failures.txt             "<image_id>\t<message>" per failure
///   manifest.json
inline void write_predictions(const std::filesystem::path& out, const SplitRun& run,
                              const PipelineConfig& config, const nlohmann::json& manifest) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  fs::remove_all(out / "masks");
  fs::remove_all(out / "instances");
  fs::create_directories(out / "masks");
  if (config.aggregation == Aggregation::per_instance) fs::create_directories(out / "instances");

  std::string dets, timings = "image_id,detect_ms,segment_ms,total_ms\n", failures;
  for (const auto& r : run.results) {
    const auto id = std::to_string(r.image_id);
    write_mask_file((out / "masks" / (id + ".mask")).string(), r.aggregate);
    if (config.aggregation == Aggregation::per_instance) {
      for (std::size_t k = 0; k < r.instance_masks.size(); ++k) {
        write_mask_file((out / "instances" / (id + "_" + std::to_string(k) + ".mask")).string(),
                        r.instance_masks[k]);
      }
    }
    nlohmann::json line{{"image_id", r.image_id}, {"detections", nlohmann::json::array()}};
    for (const auto& d : r.detections) line["detections"].push_back(to_json(d));
    dets += line.dump() + "\n";
    if (config.timing) {
      timings += id + "," + protocol::number(r.timings.detect_ms) + "," +
                 protocol::number(r.timings.segment_ms) + "," +
                 protocol::number(r.timings.total_ms) + "\n";
    }
  }
  for (const auto& f : run.failures) failures += std::to_string(f.image_id) + "\t" + f.message + "\n";

  write_text(out / "detections.jsonl", dets);
  if (config.timing) {
    write_text(out / "timings.csv", timings);
  } else {
    fs::remove(out / "timings.csv");
  }
  write_text(out / "results.jsonl", serialize_run(run, config));
  write_text(out / "failures.txt", failures);
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace boxseg
