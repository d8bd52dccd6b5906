#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxseg/dataset.hpp"
#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/image_io.hpp"
#include "boxseg/mask.hpp"
#include "boxseg/process.hpp"
#include "boxseg/protocol.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {

enum class DetectorMode { grounded, supervised };

inline std::string_view mode_name(DetectorMode m) {
  return m == DetectorMode::grounded ? "grounded" : "supervised";
}

inline DetectorMode parse_mode(std::string_view s) {
  if (s == "grounded") return DetectorMode::grounded;
  if (s == "supervised") return DetectorMode::supervised;
  throw ConfigError("unknown detector mode '" + std::string(s) + "' (grounded|supervised)");
}

/// Detection-stage thresholds. Grounded mode forwards box/text thresholds to
/// the backend; supervised mode filters by conf_threshold and runs NMS here.
struct DetectorConfig {
  DetectorMode mode = DetectorMode::supervised;
  std::string text_prompt = "bird";
  double box_threshold = 0.30;
  double text_threshold = 0.25;
  double conf_threshold = 0.40;
  double nms_iou = 0.45;

  void validate() const {
    for (double t : {box_threshold, text_threshold, conf_threshold, nms_iou}) {
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("detector thresholds must lie in [0,1]");
    }
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

/// What a backend gets to see of the image being processed.
struct ImageContext {
  const ImageRecord& record;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
};

class Detector {
 public:
  virtual ~Detector() = default;
  /// Raw detections before harness-side filtering.
  virtual std::vector<Detection> raw_detect(const ImageContext& ctx, const DetectorConfig& cfg) = 0;
  virtual std::string identity() const = 0;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  /// One candidate list per prompt box.
  virtual std::vector<std::vector<MaskCandidate>> raw_segment(const ImageContext& ctx,
                                                              std::span<const BoxXYXY> boxes) = 0;
  virtual std::string identity() const = 0;
};

enum class CandidateSelection { highest_score, first };

inline std::string_view selection_name(CandidateSelection s) {
  return s == CandidateSelection::highest_score ? "highest_score" : "first";
}

inline CandidateSelection parse_selection(std::string_view s) {
  if (s == "highest_score") return CandidateSelection::highest_score;
  if (s == "first") return CandidateSelection::first;
  throw ConfigError("unknown candidate selection '" + std::string(s) + "' (highest_score|first)");
}

/// Highest confidence wins; ties go to the earliest candidate.
inline const MaskCandidate& select_candidate(std::span<const MaskCandidate> cands,
                                             CandidateSelection rule) {
  std::size_t best = 0;
  if (rule == CandidateSelection::highest_score) {
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (cands[i].confidence > cands[best].confidence) best = i;
    }
  }
  return cands[best];
}

/// Run the detection stage and apply the harness-side contract: boxes clipped
/// to the image, scores validated, supervised mode thresholded and NMS'd,
/// result sorted by score descending.
inline std::vector<Detection> detect(Detector& backend, const ImageContext& ctx,
                                     const DetectorConfig& cfg) {
  auto raw = backend.raw_detect(ctx, cfg);
  std::vector<Detection> dets;
  dets.reserve(raw.size());
  for (auto& d : raw) {
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw BackendError(backend.identity(), "detection score outside [0,1]",
                         std::to_string(d.score));
    }
    if (!d.box.valid()) {
      throw BackendError(backend.identity(), "invalid detection box",
                         std::to_string(d.box.x1) + "," + std::to_string(d.box.y1) + "," +
                             std::to_string(d.box.x2) + "," + std::to_string(d.box.y2));
    }
    d.box = clip(d.box, ctx.record.dims);
    if (d.box.degenerate()) continue;
    dets.push_back(std::move(d));
  }
  if (cfg.mode == DetectorMode::supervised) {
    std::erase_if(dets, [&](const Detection& d) { return !(d.score > cfg.conf_threshold); });
    return nms(dets, cfg.nms_iou);
  }
  sort_by_score(dets);
  return dets;
}

/// One mask per prompt box at native image resolution.
inline std::vector<MaskCandidate> segment(Segmenter& backend, const ImageContext& ctx,
                                          std::span<const BoxXYXY> boxes,
                                          CandidateSelection rule = CandidateSelection::highest_score) {
  if (boxes.empty()) return {};
  auto raw = backend.raw_segment(ctx, boxes);
  if (raw.size() != boxes.size()) {
    throw BackendError(backend.identity(), "returned " + std::to_string(raw.size()) +
                                               " masks for " + std::to_string(boxes.size()) +
                                               " prompt boxes");
  }
  std::vector<MaskCandidate> out;
  out.reserve(raw.size());
  for (const auto& cands : raw) {
    if (cands.empty()) throw BackendError(backend.identity(), "empty candidate list");
    const auto& chosen = select_candidate(cands, rule);
    if (chosen.mask.dims() != ctx.record.dims) {
      throw BackendError(backend.identity(), "mask dims " + to_string(chosen.mask.dims()) +
                                                 " differ from image dims " +
                                                 to_string(ctx.record.dims));
    }
    out.push_back(chosen);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation

struct PerturbParams {
  double jitter_px = 0;     // each box shifted by U(-j, j) in x and in y
  double scale_factor = 0;  // width/height multiplied by (1 + scale_factor)
  double drop_rate = 0;
  double fp_rate = 0;       // spurious boxes per input detection

  bool identity() const noexcept {
    return jitter_px == 0 && scale_factor == 0 && drop_rate == 0 && fp_rate == 0;
  }
};

/// Degrade detections reproducibly. Per input detection, in input order,
/// the generator draws: drop (1), dx (1), dy (1), spurious (1), and when a
/// spurious box is injected: width, height, x, y, score (5). Survivors keep
/// input order and spurious boxes follow; all boxes are clipped to `bounds`
/// and dropped if they collapse. Spurious scores lie strictly below the
/// lowest input score.
inline std::vector<Detection> perturb_boxes(std::span<const Detection> dets,
                                            const PerturbParams& p, std::uint64_t seed,
                                            ImageDims bounds) {
  if (p.drop_rate < 0 || p.drop_rate > 1 || p.fp_rate < 0 || p.fp_rate > 1 || p.jitter_px < 0 ||
      p.scale_factor <= -1) {
    throw ConfigError("perturbation parameters out of range");
  }
  Rng rng(seed);
  double min_score = 1.0;
  for (const auto& d : dets) min_score = std::min(min_score, d.score);

  std::vector<Detection> kept, spurious;
  for (const auto& d : dets) {
    const bool drop = rng.bernoulli(p.drop_rate);
    const double dx = rng.uniform(-p.jitter_px, p.jitter_px);
    const double dy = rng.uniform(-p.jitter_px, p.jitter_px);
    const bool inject = rng.bernoulli(p.fp_rate);
    if (inject) {
      const double w = rng.uniform(0.05, 0.30) * bounds.width;
      const double h = rng.uniform(0.05, 0.30) * bounds.height;
      const double x = rng.uniform(0.0, bounds.width - w);
      const double y = rng.uniform(0.0, bounds.height - h);
      const double score = min_score * rng.uniform(0.05, 0.95);
      spurious.push_back({clip({x, y, x + w, y + h}, bounds), score, d.label});
    }
    if (drop) continue;
    Detection out = d;
    if (p.jitter_px != 0) {
      out.box = {d.box.x1 + dx, d.box.y1 + dy, d.box.x2 + dx, d.box.y2 + dy};
    }
    if (p.scale_factor != 0) {
      const double cx = (out.box.x1 + out.box.x2) / 2, cy = (out.box.y1 + out.box.y2) / 2;
      const double hw = out.box.width() * (1 + p.scale_factor) / 2;
      const double hh = out.box.height() * (1 + p.scale_factor) / 2;
      out.box = {cx - hw, cy - hh, cx + hw, cy + hh};
    }
    out.box = clip(out.box, bounds);
    if (!out.box.degenerate()) kept.push_back(std::move(out));
  }
  for (auto& s : spurious) {
    if (!s.box.degenerate()) kept.push_back(std::move(s));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Backend specs: "kind" or "kind:key=value,key=value". External backends
// take the rest of the string as a shell command: "external:python a.py".

struct BackendSpec {
  std::string kind;
  std::map<std::string, std::string> params;

  /// Canonical text form; keys sorted.
  std::string identity() const {
    if (kind == "external") return "external:" + param("cmd");
    std::string out = kind;
    char sep = ':';
    for (const auto& [k, v] : params) {
      out += sep + k + "=" + v;
      sep = ',';
    }
    return out;
  }

  std::string param(const std::string& key, const std::string& fallback = {}) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("backend parameter " + key + "='" + it->second + "' is not a number");
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : params) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        throw ConfigError("backend '" + kind + "' does not take parameter '" + k + "'");
      }
    }
  }

  friend bool operator==(const BackendSpec&, const BackendSpec&) = default;
};

inline BackendSpec parse_backend_spec(std::string_view text) {
  BackendSpec spec;
  const auto colon = text.find(':');
  spec.kind = std::string(text.substr(0, colon));
  if (spec.kind.empty()) throw ConfigError("empty backend spec");
  if (colon == std::string_view::npos) return spec;
  const std::string rest(text.substr(colon + 1));
  if (spec.kind == "external") {
    spec.params["cmd"] = rest.starts_with("cmd=") ? rest.substr(4) : rest;
    return spec;
  }
  std::istringstream ss(rest);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("backend parameter '" + item + "' is not key=value");
    }
    spec.params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return spec;
}

inline BackendSpec backend_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_backend_spec(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw ConfigError("backend spec needs a \"kind\" string");
  }
  BackendSpec spec;
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") {
      spec.kind = v.get<std::string>();
    } else if (v.is_string()) {
      spec.params[k] = v.get<std::string>();
    } else if (v.is_number()) {
      spec.params[k] = protocol::number(v.get<double>());
    } else {
      throw ConfigError("backend parameter '" + k + "' must be a string or number");
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Built-in backends

/// Ground-truth boxes with score 1.
class OracleDetector final : public Detector {
 public:
  std::vector<Detection> raw_detect(const ImageContext& ctx, const DetectorConfig& cfg) override {
    std::vector<Detection> out;
    for (const auto& b : ctx.record.gt_boxes) out.push_back({b, 1.0, cfg.text_prompt});
    return out;
  }
  std::string identity() const override { return "oracle"; }
};

/// Oracle boxes run through perturb_boxes with a per-image seed.
class PerturbedDetector final : public Detector {
 public:
  PerturbedDetector(PerturbParams params, std::uint64_t seed, std::string identity)
      : params_(params), seed_(seed), identity_(std::move(identity)) {}

  std::vector<Detection> raw_detect(const ImageContext& ctx, const DetectorConfig& cfg) override {
    const auto truth = OracleDetector{}.raw_detect(ctx, cfg);
    return perturb_boxes(truth, params_,
                         derive_seed(seed_, static_cast<std::uint64_t>(ctx.record.image_id)),
                         ctx.record.dims);
  }
  std::string identity() const override { return identity_; }

 private:
  PerturbParams params_;
  std::uint64_t seed_;
  std::string identity_;
};

/// GT mask restricted to each prompt box.
class OracleSegmenter final : public Segmenter {
 public:
  std::vector<std::vector<MaskCandidate>> raw_segment(const ImageContext& ctx,
                                                      std::span<const BoxXYXY> boxes) override {
    const BinaryMask gt = read_gt_mask(ctx.mask_path);
    require_same_dims(gt.dims(), ctx.record.dims, "oracle segmenter");
    std::vector<std::vector<MaskCandidate>> out;
    for (const auto& b : boxes) out.push_back({{mask_intersection(gt, box_mask(b, gt.dims())), 1.0}});
    return out;
  }
  std::string identity() const override { return "oracle"; }
};

/// Every pixel inside the prompt box.
class BoxFillSegmenter final : public Segmenter {
 public:
  std::vector<std::vector<MaskCandidate>> raw_segment(const ImageContext& ctx,
                                                      std::span<const BoxXYXY> boxes) override {
    std::vector<std::vector<MaskCandidate>> out;
    for (const auto& b : boxes) out.push_back({{box_mask(b, ctx.record.dims), 1.0}});
    return out;
  }
  std::string identity() const override { return "boxfill"; }
};

/// Detector living in a child process.
class ExternalDetector final : public Detector {
 public:
  explicit ExternalDetector(const std::string& command)
      : proc_(command, "external:" + command) {}

  std::vector<Detection> raw_detect(const ImageContext& ctx, const DetectorConfig& cfg) override {
    const auto reply = proc_.request(protocol::detect_request(
        ctx.image_path.string(), cfg.text_prompt, cfg.box_threshold, cfg.text_threshold));
    return protocol::parse_detect_reply(proc_.identity(), reply);
  }
  std::string identity() const override { return proc_.identity(); }

 private:
  LineProcess proc_;
};

class ExternalSegmenter final : public Segmenter {
 public:
  explicit ExternalSegmenter(const std::string& command)
      : proc_(command, "external:" + command) {}

  std::vector<std::vector<MaskCandidate>> raw_segment(const ImageContext& ctx,
                                                      std::span<const BoxXYXY> boxes) override {
    const auto reply = proc_.request(protocol::segment_request(ctx.image_path.string(), boxes));
    return protocol::parse_segment_reply(proc_.identity(), reply);
  }
  std::string identity() const override { return proc_.identity(); }

 private:
  LineProcess proc_;
};

namespace detail {

inline std::string read_reply_file(const std::filesystem::path& path, const std::string& backend) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError(backend, "missing reply file " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

/// Replies read from <dir>/<image_id>.det instead of a live process.
class PrecomputedDetector final : public Detector {
 public:
  explicit PrecomputedDetector(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<Detection> raw_detect(const ImageContext& ctx, const DetectorConfig&) override {
    const auto line = detail::read_reply_file(
        dir_ / (std::to_string(ctx.record.image_id) + ".det"), identity());
    return protocol::parse_detect_reply(identity(), line);
  }
  std::string identity() const override { return "precomputed:dir=" + dir_.string(); }

 private:
  std::filesystem::path dir_;
};

/// Replies read from <dir>/<image_id>.seg.
class PrecomputedSegmenter final : public Segmenter {
 public:
  explicit PrecomputedSegmenter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<std::vector<MaskCandidate>> raw_segment(const ImageContext& ctx,
                                                      std::span<const BoxXYXY>) override {
    const auto line = detail::read_reply_file(
        dir_ / (std::to_string(ctx.record.image_id) + ".seg"), identity());
    return protocol::parse_segment_reply(identity(), line);
  }
  std::string identity() const override { return "precomputed:dir=" + dir_.string(); }

 private:
  std::filesystem::path dir_;
};

inline PerturbParams perturb_params(const BackendSpec& spec) {
  return {spec.number("jitter", 0), spec.number("scale", 0), spec.number("drop", 0),
          spec.number("fp", 0)};
}

/// Throws ConfigError for unknown kinds or parameters. `seed` seeds the
/// perturbed detector unless the spec carries its own seed=.
inline std::unique_ptr<Detector> make_detector(const BackendSpec& spec, std::uint64_t seed = 0) {
  if (spec.kind == "oracle") {
    spec.allow_only({});
    return std::make_unique<OracleDetector>();
  }
  if (spec.kind == "perturbed") {
    spec.allow_only({"jitter", "scale", "drop", "fp", "seed"});
    const auto s = spec.params.contains("seed")
                       ? static_cast<std::uint64_t>(spec.number("seed", 0))
                       : seed;
    auto p = perturb_params(spec);
    perturb_boxes({}, p, 0, {1, 1});  // validates ranges
    return std::make_unique<PerturbedDetector>(p, s, spec.identity());
  }
  if (spec.kind == "external") {
    if (spec.param("cmd").empty()) throw ConfigError("external backend needs a command");
    return std::make_unique<ExternalDetector>(spec.param("cmd"));
  }
  if (spec.kind == "precomputed") {
    spec.allow_only({"dir"});
    if (spec.param("dir").empty()) throw ConfigError("precomputed backend needs dir=");
    return std::make_unique<PrecomputedDetector>(spec.param("dir"));
  }
  throw ConfigError("unknown detector backend kind '" + spec.kind +
                    "' (oracle|perturbed|external|precomputed)");
}

inline std::unique_ptr<Segmenter> make_segmenter(const BackendSpec& spec) {
  if (spec.kind == "oracle") {
    spec.allow_only({});
    return std::make_unique<OracleSegmenter>();
  }
  if (spec.kind == "boxfill") {
    spec.allow_only({});
    return std::make_unique<BoxFillSegmenter>();
  }
  if (spec.kind == "external") {
    if (spec.param("cmd").empty()) throw ConfigError("external backend needs a command");
    return std::make_unique<ExternalSegmenter>(spec.param("cmd"));
  }
  if (spec.kind == "precomputed") {
    spec.allow_only({"dir"});
    if (spec.param("dir").empty()) throw ConfigError("precomputed backend needs dir=");
    return std::make_unique<PrecomputedSegmenter>(spec.param("dir"));
  }
  throw ConfigError("unknown segmenter backend kind '" + spec.kind +
                    "' (oracle|boxfill|external|precomputed)");
}

/// Check a spec without starting processes.
inline void validate_backend_spec(const BackendSpec& spec, bool detector) {
  if (spec.kind == "external") {
    if (spec.param("cmd").empty()) throw ConfigError("external backend needs a command");
    return;
  }
  if (detector) {
    make_detector(spec);
  } else {
    make_segmenter(spec);
  }
}

}  // namespace boxseg
