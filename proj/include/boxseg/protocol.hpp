#pragma once

// Line-delimited JSON protocol spoken with external detector/segmenter
// processes, and the reply payloads stored by the precomputed mode.
//
//   {"op":"detect","image":"<path>","prompt":"bird","box_threshold":0.30,"text_threshold":0.25}
//   {"detections":[{"box":[x1,y1,x2,y2],"score":0.97,"label":"bird"}]}
//   {"op":"segment","image":"<path>","boxes":[[x1,y1,x2,y2],...]}
//   {"masks":[{"dims":[w,h],"rle":[counts...],"score":0.99},...]}
//   {"error":"<message>"}
//
// A "masks" entry may also be an array of such objects, the candidate
// masks for that prompt box; the harness then picks one.

#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/mask.hpp"

namespace boxseg {

struct MaskCandidate {
  BinaryMask mask;
  double confidence = 0;
};

namespace protocol {

using nlohmann::json;

/// Shortest round-trip decimal form of a double.
inline std::string number(double v) {
  if (!std::isfinite(v)) throw ConfigError("non-finite number in protocol message");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Thresholds keep at least two decimals ("0.30", "0.25", "1.00").
inline std::string threshold(double v) {
  std::string s = number(v);
  if (s.find_first_of("eE") != std::string::npos) return s;
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".";
    dot = s.size() - 1;
  }
  while (s.size() - dot - 1 < 2) s += '0';
  return s;
}

inline std::string quoted(const std::string& s) { return json(s).dump(); }

inline std::string box_array(const BoxXYXY& b) {
  return "[" + number(b.x1) + "," + number(b.y1) + "," + number(b.x2) + "," + number(b.y2) + "]";
}

inline std::string detect_request(const std::string& image, const std::string& prompt,
                                  double box_threshold, double text_threshold) {
  return R"({"op":"detect","image":)" + quoted(image) + R"(,"prompt":)" + quoted(prompt) +
         R"(,"box_threshold":)" + threshold(box_threshold) + R"(,"text_threshold":)" +
         threshold(text_threshold) + "}";
}

inline std::string segment_request(const std::string& image, std::span<const BoxXYXY> boxes) {
  std::string out = R"({"op":"segment","image":)" + quoted(image) + R"(,"boxes":[)";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i) out += ',';
    out += box_array(boxes[i]);
  }
  return out + "]}";
}

inline std::string detect_reply(std::span<const Detection> dets) {
  std::string out = R"({"detections":[)";
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (i) out += ',';
    out += R"({"box":)" + box_array(dets[i].box) + R"(,"score":)" + number(dets[i].score) +
           R"(,"label":)" + quoted(dets[i].label) + "}";
  }
  return out + "]}";
}

inline std::string mask_object(const MaskCandidate& c) {
  std::string out = R"({"dims":[)" + std::to_string(c.mask.dims().width) + "," +
                    std::to_string(c.mask.dims().height) + R"(],"rle":[)";
  const auto& counts = c.mask.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(counts[i]);
  }
  return out + R"(],"score":)" + number(c.confidence) + "}";
}

inline std::string segment_reply(std::span<const MaskCandidate> masks) {
  std::string out = R"({"masks":[)";
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (i) out += ',';
    out += mask_object(masks[i]);
  }
  return out + "]}";
}

inline std::string error_reply(const std::string& message) {
  return R"({"error":)" + quoted(message) + "}";
}

namespace detail {

inline json parse_reply(const std::string& backend, const std::string& line, const char* key) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw BackendError(backend, std::string("malformed reply: ") + e.what(), line);
  }
  if (!doc.is_object()) throw BackendError(backend, "reply is not a JSON object", line);
  if (auto it = doc.find("error"); it != doc.end()) {
    throw BackendError(backend, "backend reported error: " +
                                    (it->is_string() ? it->get<std::string>() : it->dump()),
                       line);
  }
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw BackendError(backend, std::string("reply lacks \"") + key + "\" array", line);
  }
  return *it;
}

inline double as_number(const json& v, const std::string& backend, const std::string& line,
                        const char* what) {
  if (!v.is_number()) throw BackendError(backend, std::string(what) + " is not a number", line);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw BackendError(backend, std::string(what) + " is not finite", line);
  return d;
}

inline MaskCandidate parse_mask_object(const json& m, const std::string& backend,
                                       const std::string& line) {
  if (!m.is_object()) throw BackendError(backend, "mask entry is not an object", line);
  auto dims_it = m.find("dims");
  auto rle_it = m.find("rle");
  if (dims_it == m.end() || !dims_it->is_array() || dims_it->size() != 2 || rle_it == m.end() ||
      !rle_it->is_array()) {
    throw BackendError(backend, "mask entry needs \"dims\":[w,h] and \"rle\":[...]", line);
  }
  ImageDims dims;
  std::vector<std::uint64_t> counts;
  try {
    dims = {(*dims_it)[0].get<int>(), (*dims_it)[1].get<int>()};
    for (const auto& c : *rle_it) {
      if (!c.is_number_unsigned()) throw BackendError(backend, "rle count must be unsigned", line);
      counts.push_back(c.get<std::uint64_t>());
    }
  } catch (const json::exception& e) {
    throw BackendError(backend, std::string("bad mask entry: ") + e.what(), line);
  }
  double score = 1.0;
  if (auto s = m.find("score"); s != m.end()) score = as_number(*s, backend, line, "mask score");
  try {
    return {BinaryMask(dims, std::move(counts)), score};
  } catch (const DataError& e) {
    throw BackendError(backend, std::string("invalid mask: ") + e.what(), line);
  }
}

}  // namespace detail

inline std::vector<Detection> parse_detect_reply(const std::string& backend,
                                                 const std::string& line) {
  const json arr = detail::parse_reply(backend, line, "detections");
  std::vector<Detection> out;
  for (const auto& d : arr) {
    if (!d.is_object()) throw BackendError(backend, "detection is not an object", line);
    auto box = d.find("box");
    auto score = d.find("score");
    if (box == d.end() || !box->is_array() || box->size() != 4 || score == d.end()) {
      throw BackendError(backend, "detection needs \"box\":[x1,y1,x2,y2] and \"score\"", line);
    }
    Detection det;
    det.box = {detail::as_number((*box)[0], backend, line, "box"),
               detail::as_number((*box)[1], backend, line, "box"),
               detail::as_number((*box)[2], backend, line, "box"),
               detail::as_number((*box)[3], backend, line, "box")};
    det.score = detail::as_number(*score, backend, line, "score");
    if (auto label = d.find("label"); label != d.end() && label->is_string()) {
      det.label = label->get<std::string>();
    }
    out.push_back(std::move(det));
  }
  return out;
}

/// One candidate list per prompt box, in reply order.
inline std::vector<std::vector<MaskCandidate>> parse_segment_reply(const std::string& backend,
                                                                   const std::string& line) {
  const json arr = detail::parse_reply(backend, line, "masks");
  std::vector<std::vector<MaskCandidate>> out;
  for (const auto& entry : arr) {
    std::vector<MaskCandidate> cands;
    if (entry.is_array()) {
      for (const auto& m : entry) cands.push_back(detail::parse_mask_object(m, backend, line));
      if (cands.empty()) throw BackendError(backend, "empty candidate list", line);
    } else {
      cands.push_back(detail::parse_mask_object(entry, backend, line));
    }
    out.push_back(std::move(cands));
  }
  return out;
}

}  // namespace protocol
}  // namespace boxseg
