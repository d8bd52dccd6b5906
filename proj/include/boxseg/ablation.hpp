#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxseg/backends.hpp"
#include "boxseg/dataset.hpp"
#include "boxseg/evaluation.hpp"
#include "boxseg/pipeline.hpp"

namespace boxseg {

struct GridRow {
  std::string name;
  BackendSpec detector;
  BackendSpec segmenter;
  PipelineConfig config;
};

/// Rows evaluated on one shared split. With fixed_segmenter every row uses
/// the grid-level segmenter and may not override it.
struct AblationGrid {
  std::string name;
  Split split = Split::test;
  std::uint64_t seed = 0;
  bool fixed_segmenter = true;
  std::vector<GridRow> rows;

  std::uint64_t row_seed(std::size_t row) const noexcept { return seed + row; }
};

/// Parse a grid file (JSON; // and /* */ comments allowed). See
/// configs/detector_ablation.jsonc for a commented example.
inline AblationGrid parse_grid(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("grid file: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("grid file must hold a JSON object");
  static const std::set<std::string> top_keys = {"name", "split", "seed", "fixed_segmenter",
                                                 "segmenter", "pipeline", "rows"};
  for (const auto& [k, v] : doc.items()) {
    if (!top_keys.contains(k)) throw ConfigError("grid file: unknown key '" + k + "'");
  }

  AblationGrid grid;
  try {
    grid.name = doc.value("name", std::string("ablation"));
    grid.split = parse_split(doc.value("split", std::string("test")));
    grid.seed = doc.value("seed", std::uint64_t{0});
    grid.fixed_segmenter = doc.value("fixed_segmenter", true);
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("grid file: ") + e.what());
  }
  PipelineConfig base;
  if (doc.contains("pipeline")) base = apply_config_json(base, doc["pipeline"]);
  std::optional<BackendSpec> shared_seg;
  if (doc.contains("segmenter")) shared_seg = backend_spec_from_json(doc["segmenter"]);
  if (grid.fixed_segmenter && !shared_seg) {
    throw ConfigError("grid file: fixed_segmenter requires a top-level \"segmenter\"");
  }

  if (!doc.contains("rows") || !doc["rows"].is_array() || doc["rows"].empty()) {
    throw ConfigError("grid file: \"rows\" must be a non-empty array");
  }
  std::set<std::string> names;
  for (const auto& r : doc["rows"]) {
    if (!r.is_object() || !r.contains("name") || !r["name"].is_string() || !r.contains("detector")) {
      throw ConfigError("grid row needs \"name\" and \"detector\"");
    }
    for (const auto& [k, v] : r.items()) {
      if (k != "name" && k != "detector" && k != "segmenter" && k != "pipeline") {
        throw ConfigError("grid row: unknown key '" + k + "'");
      }
    }
    GridRow row;
    row.name = r["name"].get<std::string>();
    if (!names.insert(row.name).second) throw ConfigError("duplicate grid row name '" + row.name + "'");
    row.detector = backend_spec_from_json(r["detector"]);
    if (r.contains("segmenter")) {
      if (grid.fixed_segmenter) {
        throw ConfigError("grid row '" + row.name + "' overrides the fixed segmenter");
      }
      row.segmenter = backend_spec_from_json(r["segmenter"]);
    } else if (shared_seg) {
      row.segmenter = *shared_seg;
    } else {
      throw ConfigError("grid row '" + row.name + "' has no segmenter");
    }
    row.config = r.contains("pipeline") ? apply_config_json(base, r["pipeline"]) : base;
    validate_backend_spec(row.detector, true);
    validate_backend_spec(row.segmenter, false);
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

struct AblationRowResult {
  std::string name;
  bool ok = false;
  std::string error;
  std::size_t failures = 0;
  nlohmann::json manifest;
  std::optional<Evaluation> evaluation;
};

struct AblationReport {
  std::string name;
  std::vector<AblationRowResult> rows;  // declaration order
};

/// Run one grid row exactly as a standalone run would.
inline AblationRowResult run_grid_row(const AblationGrid& grid, std::size_t i,
                                      const DatasetIndex& index, unsigned jobs) {
  const auto& row = grid.rows[i];
  AblationRowResult out;
  out.name = row.name;
  const std::uint64_t seed = grid.row_seed(i);
  try {
    const auto run = run_split(
        index, grid.split, row.config, [&] { return make_detector(row.detector, seed); },
        [&] { return make_segmenter(row.segmenter); }, jobs);
    out.manifest = make_manifest(index, grid.split, row.config, run.detector_identity,
                                 run.segmenter_identity, seed);
    out.manifest["grid"] = {{"name", grid.name}, {"row", row.name}, {"row_index", i}};
    out.manifest["segmenter_spec"] = row.segmenter.identity();
    out.failures = run.failures.size();
    if (!index.in_split(grid.split).empty() && run.results.empty()) {
      out.error = run.failures.empty() ? "no results" : run.failures.front().message;
      return out;
    }
    out.evaluation = evaluate_run(index, grid.split, run, row.config);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

/// Rows run sequentially; a row that fails entirely is marked and the grid
/// carries on.
inline AblationReport run_grid(const AblationGrid& grid, const DatasetIndex& index,
                               unsigned jobs = 1) {
  AblationReport report;
  report.name = grid.name;
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    report.rows.push_back(run_grid_row(grid, i, index, jobs));
  }
  return report;
}

/// Detection-stage comparison table: row,status,mAP50,IoU,Dice,FPS,failures.
inline std::string format_ablation_table(const AblationReport& report) {
  std::string out = "row,status,mAP50,IoU,Dice,FPS,failures\n";
  for (const auto& r : report.rows) {
    std::string name = r.name;
    std::replace(name.begin(), name.end(), ',', ';');
    out += name + "," + (r.ok ? "ok" : "failed");
    if (r.ok) {
      const auto& ev = *r.evaluation;
      out += "," + (ev.report.ap50 ? fmt(*ev.report.ap50 * 100.0, 1) : std::string("-"));
      out += "," + fmt(ev.report.macro.iou, 4) + "," + fmt(ev.report.macro.dice, 4);
      out += "," + (ev.fps ? std::to_string(ev.fps->fps) : std::string("-"));
    } else {
      out += ",-,-,-,-";
    }
    out += "," + std::to_string(r.failures) + "\n";
  }
  return out;
}

inline void write_ablation_report(const std::filesystem::path& out, const AblationReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(out / "rows");
  write_text(out / "ablation.csv", format_ablation_table(report));
  std::string summary = "Ablation: " + report.name + "\n";
  nlohmann::json machine{{"grid", report.name}, {"rows", nlohmann::json::array()}};
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    const std::string manifest_name = "rows/" + std::to_string(i) + ".manifest.json";
    nlohmann::json jr{{"name", r.name}, {"ok", r.ok}, {"failures", r.failures}};
    if (!r.manifest.is_null()) {
      write_text(out / manifest_name, r.manifest.dump(2) + "\n");
      jr["manifest"] = manifest_name;
    }
    if (r.ok) {
      const auto& ev = *r.evaluation;
      jr["macro"] = to_json(ev.report.macro);
      jr["micro"] = to_json(ev.report.micro);
      if (ev.report.ap50) jr["ap50"] = *ev.report.ap50;
      if (ev.fps) jr["fps"] = to_json(*ev.fps);
      summary += "  " + r.name + ": IoU " + fmt(ev.report.macro.iou, 4) + ", Dice " +
                 fmt(ev.report.macro.dice, 4) + ", mAP50 " +
                 (ev.report.ap50 ? fmt(*ev.report.ap50 * 100, 1) : std::string("-")) +
                 "  [" + manifest_name + "]\n";
    } else {
      jr["error"] = r.error;
      summary += "  " + r.name + ": FAILED (" + r.error + ")\n";
    }
    machine["rows"].push_back(jr);
  }
  summary += "\n";
  summary += kConventionsFooter;
  write_text(out / "summary.txt", summary);
  write_text(out / "summary.json", machine.dump(2) + "\n");
}

}  // namespace boxseg
