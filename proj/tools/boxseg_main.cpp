// boxseg: command-line front end for the box-prompted segmentation harness.
//
// Exit codes: 0 success, 1 finished with per-image failures or warnings,
// 2 usage/configuration/data error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boxseg/boxseg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace boxseg;

namespace {

struct CommandOutcome {
  int exit_code = 0;
  std::string summary;
  std::vector<std::string> artifacts;
  json details = json::object();
};

void emit(const CommandOutcome& o, const std::string& command, const fs::path& out_dir) {
  std::cout << o.summary;
  if (!o.summary.empty() && o.summary.back() != '\n') std::cout << '\n';
  json machine{{"command", command},
               {"exit_code", o.exit_code},
               {"artifacts", o.artifacts},
               {"details", o.details}};
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir / (command + ".outcome.json"), machine.dump(2) + "\n");
  }
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path resolve_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BOXSEG_ROOT"); env != nullptr && *env != '\0') return env;
  throw ConfigError("no dataset root: pass --root or set BOXSEG_ROOT");
}

fs::path resolve_out(const std::string& flag, const std::string& command) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BOXSEG_OUT"); env != nullptr && *env != '\0') {
    return fs::path(env) / command;
  }
  throw ConfigError("no output directory: pass --out or set BOXSEG_OUT");
}

SplitSpec parse_fractions(const std::string& text, std::uint64_t seed) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',' || c == '/' || c == ':') c = ' ';
  }
  std::istringstream in(s);
  SplitSpec spec;
  std::string extra;
  if (!(in >> spec.train >> spec.val >> spec.test) || (in >> extra)) {
    throw ConfigError("--splits expects three fractions, e.g. 0.70,0.15,0.15");
  }
  spec.seed = seed;
  spec.validate();
  return spec;
}

DatasetIndex load_with_splits(const fs::path& root, const std::string& splits_file, unsigned jobs) {
  auto index = load_index(root, jobs);
  const fs::path file = splits_file.empty() ? root / "splits.txt" : fs::path(splits_file);
  if (!fs::is_regular_file(file)) {
    throw ConfigError("no split assignment (" + file.string() + " not found); run 'boxseg prepare' first");
  }
  apply_split_file(index, file);
  return index;
}

// --------------------------------------------------------------------------

struct PrepareArgs {
  std::string root, out, splits = "0.70,0.15,0.15";
  std::uint64_t seed = 0;
  unsigned jobs = default_jobs();
  bool validate_masks = true;
};

CommandOutcome cmd_prepare(const PrepareArgs& a, fs::path& out_dir) {
  const fs::path root = resolve_root(a.root);
  const auto spec = parse_fractions(a.splits, a.seed);
  auto index = assign_splits(load_index(root, a.jobs), spec);
  out_dir = a.out.empty() ? root : fs::path(a.out);
  fs::create_directories(out_dir);
  write_text(out_dir / "splits.txt", format_split_file(index));

  const auto sizes = split_sizes(index.records.size(), spec);
  const auto& s = index.summary;
  CommandOutcome o;
  std::ostringstream txt;
  txt << "Dataset " << root.string() << ": " << s.listed << " listed, " << index.records.size()
      << " usable, " << s.excluded() << " excluded (missing mask " << s.excluded_missing_mask
      << ", missing box " << s.excluded_missing_box << ", missing class " << s.excluded_missing_class
      << ", degenerate box " << s.excluded_degenerate_box << "), " << s.clipped_boxes
      << " boxes clipped\n";
  txt << "Split (seed " << a.seed << "): train " << sizes.train << ", val " << sizes.val << ", test "
      << sizes.test << "\n";
  o.details = {{"listed", s.listed},
               {"usable", index.records.size()},
               {"excluded", s.excluded()},
               {"clipped_boxes", s.clipped_boxes},
               {"seed", a.seed},
               {"sizes", {{"train", sizes.train}, {"val", sizes.val}, {"test", sizes.test}}},
               {"notes", s.notes}};
  if (a.validate_masks) {
    const auto check = check_masks_inside_boxes(index, 1.0, a.jobs);
    txt << "Mask-inside-box check (1 px tolerance): " << check.violations << " of " << check.checked
        << " records violate";
    if (check.unreadable) txt << ", " << check.unreadable << " masks unreadable";
    txt << "\n";
    o.details["mask_box_violations"] = check.violations;
    o.details["mask_unreadable"] = check.unreadable;
  }
  txt << "Wrote " << (out_dir / "splits.txt").string() << "\n";
  o.summary = txt.str();
  o.artifacts.push_back((out_dir / "splits.txt").string());
  return o;
}

struct ExportArgs {
  std::string root, split = "train", out, splits_file;
  unsigned jobs = default_jobs();
};

CommandOutcome cmd_export(const ExportArgs& a, fs::path& out_dir) {
  const fs::path root = resolve_root(a.root);
  out_dir = resolve_out(a.out, "export-yolo");
  const auto index = load_with_splits(root, a.splits_file, a.jobs);
  const Split split = parse_split(a.split);
  const auto files = export_yolo(index, split, out_dir);
  CommandOutcome o;
  o.summary = "Exported " + std::to_string(files) + " YOLO label files for split '" + a.split +
              "' to " + (out_dir / "labels").string() + "\n";
  o.artifacts = {(out_dir / "labels").string(), (out_dir / (a.split + ".txt")).string()};
  o.details = {{"files", files}, {"split", a.split}};
  return o;
}

struct RunArgs {
  std::string root, split = "test", detector, segmenter, config, out, splits_file;
  std::uint64_t seed = 0;
  unsigned jobs = default_jobs();
  // Flag overrides; only applied when given.
  std::string mode, prompt, aggregation, selection;
  double box_threshold = 0, text_threshold = 0, conf_threshold = 0, nms_iou = 0;
  bool no_timing = false;
};

/// Config file first, then flags. A flag that disagrees with a key the file
/// sets is a conflict, never a silent override.
PipelineConfig resolve_config(const RunArgs& a, const CLI::App& app) {
  PipelineConfig cfg;
  json file = json::object();
  if (!a.config.empty()) {
    try {
      file = json::parse(read_text(a.config), nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
    cfg = apply_config_json(cfg, file);
  }
  json flags = json::object();
  auto given = [&](const char* opt) { return app.count(opt) > 0; };
  if (given("--mode")) flags["mode"] = a.mode;
  if (given("--prompt")) flags["prompt"] = a.prompt;
  if (given("--box-threshold")) flags["box_threshold"] = a.box_threshold;
  if (given("--text-threshold")) flags["text_threshold"] = a.text_threshold;
  if (given("--conf-threshold")) flags["conf_threshold"] = a.conf_threshold;
  if (given("--nms-iou")) flags["nms_iou"] = a.nms_iou;
  if (given("--aggregation")) flags["aggregation"] = a.aggregation;
  if (given("--selection")) flags["selection"] = a.selection;
  if (a.no_timing) flags["timing"] = false;
  for (const auto& [k, v] : flags.items()) {
    if (file.contains(k) && file[k] != v) {
      throw ConfigError("flag for '" + k + "' (" + v.dump() + ") conflicts with " + a.config +
                        " (" + file[k].dump() + ")");
    }
  }
  return apply_config_json(cfg, flags);
}

CommandOutcome cmd_run(const RunArgs& a, const CLI::App& app, fs::path& out_dir) {
  const fs::path root = resolve_root(a.root);
  out_dir = resolve_out(a.out, "run");
  const auto config = resolve_config(a, app);
  const auto det_spec = parse_backend_spec(a.detector);
  const auto seg_spec = parse_backend_spec(a.segmenter);
  validate_backend_spec(det_spec, true);
  validate_backend_spec(seg_spec, false);
  const auto index = load_with_splits(root, a.splits_file, a.jobs);
  const Split split = parse_split(a.split);

  const auto run = run_split(
      index, split, config, [&] { return make_detector(det_spec, a.seed); },
      [&] { return make_segmenter(seg_spec); }, a.jobs);
  auto manifest = make_manifest(index, split, config, run.detector_identity,
                                run.segmenter_identity, a.seed);
  write_predictions(out_dir, run, config, manifest);

  std::size_t no_det = 0;
  for (const auto& r : run.results) no_det += r.no_detection() ? 1 : 0;
  CommandOutcome o;
  o.exit_code = run.failures.empty() ? 0 : 1;
  std::ostringstream txt;
  txt << "Ran " << run.detector_identity << " + " << run.segmenter_identity << " on "
      << index.in_split(split).size() << " '" << a.split << "' images: " << run.results.size()
      << " ok, " << run.failures.size() << " failed, " << no_det << " without detections\n";
  for (const auto& f : run.failures) txt << "  failure: " << f.message << "\n";
  txt << "Predictions in " << out_dir.string() << "\n";
  o.summary = txt.str();
  o.artifacts = {(out_dir / "masks").string(), (out_dir / "manifest.json").string(),
                 (out_dir / "detections.jsonl").string()};
  o.details = {{"images", index.in_split(split).size()},
               {"results", run.results.size()},
               {"failures", run.failures.size()},
               {"no_detection", no_det}};
  return o;
}

struct EvalArgs {
  std::string pred, root, out, split, splits_file, method;
  double class_threshold = 0.85;
  unsigned jobs = default_jobs();
};

CommandOutcome cmd_eval(const EvalArgs& a, fs::path& out_dir) {
  const fs::path root = resolve_root(a.root);
  out_dir = resolve_out(a.out, "eval");
  const fs::path pred = a.pred;
  if (!fs::is_directory(pred)) throw ConfigError("prediction directory " + pred.string() + " not found");
  json manifest;
  const fs::path manifest_path = pred / "manifest.json";
  if (fs::is_regular_file(manifest_path)) manifest = json::parse(read_text(manifest_path));
  std::string split_text = a.split;
  if (split_text.empty() && manifest.is_object() && manifest.contains("dataset")) {
    split_text = manifest["dataset"].value("split", std::string("test"));
  }
  if (split_text.empty()) split_text = "test";
  const Split split = parse_split(split_text);
  std::string method = a.method;
  if (method.empty()) {
    method = manifest.is_object() && manifest.contains("detector")
                 ? manifest["detector"].get<std::string>() + " + " + manifest["segmenter"].get<std::string>()
                 : pred.filename().string();
  }

  const auto index = load_with_splits(root, a.splits_file, a.jobs);
  if (index.in_split(split).empty()) throw ConfigError("split '" + split_text + "' is empty");
  const auto ev = evaluate_prediction_dir(index, split, pred);
  const auto classes = per_class_summary(ev.per_image, index, a.class_threshold);
  const std::string manifest_ref =
      fs::is_regular_file(manifest_path) ? fs::absolute(manifest_path).string() : "(none)";

  fs::create_directories(out_dir);
  const TableRow row{method, ev.report.macro, ev.report.ap50,
                     ev.fps ? std::optional<long long>(ev.fps->fps) : std::nullopt};
  write_text(out_dir / "table.csv", "# manifest: " + manifest_ref + "\n" + format_table({&row, 1}));
  write_text(out_dir / "per_class.csv", format_per_class(classes));
  std::string per_image = "image_id,class_id,detections,tp,fp,fn,tn,iou,dice,precision,recall,f1\n";
  for (const auto& p : ev.per_image) {
    per_image += std::to_string(p.image_id) + "," + std::to_string(p.class_id) + "," +
                 std::to_string(p.detections) + "," + std::to_string(p.counts.tp) + "," +
                 std::to_string(p.counts.fp) + "," + std::to_string(p.counts.fn) + "," +
                 std::to_string(p.counts.tn) + "," + fmt(p.metrics.iou, 6) + "," +
                 fmt(p.metrics.dice, 6) + "," + fmt(p.metrics.precision, 6) + "," +
                 fmt(p.metrics.recall, 6) + "," + fmt(p.metrics.f1, 6) + "\n";
  }
  write_text(out_dir / "per_image.csv", per_image);
  std::string summary = format_summary(method, ev.report, ev.fps, manifest_ref);
  if (!ev.warnings.empty()) {
    summary += "\nWarnings:\n";
    for (const auto& w : ev.warnings) summary += "  " + w + "\n";
  }
  write_text(out_dir / "summary.txt", summary);

  json machine{{"method", method},
               {"manifest", manifest_ref},
               {"images", ev.report.images},
               {"macro", to_json(ev.report.macro)},
               {"micro", to_json(ev.report.micro)},
               {"no_detection", ev.report.no_detection},
               {"multi_detection", ev.report.multi_detection},
               {"missing_predictions", ev.report.missing_predictions},
               {"classes_above_threshold", classes.above},
               {"class_threshold", classes.threshold},
               {"warnings", ev.warnings}};
  if (ev.report.ap50) machine["ap50"] = *ev.report.ap50;
  if (ev.fps) machine["fps"] = to_json(*ev.fps);
  write_text(out_dir / "summary.json", machine.dump(2) + "\n");

  CommandOutcome o;
  o.exit_code = ev.warnings.empty() ? 0 : 1;
  o.summary = summary;
  o.artifacts = {(out_dir / "table.csv").string(), (out_dir / "per_class.csv").string(),
                 (out_dir / "summary.txt").string(), (out_dir / "summary.json").string()};
  o.details = machine;
  return o;
}

struct AblateArgs {
  std::string grid, root, out, splits_file;
  unsigned jobs = default_jobs();
};

CommandOutcome cmd_ablate(const AblateArgs& a, fs::path& out_dir) {
  const fs::path root = resolve_root(a.root);
  out_dir = resolve_out(a.out, "ablate");
  const auto grid = parse_grid(read_text(a.grid));
  const auto index = load_with_splits(root, a.splits_file, a.jobs);
  const auto report = run_grid(grid, index, a.jobs);
  write_ablation_report(out_dir, report);
  CommandOutcome o;
  std::size_t failed = 0, image_failures = 0;
  for (const auto& r : report.rows) {
    failed += r.ok ? 0 : 1;
    image_failures += r.failures;
  }
  o.exit_code = failed == 0 && image_failures == 0 ? 0 : 1;
  o.summary = format_ablation_table(report);
  o.artifacts = {(out_dir / "ablation.csv").string(), (out_dir / "summary.txt").string()};
  o.details = {{"rows", report.rows.size()}, {"failed_rows", failed}, {"image_failures", image_failures}};
  return o;
}

struct BenchArgs {
  std::vector<std::string> timings;
  std::string out;
};

/// Timing CSVs need detect_ms, segment_ms and total_ms columns; an optional
/// method column groups rows, otherwise the file is one
/// method named after its parent directory. "-" reads as 0 ms.
std::vector<std::pair<std::string, std::vector<StageTimings>>> read_timing_file(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty timing file");
  auto split_csv = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    for (std::string cell; std::getline(ss, cell, ',');) {
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.pop_back();
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.erase(0, 1);
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"detect_ms", "segment_ms", "total_ms"}) {
    if (!col.contains(need)) throw DataError(path.string() + ": missing column " + need);
  }
  std::string fallback = path.parent_path().filename().string();
  if (fallback.empty()) fallback = path.stem().string();
  std::vector<std::pair<std::string, std::vector<StageTimings>>> groups;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    auto num = [&](const char* name) {
      const auto& c = cells.at(col[name]);
      if (c.empty() || c.find_first_not_of('-') == std::string::npos) return 0.0;
      try {
        return std::stod(c);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(ln) + ": bad number '" + c + "'");
      }
    };
    if (cells.size() < header.size()) {
      throw DataError(path.string() + ":" + std::to_string(ln) + ": too few columns");
    }
    const std::string method = col.contains("method") ? cells[col["method"]] : fallback;
    StageTimings t{num("detect_ms"), num("segment_ms"), num("total_ms")};
    auto it = std::find_if(groups.begin(), groups.end(), [&](auto& g) { return g.first == method; });
    if (it == groups.end()) {
      groups.push_back({method, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(t);
  }
  return groups;
}

CommandOutcome cmd_bench(const BenchArgs& a, fs::path& out_dir) {
  out_dir = resolve_out(a.out, "bench");
  std::string table = "method,det_ms,seg_ms,overhead_ms,total_ms,FPS,FPS_unrounded\n";
  std::string text = "Latency summary (mean ms per image)\n";
  json rows = json::array();
  for (const auto& file : a.timings) {
    for (const auto& [method, samples] : read_timing_file(file)) {
      const auto s = fps_summary(samples);
      table += method + "," + fmt(s.detect_ms, 1) + "," + fmt(s.segment_ms, 1) + "," +
               fmt(s.overhead_ms, 1) + "," + fmt(s.total_ms, 1) + "," + std::to_string(s.fps) + "," +
               fmt(s.fps_unrounded, 1) + "\n";
      text += "  " + method + ": det " + fmt(s.detect_ms, 1) + ", seg " + fmt(s.segment_ms, 1) +
              ", overhead " + fmt(s.overhead_ms, 1) + ", total " + fmt(s.total_ms, 1) + " -> " +
              std::to_string(s.fps) + " FPS (" + fmt(s.fps_unrounded, 1) + ")\n";
      auto j = to_json(s);
      j["method"] = method;
      rows.push_back(j);
    }
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "speed.csv", table);
  write_text(out_dir / "speed.txt", text);
  CommandOutcome o;
  o.summary = text;
  o.artifacts = {(out_dir / "speed.csv").string(), (out_dir / "speed.txt").string()};
  o.details = {{"methods", rows}};
  return o;
}

struct SynthArgs {
  std::size_t n = 50;
  std::string dims = "128x96", out;
  std::uint64_t seed = 0;
  int classes = 5;
};

CommandOutcome cmd_synth(const SynthArgs& a, fs::path& out_dir) {
  out_dir = resolve_out(a.out, "synth");
  SynthSpec spec;
  spec.count = a.n;
  spec.seed = a.seed;
  spec.classes = a.classes;
  const auto x = a.dims.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("dims");
    spec.dims = {std::stoi(a.dims.substr(0, x)), std::stoi(a.dims.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--dims expects WIDTHxHEIGHT, got '" + a.dims + "'");
  }
  generate_synthetic(spec, out_dir);
  CommandOutcome o;
  o.summary = "Generated " + std::to_string(a.n) + " synthetic images (" + a.dims + ", seed " +
              std::to_string(a.seed) + ") in " + out_dir.string() + "\n";
  o.artifacts = {(out_dir / "images.txt").string()};
  o.details = {{"images", a.n}, {"seed", a.seed}, {"dims", a.dims}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boxseg: detect -> box-prompted segmentation harness and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Assign train/val/test splits and validate a dataset root");
  prepare->add_option("--root", prep.root, "Dataset root (env BOXSEG_ROOT)");
  prepare->add_option("--seed", prep.seed, "Split permutation seed");
  prepare->add_option("--splits", prep.splits, "Train,val,test fractions")->capture_default_str();
  prepare->add_option("--out", prep.out, "Directory for splits.txt (default: root)");
  prepare->add_option("--jobs", prep.jobs, "Worker threads");
  prepare->add_flag("!--no-validate", prep.validate_masks, "Skip the mask-inside-box check");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export-yolo", "Write YOLO detection labels for one split");
  export_cmd->add_option("--root", exp.root, "Dataset root (env BOXSEG_ROOT)");
  export_cmd->add_option("--split", exp.split, "train|val|test")->capture_default_str();
  export_cmd->add_option("--out", exp.out, "Output directory");
  export_cmd->add_option("--splits-file", exp.splits_file, "Split file (default: <root>/splits.txt)");
  export_cmd->add_option("--jobs", exp.jobs, "Worker threads");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run detector + segmenter over a split");
  run_cmd->add_option("--root", run.root, "Dataset root (env BOXSEG_ROOT)");
  run_cmd->add_option("--split", run.split, "train|val|test")->capture_default_str();
  run_cmd->add_option("--detector", run.detector, "Detector spec, e.g. oracle, perturbed:jitter=4")->required();
  run_cmd->add_option("--segmenter", run.segmenter, "Segmenter spec, e.g. oracle, boxfill")->required();
  run_cmd->add_option("--config", run.config, "Pipeline config JSON");
  run_cmd->add_option("--out", run.out, "Predictions directory");
  run_cmd->add_option("--splits-file", run.splits_file, "Split file (default: <root>/splits.txt)");
  run_cmd->add_option("--seed", run.seed, "Seed for perturbed backends");
  run_cmd->add_option("--jobs", run.jobs, "Worker threads (one backend instance each)");
  run_cmd->add_option("--mode", run.mode, "grounded|supervised");
  run_cmd->add_option("--prompt", run.prompt, "Text prompt");
  run_cmd->add_option("--box-threshold", run.box_threshold);
  run_cmd->add_option("--text-threshold", run.text_threshold);
  run_cmd->add_option("--conf-threshold", run.conf_threshold);
  run_cmd->add_option("--nms-iou", run.nms_iou);
  run_cmd->add_option("--aggregation", run.aggregation, "union|per-instance");
  run_cmd->add_option("--selection", run.selection, "highest_score|first");
  run_cmd->add_flag("--no-timing", run.no_timing, "Omit stage timings (byte-stable output)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a predictions directory");
  eval_cmd->add_option("--pred", ev.pred, "Predictions directory")->required();
  eval_cmd->add_option("--root", ev.root, "Dataset root (env BOXSEG_ROOT)");
  eval_cmd->add_option("--out", ev.out, "Report directory");
  eval_cmd->add_option("--split", ev.split, "Split (default: from the run manifest)");
  eval_cmd->add_option("--splits-file", ev.splits_file, "Split file (default: <root>/splits.txt)");
  eval_cmd->add_option("--method", ev.method, "Row label in the table");
  eval_cmd->add_option("--class-threshold", ev.class_threshold, "Per-class IoU threshold")->capture_default_str();
  eval_cmd->add_option("--jobs", ev.jobs, "Worker threads");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  ablate->add_option("--grid", ab.grid, "Grid file")->required();
  ablate->add_option("--root", ab.root, "Dataset root (env BOXSEG_ROOT)");
  ablate->add_option("--out", ab.out, "Report directory");
  ablate->add_option("--splits-file", ab.splits_file, "Split file (default: <root>/splits.txt)");
  ablate->add_option("--jobs", ab.jobs, "Worker threads per row");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Summarize stage latencies and FPS");
  bench_cmd->add_option("--timings", bench.timings, "Timing CSV file(s)")->required();
  bench_cmd->add_option("--out", bench.out, "Report directory");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset root");
  synth_cmd->add_option("--n", synth.n, "Number of images")->capture_default_str();
  synth_cmd->add_option("--dims", synth.dims, "WIDTHxHEIGHT")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  fs::path out_dir;
  std::string name;
  try {
    CommandOutcome o;
    if (*prepare) {
      name = "prepare";
      o = cmd_prepare(prep, out_dir);
    } else if (*export_cmd) {
      name = "export-yolo";
      o = cmd_export(exp, out_dir);
    } else if (*run_cmd) {
      name = "run";
      o = cmd_run(run, *run_cmd, out_dir);
    } else if (*eval_cmd) {
      name = "eval";
      o = cmd_eval(ev, out_dir);
    } else if (*ablate) {
      name = "ablate";
      o = cmd_ablate(ab, out_dir);
    } else if (*bench_cmd) {
      name = "bench";
      o = cmd_bench(bench, out_dir);
    } else {
      name = "synth";
      o = cmd_synth(synth, out_dir);
    }
    emit(o, name, out_dir);
    return o.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "boxseg " << name << ": error: " << e.what() << "\n";
    if (!out_dir.empty()) {
      try {
        fs::create_directories(out_dir);
        write_text(out_dir / (name + ".outcome.json"),
                   json{{"command", name}, {"exit_code", 2}, {"error", e.what()}}.dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
    return 2;
  }
}
