// segdet command-line tool.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segdet/bboxreg.hpp"
#include "segdet/config.hpp"
#include "segdet/dataset.hpp"
#include "segdet/error.hpp"
#include "segdet/eval.hpp"
#include "segdet/formats.hpp"
#include "segdet/model.hpp"
#include "segdet/parallel.hpp"
#include "segdet/rng.hpp"
#include "segdet/segfeat.hpp"
#include "segdet/synth.hpp"
#include "segdet/training.hpp"

namespace fs = std::filesystem;
using namespace segdet;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string manifest;
  std::string config;
  std::string out;
  int threads = -1;  // -1: take the config's value
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--manifest", c.manifest, "Dataset manifest");
  app->add_option("--config", c.config, "Configuration file (JSON)");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--threads", c.threads, "Worker threads (0: all cores)");
}

std::string read_text(const fs::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config config_of(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : load_config(c.config);
  if (c.threads >= 0) cfg.threads = c.threads;
  validate(cfg);
  return cfg;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(ErrorCode::BadConfig, flag + " is required");
}

Dataset dataset_of(const Common& c, const Config& cfg, bool need_regression = false) {
  require(c.manifest, "--manifest");
  LoadOptions opts;
  opts.min_segment_pixels = cfg.segfeat.min_segment_pixels;
  opts.require_regression = need_regression;
  opts.threads = resolve_threads(cfg.threads);
  return load_dataset(fs::path(c.manifest), opts);
}

std::vector<std::size_t> split_of(const Dataset& ds, const std::string& split) {
  auto idx = images_in_split(ds, split);
  if (idx.empty()) throw Error(ErrorCode::BadConfig, "no images in split '" + split + "'");
  return idx;
}

std::vector<Detection> read_detections_file(const fs::path& path) {
  auto in = open_input(path);
  return read_detections(in, path.string());
}

void write_detections_file(const fs::path& path, const std::vector<Detection>& dets) {
  auto out = open_output(path);
  write_detections(out, dets);
}

// ---- synth ----

int run_synth(const Common& c, const std::optional<std::uint64_t>& seed, const std::optional<int>& images) {
  require(c.out, "--out");
  SynthConfig sc = c.config.empty() ? SynthConfig{} : parse_synth_config(read_text(c.config));
  if (seed) sc.seed = *seed;
  if (images) sc.n_images = *images;
  const auto world = make_world(sc);
  write_world(world, c.out);
  std::cout << "wrote " << world.images.size() << " images to " << c.out << "\n";
  return 0;
}

// ---- featdump ----

int run_featdump(const Common& c, const std::string& image_filter) {
  require(c.out, "--out");
  const Config cfg = config_of(c);
  const Dataset ds = dataset_of(c, cfg);
  const GridSpec grid{cfg.segfeat.grid};
  const std::size_t glen = geometry_length(grid.k);
  auto out = open_output(c.out);
  out << "image_id,box_id,segment_id";
  for (std::size_t j = 0; j < glen; ++j) out << ",g" << j;
  for (int cl = 1; cl <= ds.num_classes(); ++cl) out << ",segclass_" << cl;
  out << "\n";
  for (const auto& im : ds.images) {
    if (!image_filter.empty() && im.id != image_filter) continue;
    for (std::size_t b = 0; b < im.num_boxes(); ++b) {
      const auto table = segment_geometry_table(im.boxes[b], im, grid, cfg.segfeat.lambda);
      for (std::size_t s = 0; s < im.segments.size(); ++s) {
        out << im.id << ',' << im.box_ids[b] << ',' << im.segments[s].id();
        for (std::size_t j = 0; j < glen; ++j) out << ',' << format_double(table[s * glen + j]);
        for (double score : im.segments[s].class_scores) out << ',' << format_double(segclass_feat(score));
        out << "\n";
      }
    }
  }
  return 0;
}

// ---- train / detect ----

int run_train(const Common& c, const std::string& split) {
  require(c.out, "--out");
  const Config cfg = config_of(c);
  const Dataset ds = dataset_of(c, cfg);
  const auto idx = split_of(ds, split);
  const TrainResult result = train(ds, idx, cfg, resolve_threads(cfg.threads));
  fs::create_directories(c.out);
  save_model(fs::path(c.out) / "model.json", result.model);
  {
    auto log = open_output(fs::path(c.out) / "train_log.csv");
    write_train_log(log, result.log);
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "model written to " << (fs::path(c.out) / "model.json").string() << "\n";
  return 0;
}

int run_detect(const Common& c, const std::string& model_path, const std::string& split) {
  require(model_path, "--model");
  require(c.out, "--out");
  const ModelWeights model = load_model(model_path);
  const Config cfg = config_of(c);
  const Dataset ds = dataset_of(c, cfg);
  check_compatible(model, ds);
  const auto idx = split_of(ds, split);
  const auto dets = detect(ds, idx, model, cfg.detect, resolve_threads(cfg.threads));
  write_detections_file(c.out, dets);
  std::cout << dets.size() << " detections written to " << c.out << "\n";
  return 0;
}

// ---- regress ----

struct RegressArgs {
  std::string mode;
  std::string regressor;
  std::string model;
  std::string detections;
  std::string stats;
  std::string split = "train";
};

int run_regress(const Common& c, const RegressArgs& a) {
  require(c.out, "--out");
  const Config cfg = config_of(c);
  if (a.mode == "fit") {
    const Dataset ds = dataset_of(c, cfg, true);
    const auto idx = split_of(ds, a.split);
    std::vector<std::string> warnings;
    const BoxRegressor reg = fit_regressors(ds, idx, cfg.regress, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    save_regressor(c.out, reg);
    return 0;
  }
  require(a.regressor, "--regressor");
  const BoxRegressor reg = load_regressor(a.regressor);
  const Dataset ds = dataset_of(c, cfg, true);
  if (a.mode == "apply") {
    require(a.detections, "--detections");
    const auto dets = read_detections_file(a.detections);
    write_detections_file(c.out, apply_to_detections(ds, dets, reg));
    return 0;
  }
  // iterate
  require(a.model, "--model");
  const ModelWeights model = load_model(a.model);
  check_compatible(model, ds);
  const auto idx = split_of(ds, a.split);
  const FeatureProvider provider = ds.synthetic ? synthetic_provider(*ds.synthetic) : lookup_provider();
  const IterateResult result =
      iterate_boxes(ds, idx, reg, model, cfg.regress, cfg.detect, provider, resolve_threads(cfg.threads));
  write_detections_file(c.out, result.detections);
  if (!a.stats.empty()) {
    auto out = open_output(a.stats);
    out << "iteration,boxes,changed,provider_calls\n";
    for (const auto& s : result.stats) {
      out << s.iteration << ',' << s.boxes << ',' << s.changed << ',' << s.provider_calls << "\n";
    }
  }
  return 0;
}

// ---- eval ----

int run_eval(const Common& c, const std::string& detections, const std::string& split, const std::string& pr_dir) {
  require(detections, "--detections");
  require(c.out, "--out");
  const Config cfg = config_of(c);
  const Dataset ds = dataset_of(c, cfg);
  const auto idx = split_of(ds, split);
  const auto dets = read_detections_file(detections);
  const EvalReport report = evaluate(ds, idx, dets, cfg.eval);
  {
    auto out = open_output(c.out);
    write_report(out, report);
  }
  if (!pr_dir.empty()) {
    fs::create_directories(pr_dir);
    write_pr_curves(pr_dir, report);
  }
  write_report(std::cout, report);
  return 0;
}

// ---- bench ----

SegmentMask random_mask(Rng& rng, int side) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(side) * side, 0);
  // A few filled rectangles, so runs are long as with real segments.
  for (int r = 0; r < 4; ++r) {
    const int x1 = rng.range(0, side - 1), x2 = rng.range(x1, side - 1);
    const int y1 = rng.range(0, side - 1), y2 = rng.range(y1, side - 1);
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x) bits[static_cast<std::size_t>(y) * side + x] = 1;
  }
  bits[0] = 1;
  return SegmentMask::from_bits("bench", 0, side, side, bits);
}

int run_bench(const Common& c, int grid_k, const std::vector<int>& sizes, int boxes) {
  if (grid_k < 1) throw Error(ErrorCode::BadConfig, "--grid must be >= 1");
  std::ofstream file;
  if (!c.out.empty()) file = open_output(c.out);
  std::ostream& out = c.out.empty() ? std::cout : file;
  using clock = std::chrono::steady_clock;
  const GridSpec grid{grid_k};
  out << "side,grid,boxes,naive_us,integral_us,speedup\n";
  for (int side : sizes) {
    if (side < 2) throw Error(ErrorCode::BadConfig, "mask sides must be >= 2");
    Rng rng(derive_seed(1, static_cast<std::uint64_t>(side)));
    const SegmentMask mask = random_mask(rng, side);
    std::vector<Box> ps;
    for (int i = 0; i < boxes; ++i) {
      const int x1 = rng.range(0, side / 2), y1 = rng.range(0, side / 2);
      ps.push_back({double(x1), double(y1), double(rng.range(x1, side - 1)), double(rng.range(y1, side - 1))});
    }
    const std::int64_t largest = mask.pixel_count();
    double sink = 0;

    const auto t0 = clock::now();
    for (const Box& p : ps) {
      for (double v : naive::seggrid_in(p, mask, grid)) sink += v;
      for (double v : naive::backgrid_in(p, mask, grid, largest)) sink += v;
      sink += naive::seg_out(p, mask) + naive::back_out(p, mask, largest);
    }
    const auto t1 = clock::now();
    // The integral table build is charged to the integral path.
    const PreparedSegment prepared(mask, {0.0});
    std::vector<double> buf(geometry_length(grid_k));
    for (const Box& p : ps) {
      segment_geometry(p, prepared, grid, -0.7, largest, buf);
      for (double v : buf) sink += v;
    }
    const auto t2 = clock::now();

    const double naive_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
    const double integral_us = std::chrono::duration<double, std::micro>(t2 - t1).count();
    out << side << ',' << grid_k << ',' << boxes << ',' << format_double(naive_us) << ','
        << format_double(integral_us) << ',' << format_double(naive_us / std::max(integral_us, 1e-3)) << "\n";
    volatile double keep = sink;
    (void)keep;
  }
  return 0;
}

// ---- config ----

int run_config(const Common& c) {
  const Config cfg = config_of(c);
  if (c.out.empty()) {
    std::cout << dump_config(cfg);
  } else {
    auto out = open_output(c.out);
    out << dump_config(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation-aware object detection: training, inference, box regression and evaluation"};
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  add_common(synth, common);
  std::optional<std::uint64_t> seed;
  std::optional<int> n_images;
  synth->add_option("--seed", seed, "Generator seed (overrides the config)");
  synth->add_option("--images", n_images, "Number of images (overrides the config)");

  auto* featdump = app.add_subcommand("featdump", "Write segmentation feature blocks as CSV");
  add_common(featdump, common);
  std::string image_filter;
  featdump->add_option("--image", image_filter, "Only this image id");

  auto* train_cmd = app.add_subcommand("train", "Train the detector");
  add_common(train_cmd, common);
  std::string train_split = "train";
  train_cmd->add_option("--split", train_split, "Image split: train, test or all");

  auto* detect_cmd = app.add_subcommand("detect", "Score candidate boxes and run NMS");
  add_common(detect_cmd, common);
  std::string model_path;
  std::string detect_split = "test";
  detect_cmd->add_option("--model", model_path, "Model file");
  detect_cmd->add_option("--split", detect_split, "Image split: train, test or all");

  auto* regress = app.add_subcommand("regress", "Fit, apply or iterate bounding-box regression");
  add_common(regress, common);
  RegressArgs rargs;
  regress->add_option("mode", rargs.mode, "fit | apply | iterate")
      ->required()
      ->check(CLI::IsMember({"fit", "apply", "iterate"}));
  regress->add_option("--regressor", rargs.regressor, "Regressor file (apply, iterate)");
  regress->add_option("--model", rargs.model, "Model file (iterate)");
  regress->add_option("--detections", rargs.detections, "Detections dump (apply)");
  regress->add_option("--stats", rargs.stats, "Per-iteration statistics CSV (iterate)");
  regress->add_option("--split", rargs.split, "Image split: train, test or all");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a detections dump");
  add_common(eval_cmd, common);
  std::string detections;
  std::string eval_split = "test";
  std::string pr_dir;
  eval_cmd->add_option("--detections", detections, "Detections dump");
  eval_cmd->add_option("--split", eval_split, "Image split: train, test or all");
  eval_cmd->add_option("--pr-dir", pr_dir, "Directory for per-class precision/recall CSVs");

  auto* bench = app.add_subcommand("bench", "Time naive vs integral-image segmentation features");
  add_common(bench, common);
  int bench_grid = 2;
  std::vector<int> bench_sizes{32, 64, 128, 256};
  int bench_boxes = 64;
  bench->add_option("--grid", bench_grid, "Grid cells per side");
  bench->add_option("--sizes", bench_sizes, "Mask sides")->delimiter(',');
  bench->add_option("--boxes", bench_boxes, "Boxes per mask");

  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration with all defaults");
  add_common(config_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth) return run_synth(common, seed, n_images);
    if (*featdump) return run_featdump(common, image_filter);
    if (*train_cmd) return run_train(common, train_split);
    if (*detect_cmd) return run_detect(common, model_path, detect_split);
    if (*regress) return run_regress(common, rargs);
    if (*eval_cmd) return run_eval(common, detections, eval_split, pr_dir);
    if (*bench) return run_bench(common, bench_grid, bench_sizes, bench_boxes);
    if (*config_cmd) return run_config(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
