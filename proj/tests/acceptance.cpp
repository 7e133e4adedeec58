// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "process.hpp"
#include "segdet/bboxreg.hpp"
#include "segdet/eval.hpp"
#include "segdet/formats.hpp"
#include "segdet/model.hpp"
#include "segdet/training.hpp"
#include "support.hpp"

using namespace segdet;
namespace fs = std::filesystem;
namespace t = segdet::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream first_failure;
  std::size_t failures = 0;

  template <typename... Args>
  void expect(bool cond, const Args&... what) {
    if (cond) return;
    if (failures++ == 0) {
      ok = false;
      (first_failure << ... << what);
    }
  }
  std::string describe() const {
    return failures == 0 ? "" : std::to_string(failures) + " mismatches, first: " + first_failure.str();
  }
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}

// ---- 1: integral features vs per-pixel oracle ----

void compare_features(Check& check, const t::Bits& bits, const Box& p, int k, std::int64_t largest) {
  const SegmentMask mask = t::to_mask(bits);
  const PreparedSegment seg(mask, {0.0});
  const GridSpec grid{k};
  const t::GeometryCounts counts = t::count_geometry(bits, p, k);

  // Integer counts from the summed-area table.
  const auto cells = grid_cells(p.rounded(), grid);
  const ImageSize size{bits.width, bits.height};
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::int64_t in = seg.integral.rect_count(cells[c]);
    const std::int64_t area = cells[c].clip(size).area();
    check.expect(in == counts.seg_in[c], "seg count cell ", c);
    check.expect(area - in == counts.back_in[c], "back count cell ", c);
  }

  const t::GeometryOracle o = t::geometry_oracle(bits, p, k, largest);
  const auto gi = seggrid_in(p, seg, grid);
  const auto bi = backgrid_in(p, seg, grid, largest);
  const auto ngi = naive::seggrid_in(p, mask, grid);
  const auto nbi = naive::backgrid_in(p, mask, grid, largest);
  for (std::size_t c = 0; c < gi.size(); ++c) {
    check.expect(std::abs(gi[c] - o.grid_in[c]) <= 1e-12, "seggrid_in k=", k);
    check.expect(std::abs(bi[c] - o.back_in[c]) <= 1e-12, "backgrid_in k=", k);
    check.expect(std::abs(ngi[c] - o.grid_in[c]) <= 1e-12, "naive seggrid_in k=", k);
    check.expect(std::abs(nbi[c] - o.back_in[c]) <= 1e-12, "naive backgrid_in k=", k);
  }
  check.expect(std::abs(seg_out(p, seg) - o.seg_out) <= 1e-12, "seg_out");
  check.expect(std::abs(back_out(p, seg, largest) - o.back_out) <= 1e-12, "back_out");
  check.expect(std::abs(overlap_feat(p, seg, -0.7) - (t::iou_oracle(p, t::tight_box_oracle(bits)) + 0.7)) <= 1e-12,
               "overlap");
}

Outcome integral_equivalence() {
  Check check;
  Rng rng(101);
  std::size_t pairs = 0;
  // Every box inside every mask shape up to 12 x 12.
  for (int h = 1; h <= 12; ++h) {
    for (int w = 1; w <= 12; ++w) {
      t::Bits bits = t::random_bits(rng, h, w, 0.45);
      bits.v[static_cast<std::size_t>(rng.below(bits.v.size()))] = 1;
      const std::int64_t area = static_cast<std::int64_t>(h) * w;
      const std::int64_t largest = bits.count() + rng.range(0, static_cast<int>(area - bits.count()));
      const SegmentMask mask = t::to_mask(bits);
      const IntegralMask integral(mask);
      for (int y1 = 0; y1 < h; ++y1)
        for (int y2 = y1; y2 < h; ++y2)
          for (int x1 = 0; x1 < w; ++x1)
            for (int x2 = x1; x2 < w; ++x2) {
              std::int64_t n = 0;
              for (int y = y1; y <= y2; ++y)
                for (int x = x1; x <= x2; ++x) n += bits.at(y, x);
              check.expect(integral.rect_count({x1, y1, x2, y2}) == n, "rect_count ", h, "x", w);
              const Box p{double(x1), double(y1), double(x2), double(y2)};
              compare_features(check, bits, p, 1 + (x1 + y2) % 3, largest);
              ++pairs;
            }
    }
  }
  // Random 64 x 64 masks, boxes allowed past the border.
  for (int m = 0; m < 200; ++m) {
    const t::Bits bits = t::random_blob(rng, 64, 64, 1 + m % 4);
    const std::int64_t largest = bits.count() + rng.range(0, static_cast<int>(64 * 64 - bits.count()));
    for (int b = 0; b < 10; ++b) {
      const int x1 = rng.range(-8, 63), y1 = rng.range(-8, 63);
      const Box p{double(x1), double(y1), double(rng.range(x1, 71)), double(rng.range(y1, 71))};
      for (int k = 1; k <= 3; ++k) compare_features(check, bits, p, k, largest);
      ++pairs;
    }
  }
  return {check.ok, std::to_string(pairs) + " (box, mask) pairs" + (check.ok ? "" : "; " + check.describe())};
}

// ---- 2: partition identities ----

Outcome partition_identities() {
  Check check;
  Rng rng(202);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = rng.range(8, 48), h = rng.range(8, 48);
    std::vector<t::Bits> masks;
    for (int s = 0; s < 3; ++s) masks.push_back(t::random_blob(rng, h, w, 1 + s));
    std::vector<PreparedSegment> segs;
    for (const auto& m : masks) segs.emplace_back(t::to_mask(m), std::vector<double>{0.0});
    const std::int64_t largest = largest_segment_area(segs);
    const PreparedSegment& s = segs[static_cast<std::size_t>(rng.below(3))];
    const int x1 = rng.range(-4, w - 1), y1 = rng.range(-4, h - 1);
    const Box p{double(x1), double(y1), double(rng.range(x1, w + 3)), double(rng.range(y1, h + 3))};
    const GridSpec grid{rng.range(1, 3)};
    double seg_sum = seg_out(p, s);
    for (double v : seggrid_in(p, s, grid)) seg_sum += v;
    double back_sum = back_out(p, s, largest);
    for (double v : backgrid_in(p, s, grid, largest)) back_sum += v;
    const double want = static_cast<double>(static_cast<std::int64_t>(w) * h - s.pixels()) /
                        static_cast<double>(std::max<std::int64_t>(largest - s.pixels(), 1));
    worst = std::max({worst, std::abs(seg_sum - 1.0), std::abs(back_sum - want)});
    check.expect(std::abs(seg_sum - 1.0) <= 1e-9, "segment partition ", seg_sum);
    check.expect(std::abs(back_sum - want) <= 1e-9, "background partition ", back_sum, " vs ", want);
  }
  return {check.ok, "1000 pairs, max deviation " + sci(worst) + (check.ok ? "" : "; " + check.describe())};
}

// ---- 3: greedy inference vs joint enumeration ----

Outcome inference_exactness() {
  Check check;
  Rng rng(303);
  std::size_t compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = rng.range(1, 4), segments = rng.range(1, 5), grid = rng.range(1, 3);
    const int w = 24, h = 20;
    std::vector<t::Bits> masks;
    std::vector<std::vector<double>> scores;
    for (int s = 0; s < segments; ++s) {
      masks.push_back(t::random_blob(rng, h, w, 2));
      std::vector<double> sc;
      for (int c = 0; c < classes; ++c) sc.push_back(2 * rng.normal());
      scores.push_back(sc);
    }
    std::vector<Box> boxes;
    for (int b = 0; b < 3; ++b) boxes.push_back(t::random_box(rng, w, h));
    ImageData im = t::make_image({w, h}, masks, scores, boxes, 3, 2);
    for (auto& v : im.appearance.data) v = static_cast<float>(rng.normal());
    for (auto& v : im.context.data) v = static_cast<float>(rng.normal());
    std::vector<std::string> names;
    for (int c = 1; c <= classes; ++c) names.push_back("c" + std::to_string(c));
    ModelWeights model = ModelWeights::zeros(names, grid, -0.7, 3, 2);
    for (auto& d : model.detectors) {
      for (auto& v : d.appearance) v = rng.normal();
      for (auto& v : d.context) v = rng.normal();
      for (auto& v : d.segmentation) v = rng.normal();
      d.bias = rng.normal();
    }

    // Joint assignments: each class independently NONE or one of the segments.
    std::vector<Latent> joint{Latent{}};
    for (int c = 0; c < classes; ++c) {
      std::vector<Latent> next;
      for (const auto& partial : joint)
        for (int s = -1; s < segments; ++s) {
          Latent hh = partial;
          hh.push_back(s < 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(s)));
          next.push_back(hh);
        }
      joint = std::move(next);
    }
    for (int d = 1; d <= classes; ++d) {
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        double best = -INFINITY;
        for (const Latent& hh : joint) {
          const double e = energy(boxes[b], im.appearance.row(b), im.context.row(b), im, model, d, hh);
          // Pixel-oracle energy guards against energy() and score_box() sharing a bug.
          const ClassWeights& cw = model.detector(d);
          double o = cw.bias;
          for (std::size_t j = 0; j < 3; ++j) o += cw.appearance[j] * im.appearance.row(b)[j];
          for (std::size_t j = 0; j < 2; ++j) o += cw.context[j] * im.context.row(b)[j];
          for (std::size_t c = 0; c < hh.size(); ++c) {
            if (!hh[c]) continue;
            const auto block = t::block_oracle(masks[*hh[c]], boxes[b], grid, im.largest_segment, -0.7,
                                               scores[*hh[c]][c]);
            for (std::size_t j = 0; j < block.size(); ++j) o += cw.segmentation[c * block.size() + j] * block[j];
          }
          check.expect(std::abs(e - o) <= 1e-9, "energy vs oracle ", e, " ", o);
          best = std::max(best, e);
        }
        const BoxScore s = score_box(b, im, model, d);
        check.expect(s.score == best, "greedy ", s.score, " joint ", best);
        ++compared;
      }
    }
  }
  return {check.ok, std::to_string(compared) + " (box, detector) maxima" + (check.ok ? "" : "; " + check.describe())};
}

// ---- shared training helpers ----

Dataset world(const SynthConfig& sc, const std::string& name) { return t::synthetic_dataset(sc, "accept_" + name); }

double held_out_map(const Dataset& ds, const std::vector<std::size_t>& train_idx,
                    const std::vector<std::size_t>& eval_idx, const Config& cfg, TrainResult* out = nullptr) {
  TrainResult r = train(ds, train_idx, cfg, 1);
  const auto dets = detect(ds, eval_idx, r.model, cfg.detect, 1);
  const EvalReport rep = evaluate(ds, eval_idx, dets, cfg.eval);
  if (out) *out = std::move(r);
  return rep.map.value_or(0.0);
}

// ---- 4: latent SVM on the noise-free world ----

Outcome latent_svm_sanity() {
  SynthConfig sc;
  sc.n_images = 200;
  sc.classes = 3;
  sc.feature_noise = 0;
  sc.context_noise = 0;
  sc.score_noise = 0;
  sc.segment_noise = 0;
  sc.reg_noise = 0;
  sc.train_fraction = 1.0;
  const Dataset ds = world(sc, "clean");
  const auto idx = images_in_split(ds, "all");
  Config cfg;
  TrainResult r;
  const double map = held_out_map(ds, idx, idx, cfg, &r);
  Check check;
  for (const auto& row : r.log) {
    check.expect(row.objective <= row.objective_before * (1 + 1e-6), "round ", row.round, " class ", row.class_id,
                 ": ", row.objective_before, " -> ", row.objective);
  }
  check.expect(map >= 0.95, "training mAP ", map);
  return {check.ok, std::to_string(r.log.size()) + " fits, training mAP " + fixed(map) +
                        (check.ok ? "" : "; " + check.describe())};
}

// ---- 5: segmentation gain on a world where segments carry extra label information ----

SynthConfig trend_world(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.n_images = 150;
  sc.classes = 3;
  sc.feature_noise = 0.3;
  sc.context_noise = 0.3;
  sc.segment_noise = 0.02;
  sc.score_noise = 0.5;
  sc.train_fraction = 0.6;
  return sc;
}

Outcome segmentation_gain() {
  double sum = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = world(trend_world(seed), "trend");
    const auto tr = images_in_split(ds, "train"), te = images_in_split(ds, "test");
    Config cfg;
    const double with = held_out_map(ds, tr, te, cfg);
    cfg.train.use_segmentation = false;
    const double without = held_out_map(ds, tr, te, cfg);
    sum += with - without;
    per_seed += (per_seed.empty() ? "" : ", ") + fixed(with, 3) + "/" + fixed(without, 3);
  }
  const double gain = sum / 5;
  return {gain >= 0.02, "mean held-out mAP gain " + fixed(100 * gain, 2) + " points (with/without: " + per_seed + ")"};
}

// ---- 6: iterative box regression ----

Outcome iterative_regression() {
  SynthConfig sc;
  sc.n_images = 60;
  sc.classes = 2;
  sc.width = sc.height = 64;
  sc.app_dim = 4;
  sc.ctx_dim = 2;
  sc.reg_dim = 6;
  sc.box_jitter = 0.25;
  const Dataset ds = world(sc, "offset");
  const RegressConfig rc;
  const BoxRegressor reg = fit_regressors(ds, images_in_split(ds, "train"), rc);
  const ModelWeights model = ModelWeights::zeros(ds.class_names, 2, -0.7, 4, 2);
  const FeatureProvider synth = synthetic_provider(*ds.synthetic);

  Check check;
  double iou0 = 0, iou1 = 0;
  std::size_t tracked = 0;
  std::size_t boxes[2] = {0, 0}, changed[2] = {0, 0};
  for (std::size_t ii : images_in_split(ds, "test")) {
    const ImageData& im = ds.images[ii];
    for (int c = 1; c <= 2; ++c) {
      std::vector<Box> requested;
      const FeatureProvider recording = [&](const ImageData& image, const Box& b) {
        requested.push_back(b);
        return synth(image, b);
      };
      const RefinedImage r = iterate_image(im, reg.classes[static_cast<std::size_t>(c - 1)], model, c, rc.max_iters,
                                           rc.change_thresh, recording);
      std::vector<Box> expected, source = im.boxes;
      for (std::size_t it = 1; it < r.boxes.size(); ++it)
        for (std::size_t b = 0; b < im.num_boxes(); ++b)
          if (box_change(source[b], r.boxes[it][b]) > rc.change_thresh) {
            expected.push_back(r.boxes[it][b]);
            source[b] = r.boxes[it][b];
          }
      check.expect(requested == expected, "provider calls differ from replay in ", im.id);
      for (std::size_t it = 0; it < 2; ++it) {
        boxes[it] += im.num_boxes();
        if (it < r.stats.size()) changed[it] += r.stats[it].changed;
      }
      for (std::size_t b = 0; b < im.num_boxes(); ++b) {
        double before = 0, after = 0;
        for (const auto& g : im.ground_truth) {
          if (g.class_id != c) continue;
          before = std::max(before, iou(im.boxes[b], g.box));
          after = std::max(after, iou(r.boxes[1][b], g.box));
        }
        if (before < rc.min_iou) continue;
        iou0 += before;
        iou1 += after;
        ++tracked;
      }
    }
  }
  iou0 /= static_cast<double>(std::max<std::size_t>(tracked, 1));
  iou1 /= static_cast<double>(std::max<std::size_t>(tracked, 1));
  const double f1 = double(changed[0]) / double(boxes[0]), f2 = double(changed[1]) / double(boxes[1]);
  check.expect(tracked > 0 && iou1 > iou0, "mean IoU ", iou0, " -> ", iou1);
  check.expect(f2 < f1, "changed fraction ", f1, " -> ", f2);
  return {check.ok, "mean IoU " + fixed(iou0) + " -> " + fixed(iou1) + " over " + std::to_string(tracked) +
                        " boxes, changed fraction " + fixed(f1) + " -> " + fixed(f2) +
                        (check.ok ? "" : "; " + check.describe())};
}

// ---- 7: evaluator ----

// Greedy PASCAL matching written out directly for the replay.
std::vector<int> replay_flags(const std::vector<Box>& dets, const std::vector<GroundTruthObject>& gts) {
  std::vector<int> flags;  // 1 TP, 0 FP, -1 ignored
  std::vector<bool> used(gts.size(), false);
  for (const Box& d : dets) {
    int best = -1;
    double best_iou = -1;
    bool hits_difficult = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = t::iou_oracle(d, gts[g].box);
      if (o < 0.5) continue;
      if (gts[g].difficult) {
        hits_difficult = true;
        continue;
      }
      if (!used[g] && o > best_iou) best = static_cast<int>(g), best_iou = o;
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      flags.push_back(1);
    } else {
      flags.push_back(hits_difficult ? -1 : 0);
    }
  }
  return flags;
}

Outcome evaluator_correctness() {
  Check check;
  const double ap3 = average_precision(
      build_curve(std::vector<MatchFlag>{MatchFlag::TruePositive, MatchFlag::FalsePositive, MatchFlag::TruePositive},
                  2));
  check.expect(std::abs(ap3 - 0.8333) <= 1e-6 + 1e-4 && std::abs(ap3 - 5.0 / 6.0) <= 1e-12, "AP ", ap3);

  SynthConfig sc;
  sc.n_images = 40;
  sc.box_jitter = 0;
  Dataset ds = world(sc, "eval");
  const auto all = images_in_split(ds, "all");

  // Perfect detector: every GT box reported once.
  std::vector<Detection> perfect;
  for (const auto& im : ds.images)
    for (const auto& g : im.ground_truth) {
      Detection d;
      d.image_id = im.id;
      d.class_id = g.class_id;
      d.box = g.box;
      d.score = 1;
      d.chosen_segments.assign(static_cast<std::size_t>(ds.num_classes()), std::nullopt);
      perfect.push_back(d);
    }
  const EvalReport pr = evaluate(ds, all, perfect, EvalConfig{});
  for (const auto& c : pr.classes) check.expect(c.ap == 1.0, "perfect AP class ", c.class_id);

  // mABO with candidates containing every GT box.
  for (const auto& v : average_best_overlap(ds, all)) check.expect(v == 1.0, "mABO ", v.value_or(-1));

  // Replay: random detections, some difficult GT, through the dump format.
  Rng rng(707);
  for (auto& im : ds.images)
    for (auto& g : im.ground_truth) g.difficult = rng.uniform() < 0.15;
  std::vector<Detection> dets;
  for (const auto& im : ds.images)
    for (std::size_t b = 0; b < im.num_boxes(); ++b)
      for (int c = 1; c <= ds.num_classes(); ++c) {
        if (rng.uniform() < 0.5) continue;
        Detection d;
        d.image_id = im.id;
        d.class_id = c;
        d.box = im.boxes[b];
        d.score = rng.normal();
        d.chosen_segments.assign(static_cast<std::size_t>(ds.num_classes()), std::nullopt);
        dets.push_back(d);
      }
  const auto dir = t::temp_dir("accept_eval_dump");
  {
    auto out = open_output(dir / "dets.csv");
    write_detections(out, dets);
  }
  auto in = open_input(dir / "dets.csv");
  const auto loaded = read_detections(in, "dets.csv");
  const EvalReport rep = evaluate(ds, all, loaded, EvalConfig{});

  for (int c = 1; c <= ds.num_classes(); ++c) {
    std::vector<const Detection*> mine;
    for (const auto& d : loaded)
      if (d.class_id == c) mine.push_back(&d);
    std::stable_sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->score > b->score; });
    std::map<std::string, std::vector<Box>> per_image;
    std::map<std::string, std::vector<std::size_t>> positions;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      per_image[mine[i]->image_id].push_back(mine[i]->box);
      positions[mine[i]->image_id].push_back(i);
    }
    std::vector<int> ranked(mine.size(), 0);
    std::size_t n_gt = 0;
    for (const auto& im : ds.images) {
      std::vector<GroundTruthObject> gts;
      for (const auto& g : im.ground_truth)
        if (g.class_id == c) {
          gts.push_back(g);
          n_gt += !g.difficult;
        }
      const auto flags = replay_flags(per_image[im.id], gts);
      for (std::size_t j = 0; j < flags.size(); ++j) ranked[positions[im.id][j]] = flags[j];
    }
    std::vector<int> kept;
    for (int f : ranked)
      if (f >= 0) kept.push_back(f);
    const double want = t::ap_oracle(kept, n_gt);
    const auto& got = rep.classes[static_cast<std::size_t>(c - 1)].ap;
    check.expect(got.has_value() && std::abs(*got - want) <= 1e-12, "replayed AP class ", c, ": ", want, " vs ",
                 got.value_or(-1));
  }
  return {check.ok, "AP[TP,FP,TP] = " + fixed(ap3, 6) + ", replayed " + std::to_string(loaded.size()) +
                        " detections" + (check.ok ? "" : "; " + check.describe())};
}

// ---- 8: determinism across thread counts ----

Outcome determinism() {
  const std::string cli = SEGDET_CLI_PATH;
  const auto dir = t::temp_dir("accept_determinism");
  const std::string d = dir.string();
  std::ofstream(dir / "synth.json") << R"({"n_images": 60, "classes": 2, "width": 64, "height": 64})";
  std::ofstream(dir / "cfg.json") << R"({"train": {"epochs": 5}})";
  Check check;
  auto run = [&](const std::string& args) {
    const auto r = t::run_command(cli + " " + args);
    check.expect(r.exit_code == 0, args, " -> ", r.exit_code, ": ", r.output);
  };
  run("synth --config " + d + "/synth.json --out " + d + "/world");
  const std::vector<std::string> files{"run/model.json", "run/train_log.csv", "dets.csv", "reg.json",
                                       "iter.csv", "stats.csv", "report.txt"};
  std::map<std::string, std::string> first;
  for (int threads : {1, 4}) {
    const std::string o = d + "/t" + std::to_string(threads);
    const std::string common =
        " --manifest " + d + "/world/manifest --config " + d + "/cfg.json --threads " + std::to_string(threads);
    run("train" + common + " --out " + o + "/run");
    run("detect" + common + " --model " + o + "/run/model.json --out " + o + "/dets.csv");
    run("regress fit" + common + " --out " + o + "/reg.json");
    run("regress iterate" + common + " --split test --regressor " + o + "/reg.json --model " + o +
        "/run/model.json --stats " + o + "/stats.csv --out " + o + "/iter.csv");
    run("eval" + common + " --detections " + o + "/dets.csv --out " + o + "/report.txt");
    for (const auto& f : files) {
      const std::string bytes = t::read_file(o + "/" + f);
      check.expect(!bytes.empty(), f, " is empty");
      if (threads == 1) first[f] = bytes;
      else check.expect(bytes == first[f], f, " differs between 1 and 4 threads");
    }
  }
  return {check.ok, std::to_string(files.size()) + " artifacts compared" + (check.ok ? "" : "; " + check.describe())};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double limit_s;  // 0: no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"integral-image features equal the per-pixel oracle", integral_equivalence, 30},
      {"partition identities", partition_identities, 0},
      {"greedy inference equals joint enumeration", inference_exactness, 10},
      {"latent SVM on the noise-free world", latent_svm_sanity, 120},
      {"segmentation features raise held-out mAP", segmentation_gain, 300},
      {"iterative box regression", iterative_regression, 0},
      {"evaluator correctness", evaluator_correctness, 0},
      {"determinism across thread counts", determinism, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (criteria[i].limit_s > 0 && secs > criteria[i].limit_s) {
      o.pass = false;
      o.detail += "; over the " + fixed(criteria[i].limit_s, 0) + " s budget";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].name << " (" << fixed(secs, 1)
              << " s): " << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
