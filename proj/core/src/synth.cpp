#include "segdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "segdet/error.hpp"
#include "segdet/formats.hpp"
#include "segdet/rng.hpp"

namespace segdet {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PixelBox random_rect(Rng& rng, ImageSize size, int min_side_div, int max_side_div) {
  const int w = rng.range(std::max(2, size.width / min_side_div), std::max(2, size.width / max_side_div));
  const int h = rng.range(std::max(2, size.height / min_side_div), std::max(2, size.height / max_side_div));
  const int x1 = rng.range(0, size.width - w);
  const int y1 = rng.range(0, size.height - h);
  return {x1, y1, x1 + w - 1, y1 + h - 1};
}

// Shifts each side by up to `amount` of the box size, keeping at least one pixel.
PixelBox perturb(Rng& rng, const PixelBox& b, double amount, ImageSize size) {
  const double w = b.width();
  const double h = b.height();
  auto shift = [&](double side) { return static_cast<int>(std::lround(rng.uniform(-amount, amount) * side)); };
  PixelBox r{b.x1 + shift(w), b.y1 + shift(h), b.x2 + shift(w), b.y2 + shift(h)};
  r = r.clip(size);
  if (r.x2 < r.x1) std::swap(r.x1, r.x2);
  if (r.y2 < r.y1) std::swap(r.y1, r.y2);
  return r;
}

SegmentMask rect_mask(const std::string& image_id, std::int64_t id, ImageSize size, const PixelBox& r) {
  std::vector<Run> runs;
  for (int y = r.y1; y <= r.y2; ++y) {
    runs.push_back({static_cast<std::int64_t>(y) * size.width + r.x1, r.width()});
  }
  return SegmentMask::from_runs(image_id, id, size.height, size.width, std::move(runs));
}

double logit(double q) {
  q = std::clamp(q, 0.02, 0.98);
  return std::log(q / (1.0 - q));
}

}  // namespace

FeatureRows synthetic_features(const SynthConfig& config, const std::string& image_id, ImageSize size,
                               std::span<const GroundTruthObject> ground_truth, const Box& box) {
  const PixelBox r = box.rounded();
  Rng rng(derive_seed(config.seed, 0xfea7u, fnv1a(image_id), static_cast<std::int64_t>(r.x1),
                      static_cast<std::int64_t>(r.y1), static_cast<std::int64_t>(r.x2),
                      static_cast<std::int64_t>(r.y2)));
  FeatureRows f;
  f.appearance.assign(static_cast<std::size_t>(config.app_dim), 0.0f);
  f.context.assign(static_cast<std::size_t>(config.ctx_dim), 0.0f);
  f.regression.assign(static_cast<std::size_t>(config.reg_dim), 0.0f);

  const Box expanded = expand_box(box, config.context_rho, size);
  const PixelBox er = expanded.rounded();
  std::vector<double> app(f.appearance.size(), 0.0), ctx(f.context.size(), 0.0), reg(f.regression.size(), 0.0);
  const GroundTruthObject* nearest = nullptr;
  double nearest_iou = 0;
  for (const auto& g : ground_truth) {
    const std::size_t c = static_cast<std::size_t>(g.class_id - 1);
    const double v = iou(box, g.box);
    app[c] = std::max(app[c], v);
    const PixelBox gr = g.box.rounded();
    const double covered = static_cast<double>(er.intersect(gr).area()) / static_cast<double>(gr.area());
    ctx[c] = std::max(ctx[c], covered);
    if (v > nearest_iou) {
      nearest_iou = v;
      nearest = &g;
    }
  }
  if (nearest != nullptr) {
    const RegTargets t = compute_targets(box, nearest->box);
    reg[0] = config.reg_gain * t.tx;
    reg[1] = config.reg_gain * t.ty;
    reg[2] = config.reg_gain * t.tw;
    reg[3] = config.reg_gain * t.th;
  }
  // Fixed draw order keeps every dimension's noise independent of the others' sizes.
  for (std::size_t i = 0; i < app.size(); ++i) f.appearance[i] = static_cast<float>(app[i] + config.feature_noise * rng.normal());
  for (std::size_t i = 0; i < ctx.size(); ++i) f.context[i] = static_cast<float>(ctx[i] + config.context_noise * rng.normal());
  for (std::size_t i = 0; i < reg.size(); ++i) f.regression[i] = static_cast<float>(reg[i] + config.reg_noise * rng.normal());
  return f;
}

FeatureProvider synthetic_provider(const SynthConfig& config) {
  return [config](const ImageData& image, const Box& box) {
    return synthetic_features(config, image.id, image.size, image.ground_truth, box);
  };
}

SyntheticWorld make_world(const SynthConfig& config) {
  validate(config);
  SyntheticWorld world;
  world.config = config;
  for (int c = 1; c <= config.classes; ++c) world.class_names.push_back("class" + std::to_string(c));
  const ImageSize size{config.width, config.height};
  const int n_train = std::max(1, static_cast<int>(std::lround(config.train_fraction * config.n_images)));

  for (int i = 0; i < config.n_images; ++i) {
    Rng rng(derive_seed(config.seed, 0x1a9eu, static_cast<std::uint64_t>(i)));
    SyntheticImage im;
    char id[32];
    std::snprintf(id, sizeof(id), "img%05d", i);
    im.info.id = id;
    im.info.size = size;
    im.info.split = i < n_train ? "train" : "test";
    im.info.appearance = "features/" + im.info.id + ".app.sdmf";
    im.info.context = "features/" + im.info.id + ".ctx.sdmf";
    im.info.regression = "features/" + im.info.id + ".reg.sdmf";

    const int n_obj = rng.range(config.objects_min, config.objects_max);
    std::vector<PixelBox> objects;
    for (int k = 0; k < n_obj; ++k) {
      const int cls = rng.range(1, config.classes);
      const PixelBox r = random_rect(rng, size, 5, 2);
      objects.push_back(r);
      im.ground_truth.push_back({im.info.id, cls, to_box(r), false});
    }

    std::int64_t box_id = 0;
    for (const PixelBox& o : objects) {
      for (int j = 0; j < config.jitter_boxes; ++j) {
        im.boxes.push_back({im.info.id, box_id++, to_box(perturb(rng, o, config.box_jitter, size))});
      }
    }
    for (int j = 0; j < config.background_boxes; ++j) {
      im.boxes.push_back({im.info.id, box_id++, to_box(random_rect(rng, size, 8, 2))});
    }

    // The full-image segment makes M the image area, so no segment meets the
    // degenerate background normalizer with background pixels left to count.
    std::vector<PixelBox> seg_rects{PixelBox{0, 0, size.width - 1, size.height - 1}};
    for (const PixelBox& o : objects) seg_rects.push_back(perturb(rng, o, config.segment_noise, size));
    for (int j = 0; j < config.distractor_segments; ++j) seg_rects.push_back(random_rect(rng, size, 6, 2));
    for (std::size_t s = 0; s < seg_rects.size(); ++s) {
      const auto sid = static_cast<std::int64_t>(s);
      im.masks.push_back(rect_mask(im.info.id, sid, size, seg_rects[s]));
      for (int c = 1; c <= config.classes; ++c) {
        double best = 0;
        for (const auto& g : im.ground_truth) {
          if (g.class_id == c) best = std::max(best, iou(seg_rects[s], g.box.rounded()));
        }
        im.scores.push_back({im.info.id, sid, c, logit(best) + config.score_noise * rng.normal()});
      }
    }

    const std::size_t n = im.boxes.size();
    im.appearance = FeatureMatrix(n, static_cast<std::size_t>(config.app_dim));
    im.context = FeatureMatrix(n, static_cast<std::size_t>(config.ctx_dim));
    im.regression = FeatureMatrix(n, static_cast<std::size_t>(config.reg_dim));
    for (std::size_t b = 0; b < n; ++b) {
      const FeatureRows f = synthetic_features(config, im.info.id, size, im.ground_truth, im.boxes[b].box);
      std::copy(f.appearance.begin(), f.appearance.end(), im.appearance.row(b).begin());
      std::copy(f.context.begin(), f.context.end(), im.context.row(b).begin());
      std::copy(f.regression.begin(), f.regression.end(), im.regression.row(b).begin());
    }
    world.images.push_back(std::move(im));
  }
  return world;
}

DatasetManifest write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  DatasetManifest m;
  m.class_names = world.class_names;
  m.min_segment_pixels = 0;
  m.synthetic = world.config;
  m.base_dir = dir;

  std::vector<BoxRecord> boxes;
  std::vector<GroundTruthObject> gt;
  std::vector<SegmentMask> masks;
  std::vector<SegmentScore> scores;
  for (const auto& im : world.images) {
    m.images.push_back(im.info);
    boxes.insert(boxes.end(), im.boxes.begin(), im.boxes.end());
    gt.insert(gt.end(), im.ground_truth.begin(), im.ground_truth.end());
    masks.insert(masks.end(), im.masks.begin(), im.masks.end());
    scores.insert(scores.end(), im.scores.begin(), im.scores.end());
    write_feature_matrix(dir / im.info.appearance, im.appearance);
    write_feature_matrix(dir / im.info.context, im.context);
    write_feature_matrix(dir / im.info.regression, im.regression);
  }
  {
    auto out = open_output(dir / m.boxes);
    write_boxes(out, boxes);
  }
  {
    auto out = open_output(dir / m.ground_truth);
    write_ground_truth(out, gt);
  }
  {
    auto out = open_output(dir / m.masks);
    write_masks(out, masks);
  }
  {
    auto out = open_output(dir / m.segment_scores);
    write_segment_scores(out, scores);
  }
  write_manifest(dir / "manifest", m);
  return m;
}

}  // namespace segdet
