#pragma once

// Independent reference implementations for the tests. Nothing here calls the
// library code it is used to check: masks are plain bit arrays and every
// feature is a per-pixel loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "segdet/dataset.hpp"
#include "segdet/rng.hpp"
#include "segdet/segfeat.hpp"
#include "segdet/synth.hpp"

namespace segdet::testing {

struct Bits {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> v;

  bool at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x] != 0; }
  std::int64_t count() const { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); }
};

inline Bits random_bits(Rng& rng, int height, int width, double density) {
  Bits b{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
  for (auto& x : b.v) x = rng.uniform() < density ? 1 : 0;
  return b;
}

/// Blobby mask: a union of a few random rectangles.
inline Bits random_blob(Rng& rng, int height, int width, int rects) {
  Bits b{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
  for (int r = 0; r < rects; ++r) {
    const int x1 = rng.range(0, width - 1), x2 = rng.range(x1, width - 1);
    const int y1 = rng.range(0, height - 1), y2 = rng.range(y1, height - 1);
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x) b.v[static_cast<std::size_t>(y) * width + x] = 1;
  }
  return b;
}

inline Bits rect_bits(int height, int width, int x1, int y1, int x2, int y2) {
  Bits b{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
  for (int y = y1; y <= y2; ++y)
    for (int x = x1; x <= x2; ++x) b.v[static_cast<std::size_t>(y) * width + x] = 1;
  return b;
}

inline SegmentMask to_mask(const Bits& b, std::int64_t id = 0, const std::string& image = "im") {
  return SegmentMask::from_bits(image, id, b.height, b.width, b.v);
}

inline long round_half_away(double v) { return v < 0 ? -static_cast<long>(std::floor(-v + 0.5)) : static_cast<long>(std::floor(v + 0.5)); }

struct IntBox {
  long x1, y1, x2, y2;
};

inline IntBox round_box(const Box& b) {
  return {round_half_away(b.x1), round_half_away(b.y1), round_half_away(b.x2), round_half_away(b.y2)};
}

inline double iou_oracle(const Box& a, const Box& b) {
  const IntBox p = round_box(a), q = round_box(b);
  auto area = [](long x1, long y1, long x2, long y2) -> double {
    return (x2 < x1 || y2 < y1) ? 0.0 : double(x2 - x1 + 1) * double(y2 - y1 + 1);
  };
  const double inter = area(std::max(p.x1, q.x1), std::max(p.y1, q.y1), std::min(p.x2, q.x2), std::min(p.y2, q.y2));
  const double uni = area(p.x1, p.y1, p.x2, p.y2) + area(q.x1, q.y1, q.x2, q.y2) - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

/// Index of the grid column (or row) holding offset `d` of a span `len` split into k parts; -1 outside.
inline int cell_of(long d, long len, int k) {
  if (d < 0 || d >= len) return -1;
  const long step = len / k;
  if (step == 0) return k - 1;  // every pixel falls in the last cell
  return static_cast<int>(std::min<long>(d / step, k - 1));
}

/// Pixel counts behind the four geometry features of one (box, mask) pair.
struct GeometryCounts {
  std::vector<std::int64_t> seg_in;   // K*K, row-major cells
  std::vector<std::int64_t> back_in;  // K*K
  std::int64_t seg_outside = 0;
  std::int64_t back_outside = 0;
  std::int64_t seg_total = 0;
};

inline GeometryCounts count_geometry(const Bits& s, const Box& p, int k) {
  const IntBox r = round_box(p);
  const long bw = r.x2 - r.x1 + 1, bh = r.y2 - r.y1 + 1;
  GeometryCounts g;
  g.seg_in.assign(static_cast<std::size_t>(k) * k, 0);
  g.back_in.assign(static_cast<std::size_t>(k) * k, 0);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const bool on = s.at(y, x);
      g.seg_total += on;
      const int cx = cell_of(x - r.x1, bw, k), cy = cell_of(y - r.y1, bh, k);
      if (cx >= 0 && cy >= 0) {
        auto& slot = on ? g.seg_in : g.back_in;
        ++slot[static_cast<std::size_t>(cy) * k + cx];
      } else {
        (on ? g.seg_outside : g.back_outside) += 1;
      }
    }
  }
  return g;
}

struct GeometryOracle {
  std::vector<double> grid_in;
  double seg_out = 0;
  std::vector<double> back_in;
  double back_out = 0;
};

inline GeometryOracle geometry_oracle(const Bits& s, const Box& p, int k, std::int64_t largest) {
  const GeometryCounts g = count_geometry(s, p, k);
  const double seg = static_cast<double>(g.seg_total);
  const double norm = static_cast<double>(std::max<std::int64_t>(largest - g.seg_total, 1));
  GeometryOracle o;
  for (auto c : g.seg_in) o.grid_in.push_back(static_cast<double>(c) / seg);
  o.seg_out = static_cast<double>(g.seg_outside) / seg;
  for (auto c : g.back_in) o.back_in.push_back(static_cast<double>(c) / norm);
  o.back_out = static_cast<double>(g.back_outside) / norm;
  return o;
}

inline Box tight_box_oracle(const Bits& s) {
  int x1 = s.width, y1 = s.height, x2 = -1, y2 = -1;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (s.at(y, x)) {
        x1 = std::min(x1, x), x2 = std::max(x2, x);
        y1 = std::min(y1, y), y2 = std::max(y2, y);
      }
  return {double(x1), double(y1), double(x2), double(y2)};
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Full block [grid_in, seg_out, back_in, back_out, overlap, seg_class] from the oracles.
inline std::vector<double> block_oracle(const Bits& s, const Box& p, int k, std::int64_t largest, double lambda,
                                        double score) {
  const GeometryOracle g = geometry_oracle(s, p, k, largest);
  std::vector<double> out = g.grid_in;
  out.push_back(g.seg_out);
  out.insert(out.end(), g.back_in.begin(), g.back_in.end());
  out.push_back(g.back_out);
  out.push_back(iou_oracle(p, tight_box_oracle(s)) - lambda);
  out.push_back(sigmoid(score));
  return out;
}

inline Box random_box(Rng& rng, int width, int height) {
  const int x1 = rng.range(0, width - 1), x2 = rng.range(x1, width - 1);
  const int y1 = rng.range(0, height - 1), y2 = rng.range(y1, height - 1);
  return {double(x1), double(y1), double(x2), double(y2)};
}

/// In-memory image with segments in id order, the way the loader prepares them.
inline ImageData make_image(ImageSize size, const std::vector<Bits>& masks,
                            const std::vector<std::vector<double>>& scores, const std::vector<Box>& boxes,
                            std::size_t app_dim = 0, std::size_t ctx_dim = 0, const std::string& id = "im") {
  ImageData im;
  im.id = id;
  im.size = size;
  im.split = "train";
  for (std::size_t i = 0; i < masks.size(); ++i) {
    im.segments.emplace_back(to_mask(masks[i], static_cast<std::int64_t>(i), id), scores[i]);
    im.largest_segment = std::max(im.largest_segment, masks[i].count());
  }
  im.boxes = boxes;
  for (std::size_t b = 0; b < boxes.size(); ++b) im.box_ids.push_back(static_cast<std::int64_t>(b));
  im.appearance = FeatureMatrix(boxes.size(), app_dim);
  im.context = FeatureMatrix(boxes.size(), ctx_dim);
  return im;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("segdet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Generates a world into a fresh temp dir and loads it back.
inline Dataset synthetic_dataset(const SynthConfig& cfg, const std::string& name, int threads = 1) {
  const auto dir = temp_dir(name);
  write_world(make_world(cfg), dir);
  LoadOptions opts;
  opts.threads = threads;
  return load_dataset(dir / "manifest", opts);
}

/// All-point AP over flags (1 TP, 0 FP) in rank order, by direct envelope integration.
inline double ap_oracle(const std::vector<int>& tp_flags, std::size_t n_gt) {
  std::vector<double> rec, prec;
  double tp = 0, fp = 0;
  for (int f : tp_flags) {
    (f ? tp : fp) += 1;
    rec.push_back(tp / static_cast<double>(n_gt));
    prec.push_back(tp / (tp + fp));
  }
  double ap = 0, prev_r = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (rec[i] <= prev_r) continue;
    double best = 0;
    for (std::size_t j = i; j < prec.size(); ++j) best = std::max(best, prec[j]);
    ap += (rec[i] - prev_r) * best;
    prev_r = rec[i];
  }
  return ap;
}

}  // namespace segdet::testing
