#include "segdet/segfeat.hpp"

#include <algorithm>
#include <cmath>

#include "segdet/error.hpp"

namespace segdet {

PreparedSegment::PreparedSegment(SegmentMask m, std::vector<double> scores)
    : mask(std::move(m)), integral(mask),
      tight(mask.pixel_count() > 0 ? tight_box(mask) : PixelBox{}), class_scores(std::move(scores)) {}

namespace {

void require_pixels(const SegmentMask& m) {
  if (m.pixel_count() == 0) {
    throw Error(ErrorCode::EmptySegment, "segment " + std::to_string(m.segment_id()) + " is empty");
  }
}

double background_denominator(std::int64_t largest, std::int64_t pixels) {
  if (largest < pixels) {
    throw Error(ErrorCode::DegenerateNormalizer,
                "largest segment area " + std::to_string(largest) + " below segment area " +
                    std::to_string(pixels));
  }
  return static_cast<double>(std::max<std::int64_t>(largest - pixels, 1));
}

// Splits [lo, hi] into k spans; the last one absorbs the remainder.
void split_axis(int lo, int hi, int k, std::vector<std::pair<int, int>>& spans) {
  spans.clear();
  const int len = hi >= lo ? hi - lo + 1 : 0;
  const int base = len / k;
  for (int i = 0; i < k; ++i) {
    const int a = lo + i * base;
    const int b = (i == k - 1) ? hi : a + base - 1;
    spans.emplace_back(a, b);
  }
}

}  // namespace

std::vector<PixelBox> grid_cells(const PixelBox& box, GridSpec grid) {
  std::vector<std::pair<int, int>> cols, rows;
  split_axis(box.x1, box.x2, grid.k, cols);
  split_axis(box.y1, box.y2, grid.k, rows);
  std::vector<PixelBox> cells;
  cells.reserve(static_cast<std::size_t>(grid.k) * grid.k);
  for (const auto& [y1, y2] : rows) {
    for (const auto& [x1, x2] : cols) cells.push_back({x1, y1, x2, y2});
  }
  return cells;
}

std::vector<double> seggrid_in(const Box& p, const PreparedSegment& s, GridSpec grid) {
  require_pixels(s.mask);
  const double seg = static_cast<double>(s.pixels());
  std::vector<double> out;
  for (const PixelBox& cell : grid_cells(p.rounded(), grid)) {
    out.push_back(static_cast<double>(s.integral.rect_count(cell)) / seg);
  }
  return out;
}

double seg_out(const Box& p, const PreparedSegment& s) {
  require_pixels(s.mask);
  const std::int64_t inside = s.integral.rect_count(p.rounded());
  return static_cast<double>(s.pixels() - inside) / static_cast<double>(s.pixels());
}

std::vector<double> backgrid_in(const Box& p, const PreparedSegment& s, GridSpec grid,
                                std::int64_t largest) {
  const double denom = background_denominator(largest, s.pixels());
  const ImageSize image = s.image();
  std::vector<double> out;
  for (const PixelBox& cell : grid_cells(p.rounded(), grid)) {
    const std::int64_t area = cell.clip(image).area();
    out.push_back(static_cast<double>(area - s.integral.rect_count(cell)) / denom);
  }
  return out;
}

double back_out(const Box& p, const PreparedSegment& s, std::int64_t largest) {
  const double denom = background_denominator(largest, s.pixels());
  const ImageSize image = s.image();
  const PixelBox b = p.rounded();
  const std::int64_t box_bg = b.clip(image).area() - s.integral.rect_count(b);
  const std::int64_t all_bg = image.area() - s.pixels();
  return static_cast<double>(all_bg - box_bg) / denom;
}

double overlap_feat(const Box& p, const PreparedSegment& s, double lambda) {
  require_pixels(s.mask);
  return iou(p.rounded(), s.tight) - lambda;
}

double segclass_feat(double score) {
  // Both branches avoid overflow in exp for large |score|.
  if (score >= 0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

void segment_geometry(const Box& p, const PreparedSegment& s, GridSpec grid, double lambda,
                      std::int64_t largest, std::span<double> out) {
  require_pixels(s.mask);
  const std::size_t cells = static_cast<std::size_t>(grid.k) * grid.k;
  const double seg_total = static_cast<double>(s.pixels());
  const double bg_denom = background_denominator(largest, s.pixels());
  const ImageSize image = s.image();
  const PixelBox b = p.rounded();

  std::vector<std::pair<int, int>> cols, rows;
  split_axis(b.x1, b.x2, grid.k, cols);
  split_axis(b.y1, b.y2, grid.k, rows);
  std::int64_t seg_in_box = 0;
  std::int64_t bg_in_box = 0;
  std::size_t idx = 0;
  for (const auto& [y1, y2] : rows) {
    for (const auto& [x1, x2] : cols) {
      const PixelBox cell{x1, y1, x2, y2};
      const std::int64_t seg = s.integral.rect_count(cell);
      const std::int64_t bg = cell.clip(image).area() - seg;
      out[idx] = static_cast<double>(seg) / seg_total;
      out[cells + 1 + idx] = static_cast<double>(bg) / bg_denom;
      seg_in_box += seg;
      bg_in_box += bg;
      ++idx;
    }
  }
  out[cells] = static_cast<double>(s.pixels() - seg_in_box) / seg_total;
  out[2 * cells + 1] = static_cast<double>(image.area() - s.pixels() - bg_in_box) / bg_denom;
  out[2 * cells + 2] = iou(b, s.tight) - lambda;
}

std::vector<double> assemble_block(const Box& p, const PreparedSegment* s, int class_id,
                                   GridSpec grid, double lambda, std::int64_t largest) {
  std::vector<double> block(block_length(grid.k), 0.0);
  if (s == nullptr) return block;
  segment_geometry(p, *s, grid, lambda, largest, block);
  const std::size_t c = static_cast<std::size_t>(class_id - 1);
  if (class_id < 1 || c >= s->class_scores.size()) {
    throw Error(ErrorCode::MissingFeatures, "segment " + std::to_string(s->id()) +
                                                " has no score for class " + std::to_string(class_id));
  }
  block.back() = segclass_feat(s->class_scores[c]);
  return block;
}

std::int64_t largest_segment_area(std::span<const PreparedSegment> segments) {
  if (segments.empty()) throw Error(ErrorCode::NoSegments, "image has no segments");
  std::int64_t m = 0;
  for (const auto& s : segments) m = std::max(m, s.pixels());
  return m;
}

namespace naive {

namespace {
// Counts (segment, in-image) pixels of a rectangle by direct scan.
std::pair<std::int64_t, std::int64_t> scan(const std::vector<std::uint8_t>& bits, ImageSize image,
                                           const PixelBox& r) {
  std::int64_t seg = 0, bg = 0;
  for (int y = std::max(r.y1, 0); y <= std::min(r.y2, image.height - 1); ++y) {
    for (int x = std::max(r.x1, 0); x <= std::min(r.x2, image.width - 1); ++x) {
      if (bits[static_cast<std::size_t>(y) * image.width + x]) {
        ++seg;
      } else {
        ++bg;
      }
    }
  }
  return {seg, bg};
}
}  // namespace

std::vector<double> seggrid_in(const Box& p, const SegmentMask& s, GridSpec grid) {
  require_pixels(s);
  const auto bits = s.to_bits();
  std::vector<double> out;
  for (const auto& cell : grid_cells(p.rounded(), grid)) {
    out.push_back(static_cast<double>(scan(bits, s.size(), cell).first) / s.pixel_count());
  }
  return out;
}

std::vector<double> backgrid_in(const Box& p, const SegmentMask& s, GridSpec grid,
                                std::int64_t largest) {
  const double denom = background_denominator(largest, s.pixel_count());
  const auto bits = s.to_bits();
  std::vector<double> out;
  for (const auto& cell : grid_cells(p.rounded(), grid)) {
    out.push_back(static_cast<double>(scan(bits, s.size(), cell).second) / denom);
  }
  return out;
}

double seg_out(const Box& p, const SegmentMask& s) {
  require_pixels(s);
  const auto bits = s.to_bits();
  const auto [seg, bg] = scan(bits, s.size(), p.rounded());
  return static_cast<double>(s.pixel_count() - seg) / s.pixel_count();
}

double back_out(const Box& p, const SegmentMask& s, std::int64_t largest) {
  const double denom = background_denominator(largest, s.pixel_count());
  const auto bits = s.to_bits();
  const PixelBox b = p.rounded();
  std::int64_t count = 0;
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      const bool inside = x >= b.x1 && x <= b.x2 && y >= b.y1 && y <= b.y2;
      if (!inside && !bits[static_cast<std::size_t>(y) * s.width() + x]) ++count;
    }
  }
  return static_cast<double>(count) / denom;
}

}  // namespace naive

}  // namespace segdet
