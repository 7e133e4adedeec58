#include "segdet/mask.hpp"

#include <algorithm>

#include "segdet/error.hpp"

namespace segdet {

SegmentMask SegmentMask::from_runs(std::string image_id, std::int64_t segment_id, int height,
                                   int width, std::vector<Run> runs) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::BadRle, "mask dimensions must be positive");
  }
  const std::int64_t n = static_cast<std::int64_t>(height) * width;
  std::int64_t end_prev = 0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Run& r = runs[i];
    if (r.length <= 0) {
      throw Error(ErrorCode::BadRle, "run " + std::to_string(i) + " has non-positive length");
    }
    if (r.start < end_prev) {
      throw Error(ErrorCode::BadRle, "run " + std::to_string(i) + " overlaps or is unsorted");
    }
    if (r.start + r.length > n) {
      throw Error(ErrorCode::BadRle, "run " + std::to_string(i) + " exceeds mask bounds");
    }
    end_prev = r.start + r.length;
    count += r.length;
  }
  SegmentMask m;
  m.image_id_ = std::move(image_id);
  m.segment_id_ = segment_id;
  m.height_ = height;
  m.width_ = width;
  m.runs_ = std::move(runs);
  m.pixel_count_ = count;
  return m;
}

SegmentMask SegmentMask::from_bits(std::string image_id, std::int64_t segment_id, int height,
                                   int width, std::span<const std::uint8_t> bits) {
  const std::int64_t n = static_cast<std::int64_t>(height) * width;
  if (static_cast<std::int64_t>(bits.size()) != n) {
    throw Error(ErrorCode::BadRle, "bit array size does not match height*width");
  }
  std::vector<Run> runs;
  std::int64_t i = 0;
  while (i < n) {
    if (!bits[i]) {
      ++i;
      continue;
    }
    const std::int64_t start = i;
    while (i < n && bits[i]) ++i;
    runs.push_back({start, i - start});
  }
  return from_runs(std::move(image_id), segment_id, height, width, std::move(runs));
}

std::vector<std::uint8_t> SegmentMask::to_bits() const {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(height_) * width_, 0);
  for (const Run& r : runs_) {
    std::fill_n(bits.begin() + r.start, r.length, std::uint8_t{1});
  }
  return bits;
}

PixelBox tight_box(const SegmentMask& mask) {
  if (mask.pixel_count() == 0) {
    throw Error(ErrorCode::EmptySegment,
                "segment " + std::to_string(mask.segment_id()) + " has no pixels");
  }
  const int w = mask.width();
  PixelBox b{w, mask.height(), -1, -1};
  for (const Run& r : mask.runs()) {
    const std::int64_t last = r.start + r.length - 1;
    const int row0 = static_cast<int>(r.start / w);
    const int row1 = static_cast<int>(last / w);
    const int col0 = static_cast<int>(r.start % w);
    const int col1 = static_cast<int>(last % w);
    b.y1 = std::min(b.y1, row0);
    b.y2 = std::max(b.y2, row1);
    if (row0 == row1) {
      b.x1 = std::min(b.x1, col0);
      b.x2 = std::max(b.x2, col1);
    } else {
      // A run wrapping a row boundary touches both the last and first column.
      b.x1 = 0;
      b.x2 = w - 1;
    }
  }
  return b;
}

IntegralMask::IntegralMask(const SegmentMask& mask)
    : height_(mask.height()),
      width_(mask.width()),
      table_(static_cast<std::size_t>(height_ + 1) * (width_ + 1), 0) {
  std::vector<std::int64_t> row_bits(width_);
  auto run_it = mask.runs().begin();
  const auto run_end = mask.runs().end();
  for (int r = 0; r < height_; ++r) {
    std::fill(row_bits.begin(), row_bits.end(), 0);
    const std::int64_t row_start = static_cast<std::int64_t>(r) * width_;
    const std::int64_t row_end = row_start + width_;
    while (run_it != run_end && run_it->start < row_end) {
      const std::int64_t s = std::max(run_it->start, row_start);
      const std::int64_t e = std::min(run_it->start + run_it->length, row_end);
      for (std::int64_t i = s; i < e; ++i) row_bits[i - row_start] = 1;
      if (run_it->start + run_it->length > row_end) break;  // continues on next row
      ++run_it;
    }
    std::int64_t running = 0;
    for (int c = 0; c < width_; ++c) {
      running += row_bits[c];
      table_[index(r + 1, c + 1)] = table_[index(r, c + 1)] + running;
    }
  }
}

std::int64_t IntegralMask::rect_count(const PixelBox& box) const {
  const PixelBox b = box.clip({width_, height_});
  if (b.empty()) return 0;
  return at(b.y2 + 1, b.x2 + 1) - at(b.y1, b.x2 + 1) - at(b.y2 + 1, b.x1) + at(b.y1, b.x1);
}

}  // namespace segdet
