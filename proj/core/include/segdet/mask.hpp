#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segdet/geometry.hpp"

namespace segdet {

/// One run of set pixels in row-major order.
struct Run {
  std::int64_t start = 0;
  std::int64_t length = 0;
  bool operator==(const Run&) const = default;
};

/**
 * Run-length encoded binary mask of one segment proposal. Runs are sorted,
 * non-overlapping, non-empty and lie inside [0, height*width). Adjacent runs
 * are allowed on input and merged by the canonical encoder.
 */
class SegmentMask {
 public:
  SegmentMask() = default;

  /// Validates runs; throws Error(BadRle) on overlap, unsorted or out-of-range runs.
  static SegmentMask from_runs(std::string image_id, std::int64_t segment_id, int height, int width,
                               std::vector<Run> runs);
  /// Canonical encoding of a row-major bit array of size height*width.
  static SegmentMask from_bits(std::string image_id, std::int64_t segment_id, int height, int width,
                               std::span<const std::uint8_t> bits);

  std::vector<std::uint8_t> to_bits() const;

  const std::string& image_id() const { return image_id_; }
  std::int64_t segment_id() const { return segment_id_; }
  int height() const { return height_; }
  int width() const { return width_; }
  ImageSize size() const { return {width_, height_}; }
  const std::vector<Run>& runs() const { return runs_; }
  std::int64_t pixel_count() const { return pixel_count_; }

  bool operator==(const SegmentMask&) const = default;

 private:
  std::string image_id_;
  std::int64_t segment_id_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<Run> runs_;
  std::int64_t pixel_count_ = 0;
};

/// Smallest pixel box containing every mask pixel. Throws Error(EmptySegment).
PixelBox tight_box(const SegmentMask& mask);

/**
 * Summed-area table of a binary mask: entry (i, j) counts mask pixels in rows
 * < i and columns < j.
 */
class IntegralMask {
 public:
  IntegralMask() = default;
  explicit IntegralMask(const SegmentMask& mask);

  int height() const { return height_; }
  int width() const { return width_; }
  std::int64_t at(int row, int col) const { return table_[index(row, col)]; }
  std::int64_t total() const { return at(height_, width_); }

  /// Mask pixels inside `box`; parts of the box outside the image count as empty.
  std::int64_t rect_count(const PixelBox& box) const;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_ + 1) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::int64_t> table_;
};

}  // namespace segdet
