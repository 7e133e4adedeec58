#pragma once

#include <cstdint>

namespace segdet {

struct ImageSize {
  int width = 0;
  int height = 0;

  std::int64_t area() const { return static_cast<std::int64_t>(width) * height; }
  bool operator==(const ImageSize&) const = default;
};

/// Integer pixel rectangle, 0-based with inclusive corners.
struct PixelBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = -1;
  int y2 = -1;

  int width() const { return x2 >= x1 ? x2 - x1 + 1 : 0; }
  int height() const { return y2 >= y1 ? y2 - y1 + 1 : 0; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool empty() const { return x2 < x1 || y2 < y1; }

  /// Intersection; may be empty.
  PixelBox intersect(const PixelBox& o) const;
  /// Intersection with the image rectangle [0,W-1]x[0,H-1].
  PixelBox clip(ImageSize image) const;

  bool operator==(const PixelBox&) const = default;
};

/**
 * Real-valued box in pixel coordinates (0-based, inclusive corners). Boxes
 * stay real during regression and are rounded half away from zero whenever
 * they touch the pixel grid.
 */
struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double width() const { return x2 - x1 + 1.0; }
  double height() const { return y2 - y1 + 1.0; }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  PixelBox rounded() const;
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  bool operator==(const Box&) const = default;
};

inline Box to_box(const PixelBox& p) { return {double(p.x1), double(p.y1), double(p.x2), double(p.y2)}; }

double iou(const PixelBox& a, const PixelBox& b);
/// IoU on the rounded pixel grids of both boxes.
double iou(const Box& a, const Box& b);

/// Moves each side outward by rho * width (horizontal) or rho * height (vertical), then clips.
Box expand_box(const Box& b, double rho, ImageSize image);

/// Clamps every coordinate into the image rectangle.
Box clip_box(const Box& b, ImageSize image);

}  // namespace segdet
