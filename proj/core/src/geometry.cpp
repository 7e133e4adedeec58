#include "segdet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace segdet {

PixelBox PixelBox::intersect(const PixelBox& o) const {
  return {std::max(x1, o.x1), std::max(y1, o.y1), std::min(x2, o.x2), std::min(y2, o.y2)};
}

PixelBox PixelBox::clip(ImageSize image) const {
  return intersect(PixelBox{0, 0, image.width - 1, image.height - 1});
}

PixelBox Box::rounded() const {
  // std::lround rounds half away from zero.
  return {static_cast<int>(std::lround(x1)), static_cast<int>(std::lround(y1)),
          static_cast<int>(std::lround(x2)), static_cast<int>(std::lround(y2))};
}

double iou(const PixelBox& a, const PixelBox& b) {
  if (a.empty() || b.empty()) return a == b ? 1.0 : 0.0;
  const std::int64_t inter = a.intersect(b).area();
  if (inter == 0) return 0.0;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const Box& a, const Box& b) { return iou(a.rounded(), b.rounded()); }

Box clip_box(const Box& b, ImageSize image) {
  const double max_x = image.width - 1;
  const double max_y = image.height - 1;
  return {std::clamp(b.x1, 0.0, max_x), std::clamp(b.y1, 0.0, max_y),
          std::clamp(b.x2, 0.0, max_x), std::clamp(b.y2, 0.0, max_y)};
}

Box expand_box(const Box& b, double rho, ImageSize image) {
  const double dx = rho * b.width();
  const double dy = rho * b.height();
  return clip_box({b.x1 - dx, b.y1 - dy, b.x2 + dx, b.y2 + dy}, image);
}

}  // namespace segdet
