#pragma once

#include <naptron/error.hpp>

#include <algorithm>
#include <cmath>

namespace naptron {

/// Axis-aligned box in pixel corner form.
struct BoxGeometry {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }

  bool valid() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2;
  }

  static BoxGeometry from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BoxGeometry&, const BoxGeometry&) = default;
};

inline void require_valid(const BoxGeometry& box) {
  if (!box.valid()) throw InputError("degenerate or non-finite bounding box");
}

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const BoxGeometry& a, const BoxGeometry& b) {
  require_valid(a);
  require_valid(b);
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace naptron
