#pragma once

#include <cmath>

namespace fpd {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

// 2D affine map  p' = [a b; c d] p + [tx ty].
struct Affine {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  Vec2 apply(const Vec2& p) const {
    return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty};
  }

  // Composition: (this ∘ inner)(p) == this(inner(p)).
  Affine compose(const Affine& m) const {
    Affine r;
    r.a = a * m.a + b * m.c;
    r.b = a * m.b + b * m.d;
    r.c = c * m.a + d * m.c;
    r.d = c * m.b + d * m.d;
    r.tx = a * m.tx + b * m.ty + tx;
    r.ty = c * m.tx + d * m.ty + ty;
    return r;
  }

  Affine inverse() const {
    const double det = a * d - b * c;
    Affine r;
    r.a = d / det;
    r.b = -b / det;
    r.c = -c / det;
    r.d = a / det;
    r.tx = -(r.a * tx + r.b * ty);
    r.ty = -(r.c * tx + r.d * ty);
    return r;
  }

  // Linear-part scale factor along x (isotropic for our transform stack).
  double scale_x() const { return std::hypot(a, c); }

  static Affine identity() { return {}; }

  static Affine translation(double dx, double dy) {
    Affine r;
    r.tx = dx;
    r.ty = dy;
    return r;
  }

  static Affine scaling(double sx, double sy) {
    Affine r;
    r.a = sx;
    r.d = sy;
    return r;
  }

  static Affine rotation(double radians) {
    Affine r;
    r.a = std::cos(radians);
    r.b = -std::sin(radians);
    r.c = std::sin(radians);
    r.d = std::cos(radians);
    return r;
  }

  static Affine rotation_about(const Vec2& center, double radians) {
    return translation(center.x, center.y)
        .compose(rotation(radians))
        .compose(translation(-center.x, -center.y));
  }

  static Affine scaling_about(const Vec2& center, double s) {
    return translation(center.x, center.y)
        .compose(scaling(s, s))
        .compose(translation(-center.x, -center.y));
  }

  // Mirror across the vertical axis of a width-w pixel grid (pixel centers
  // at integer coordinates, so x' = (w-1) - x).
  static Affine hflip(int width) {
    Affine r;
    r.a = -1.0;
    r.tx = static_cast<double>(width - 1);
    return r;
  }
};

}  // namespace fpd
