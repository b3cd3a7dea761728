#include "fpd/image.hpp"

#include <algorithm>
#include <cmath>

namespace fpd {

Image Image::filled(int h, int w, Rgb color) {
  Image img;
  img.height = h;
  img.width = w;
  img.data.resize(static_cast<size_t>(3) * h * w);
  std::fill_n(img.data.begin(), static_cast<size_t>(h) * w, color.r);
  std::fill_n(img.data.begin() + static_cast<size_t>(h) * w,
              static_cast<size_t>(h) * w, color.g);
  std::fill_n(img.data.begin() + 2 * static_cast<size_t>(h) * w,
              static_cast<size_t>(h) * w, color.b);
  return img;
}

Image warp_affine(const Image& src, const Affine& forward, int out_h, int out_w) {
  const Affine inv = forward.inverse();
  Image out = Image::filled(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Vec2 p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      const int x0 = static_cast<int>(std::floor(p.x));
      const int y0 = static_cast<int>(std::floor(p.y));
      if (x0 < -1 || x0 >= src.width || y0 < -1 || y0 >= src.height) continue;
      const double fx = p.x - x0;
      const double fy = p.y - y0;
      for (int c = 0; c < 3; ++c) {
        auto sample = [&](int yy, int xx) -> double {
          if (xx < 0 || xx >= src.width || yy < 0 || yy >= src.height) return 0.0;
          return src.at(c, yy, xx);
        };
        const double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                         fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
        out.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

namespace {

void blend(Image& img, int y, int x, Rgb color, double alpha) {
  if (alpha <= 0.0) return;
  const float a = static_cast<float>(std::min(1.0, alpha));
  img.at(0, y, x) = (1 - a) * img.at(0, y, x) + a * color.r;
  img.at(1, y, x) = (1 - a) * img.at(1, y, x) + a * color.g;
  img.at(2, y, x) = (1 - a) * img.at(2, y, x) + a * color.b;
}

}  // namespace

void draw_disc(Image& img, const Vec2& center, double radius, Rgb color) {
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y + radius + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - center.x, y - center.y);
      blend(img, y, x, color, radius + 0.5 - d);  // 1px feather
    }
  }
}

void draw_line(Image& img, const Vec2& a, const Vec2& b, double thickness,
               Rgb color) {
  const double half = thickness / 2.0;
  const Vec2 d = b - a;
  const double len_sq = d.x * d.x + d.y * d.y;
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      double t = len_sq > 0.0 ? ((p.x - a.x) * d.x + (p.y - a.y) * d.y) / len_sq : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 proj = a + d * t;
      const double dist = (p - proj).norm();
      blend(img, y, x, color, half + 0.5 - dist);
    }
  }
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ContractError("images_to_tensor: empty batch");
  const int h = images[0]->height;
  const int w = images[0]->width;
  Tensor t = Tensor::zeros(static_cast<int>(images.size()), 3, h, w);
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) {
      throw ContractError("images_to_tensor: inconsistent image sizes");
    }
    std::copy(images[i]->data.begin(), images[i]->data.end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

}  // namespace fpd
