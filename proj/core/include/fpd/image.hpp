#pragma once

#include <array>
#include <vector>

#include "fpd/common.hpp"
#include "fpd/geometry.hpp"
#include "fpd/tensor.hpp"

namespace fpd {

struct Rgb {
  float r = 0.0f, g = 0.0f, b = 0.0f;
};

// Planar float RGB image, values in [0,1], pixel centers at integer
// coordinates.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // 3 * height * width

  static Image filled(int h, int w, Rgb color = {});

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool empty() const { return data.empty(); }
};

// Warps src through the forward map (src coords -> dst coords) into an
// out_h x out_w canvas using bilinear sampling; out-of-bounds reads are 0.
Image warp_affine(const Image& src, const Affine& forward, int out_h, int out_w);

// Soft-edged disc (1px feather).
void draw_disc(Image& img, const Vec2& center, double radius, Rgb color);

// Thick segment, drawn as a capsule around the center line.
void draw_line(Image& img, const Vec2& a, const Vec2& b, double thickness,
               Rgb color);

// Copies the images of a batch into an (N,3,H,W) tensor.
Tensor images_to_tensor(const std::vector<const Image*>& images);

}  // namespace fpd
