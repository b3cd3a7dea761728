#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fpd/common.hpp"

namespace fpd {

// Dense float32 NCHW tensor. Parameters use degenerate trailing dims
// (e.g. a bias is (C,1,1,1)).
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<float> data;

  Tensor() = default;

  static Tensor zeros(int n, int c, int h, int w) {
    Tensor t;
    t.shape = {n, c, h, w};
    t.data.assign(static_cast<size_t>(n) * c * h * w, 0.0f);
    return t;
  }

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }

  size_t sample_stride() const { return static_cast<size_t>(c()) * h() * w(); }
  size_t channel_stride() const { return static_cast<size_t>(h()) * w(); }

  float* sample(int i) { return data.data() + i * sample_stride(); }
  const float* sample(int i) const { return data.data() + i * sample_stride(); }

  float& at(int ni, int ci, int hi, int wi) {
    return data[((static_cast<size_t>(ni) * c() + ci) * h() + hi) * w() + wi];
  }
  float at(int ni, int ci, int hi, int wi) const {
    return data[((static_cast<size_t>(ni) * c() + ci) * h() + hi) * w() + wi];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o)) throw ContractError("Tensor += shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }

  std::string shape_str() const {
    return "(" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) +
           "," + std::to_string(shape[2]) + "," + std::to_string(shape[3]) + ")";
  }
};

}  // namespace fpd
