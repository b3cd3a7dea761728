#include "fpd/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace fpd {

ConfidenceMapStack encode_joints(const JointSet& joints, const ImageSpec& spec,
                                 const GaussianConfig& cfg) {
  spec.validate();
  cfg.validate();

  const int hm_h = spec.heatmap_height;
  const int hm_w = spec.heatmap_width;
  auto out = ConfidenceMapStack::zeros(joints.size(), hm_h, hm_w,
                                       MapSource::kGroundTruth);

  const double peak = cfg.normalized_peak
                          ? 1.0 / (2.0 * M_PI * cfg.sigma * cfg.sigma)
                          : 1.0;
  const double radius = cfg.truncate_sigmas * cfg.sigma;
  const double radius_sq = radius * radius;
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma * cfg.sigma);

  for (int k = 0; k < joints.size(); ++k) {
    const Joint& j = joints[k];
    if (!j.labelled()) continue;
    if (j.x < 0.0 || j.x >= spec.width || j.y < 0.0 || j.y >= spec.height) {
      throw DataError("encode_joints: joint " + std::to_string(k) +
                      " outside image bounds");
    }
    const double cx = j.x / spec.stride;
    const double cy = j.y / spec.stride;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(hm_w - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(hm_h - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d2 > radius_sq) continue;
        out.at(k, y, x) = peak * std::exp(-d2 * inv_two_sigma_sq);
      }
    }
  }
  return out;
}

JointSet decode_heatmaps(const ConfidenceMapStack& maps, const ImageSpec& spec,
                         const DecodeOptions& opts) {
  spec.validate();
  if (maps.height != spec.heatmap_height || maps.width != spec.heatmap_width) {
    throw ContractError("decode_heatmaps: stack resolution does not match spec");
  }

  JointSet out(maps.num_joints);
  for (int k = 0; k < maps.num_joints; ++k) {
    const auto m = maps.map(k);
    int best = 0;
    double best_v = m[0];
    bool all_zero = true;
    for (size_t i = 0; i < m.size(); ++i) {
      const double v = m[i];
      if (!std::isfinite(v)) {
        throw DataError("decode_heatmaps: non-finite value in map " +
                        std::to_string(k));
      }
      if (v != 0.0) all_zero = false;
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(i);
      }
    }
    if (all_zero || best_v <= 0.0) {
      out.set_unlabelled(k);
      continue;
    }

    const int px = best % maps.width;
    const int py = best / maps.width;
    double x = px;
    double y = py;
    if (opts.quarter_pixel_refine) {
      if (px > 0 && px < maps.width - 1) {
        const double diff = maps.at(k, py, px + 1) - maps.at(k, py, px - 1);
        if (diff > 0.0) x += 0.25;
        else if (diff < 0.0) x -= 0.25;
      }
      if (py > 0 && py < maps.height - 1) {
        const double diff = maps.at(k, py + 1, px) - maps.at(k, py - 1, px);
        if (diff > 0.0) y += 0.25;
        else if (diff < 0.0) y -= 0.25;
      }
    }
    out.set(k, x * spec.stride, y * spec.stride, Visibility::kVisible);
  }
  return out;
}

ConfidenceMapStack l1_normalize(const ConfidenceMapStack& maps) {
  ConfidenceMapStack out = maps;
  for (int k = 0; k < maps.num_joints; ++k) {
    auto m = out.map(k);
    double sum = 0.0;
    for (double v : m) sum += v;
    if (!(sum > 0.0)) {
      throw DataError("l1_normalize: map " + std::to_string(k) +
                      " has non-positive sum");
    }
    const double inv = 1.0 / sum;
    for (double& v : m) v *= inv;
  }
  return out;
}

}  // namespace fpd
