#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fpd/common.hpp"
#include "fpd/joints.hpp"

namespace fpd {

// Gaussian kernel used to rasterize joint labels into confidence maps.
// sigma is in heatmap pixels. With normalized_peak the kernel carries the
// 1/(2*pi*sigma^2) prefactor (unit mass before truncation); otherwise the
// peak value is 1. Values beyond truncate_sigmas * sigma (Euclidean) are 0.
struct GaussianConfig {
  double sigma = 1.0;
  bool normalized_peak = true;
  double truncate_sigmas = 3.0;

  void validate() const {
    if (sigma <= 0.0) throw ConfigError("GaussianConfig: sigma must be positive");
    if (truncate_sigmas <= 0.0) {
      throw ConfigError("GaussianConfig: truncation radius must be positive");
    }
  }
};

enum class MapSource : uint8_t { kGroundTruth = 0, kTeacher = 1, kStudent = 2 };

// K spatial confidence maps at heatmap resolution.
struct ConfidenceMapStack {
  int num_joints = 0;
  int height = 0;
  int width = 0;
  MapSource source = MapSource::kGroundTruth;
  std::vector<double> values;  // K * height * width, row-major per map

  static ConfidenceMapStack zeros(int k, int h, int w,
                                  MapSource src = MapSource::kGroundTruth) {
    ConfidenceMapStack s;
    s.num_joints = k;
    s.height = h;
    s.width = w;
    s.source = src;
    s.values.assign(static_cast<size_t>(k) * h * w, 0.0);
    return s;
  }

  size_t pixels_per_map() const { return static_cast<size_t>(height) * width; }

  double& at(int k, int y, int x) {
    return values[(static_cast<size_t>(k) * height + y) * width + x];
  }
  double at(int k, int y, int x) const {
    return values[(static_cast<size_t>(k) * height + y) * width + x];
  }

  std::span<double> map(int k) {
    return {values.data() + k * pixels_per_map(), pixels_per_map()};
  }
  std::span<const double> map(int k) const {
    return {values.data() + k * pixels_per_map(), pixels_per_map()};
  }

  bool same_shape(const ConfidenceMapStack& o) const {
    return num_joints == o.num_joints && height == o.height && width == o.width;
  }
};

// Rasterizes labelled joints into Gaussian confidence maps (image coordinates
// divided by spec.stride give the continuous heatmap-space center). Unlabelled
// joints produce all-zero maps. Labelled coordinates outside [0,W)x[0,H)
// raise DataError; invalid sigma raises ConfigError.
ConfidenceMapStack encode_joints(const JointSet& joints, const ImageSpec& spec,
                                 const GaussianConfig& cfg);

struct DecodeOptions {
  // Shift the argmax a quarter pixel toward the larger neighbour before
  // mapping back to image coordinates.
  bool quarter_pixel_refine = true;
};

// Argmax decode back to image coordinates. All-zero maps decode to the
// unlabelled sentinel. NaN/Inf values raise DataError.
JointSet decode_heatmaps(const ConfidenceMapStack& maps, const ImageSpec& spec,
                         const DecodeOptions& opts = {});

// Rescales every map to unit sum. A map with non-positive sum raises
// DataError (degenerate map).
ConfidenceMapStack l1_normalize(const ConfidenceMapStack& maps);

}  // namespace fpd
