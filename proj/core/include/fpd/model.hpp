#pragma once

#include <cstdint>
#include <memory>

#include "fpd/common.hpp"
#include "fpd/joints.hpp"

namespace fpd {

namespace nn {
class StackedHourglass;
}
using nn::StackedHourglass;

// Architecture descriptor for a stacked-Hourglass pose network.
//
// blocks_per_stage counts the residual blocks on the down/up path of one
// hourglass (2 * depth on the sides plus the blocks at the lowest
// resolution); the per-level skip-branch block and the one post-hourglass
// block are structural and not part of the knob. The default 9 with depth 4
// reproduces the classic single-module-per-level design.
struct HourglassConfig {
  int num_stages = 4;
  int channels = 128;
  int blocks_per_stage = 9;
  int num_joints = 16;
  int input_size = 256;
  int depth_per_hourglass = 4;

  void validate() const {
    if (num_stages < 1) throw ConfigError("HourglassConfig: num_stages must be >= 1");
    if (channels < 8 || channels % 4 != 0) {
      throw ConfigError("HourglassConfig: channels must be >= 8 and divisible by 4");
    }
    if (num_joints < 1) throw ConfigError("HourglassConfig: num_joints must be >= 1");
    if (depth_per_hourglass < 1) {
      throw ConfigError("HourglassConfig: depth_per_hourglass must be >= 1");
    }
    if (blocks_per_stage < 2 * depth_per_hourglass + 1) {
      throw ConfigError(
          "HourglassConfig: blocks_per_stage must be >= 2*depth + 1");
    }
    // Stem downsamples 4x, each hourglass level halves once more.
    const int divisor = 4 << depth_per_hourglass;
    if (input_size < divisor || input_size % divisor != 0) {
      throw ConfigError("HourglassConfig: input_size must be a multiple of " +
                        std::to_string(divisor));
    }
  }

  int heatmap_size() const { return input_size / 4; }

  ImageSpec image_spec() const { return ImageSpec::standard(input_size, 4); }

  static HourglassConfig teacher(int joints = 16) {
    HourglassConfig c;
    c.num_stages = 8;
    c.channels = 256;
    c.num_joints = joints;
    return c;
  }

  static HourglassConfig student(int joints = 16) {
    HourglassConfig c;
    c.num_stages = 4;
    c.channels = 128;
    c.num_joints = joints;
    return c;
  }

  bool operator==(const HourglassConfig&) const = default;
};

// Cost summary for one architecture.
struct ModelSpec {
  HourglassConfig config;
  int64_t param_count = 0;
  int64_t flops_per_forward = 0;
};

// Instantiates a trainable network with fan-in-scaled random initialization.
std::unique_ptr<StackedHourglass> build_model(const HourglassConfig& config,
                                              uint64_t init_seed);

// Learnable parameter count, computed analytically from the architecture
// walk (no weights are allocated). Matches enumerating the built network's
// parameter containers exactly.
int64_t count_params(const HourglassConfig& config);

// Per-forward FLOPs at the spec's input resolution, counting convolutions as
// 2 * multiply-accumulates. Elementwise work (bias, BN, ReLU, pooling) is
// excluded.
int64_t estimate_flops(const HourglassConfig& config, const ImageSpec& spec);

ModelSpec analyze_model(const HourglassConfig& config, const ImageSpec& spec);

}  // namespace fpd
