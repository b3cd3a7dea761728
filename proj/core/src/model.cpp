#include "fpd/model.hpp"

#include <functional>

#include "fpd/nn.hpp"

namespace fpd {
namespace {

// Arithmetic mirror of the structure StackedHourglass builds. Used for cost
// analysis so that parameter and FLOP counts are an independent route from
// the instantiated network.
struct ArchWalker {
  // conv(in, out, kernel, in_h, in_w, out_h, out_w), bn(channels)
  std::function<void(int, int, int, int, int, int, int)> conv;
  std::function<void(int)> bn;

  void bottleneck(int in_ch, int out_ch, int h, int w) const {
    const int mid = out_ch / 2;
    bn(in_ch);
    conv(in_ch, mid, 1, h, w, h, w);
    bn(mid);
    conv(mid, mid, 3, h, w, h, w);
    bn(mid);
    conv(mid, out_ch, 1, h, w, h, w);
    if (in_ch != out_ch) conv(in_ch, out_ch, 1, h, w, h, w);
  }

  void hourglass(int depth, int channels, int bottom_blocks, int h, int w) const {
    bottleneck(channels, channels, h, w);  // up1 skip branch
    const int lh = h / 2;
    const int lw = w / 2;
    bottleneck(channels, channels, lh, lw);  // low1
    if (depth > 1) {
      hourglass(depth - 1, channels, bottom_blocks, lh, lw);
    } else {
      for (int i = 0; i < bottom_blocks; ++i) {
        bottleneck(channels, channels, lh, lw);
      }
    }
    bottleneck(channels, channels, lh, lw);  // low3
  }

  void walk(const HourglassConfig& cfg, int in_h, int in_w) const {
    const int c = cfg.channels;
    const int bottom_blocks = cfg.blocks_per_stage - 2 * cfg.depth_per_hourglass;

    int h = in_h / 2;
    int w = in_w / 2;
    conv(3, c / 4, 7, in_h, in_w, h, w);
    bn(c / 4);
    bottleneck(c / 4, c / 2, h, w);
    h /= 2;
    w /= 2;
    bottleneck(c / 2, c / 2, h, w);
    bottleneck(c / 2, c, h, w);

    for (int s = 0; s < cfg.num_stages; ++s) {
      hourglass(cfg.depth_per_hourglass, c, bottom_blocks, h, w);
      bottleneck(c, c, h, w);  // post
      conv(c, c, 1, h, w, h, w);
      bn(c);
      conv(c, cfg.num_joints, 1, h, w, h, w);
      if (s + 1 < cfg.num_stages) {
        conv(c, c, 1, h, w, h, w);
        conv(cfg.num_joints, c, 1, h, w, h, w);
      }
    }
  }
};

}  // namespace

std::unique_ptr<StackedHourglass> build_model(const HourglassConfig& config,
                                              uint64_t init_seed) {
  config.validate();
  return std::make_unique<StackedHourglass>(config, init_seed);
}

int64_t count_params(const HourglassConfig& config) {
  config.validate();
  int64_t total = 0;
  ArchWalker walker;
  walker.conv = [&](int in, int out, int k, int, int, int, int) {
    total += static_cast<int64_t>(out) * in * k * k + out;  // weights + bias
  };
  walker.bn = [&](int c) { total += 2 * static_cast<int64_t>(c); };
  walker.walk(config, config.input_size, config.input_size);
  return total;
}

int64_t estimate_flops(const HourglassConfig& config, const ImageSpec& spec) {
  config.validate();
  spec.validate();
  int64_t macs = 0;
  ArchWalker walker;
  walker.conv = [&](int in, int out, int k, int, int, int oh, int ow) {
    macs += static_cast<int64_t>(out) * in * k * k * oh * ow;
  };
  walker.bn = [](int) {};
  walker.walk(config, spec.height, spec.width);
  return 2 * macs;
}

ModelSpec analyze_model(const HourglassConfig& config, const ImageSpec& spec) {
  return {config, count_params(config), estimate_flops(config, spec)};
}

}  // namespace fpd
