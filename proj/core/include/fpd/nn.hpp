#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fpd/model.hpp"
#include "fpd/rng.hpp"
#include "fpd/tensor.hpp"

namespace fpd {

// Named view of one parameter or persistent buffer inside a network.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;  // null for buffers
  bool learnable = true;
};

namespace nn {

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual void collect(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void set_training(bool training) { training_ = training; }

 protected:
  bool training_ = true;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
  void init(Rng& rng);

  int in_ch() const { return in_ch_; }
  int out_ch() const { return out_ch_; }

  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (out, 1, 1, 1)
  Tensor grad_weight;
  Tensor grad_bias;

 private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Tensor x_cache_;
  // scratch reused across calls
  std::vector<float> cols_, gcols_, gw_partial_, gb_partial_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override;

  Tensor gamma, beta, grad_gamma, grad_beta;
  Tensor running_mean, running_var;  // buffers

 private:
  int channels_;
  double momentum_, eps_;
  Tensor xhat_cache_;
  std::vector<float> invstd_cache_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;

 private:
  std::vector<uint8_t> active_;
};

class MaxPool2x2 final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;

 private:
  std::array<int, 4> in_shape_{};
  std::vector<int32_t> argmax_;
};

class UpsampleNearest2x final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
};

// Pre-activation bottleneck residual block (mid = out/2), 1x1 conv on the
// skip path when the channel count changes.
class Bottleneck final : public Layer {
 public:
  Bottleneck(int in_ch, int out_ch);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
  void set_training(bool training) override;
  void init(Rng& rng);

 private:
  BatchNorm2d bn1_, bn2_, bn3_;
  ReLU relu1_, relu2_, relu3_;
  Conv2d conv1_, conv2_, conv3_;
  std::unique_ptr<Conv2d> skip_;
};

// One recursion level of an hourglass: a skip branch at the current
// resolution and a pooled branch that either recurses or runs the
// lowest-resolution block chain.
class HourglassLevel final : public Layer {
 public:
  HourglassLevel(int depth, int channels, int bottom_blocks);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
  void set_training(bool training) override;
  void init(Rng& rng);

 private:
  Bottleneck up1_;
  MaxPool2x2 pool_;
  Bottleneck low1_;
  std::unique_ptr<HourglassLevel> inner_;
  std::vector<std::unique_ptr<Bottleneck>> bottom_;
  Bottleneck low3_;
  UpsampleNearest2x up2_;
};

// The full stacked-Hourglass pose network. Maps (N,3,S,S) images to one
// (N,K,S/4,S/4) score tensor per stage; stages after the first consume the
// trunk features remapped with the previous stage's prediction.
class StackedHourglass {
 public:
  StackedHourglass(const HourglassConfig& config, uint64_t init_seed);

  std::vector<Tensor> forward_all(const Tensor& images);
  void backward_all(const std::vector<Tensor>& score_grads);

  void zero_grad();
  void set_training(bool training);
  bool training() const { return training_; }

  std::vector<ParamRef> parameters();

  // Name -> tensor copies of all parameters and buffers, in declaration order.
  std::vector<std::pair<std::string, Tensor>> state() ;
  void load_state(const std::vector<std::pair<std::string, Tensor>>& state);

  const HourglassConfig& config() const { return config_; }

 private:
  struct Stage {
    std::unique_ptr<HourglassLevel> hg;
    std::unique_ptr<Bottleneck> post;
    std::unique_ptr<Conv2d> lin_conv;
    std::unique_ptr<BatchNorm2d> lin_bn;
    ReLU lin_relu;
    std::unique_ptr<Conv2d> score;
    std::unique_ptr<Conv2d> remap_feat;   // absent on the last stage
    std::unique_ptr<Conv2d> remap_score;  // absent on the last stage
  };

  HourglassConfig config_;
  bool training_ = true;

  std::unique_ptr<Conv2d> stem_conv_;
  std::unique_ptr<BatchNorm2d> stem_bn_;
  ReLU stem_relu_;
  std::unique_ptr<Bottleneck> stem_r1_;
  MaxPool2x2 stem_pool_;
  std::unique_ptr<Bottleneck> stem_r4_;
  std::unique_ptr<Bottleneck> stem_r5_;
  std::vector<Stage> stages_;
};

}  // namespace nn

}  // namespace fpd
