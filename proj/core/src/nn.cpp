#include "fpd/nn.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <unordered_map>

extern "C" void openblas_set_num_threads(int);

namespace fpd::nn {
namespace {

// Parallelism comes from OpenMP over batch samples; the BLAS pool only adds
// contention at these GEMM sizes.
const bool kBlasSingleThread = [] {
  openblas_set_num_threads(1);
  return true;
}();

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
           const float* a, int lda, const float* b, int ldb, float beta,
           float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

// (C,H,W) plane -> (C*k*k, OH*OW) matrix with zero padding.
void im2col(const float* x, int c, int h, int w, int kernel, int stride,
            int pad, int oh, int ow, float* cols) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        float* row = cols + ((static_cast<size_t>(ci) * kernel + ki) * kernel + kj) *
                                (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          float* dst = row + static_cast<size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::memset(dst, 0, sizeof(float) * ow);
            continue;
          }
          const float* src = x + (static_cast<size_t>(ci) * h + iy) * w;
          if (stride == 1) {
            // contiguous shifted copy with zeroed borders
            const int x0 = std::max(0, pad - kj);
            const int x1 = std::min(ow, w + pad - kj);
            if (x0 > 0) std::memset(dst, 0, sizeof(float) * x0);
            if (x1 > x0) {
              std::memcpy(dst + x0, src + x0 - pad + kj, sizeof(float) * (x1 - x0));
            }
            if (x1 < ow) std::memset(dst + x1, 0, sizeof(float) * (ow - x1));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kj;
              dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-accumulate columns back onto the input plane.
void col2im(const float* cols, int c, int h, int w, int kernel, int stride,
            int pad, int oh, int ow, float* x) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        const float* row =
            cols + ((static_cast<size_t>(ci) * kernel + ki) * kernel + kj) *
                       (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          float* dst = x + (static_cast<size_t>(ci) * h + iy) * w;
          const float* src = row + static_cast<size_t>(oy) * ow;
          if (stride == 1) {
            const int x0 = std::max(0, pad - kj);
            const int x1 = std::min(ow, w + pad - kj);
            float* d = dst - pad + kj;
            for (int ox = x0; ox < x1; ++ox) d[ox] += src[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kj;
              if (ix >= 0 && ix < w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
  weight = Tensor::zeros(out_ch, in_ch, kernel, kernel);
  bias = Tensor::zeros(out_ch, 1, 1, 1);
  grad_weight = Tensor::zeros(out_ch, in_ch, kernel, kernel);
  grad_bias = Tensor::zeros(out_ch, 1, 1, 1);
}

void Conv2d::init(Rng& rng) {
  const double fan_in = static_cast<double>(in_ch_) * kernel_ * kernel_;
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& v : weight.data) v = static_cast<float>(rng.normal() * std);
  bias.fill(0.0f);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.c() != in_ch_) {
    throw ContractError("Conv2d: expected " + std::to_string(in_ch_) +
                        " input channels, got " + std::to_string(x.c()));
  }
  const int oh = (x.h() + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (x.w() + 2 * pad_ - kernel_) / stride_ + 1;
  const int k2 = in_ch_ * kernel_ * kernel_;
  const int hw = oh * ow;
  const bool direct = kernel_ == 1 && stride_ == 1 && pad_ == 0;

  Tensor y = Tensor::zeros(x.n(), out_ch_, oh, ow);
  if (!direct) {
    cols_.resize(static_cast<size_t>(x.n()) * k2 * hw);
  }

#pragma omp parallel for schedule(static)
  for (int ni = 0; ni < x.n(); ++ni) {
    const float* src = x.sample(ni);
    if (!direct) {
      float* cols = cols_.data() + static_cast<size_t>(ni) * k2 * hw;
      im2col(src, in_ch_, x.h(), x.w(), kernel_, stride_, pad_, oh, ow, cols);
      src = cols;
    }
    float* ys = y.sample(ni);
    sgemm(false, false, out_ch_, hw, k2, 1.0f, weight.data.data(), k2, src, hw,
          0.0f, ys, hw);
    for (int oc = 0; oc < out_ch_; ++oc) {
      const float b = bias.data[oc];
      float* row = ys + static_cast<size_t>(oc) * hw;
      for (int i = 0; i < hw; ++i) row[i] += b;
    }
  }
  if (training_) x_cache_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  if (x_cache_.empty()) throw ContractError("Conv2d: backward without forward");
  const Tensor x = std::move(x_cache_);
  x_cache_ = Tensor{};

  const int oh = gy.h();
  const int ow = gy.w();
  const int k2 = in_ch_ * kernel_ * kernel_;
  const int hw = oh * ow;
  const bool direct = kernel_ == 1 && stride_ == 1 && pad_ == 0;
  const int n = x.n();
  const size_t wsize = weight.data.size();

  Tensor gx = Tensor::zeros(n, x.c(), x.h(), x.w());
  if (!direct) {
    cols_.resize(static_cast<size_t>(n) * k2 * hw);
    gcols_.resize(static_cast<size_t>(n) * k2 * hw);
  }
  // Per-sample partials, reduced in sample order afterwards so gradients do
  // not depend on thread scheduling.
  gw_partial_.assign(static_cast<size_t>(n) * wsize, 0.0f);
  gb_partial_.assign(static_cast<size_t>(n) * out_ch_, 0.0f);

#pragma omp parallel for schedule(static)
  for (int ni = 0; ni < n; ++ni) {
    const float* gys = gy.sample(ni);
    float* gw = gw_partial_.data() + static_cast<size_t>(ni) * wsize;
    float* gb = gb_partial_.data() + static_cast<size_t>(ni) * out_ch_;
    for (int oc = 0; oc < out_ch_; ++oc) {
      const float* row = gys + static_cast<size_t>(oc) * hw;
      float s = 0.0f;
      for (int i = 0; i < hw; ++i) s += row[i];
      gb[oc] = s;
    }
    if (direct) {
      sgemm(false, true, out_ch_, k2, hw, 1.0f, gys, hw, x.sample(ni), hw, 0.0f,
            gw, k2);
      sgemm(true, false, k2, hw, out_ch_, 1.0f, weight.data.data(), k2, gys, hw,
            0.0f, gx.sample(ni), hw);
    } else {
      float* cols = cols_.data() + static_cast<size_t>(ni) * k2 * hw;
      float* gcols = gcols_.data() + static_cast<size_t>(ni) * k2 * hw;
      im2col(x.sample(ni), in_ch_, x.h(), x.w(), kernel_, stride_, pad_, oh, ow,
             cols);
      sgemm(false, true, out_ch_, k2, hw, 1.0f, gys, hw, cols, hw, 0.0f, gw, k2);
      sgemm(true, false, k2, hw, out_ch_, 1.0f, weight.data.data(), k2, gys, hw,
            0.0f, gcols, hw);
      col2im(gcols, in_ch_, x.h(), x.w(), kernel_, stride_, pad_, oh, ow,
             gx.sample(ni));
    }
  }

  for (int ni = 0; ni < n; ++ni) {
    const float* gw = gw_partial_.data() + static_cast<size_t>(ni) * wsize;
    for (size_t i = 0; i < wsize; ++i) grad_weight.data[i] += gw[i];
    const float* gb = gb_partial_.data() + static_cast<size_t>(ni) * out_ch_;
    for (int oc = 0; oc < out_ch_; ++oc) grad_bias.data[oc] += gb[oc];
  }
  return gx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight, &grad_weight, true});
  out.push_back({prefix + ".bias", &bias, &grad_bias, true});
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  gamma = Tensor::zeros(channels, 1, 1, 1);
  beta = Tensor::zeros(channels, 1, 1, 1);
  grad_gamma = Tensor::zeros(channels, 1, 1, 1);
  grad_beta = Tensor::zeros(channels, 1, 1, 1);
  running_mean = Tensor::zeros(channels, 1, 1, 1);
  running_var = Tensor::zeros(channels, 1, 1, 1);
  gamma.fill(1.0f);
  running_var.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x) {
  if (x.c() != channels_) throw ContractError("BatchNorm2d: channel mismatch");
  const int hw = x.h() * x.w();
  const int64_t m = static_cast<int64_t>(x.n()) * hw;
  Tensor y = Tensor::zeros(x.n(), x.c(), x.h(), x.w());

  if (training_) {
    xhat_cache_ = Tensor::zeros(x.n(), x.c(), x.h(), x.w());
    invstd_cache_.assign(channels_, 0.0f);
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < channels_; ++ci) {
      double sum = 0.0;
      for (int ni = 0; ni < x.n(); ++ni) {
        const float* p = x.sample(ni) + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) sum += p[i];
      }
      const double mean = sum / m;
      double var_sum = 0.0;
      for (int ni = 0; ni < x.n(); ++ni) {
        const float* p = x.sample(ni) + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) {
          const double d = p[i] - mean;
          var_sum += d * d;
        }
      }
      const double var = var_sum / m;
      const float invstd = static_cast<float>(1.0 / std::sqrt(var + eps_));
      invstd_cache_[ci] = invstd;

      const float g = gamma.data[ci];
      const float b = beta.data[ci];
      const float mu = static_cast<float>(mean);
      for (int ni = 0; ni < x.n(); ++ni) {
        const float* p = x.sample(ni) + static_cast<size_t>(ci) * hw;
        float* xh = xhat_cache_.sample(ni) + static_cast<size_t>(ci) * hw;
        float* yo = y.sample(ni) + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) {
          const float v = (p[i] - mu) * invstd;
          xh[i] = v;
          yo[i] = g * v + b;
        }
      }
      running_mean.data[ci] = static_cast<float>(
          (1.0 - momentum_) * running_mean.data[ci] + momentum_ * mean);
      const double unbiased = m > 1 ? var * m / (m - 1) : var;
      running_var.data[ci] = static_cast<float>(
          (1.0 - momentum_) * running_var.data[ci] + momentum_ * unbiased);
    }
  } else {
    for (int ci = 0; ci < channels_; ++ci) {
      const float invstd =
          static_cast<float>(1.0 / std::sqrt(running_var.data[ci] + eps_));
      const float g = gamma.data[ci];
      const float b = beta.data[ci];
      const float mu = running_mean.data[ci];
      for (int ni = 0; ni < x.n(); ++ni) {
        const float* p = x.sample(ni) + static_cast<size_t>(ci) * hw;
        float* yo = y.sample(ni) + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) yo[i] = g * (p[i] - mu) * invstd + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
  if (xhat_cache_.empty()) {
    throw ContractError("BatchNorm2d: backward without training forward");
  }
  const int hw = gy.h() * gy.w();
  const int64_t m = static_cast<int64_t>(gy.n()) * hw;
  Tensor gx = Tensor::zeros(gy.n(), gy.c(), gy.h(), gy.w());

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < channels_; ++ci) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int ni = 0; ni < gy.n(); ++ni) {
      const float* d = gy.sample(ni) + static_cast<size_t>(ci) * hw;
      const float* xh = xhat_cache_.sample(ni) + static_cast<size_t>(ci) * hw;
      for (int i = 0; i < hw; ++i) {
        sum_dy += d[i];
        sum_dy_xhat += static_cast<double>(d[i]) * xh[i];
      }
    }
    grad_gamma.data[ci] += static_cast<float>(sum_dy_xhat);
    grad_beta.data[ci] += static_cast<float>(sum_dy);

    const double coef = gamma.data[ci] * invstd_cache_[ci] / m;
    for (int ni = 0; ni < gy.n(); ++ni) {
      const float* d = gy.sample(ni) + static_cast<size_t>(ci) * hw;
      const float* xh = xhat_cache_.sample(ni) + static_cast<size_t>(ci) * hw;
      float* g = gx.sample(ni) + static_cast<size_t>(ci) * hw;
      for (int i = 0; i < hw; ++i) {
        g[i] = static_cast<float>(coef * (m * d[i] - sum_dy - xh[i] * sum_dy_xhat));
      }
    }
  }
  xhat_cache_ = Tensor{};
  return gx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma, &grad_gamma, true});
  out.push_back({prefix + ".beta", &beta, &grad_beta, true});
  out.push_back({prefix + ".running_mean", &running_mean, nullptr, false});
  out.push_back({prefix + ".running_var", &running_var, nullptr, false});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x) {
  Tensor y = x;
  if (training_) {
    active_.resize(y.data.size());
    for (size_t i = 0; i < y.data.size(); ++i) {
      const bool on = y.data[i] > 0.0f;
      active_[i] = on;
      if (!on) y.data[i] = 0.0f;
    }
  } else {
    for (auto& v : y.data) v = v > 0.0f ? v : 0.0f;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  if (active_.size() != gy.data.size()) {
    throw ContractError("ReLU: backward without forward");
  }
  Tensor gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    if (!active_[i]) gx.data[i] = 0.0f;
  }
  active_.clear();
  return gx;
}

// ------------------------------------------------------------ MaxPool2x2

Tensor MaxPool2x2::forward(const Tensor& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw ContractError("MaxPool2x2: spatial dims must be even");
  }
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  Tensor y = Tensor::zeros(x.n(), x.c(), oh, ow);
  in_shape_ = x.shape;
  argmax_.assign(y.data.size(), 0);

  size_t oi = 0;
  for (int ni = 0; ni < x.n(); ++ni) {
    for (int ci = 0; ci < x.c(); ++ci) {
      const float* plane =
          x.sample(ni) + static_cast<size_t>(ci) * x.h() * x.w();
      const size_t plane_off =
          (static_cast<size_t>(ni) * x.c() + ci) * x.h() * x.w();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          const int iy = oy * 2;
          const int ix = ox * 2;
          int best = iy * x.w() + ix;
          float best_v = plane[best];
          const int cand[3] = {iy * x.w() + ix + 1, (iy + 1) * x.w() + ix,
                               (iy + 1) * x.w() + ix + 1};
          for (int idx : cand) {
            if (plane[idx] > best_v) {
              best_v = plane[idx];
              best = idx;
            }
          }
          y.data[oi] = best_v;
          argmax_[oi] = static_cast<int32_t>(plane_off + best);
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2x2::backward(const Tensor& gy) {
  if (argmax_.empty()) throw ContractError("MaxPool2x2: backward without forward");
  Tensor gx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  for (size_t i = 0; i < gy.data.size(); ++i) {
    gx.data[argmax_[i]] += gy.data[i];
  }
  argmax_.clear();
  return gx;
}

// ----------------------------------------------------- UpsampleNearest2x

Tensor UpsampleNearest2x::forward(const Tensor& x) {
  Tensor y = Tensor::zeros(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int ni = 0; ni < x.n(); ++ni) {
    for (int ci = 0; ci < x.c(); ++ci) {
      const float* src = x.sample(ni) + static_cast<size_t>(ci) * x.h() * x.w();
      float* dst =
          y.sample(ni) + static_cast<size_t>(ci) * y.h() * y.w();
      for (int iy = 0; iy < x.h(); ++iy) {
        for (int ix = 0; ix < x.w(); ++ix) {
          const float v = src[iy * x.w() + ix];
          float* d = dst + (2 * iy) * y.w() + 2 * ix;
          d[0] = v;
          d[1] = v;
          d[y.w()] = v;
          d[y.w() + 1] = v;
        }
      }
    }
  }
  return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& gy) {
  Tensor gx = Tensor::zeros(gy.n(), gy.c(), gy.h() / 2, gy.w() / 2);
  for (int ni = 0; ni < gy.n(); ++ni) {
    for (int ci = 0; ci < gy.c(); ++ci) {
      const float* src =
          gy.sample(ni) + static_cast<size_t>(ci) * gy.h() * gy.w();
      float* dst = gx.sample(ni) + static_cast<size_t>(ci) * gx.h() * gx.w();
      for (int iy = 0; iy < gx.h(); ++iy) {
        for (int ix = 0; ix < gx.w(); ++ix) {
          const float* s = src + (2 * iy) * gy.w() + 2 * ix;
          dst[iy * gx.w() + ix] = s[0] + s[1] + s[gy.w()] + s[gy.w() + 1];
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------- Bottleneck

Bottleneck::Bottleneck(int in_ch, int out_ch)
    : bn1_(in_ch),
      bn2_(out_ch / 2),
      bn3_(out_ch / 2),
      conv1_(in_ch, out_ch / 2, 1, 1, 0),
      conv2_(out_ch / 2, out_ch / 2, 3, 1, 1),
      conv3_(out_ch / 2, out_ch, 1, 1, 0) {
  if (in_ch != out_ch) {
    skip_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, 1, 0);
  }
}

void Bottleneck::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  conv3_.init(rng);
  if (skip_) skip_->init(rng);
}

Tensor Bottleneck::forward(const Tensor& x) {
  Tensor t = conv1_.forward(relu1_.forward(bn1_.forward(x)));
  t = conv2_.forward(relu2_.forward(bn2_.forward(t)));
  t = conv3_.forward(relu3_.forward(bn3_.forward(t)));
  if (skip_) {
    t += skip_->forward(x);
  } else {
    t += x;
  }
  return t;
}

Tensor Bottleneck::backward(const Tensor& gy) {
  Tensor g = bn3_.backward(relu3_.backward(conv3_.backward(gy)));
  g = bn2_.backward(relu2_.backward(conv2_.backward(g)));
  g = bn1_.backward(relu1_.backward(conv1_.backward(g)));
  if (skip_) {
    g += skip_->backward(gy);
  } else {
    g += gy;
  }
  return g;
}

void Bottleneck::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  bn1_.collect(prefix + ".bn1", out);
  conv1_.collect(prefix + ".conv1", out);
  bn2_.collect(prefix + ".bn2", out);
  conv2_.collect(prefix + ".conv2", out);
  bn3_.collect(prefix + ".bn3", out);
  conv3_.collect(prefix + ".conv3", out);
  if (skip_) skip_->collect(prefix + ".skip", out);
}

void Bottleneck::set_training(bool training) {
  Layer::set_training(training);
  bn1_.set_training(training);
  bn2_.set_training(training);
  bn3_.set_training(training);
  relu1_.set_training(training);
  relu2_.set_training(training);
  relu3_.set_training(training);
  conv1_.set_training(training);
  conv2_.set_training(training);
  conv3_.set_training(training);
  if (skip_) skip_->set_training(training);
}

// --------------------------------------------------------- HourglassLevel

HourglassLevel::HourglassLevel(int depth, int channels, int bottom_blocks)
    : up1_(channels, channels), low1_(channels, channels),
      low3_(channels, channels) {
  if (depth > 1) {
    inner_ = std::make_unique<HourglassLevel>(depth - 1, channels, bottom_blocks);
  } else {
    for (int i = 0; i < bottom_blocks; ++i) {
      bottom_.push_back(std::make_unique<Bottleneck>(channels, channels));
    }
  }
}

void HourglassLevel::init(Rng& rng) {
  up1_.init(rng);
  low1_.init(rng);
  if (inner_) {
    inner_->init(rng);
  } else {
    for (auto& b : bottom_) b->init(rng);
  }
  low3_.init(rng);
}

Tensor HourglassLevel::forward(const Tensor& x) {
  Tensor u = up1_.forward(x);
  Tensor d = low1_.forward(pool_.forward(x));
  if (inner_) {
    d = inner_->forward(d);
  } else {
    for (auto& b : bottom_) d = b->forward(d);
  }
  d = low3_.forward(d);
  Tensor y = up2_.forward(d);
  y += u;
  return y;
}

Tensor HourglassLevel::backward(const Tensor& gy) {
  Tensor gd = low3_.backward(up2_.backward(gy));
  if (inner_) {
    gd = inner_->backward(gd);
  } else {
    for (auto it = bottom_.rbegin(); it != bottom_.rend(); ++it) {
      gd = (*it)->backward(gd);
    }
  }
  Tensor gx = pool_.backward(low1_.backward(gd));
  gx += up1_.backward(gy);
  return gx;
}

void HourglassLevel::collect(const std::string& prefix,
                             std::vector<ParamRef>& out) {
  up1_.collect(prefix + ".up1", out);
  low1_.collect(prefix + ".low1", out);
  if (inner_) {
    inner_->collect(prefix + ".inner", out);
  } else {
    for (size_t i = 0; i < bottom_.size(); ++i) {
      bottom_[i]->collect(prefix + ".bottom" + std::to_string(i), out);
    }
  }
  low3_.collect(prefix + ".low3", out);
}

void HourglassLevel::set_training(bool training) {
  Layer::set_training(training);
  up1_.set_training(training);
  pool_.set_training(training);
  low1_.set_training(training);
  if (inner_) {
    inner_->set_training(training);
  } else {
    for (auto& b : bottom_) b->set_training(training);
  }
  low3_.set_training(training);
  up2_.set_training(training);
}

// ------------------------------------------------------- StackedHourglass

StackedHourglass::StackedHourglass(const HourglassConfig& config,
                                   uint64_t init_seed)
    : config_(config) {
  config_.validate();
  const int c = config_.channels;
  const int bottom_blocks =
      config_.blocks_per_stage - 2 * config_.depth_per_hourglass;

  stem_conv_ = std::make_unique<Conv2d>(3, c / 4, 7, 2, 3);
  stem_bn_ = std::make_unique<BatchNorm2d>(c / 4);
  stem_r1_ = std::make_unique<Bottleneck>(c / 4, c / 2);
  stem_r4_ = std::make_unique<Bottleneck>(c / 2, c / 2);
  stem_r5_ = std::make_unique<Bottleneck>(c / 2, c);

  for (int s = 0; s < config_.num_stages; ++s) {
    Stage st;
    st.hg = std::make_unique<HourglassLevel>(config_.depth_per_hourglass, c,
                                             bottom_blocks);
    st.post = std::make_unique<Bottleneck>(c, c);
    st.lin_conv = std::make_unique<Conv2d>(c, c, 1, 1, 0);
    st.lin_bn = std::make_unique<BatchNorm2d>(c);
    st.score = std::make_unique<Conv2d>(c, config_.num_joints, 1, 1, 0);
    if (s + 1 < config_.num_stages) {
      st.remap_feat = std::make_unique<Conv2d>(c, c, 1, 1, 0);
      st.remap_score = std::make_unique<Conv2d>(config_.num_joints, c, 1, 1, 0);
    }
    stages_.push_back(std::move(st));
  }

  Rng rng(init_seed);
  stem_conv_->init(rng);
  stem_r1_->init(rng);
  stem_r4_->init(rng);
  stem_r5_->init(rng);
  for (auto& st : stages_) {
    st.hg->init(rng);
    st.post->init(rng);
    st.lin_conv->init(rng);
    st.score->init(rng);
    if (st.remap_feat) st.remap_feat->init(rng);
    if (st.remap_score) st.remap_score->init(rng);
  }
}

std::vector<Tensor> StackedHourglass::forward_all(const Tensor& images) {
  if (images.c() != 3 || images.h() != config_.input_size ||
      images.w() != config_.input_size) {
    throw ContractError("StackedHourglass: expected (N,3," +
                        std::to_string(config_.input_size) + "," +
                        std::to_string(config_.input_size) + ") input, got " +
                        images.shape_str());
  }
  Tensor t = stem_relu_.forward(stem_bn_->forward(stem_conv_->forward(images)));
  t = stem_r1_->forward(t);
  t = stem_pool_.forward(t);
  t = stem_r4_->forward(t);
  t = stem_r5_->forward(t);

  std::vector<Tensor> outs;
  outs.reserve(stages_.size());
  for (auto& st : stages_) {
    Tensor h = st.post->forward(st.hg->forward(t));
    Tensor y = st.lin_relu.forward(st.lin_bn->forward(st.lin_conv->forward(h)));
    Tensor s = st.score->forward(y);
    if (st.remap_feat) {
      Tensor next = t;
      next += st.remap_feat->forward(y);
      next += st.remap_score->forward(s);
      t = std::move(next);
    }
    outs.push_back(std::move(s));
  }
  return outs;
}

void StackedHourglass::backward_all(const std::vector<Tensor>& score_grads) {
  if (score_grads.size() != stages_.size()) {
    throw ContractError("StackedHourglass: need one score gradient per stage");
  }
  Tensor gt;
  for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
    Stage& st = stages_[s];
    Tensor gs = score_grads[s];
    Tensor gy_extra;
    if (st.remap_feat) {
      gy_extra = st.remap_feat->backward(gt);
      gs += st.remap_score->backward(gt);
    }
    Tensor gy = st.score->backward(gs);
    if (!gy_extra.empty()) gy += gy_extra;
    Tensor gh =
        st.lin_conv->backward(st.lin_bn->backward(st.lin_relu.backward(gy)));
    gh = st.post->backward(gh);
    Tensor g = st.hg->backward(gh);
    if (st.remap_feat) g += gt;  // identity branch of the trunk update
    gt = std::move(g);
  }
  Tensor g = stem_r5_->backward(gt);
  g = stem_r4_->backward(g);
  g = stem_pool_.backward(g);
  g = stem_r1_->backward(g);
  g = stem_bn_->backward(stem_relu_.backward(g));
  stem_conv_->backward(g);
}

std::vector<ParamRef> StackedHourglass::parameters() {
  std::vector<ParamRef> out;
  stem_conv_->collect("stem.conv", out);
  stem_bn_->collect("stem.bn", out);
  stem_r1_->collect("stem.r1", out);
  stem_r4_->collect("stem.r4", out);
  stem_r5_->collect("stem.r5", out);
  for (size_t s = 0; s < stages_.size(); ++s) {
    const std::string p = "stage" + std::to_string(s);
    stages_[s].hg->collect(p + ".hg", out);
    stages_[s].post->collect(p + ".post", out);
    stages_[s].lin_conv->collect(p + ".lin_conv", out);
    stages_[s].lin_bn->collect(p + ".lin_bn", out);
    stages_[s].score->collect(p + ".score", out);
    if (stages_[s].remap_feat) {
      stages_[s].remap_feat->collect(p + ".remap_feat", out);
      stages_[s].remap_score->collect(p + ".remap_score", out);
    }
  }
  return out;
}

void StackedHourglass::zero_grad() {
  for (auto& p : parameters()) {
    if (p.grad) p.grad->fill(0.0f);
  }
}

void StackedHourglass::set_training(bool training) {
  training_ = training;
  stem_conv_->set_training(training);
  stem_bn_->set_training(training);
  stem_relu_.set_training(training);
  stem_r1_->set_training(training);
  stem_pool_.set_training(training);
  stem_r4_->set_training(training);
  stem_r5_->set_training(training);
  for (auto& st : stages_) {
    st.hg->set_training(training);
    st.post->set_training(training);
    st.lin_conv->set_training(training);
    st.lin_bn->set_training(training);
    st.lin_relu.set_training(training);
    st.score->set_training(training);
    if (st.remap_feat) {
      st.remap_feat->set_training(training);
      st.remap_score->set_training(training);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> StackedHourglass::state() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& p : parameters()) out.emplace_back(p.name, *p.value);
  return out;
}

void StackedHourglass::load_state(
    const std::vector<std::pair<std::string, Tensor>>& state) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : state) by_name[name] = &tensor;
  auto params = parameters();
  if (by_name.size() != params.size()) {
    throw ContractError("load_state: tensor count mismatch");
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw ContractError("load_state: missing tensor " + p.name);
    }
    if (!it->second->same_shape(*p.value)) {
      throw ContractError("load_state: shape mismatch for " + p.name);
    }
    *p.value = *it->second;
  }
}

}  // namespace fpd::nn
