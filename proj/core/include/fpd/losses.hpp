#pragma once

#include <cstdint>
#include <vector>

#include "fpd/common.hpp"
#include "fpd/heatmap.hpp"

namespace fpd {

enum class DistillDivergence : uint8_t { kMse = 0, kCrossEntropy = 1 };

struct LossConfig {
  double alpha = 0.5;  // weight of the distillation term
  DistillDivergence distill_divergence = DistillDivergence::kMse;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) {
      throw ConfigError("LossConfig: alpha must lie in [0, 1]");
    }
  }
};

// One loss evaluation. total == alpha * distill_term + (1 - alpha) * mse_term
// by construction; single-term losses report with the degenerate alpha.
struct LossReport {
  double mse_term = 0.0;
  double distill_term = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  std::vector<double> per_joint_mse;
  std::vector<double> per_joint_distill;
};

// Per-joint inclusion flags; empty means "all joints". Masked joints
// contribute zero and shrink the 1/K averaging denominator.
using JointMask = std::vector<uint8_t>;

// Guard added inside log() for the cross-entropy loss.
inline constexpr double kCrossEntropyEps = 1e-12;

LossReport mse_loss(const ConfidenceMapStack& pred, const ConfidenceMapStack& gt,
                    const JointMask& mask = {});

LossReport distill_loss(const ConfidenceMapStack& student,
                        const ConfidenceMapStack& teacher,
                        const JointMask& mask = {});

LossReport fpd_loss(const ConfidenceMapStack& student,
                    const ConfidenceMapStack& teacher,
                    const ConfidenceMapStack& gt, const LossConfig& cfg,
                    const JointMask& mask = {});

// Cross-entropy between L1-normalized maps, teacher as target distribution.
// Inputs are normalized internally when their sums differ from 1; negative
// values raise ContractError.
LossReport ce_distill_loss(const ConfidenceMapStack& student,
                           const ConfidenceMapStack& teacher,
                           const JointMask& mask = {});

// Analytic gradients with respect to the first argument (prediction/student).
ConfidenceMapStack mse_loss_grad(const ConfidenceMapStack& pred,
                                 const ConfidenceMapStack& gt,
                                 const JointMask& mask = {});

ConfidenceMapStack distill_loss_grad(const ConfidenceMapStack& student,
                                     const ConfidenceMapStack& teacher,
                                     const JointMask& mask = {});

ConfidenceMapStack fpd_loss_grad(const ConfidenceMapStack& student,
                                 const ConfidenceMapStack& teacher,
                                 const ConfidenceMapStack& gt,
                                 const LossConfig& cfg,
                                 const JointMask& mask = {});

ConfidenceMapStack ce_distill_loss_grad(const ConfidenceMapStack& student,
                                        const ConfidenceMapStack& teacher,
                                        const JointMask& mask = {});

}  // namespace fpd
