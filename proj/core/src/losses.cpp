#include "fpd/losses.hpp"

#include <cmath>

namespace fpd {
namespace {

JointMask resolve_mask(const JointMask& mask, int k) {
  if (mask.empty()) return JointMask(k, 1);
  if (static_cast<int>(mask.size()) != k) {
    throw ContractError("loss: mask length does not match joint count");
  }
  return mask;
}

void check_shapes(const ConfidenceMapStack& a, const ConfidenceMapStack& b,
                  const char* what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": stack shapes differ");
  }
}

int active_joints(const JointMask& mask) {
  int n = 0;
  for (uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

// Sum of squared differences per joint; masked entries stay zero.
std::vector<double> per_joint_sq(const ConfidenceMapStack& a,
                                 const ConfidenceMapStack& b,
                                 const JointMask& mask) {
  std::vector<double> out(a.num_joints, 0.0);
  for (int k = 0; k < a.num_joints; ++k) {
    if (!mask[k]) continue;
    const auto ma = a.map(k);
    const auto mb = b.map(k);
    double s = 0.0;
    for (size_t i = 0; i < ma.size(); ++i) {
      const double d = ma[i] - mb[i];
      s += d * d;
    }
    out[k] = s;
  }
  return out;
}

double masked_mean(const std::vector<double>& per_joint, const JointMask& mask) {
  const int n = active_joints(mask);
  if (n == 0) return 0.0;
  double s = 0.0;
  for (size_t k = 0; k < per_joint.size(); ++k) {
    if (mask[k]) s += per_joint[k];
  }
  return s / n;
}

ConfidenceMapStack sq_grad(const ConfidenceMapStack& a,
                           const ConfidenceMapStack& b, const JointMask& mask) {
  auto g = ConfidenceMapStack::zeros(a.num_joints, a.height, a.width, a.source);
  const int n = active_joints(mask);
  if (n == 0) return g;
  const double scale = 2.0 / n;
  for (int k = 0; k < a.num_joints; ++k) {
    if (!mask[k]) continue;
    const auto ma = a.map(k);
    const auto mb = b.map(k);
    auto mg = g.map(k);
    for (size_t i = 0; i < ma.size(); ++i) mg[i] = scale * (ma[i] - mb[i]);
  }
  return g;
}

struct CeJointTerms {
  double loss = 0.0;
  double sum_s = 0.0;
  double cross = 0.0;  // sum_p t~_p * s~_p / (s~_p + eps)
};

CeJointTerms ce_joint(std::span<const double> s, std::span<const double> t,
                      int k) {
  double sum_s = 0.0;
  double sum_t = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0 || t[i] < 0.0) {
      throw ContractError("ce_distill_loss: negative value in map " +
                          std::to_string(k));
    }
    sum_s += s[i];
    sum_t += t[i];
  }
  if (!(sum_s > 0.0) || !(sum_t > 0.0)) {
    throw DataError("ce_distill_loss: map " + std::to_string(k) +
                    " has non-positive sum");
  }
  CeJointTerms out;
  out.sum_s = sum_s;
  for (size_t i = 0; i < s.size(); ++i) {
    const double tn = t[i] / sum_t;
    const double sn = s[i] / sum_s;
    out.loss -= tn * std::log(sn + kCrossEntropyEps);
    out.cross += tn * sn / (sn + kCrossEntropyEps);
  }
  return out;
}

}  // namespace

LossReport mse_loss(const ConfidenceMapStack& pred, const ConfidenceMapStack& gt,
                    const JointMask& mask_in) {
  check_shapes(pred, gt, "mse_loss");
  const JointMask mask = resolve_mask(mask_in, pred.num_joints);
  LossReport r;
  r.alpha = 0.0;
  r.per_joint_mse = per_joint_sq(pred, gt, mask);
  r.per_joint_distill.assign(pred.num_joints, 0.0);
  r.mse_term = masked_mean(r.per_joint_mse, mask);
  r.total = r.mse_term;
  return r;
}

LossReport distill_loss(const ConfidenceMapStack& student,
                        const ConfidenceMapStack& teacher,
                        const JointMask& mask_in) {
  check_shapes(student, teacher, "distill_loss");
  const JointMask mask = resolve_mask(mask_in, student.num_joints);
  LossReport r;
  r.alpha = 1.0;
  r.per_joint_distill = per_joint_sq(student, teacher, mask);
  r.per_joint_mse.assign(student.num_joints, 0.0);
  r.distill_term = masked_mean(r.per_joint_distill, mask);
  r.total = r.distill_term;
  return r;
}

LossReport ce_distill_loss(const ConfidenceMapStack& student,
                           const ConfidenceMapStack& teacher,
                           const JointMask& mask_in) {
  check_shapes(student, teacher, "ce_distill_loss");
  const JointMask mask = resolve_mask(mask_in, student.num_joints);
  LossReport r;
  r.alpha = 1.0;
  r.per_joint_distill.assign(student.num_joints, 0.0);
  r.per_joint_mse.assign(student.num_joints, 0.0);
  for (int k = 0; k < student.num_joints; ++k) {
    if (!mask[k]) continue;
    r.per_joint_distill[k] = ce_joint(student.map(k), teacher.map(k), k).loss;
  }
  r.distill_term = masked_mean(r.per_joint_distill, mask);
  r.total = r.distill_term;
  return r;
}

LossReport fpd_loss(const ConfidenceMapStack& student,
                    const ConfidenceMapStack& teacher,
                    const ConfidenceMapStack& gt, const LossConfig& cfg,
                    const JointMask& mask) {
  cfg.validate();
  check_shapes(student, gt, "fpd_loss");
  const LossReport sup = mse_loss(student, gt, mask);
  const LossReport pd = cfg.distill_divergence == DistillDivergence::kMse
                            ? distill_loss(student, teacher, mask)
                            : ce_distill_loss(student, teacher, mask);
  LossReport r;
  r.alpha = cfg.alpha;
  r.mse_term = sup.mse_term;
  r.distill_term = pd.distill_term;
  r.per_joint_mse = sup.per_joint_mse;
  r.per_joint_distill = pd.per_joint_distill;
  r.total = cfg.alpha * r.distill_term + (1.0 - cfg.alpha) * r.mse_term;
  return r;
}

ConfidenceMapStack mse_loss_grad(const ConfidenceMapStack& pred,
                                 const ConfidenceMapStack& gt,
                                 const JointMask& mask_in) {
  check_shapes(pred, gt, "mse_loss_grad");
  return sq_grad(pred, gt, resolve_mask(mask_in, pred.num_joints));
}

ConfidenceMapStack distill_loss_grad(const ConfidenceMapStack& student,
                                     const ConfidenceMapStack& teacher,
                                     const JointMask& mask_in) {
  check_shapes(student, teacher, "distill_loss_grad");
  return sq_grad(student, teacher, resolve_mask(mask_in, student.num_joints));
}

ConfidenceMapStack ce_distill_loss_grad(const ConfidenceMapStack& student,
                                        const ConfidenceMapStack& teacher,
                                        const JointMask& mask_in) {
  check_shapes(student, teacher, "ce_distill_loss_grad");
  const JointMask mask = resolve_mask(mask_in, student.num_joints);
  auto g = ConfidenceMapStack::zeros(student.num_joints, student.height,
                                     student.width, student.source);
  const int n = active_joints(mask);
  if (n == 0) return g;
  for (int k = 0; k < student.num_joints; ++k) {
    if (!mask[k]) continue;
    const auto s = student.map(k);
    const auto t = teacher.map(k);
    const CeJointTerms terms = ce_joint(s, t, k);
    double sum_t = 0.0;
    for (double v : t) sum_t += v;
    auto mg = g.map(k);
    for (size_t i = 0; i < s.size(); ++i) {
      const double tn = t[i] / sum_t;
      const double sn = s[i] / terms.sum_s;
      mg[i] = -(tn / (sn + kCrossEntropyEps) - terms.cross) / (terms.sum_s * n);
    }
  }
  return g;
}

ConfidenceMapStack fpd_loss_grad(const ConfidenceMapStack& student,
                                 const ConfidenceMapStack& teacher,
                                 const ConfidenceMapStack& gt,
                                 const LossConfig& cfg, const JointMask& mask) {
  cfg.validate();
  ConfidenceMapStack gs = mse_loss_grad(student, gt, mask);
  const ConfidenceMapStack gd =
      cfg.distill_divergence == DistillDivergence::kMse
          ? distill_loss_grad(student, teacher, mask)
          : ce_distill_loss_grad(student, teacher, mask);
  for (size_t i = 0; i < gs.values.size(); ++i) {
    gs.values[i] = cfg.alpha * gd.values[i] + (1.0 - cfg.alpha) * gs.values[i];
  }
  return gs;
}

}  // namespace fpd
