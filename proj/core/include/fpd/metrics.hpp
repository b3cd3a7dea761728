#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpd/datasets.hpp"
#include "fpd/joints.hpp"
#include "fpd/model.hpp"

namespace fpd {

enum class EvalProtocol { kPckh05, kPck02 };

enum class NormalizerKind { kHead, kTorso };

struct PckCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> accuracy;    // matching fractions in [0,1]
  NormalizerKind normalizer_kind = NormalizerKind::kHead;
};

struct EvalResult {
  std::vector<double> per_joint_pck;  // -1 for joint types never evaluated
  double mean_pck = 0.0;
  double auc = 0.0;
  int64_t num_joints_evaluated = 0;
  PckCurve curve;
  std::optional<ModelSpec> cost;
  JointLayout layout = JointLayout::kGeneric;
};

// Per-joint correctness at threshold tau: 1 correct, 0 incorrect,
// -1 excluded (unlabelled ground truth). A joint is correct iff
// ||pred - gt||_2 <= tau * normalizer (boundary inclusive).
std::vector<int> pck(const JointSet& pred, const JointSet& gt,
                     double normalizer, double tau);

// MPII-convention threshold grid: 0 to 0.5 in steps of 0.01.
std::vector<double> default_threshold_grid();

// Trapezoidal area under the curve normalized by the largest threshold, so
// a perfect detector scores 1.
double auc(const PckCurve& curve);

// Full protocol evaluation: predictions and records are in original-image
// coordinates; pckh_05 normalizes by head_size at tau 0.5, pck_02 by
// torso_diag at tau 0.2. Missing normalizer fields raise DataError.
EvalResult evaluate(const std::vector<JointSet>& predictions,
                    const std::vector<AnnotationRecord>& records,
                    EvalProtocol protocol);

// Paper-style table: grouped joint columns, Mean, AUC and, when cost is
// attached, #Param and FLOPs.
std::string format_report(const EvalResult& result);

double protocol_tau(EvalProtocol protocol);
const char* protocol_name(EvalProtocol protocol);
EvalProtocol parse_protocol(const std::string& name);  // "pckh05" | "pck02"

}  // namespace fpd
