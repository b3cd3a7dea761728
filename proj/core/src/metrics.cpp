#include "fpd/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace fpd {

std::vector<int> pck(const JointSet& pred, const JointSet& gt, double normalizer,
                     double tau) {
  if (normalizer <= 0.0) throw ContractError("pck: normalizer must be positive");
  if (pred.size() != gt.size()) throw ContractError("pck: joint count mismatch");

  std::vector<int> flags(gt.size(), -1);
  const double limit = tau * normalizer;
  for (int k = 0; k < gt.size(); ++k) {
    if (!gt[k].labelled()) continue;
    if (!pred[k].labelled()) {
      flags[k] = 0;
      continue;
    }
    const double dist = (pred[k].pos() - gt[k].pos()).norm();
    flags[k] = dist <= limit ? 1 : 0;
  }
  return flags;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i * 0.01);
  return grid;
}

double auc(const PckCurve& curve) {
  const auto& t = curve.thresholds;
  const auto& a = curve.accuracy;
  if (t.size() < 2) throw ContractError("auc: need at least two thresholds");
  if (t.size() != a.size()) throw ContractError("auc: threshold/accuracy size mismatch");
  for (size_t i = 1; i < t.size(); ++i) {
    if (t[i] <= t[i - 1]) throw ContractError("auc: thresholds must be ascending");
  }
  const double tau_max = t.back();
  if (tau_max <= 0.0) throw ContractError("auc: max threshold must be positive");

  // Accuracy below the first grid point is taken as constant.
  double area = a.front() * t.front();
  for (size_t i = 1; i < t.size(); ++i) {
    area += 0.5 * (a[i] + a[i - 1]) * (t[i] - t[i - 1]);
  }
  return area / tau_max;
}

double protocol_tau(EvalProtocol protocol) {
  return protocol == EvalProtocol::kPckh05 ? 0.5 : 0.2;
}

const char* protocol_name(EvalProtocol protocol) {
  return protocol == EvalProtocol::kPckh05 ? "PCKh@0.5" : "PCK@0.2";
}

EvalProtocol parse_protocol(const std::string& name) {
  if (name == "pckh05") return EvalProtocol::kPckh05;
  if (name == "pck02") return EvalProtocol::kPck02;
  throw ConfigError("unknown protocol: " + name + " (expected pckh05 or pck02)");
}

EvalResult evaluate(const std::vector<JointSet>& predictions,
                    const std::vector<AnnotationRecord>& records,
                    EvalProtocol protocol) {
  if (predictions.size() != records.size()) {
    throw ContractError("evaluate: need exactly one prediction per record");
  }
  if (records.empty()) throw ContractError("evaluate: empty record set");
  const int k = records[0].joints.size();
  for (const auto& r : records) {
    if (r.joints.size() != k) {
      throw ContractError("evaluate: records disagree on joint count");
    }
  }

  const std::vector<double> grid = default_threshold_grid();
  std::vector<std::vector<int64_t>> correct(grid.size(),
                                            std::vector<int64_t>(k, 0));
  std::vector<int64_t> counts(k, 0);

  for (size_t i = 0; i < records.size(); ++i) {
    const AnnotationRecord& rec = records[i];
    double normalizer = 0.0;
    if (protocol == EvalProtocol::kPckh05) {
      if (!rec.head_size) {
        throw DataError("evaluate: record " + std::to_string(i) +
                        " lacks head_size required by PCKh");
      }
      normalizer = *rec.head_size;
    } else {
      if (!rec.torso_diag) {
        throw DataError("evaluate: record " + std::to_string(i) +
                        " lacks torso_diag required by PCK@0.2");
      }
      normalizer = *rec.torso_diag;
    }
    for (int jk = 0; jk < k; ++jk) {
      if (rec.joints[jk].labelled()) ++counts[jk];
    }
    for (size_t g = 0; g < grid.size(); ++g) {
      const auto flags = pck(predictions[i], rec.joints, normalizer, grid[g]);
      for (int jk = 0; jk < k; ++jk) {
        if (flags[jk] == 1) ++correct[g][jk];
      }
    }
  }

  // Macro average over joint types, skipping types never labelled.
  auto macro = [&](const std::vector<int64_t>& corr) {
    double sum = 0.0;
    int types = 0;
    for (int jk = 0; jk < k; ++jk) {
      if (counts[jk] == 0) continue;
      sum += static_cast<double>(corr[jk]) / counts[jk];
      ++types;
    }
    return types > 0 ? sum / types : 0.0;
  };

  EvalResult res;
  res.layout = records[0].layout;
  res.curve.normalizer_kind = protocol == EvalProtocol::kPckh05
                                  ? NormalizerKind::kHead
                                  : NormalizerKind::kTorso;
  res.curve.thresholds = grid;
  res.curve.accuracy.resize(grid.size());
  for (size_t g = 0; g < grid.size(); ++g) {
    res.curve.accuracy[g] = macro(correct[g]);
  }

  const double tau = protocol_tau(protocol);
  size_t tau_idx = 0;
  for (size_t g = 0; g < grid.size(); ++g) {
    if (std::abs(grid[g] - tau) < 1e-12) tau_idx = g;
  }
  res.per_joint_pck.assign(k, -1.0);
  for (int jk = 0; jk < k; ++jk) {
    if (counts[jk] > 0) {
      res.per_joint_pck[jk] =
          static_cast<double>(correct[tau_idx][jk]) / counts[jk];
    }
    res.num_joints_evaluated += counts[jk];
  }
  res.mean_pck = macro(correct[tau_idx]);
  res.auc = auc(res.curve);
  return res;
}

namespace {

struct JointGroup {
  const char* name;
  std::vector<int> members;
};

std::vector<JointGroup> joint_groups(JointLayout layout) {
  switch (layout) {
    case JointLayout::kMpii16:
      return {{"Head", {8, 9}},   {"Sho.", {12, 13}}, {"Elbo.", {11, 14}},
              {"Wri.", {10, 15}}, {"Hip", {2, 3}},    {"Knee", {1, 4}},
              {"Ank.", {0, 5}}};
    case JointLayout::kLsp14:
      return {{"Head", {12, 13}}, {"Sho.", {8, 9}}, {"Elbo.", {7, 10}},
              {"Wri.", {6, 11}},  {"Hip", {2, 3}},  {"Knee", {1, 4}},
              {"Ank.", {0, 5}}};
    default:
      return {};
  }
}

std::string human_count(int64_t v) {
  char buf[32];
  if (v >= 1000000000) {
    std::snprintf(buf, sizeof(buf), "%.1fG", v / 1e9);
  } else if (v >= 1000000) {
    std::snprintf(buf, sizeof(buf), "%.1fM", v / 1e6);
  } else if (v >= 1000) {
    std::snprintf(buf, sizeof(buf), "%.1fK", v / 1e3);
  } else {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  }
  return buf;
}

}  // namespace

std::string format_report(const EvalResult& result) {
  std::string head, row;
  char buf[64];

  const auto groups = joint_groups(result.layout);
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof(buf), "%-7s", g.name);
    head += buf;
    double sum = 0.0;
    int n = 0;
    for (int m : g.members) {
      if (result.per_joint_pck[m] >= 0.0) {
        sum += result.per_joint_pck[m];
        ++n;
      }
    }
    if (n > 0) {
      std::snprintf(buf, sizeof(buf), "%-7.1f", 100.0 * sum / n);
    } else {
      std::snprintf(buf, sizeof(buf), "%-7s", "-");
    }
    row += buf;
  }

  head += "| Mean   AUC   ";
  std::snprintf(buf, sizeof(buf), "| %-6.1f %-6.1f", 100.0 * result.mean_pck,
                100.0 * result.auc);
  row += buf;

  if (result.cost) {
    head += "| #Param  FLOPs";
    std::snprintf(buf, sizeof(buf), "| %-7s %s",
                  human_count(result.cost->param_count).c_str(),
                  human_count(result.cost->flops_per_forward).c_str());
    row += buf;
  }

  std::string out = head + "\n" + row + "\n";
  if (groups.empty()) {
    out += "per-joint:";
    for (double v : result.per_joint_pck) {
      std::snprintf(buf, sizeof(buf), " %.3f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace fpd
