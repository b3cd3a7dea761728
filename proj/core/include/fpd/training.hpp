#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fpd/datasets.hpp"
#include "fpd/heatmap.hpp"
#include "fpd/losses.hpp"
#include "fpd/metrics.hpp"
#include "fpd/model.hpp"
#include "fpd/nn.hpp"

namespace fpd {

// RMSProp settings. smoothing is the squared-gradient moving-average
// coefficient.
struct OptimConfig {
  double learning_rate = 2.5e-4;
  double smoothing = 0.99;
  double epsilon = 1e-8;
};

struct TrainConfig {
  OptimConfig optimizer;
  int batch_size = 4;
  int epochs = 130;  // MPII-style default; 70 for LSP-style runs
  LossConfig loss;
  GaussianConfig gaussian;
  uint64_t seed = 0;
  int eval_interval = 5;  // epochs between validation passes
  bool augment_enabled = true;
  AugmentParams augment;
  int lr_decay_every = 0;  // optional step decay (epochs); 0 = off
  double lr_decay_factor = 0.5;
  EvalProtocol val_protocol = EvalProtocol::kPckh05;
  // Stop as soon as a validation pass reaches this metric (0 disables).
  double early_stop_metric = 0.0;

  void validate() const {
    if (optimizer.learning_rate <= 0.0) {
      throw ConfigError("TrainConfig: learning_rate must be positive");
    }
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (eval_interval < 1) throw ConfigError("TrainConfig: eval_interval must be >= 1");
    loss.validate();
    gaussian.validate();
    if (augment_enabled) augment.validate();
  }
};

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  HourglassConfig model_config;
  TrainConfig train_config;
  int epoch = 0;
  double best_metric = 0.0;
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor>> tensors;  // params + buffers
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ContractError when the checkpoint was produced by a different architecture.
void require_model_config(const Checkpoint& ckpt, const HourglassConfig& expected);

// Rebuilds the network and restores all parameters and buffers.
std::unique_ptr<StackedHourglass> restore_network(const Checkpoint& ckpt);

// CRC digest over every parameter and buffer byte.
uint32_t weight_digest(StackedHourglass& net);

// One optimizer step worth of telemetry. total equals
// alpha * distill_term + (1 - alpha) * mse_term of the same step; terms are
// summed over stages and averaged over the mini-batch.
struct StepRecord {
  int64_t step = 0;
  int epoch = 0;
  double mse_term = 0.0;
  double distill_term = 0.0;
  double total = 0.0;
  double alpha = 0.0;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint final;
  std::vector<StepRecord> log;
  std::vector<std::pair<int, double>> val_history;  // (epoch, metric)
};

// A ready-to-run mini-batch.
struct Batch {
  Tensor images;  // (N,3,S,S)
  std::vector<Sample> samples;
  std::vector<ConfidenceMapStack> gt;
  std::vector<JointMask> masks;
};

// Provider of distillation targets: one final-stage confidence stack per
// batch sample.
class TeacherSource {
 public:
  virtual ~TeacherSource() = default;
  virtual std::vector<ConfidenceMapStack> infer(const Batch& batch) = 0;
};

// Frozen network teacher (inference in eval mode).
class NetworkTeacher final : public TeacherSource {
 public:
  explicit NetworkTeacher(const Checkpoint& ckpt);
  std::vector<ConfidenceMapStack> infer(const Batch& batch) override;
  StackedHourglass& network() { return *net_; }

 private:
  std::unique_ptr<StackedHourglass> net_;
};

// Replaces the teacher with the batch's ground-truth encodings (fixture for
// the "teacher equals labels" identities).
class GroundTruthTeacher final : public TeacherSource {
 public:
  std::vector<ConfidenceMapStack> infer(const Batch& batch) override;
};

using StepCallback = std::function<void(const StepRecord&)>;

// Stage (i): supervised MSE training of a (teacher) network.
TrainResult train_teacher(const std::vector<Sample>& train,
                          const std::vector<Sample>& val,
                          const HourglassConfig& config, const TrainConfig& tc,
                          const StepCallback& on_step = {});

// Stage (ii): student training against frozen teacher predictions computed
// per mini-batch. The teacher checkpoint is digest-verified to be unchanged.
TrainResult distill_student(const std::vector<Sample>& train,
                            const std::vector<Sample>& val,
                            const Checkpoint& teacher,
                            const HourglassConfig& config, const TrainConfig& tc,
                            const StepCallback& on_step = {});

// Same, with an injectable teacher.
TrainResult distill_student_with(const std::vector<Sample>& train,
                                 const std::vector<Sample>& val,
                                 TeacherSource& teacher,
                                 const HourglassConfig& config,
                                 const TrainConfig& tc,
                                 const StepCallback& on_step = {});

// Eval-mode inference: decodes the final-stage maps and returns joints in
// original-image coordinates (through each sample's inverse crop affine).
std::vector<JointSet> predict_joints(StackedHourglass& net,
                                     const std::vector<Sample>& samples,
                                     int batch_size = 8);

// Mean PCK of eval-mode predictions on the given samples.
double validation_metric(StackedHourglass& net,
                         const std::vector<Sample>& samples,
                         EvalProtocol protocol);

}  // namespace fpd
