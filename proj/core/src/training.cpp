#include "fpd/training.hpp"

#include <cmath>
#include <numeric>

#include "fpd/rng.hpp"

namespace fpd {
namespace {

// Strictly-positive floor applied to clamped maps before the cross-entropy
// divergence so transiently all-zero predictions stay normalizable.
constexpr double kCeFloor = 1e-8;

ConfidenceMapStack slice_to_stack(const Tensor& t, int n, MapSource src) {
  auto s = ConfidenceMapStack::zeros(t.c(), t.h(), t.w(), src);
  const float* p = t.sample(n);
  for (size_t i = 0; i < s.values.size(); ++i) s.values[i] = p[i];
  return s;
}

struct SampleLoss {
  double mse = 0.0;
  double pd = 0.0;
  ConfidenceMapStack grad;
};

ConfidenceMapStack clamp_floor(const ConfidenceMapStack& s) {
  ConfidenceMapStack out = s;
  for (double& v : out.values) v = (v > 0.0 ? v : 0.0) + kCeFloor;
  return out;
}

SampleLoss student_loss_and_grad(const ConfidenceMapStack& student,
                                 const ConfidenceMapStack* teacher,
                                 const ConfidenceMapStack& gt,
                                 const LossConfig& cfg, const JointMask& mask) {
  SampleLoss out;
  if (teacher == nullptr || cfg.alpha == 0.0) {
    out.mse = mse_loss(student, gt, mask).mse_term;
    out.grad = mse_loss_grad(student, gt, mask);
    return out;
  }
  if (cfg.distill_divergence == DistillDivergence::kMse) {
    const LossReport rep = fpd_loss(student, *teacher, gt, cfg, mask);
    out.mse = rep.mse_term;
    out.pd = rep.distill_term;
    out.grad = fpd_loss_grad(student, *teacher, gt, cfg, mask);
    return out;
  }
  // Cross-entropy divergence: the CE term sees clamped maps, the
  // supervision term the raw maps.
  const ConfidenceMapStack sc = clamp_floor(student);
  const ConfidenceMapStack tc = clamp_floor(*teacher);
  out.mse = mse_loss(student, gt, mask).mse_term;
  out.pd = ce_distill_loss(sc, tc, mask).distill_term;
  out.grad = mse_loss_grad(student, gt, mask);
  const ConfidenceMapStack ce_grad = ce_distill_loss_grad(sc, tc, mask);
  for (size_t i = 0; i < out.grad.values.size(); ++i) {
    const double through = student.values[i] > 0.0 ? ce_grad.values[i] : 0.0;
    out.grad.values[i] =
        cfg.alpha * through + (1.0 - cfg.alpha) * out.grad.values[i];
  }
  return out;
}

Batch make_batch(const std::vector<Sample>& data, const std::vector<size_t>& idxs,
                 const ImageSpec& spec, const TrainConfig& tc, int epoch) {
  Batch b;
  b.samples.reserve(idxs.size());
  for (size_t idx : idxs) {
    if (tc.augment_enabled) {
      b.samples.push_back(augment(data[idx], tc.augment,
                                  mix_seed(tc.seed, epoch, idx)));
    } else {
      b.samples.push_back(data[idx]);
    }
  }
  std::vector<const Image*> imgs;
  imgs.reserve(b.samples.size());
  for (const auto& s : b.samples) imgs.push_back(&s.image);
  b.images = images_to_tensor(imgs);
  for (const auto& s : b.samples) {
    b.gt.push_back(encode_joints(s.joints, spec, tc.gaussian));
    b.masks.push_back(s.joints.labelled_mask());
  }
  return b;
}

TrainResult run_training(const std::vector<Sample>& train,
                         const std::vector<Sample>& val,
                         const HourglassConfig& config, const TrainConfig& tc_in,
                         TeacherSource* teacher, bool distill,
                         const StepCallback& on_step) {
  TrainConfig tc = tc_in;
  tc.validate();
  config.validate();
  if (train.empty()) throw ContractError("training data must be non-empty");
  for (const auto& s : train) {
    if (s.joints.size() != config.num_joints) {
      throw ContractError("sample joint count does not match network joints");
    }
  }
  // Stage (i) optimizes the supervision loss only.
  LossConfig loss_cfg = tc.loss;
  if (!distill) loss_cfg.alpha = 0.0;

  const ImageSpec spec = config.image_spec();
  auto net = build_model(config, mix_seed(tc.seed, 0x494e4954ull));
  net->set_training(true);

  auto params = net->parameters();
  std::vector<Tensor> sq_cache;
  for (const auto& p : params) {
    if (p.learnable) {
      sq_cache.push_back(Tensor::zeros(p.value->shape[0], p.value->shape[1],
                                       p.value->shape[2], p.value->shape[3]));
    }
  }

  Rng order_rng(mix_seed(tc.seed, 0x4f524452ull));

  TrainResult result;
  double best_metric = -1.0;
  int best_epoch = 0;
  auto best_state = net->state();
  std::string best_rng = order_rng.serialize();

  double lr = tc.optimizer.learning_rate;
  int64_t step = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    if (tc.lr_decay_every > 0 && epoch > 0 && epoch % tc.lr_decay_every == 0) {
      lr *= tc.lr_decay_factor;
    }
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    order_rng.shuffle(order);

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(tc.batch_size)) {
      const size_t stop =
          std::min(order.size(), start + static_cast<size_t>(tc.batch_size));
      const std::vector<size_t> idxs(order.begin() + start, order.begin() + stop);
      Batch batch = make_batch(train, idxs, spec, tc, epoch);

      std::vector<ConfidenceMapStack> teacher_maps;
      if (teacher != nullptr && loss_cfg.alpha > 0.0) {
        teacher_maps = teacher->infer(batch);
      }

      auto outs = net->forward_all(batch.images);
      const int b = static_cast<int>(batch.samples.size());
      double mse_sum = 0.0;
      double pd_sum = 0.0;
      std::vector<Tensor> grads;
      grads.reserve(outs.size());
      for (size_t s = 0; s < outs.size(); ++s) {
        Tensor g = Tensor::zeros(outs[s].n(), outs[s].c(), outs[s].h(), outs[s].w());
        for (int n = 0; n < b; ++n) {
          const auto student = slice_to_stack(outs[s], n, MapSource::kStudent);
          const SampleLoss sl = student_loss_and_grad(
              student, teacher_maps.empty() ? nullptr : &teacher_maps[n],
              batch.gt[n], loss_cfg, batch.masks[n]);
          mse_sum += sl.mse;
          pd_sum += sl.pd;
          float* gp = g.sample(n);
          for (size_t i = 0; i < sl.grad.values.size(); ++i) {
            gp[i] = static_cast<float>(sl.grad.values[i] / b);
          }
        }
        grads.push_back(std::move(g));
      }

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.alpha = loss_cfg.alpha;
      rec.mse_term = mse_sum / b;
      rec.distill_term = pd_sum / b;
      rec.total = rec.alpha * rec.distill_term + (1.0 - rec.alpha) * rec.mse_term;
      if (!std::isfinite(rec.total)) {
        throw Error("training diverged: non-finite loss at step " +
                    std::to_string(step));
      }

      net->backward_all(grads);

      size_t qi = 0;
      for (auto& p : params) {
        if (!p.learnable) continue;
        Tensor& cache = sq_cache[qi++];
        const double rho = tc.optimizer.smoothing;
        const double eps = tc.optimizer.epsilon;
        for (size_t i = 0; i < p.value->data.size(); ++i) {
          const double g = p.grad->data[i];
          const double c = rho * cache.data[i] + (1.0 - rho) * g * g;
          cache.data[i] = static_cast<float>(c);
          p.value->data[i] -=
              static_cast<float>(lr * g / (std::sqrt(c) + eps));
        }
      }
      net->zero_grad();

      result.log.push_back(rec);
      if (on_step) on_step(rec);
      ++step;
    }

    const bool last = epoch + 1 == tc.epochs;
    if (!val.empty() && ((epoch + 1) % tc.eval_interval == 0 || last)) {
      const double metric = validation_metric(*net, val, tc.val_protocol);
      result.val_history.emplace_back(epoch, metric);
      if (metric > best_metric) {
        best_metric = metric;
        best_epoch = epoch;
        best_state = net->state();
        best_rng = order_rng.serialize();
      }
      net->set_training(true);
      if (tc.early_stop_metric > 0.0 && metric >= tc.early_stop_metric) break;
    }
  }

  auto make_ckpt = [&](std::vector<std::pair<std::string, Tensor>> state,
                       int at_epoch, std::string rng_state) {
    Checkpoint c;
    c.model_config = config;
    c.train_config = tc;
    c.epoch = at_epoch;
    c.best_metric = best_metric < 0.0 ? 0.0 : best_metric;
    c.rng_state = std::move(rng_state);
    c.tensors = std::move(state);
    return c;
  };
  result.final = make_ckpt(net->state(), tc.epochs, order_rng.serialize());
  if (best_metric < 0.0) {
    result.best = result.final;
  } else {
    result.best = make_ckpt(std::move(best_state), best_epoch, std::move(best_rng));
  }
  return result;
}

}  // namespace

NetworkTeacher::NetworkTeacher(const Checkpoint& ckpt)
    : net_(restore_network(ckpt)) {
  net_->set_training(false);
}

std::vector<ConfidenceMapStack> NetworkTeacher::infer(const Batch& batch) {
  auto outs = net_->forward_all(batch.images);
  const Tensor& final_stage = outs.back();
  std::vector<ConfidenceMapStack> maps;
  maps.reserve(batch.samples.size());
  for (size_t n = 0; n < batch.samples.size(); ++n) {
    maps.push_back(slice_to_stack(final_stage, static_cast<int>(n),
                                  MapSource::kTeacher));
  }
  return maps;
}

std::vector<ConfidenceMapStack> GroundTruthTeacher::infer(const Batch& batch) {
  std::vector<ConfidenceMapStack> maps = batch.gt;
  for (auto& m : maps) m.source = MapSource::kTeacher;
  return maps;
}

TrainResult train_teacher(const std::vector<Sample>& train,
                          const std::vector<Sample>& val,
                          const HourglassConfig& config, const TrainConfig& tc,
                          const StepCallback& on_step) {
  return run_training(train, val, config, tc, nullptr, false, on_step);
}

TrainResult distill_student(const std::vector<Sample>& train,
                            const std::vector<Sample>& val,
                            const Checkpoint& teacher,
                            const HourglassConfig& config, const TrainConfig& tc,
                            const StepCallback& on_step) {
  if (teacher.model_config.num_joints != config.num_joints) {
    throw ContractError("distill_student: teacher predicts " +
                        std::to_string(teacher.model_config.num_joints) +
                        " joints, student expects " +
                        std::to_string(config.num_joints));
  }
  NetworkTeacher source(teacher);
  const uint32_t digest_before = weight_digest(source.network());
  TrainResult result = run_training(train, val, config, tc, &source, true, on_step);
  if (weight_digest(source.network()) != digest_before) {
    throw Error("distill_student: teacher weights changed during distillation");
  }
  return result;
}

TrainResult distill_student_with(const std::vector<Sample>& train,
                                 const std::vector<Sample>& val,
                                 TeacherSource& teacher,
                                 const HourglassConfig& config,
                                 const TrainConfig& tc,
                                 const StepCallback& on_step) {
  return run_training(train, val, config, tc, &teacher, true, on_step);
}

std::vector<JointSet> predict_joints(StackedHourglass& net,
                                     const std::vector<Sample>& samples,
                                     int batch_size) {
  if (batch_size < 1) throw ContractError("predict_joints: batch_size must be >= 1");
  const bool was_training = net.training();
  net.set_training(false);
  const ImageSpec spec = net.config().image_spec();

  std::vector<JointSet> out;
  out.reserve(samples.size());
  for (size_t start = 0; start < samples.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t stop =
        std::min(samples.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Image*> imgs;
    for (size_t i = start; i < stop; ++i) imgs.push_back(&samples[i].image);
    auto outs = net.forward_all(images_to_tensor(imgs));
    const Tensor& final_stage = outs.back();
    for (size_t i = start; i < stop; ++i) {
      const auto stack = slice_to_stack(final_stage, static_cast<int>(i - start),
                                        MapSource::kStudent);
      const JointSet crop_joints = decode_heatmaps(stack, spec);
      out.push_back(crop_joints.transformed(samples[i].crop_from_image.inverse()));
    }
  }
  net.set_training(was_training);
  return out;
}

double validation_metric(StackedHourglass& net,
                         const std::vector<Sample>& samples,
                         EvalProtocol protocol) {
  if (samples.empty()) throw ContractError("validation_metric: empty sample set");
  const auto preds = predict_joints(net, samples);
  std::vector<AnnotationRecord> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(s.meta);
  return evaluate(preds, records, protocol).mean_pck;
}

}  // namespace fpd
