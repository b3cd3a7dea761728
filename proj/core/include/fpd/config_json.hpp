#pragma once

#include <json.hpp>

#include "fpd/heatmap.hpp"
#include "fpd/losses.hpp"
#include "fpd/model.hpp"
#include "fpd/training.hpp"

// JSON bindings for the config structs (checkpoint headers, run configs).
namespace fpd {

inline void to_json(nlohmann::json& j, const HourglassConfig& c) {
  j = {{"stages", c.num_stages},
       {"channels", c.channels},
       {"blocks_per_stage", c.blocks_per_stage},
       {"joints", c.num_joints},
       {"input_size", c.input_size},
       {"depth_per_hourglass", c.depth_per_hourglass}};
}

inline void from_json(const nlohmann::json& j, HourglassConfig& c) {
  c.num_stages = j.value("stages", c.num_stages);
  c.channels = j.value("channels", c.channels);
  c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
  c.num_joints = j.value("joints", c.num_joints);
  c.input_size = j.value("input_size", c.input_size);
  c.depth_per_hourglass = j.value("depth_per_hourglass", c.depth_per_hourglass);
}

inline void to_json(nlohmann::json& j, const GaussianConfig& c) {
  j = {{"sigma", c.sigma},
       {"normalized_peak", c.normalized_peak},
       {"truncate_sigmas", c.truncate_sigmas}};
}

inline void from_json(const nlohmann::json& j, GaussianConfig& c) {
  c.sigma = j.value("sigma", c.sigma);
  c.normalized_peak = j.value("normalized_peak", c.normalized_peak);
  c.truncate_sigmas = j.value("truncate_sigmas", c.truncate_sigmas);
}

inline void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"alpha", c.alpha},
       {"distill_divergence",
        c.distill_divergence == DistillDivergence::kMse ? "mse" : "cross_entropy"}};
}

inline void from_json(const nlohmann::json& j, LossConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  const std::string d = j.value("distill_divergence", std::string("mse"));
  if (d == "mse") {
    c.distill_divergence = DistillDivergence::kMse;
  } else if (d == "cross_entropy") {
    c.distill_divergence = DistillDivergence::kCrossEntropy;
  } else {
    throw ConfigError("unknown distill_divergence: " + d);
  }
}

inline void to_json(nlohmann::json& j, const AugmentParams& p) {
  j = {{"scale_min", p.scale_min},
       {"scale_max", p.scale_max},
       {"rotation_max_deg", p.rotation_max_deg},
       {"hflip_prob", p.hflip_prob}};
  if (!p.flip_pairs.empty()) j["flip_pairs"] = p.flip_pairs;
}

inline void from_json(const nlohmann::json& j, AugmentParams& p) {
  p.scale_min = j.value("scale_min", p.scale_min);
  p.scale_max = j.value("scale_max", p.scale_max);
  p.rotation_max_deg = j.value("rotation_max_deg", p.rotation_max_deg);
  p.hflip_prob = j.value("hflip_prob", p.hflip_prob);
  if (j.contains("flip_pairs")) {
    p.flip_pairs = j["flip_pairs"].get<std::vector<std::pair<int, int>>>();
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.optimizer.learning_rate},
       {"smoothing", c.optimizer.smoothing},
       {"epsilon", c.optimizer.epsilon},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"loss", c.loss},
       {"gaussian", c.gaussian},
       {"seed", c.seed},
       {"eval_interval", c.eval_interval},
       {"augment_enabled", c.augment_enabled},
       {"augment", c.augment},
       {"lr_decay_every", c.lr_decay_every},
       {"lr_decay_factor", c.lr_decay_factor},
       {"early_stop_metric", c.early_stop_metric},
       {"val_protocol",
        c.val_protocol == EvalProtocol::kPckh05 ? "pckh05" : "pck02"}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
  c.optimizer.smoothing = j.value("smoothing", c.optimizer.smoothing);
  c.optimizer.epsilon = j.value("epsilon", c.optimizer.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("loss")) c.loss = j["loss"].get<LossConfig>();
  if (j.contains("gaussian")) c.gaussian = j["gaussian"].get<GaussianConfig>();
  c.seed = j.value("seed", c.seed);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.augment_enabled = j.value("augment_enabled", c.augment_enabled);
  if (j.contains("augment")) c.augment = j["augment"].get<AugmentParams>();
  c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
  c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
  c.early_stop_metric = j.value("early_stop_metric", c.early_stop_metric);
  if (j.contains("val_protocol")) {
    c.val_protocol = parse_protocol(j["val_protocol"].get<std::string>());
  }
}

}  // namespace fpd
