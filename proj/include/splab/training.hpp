#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splab/backbone.hpp"
#include "splab/peft.hpp"
#include "splab/tensor.hpp"

namespace splab {

// --------------------------------------------------------------- optimizer

struct AdamwConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptimState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;  // completed steps (bias correction uses step+1)
};

// Decoupled weight decay: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd*p).
// State tensors are created on first use; shapes must match thereafter.
void adamw_step(std::vector<Tensor*>& params,
                const std::vector<Tensor>& grads, OptimState& state,
                const AdamwConfig& cfg);

// Half-cosine decay: lr * 0.5 * (1 + cos(pi * t / total)).
double cosine_lr(double base_lr, std::size_t t, std::size_t total);

// -------------------------------------------------------------- train loop

struct TrainConfig {
  std::size_t steps = 800;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::size_t eval_every = 100;
  bool cosine = false;
  double weight_decay = 0.0;
  std::string loss = "mse";  // "mse" | "l2re"
  std::uint64_t seed = 0;
};

struct StepTrace {
  std::size_t step = 0;
  double train_loss = 0.0;
  double test_l2re = 0.0;
};

struct TrainResult {
  double final_test_l2re = 0.0;
  double best_test_l2re = 0.0;
  std::vector<StepTrace> trace;
};

// Minimizes batch MSE over the model's trainable parameters with AdamW;
// evaluates test relative error every eval_every steps and at the end.
// When out_dir is non-empty, writes checkpoint_final.bin, checkpoint_best.bin
// (best test error seen at an evaluation), and trace.csv there.  A
// non-finite loss saves the last finite state and raises numeric_error.
TrainResult pretrain(Model& model, const Tensor& train_inputs,
                     const Tensor& train_targets, const Tensor& test_inputs,
                     const Tensor& test_targets, const TrainConfig& cfg,
                     const std::string& out_dir);

// Same loop; requires an attached fine-tune configuration.  The frozen
// backbone is untouched (bit-identical before/after).
TrainResult finetune(Model& model, const Tensor& train_inputs,
                     const Tensor& train_targets, const Tensor& test_inputs,
                     const Tensor& test_targets, const TrainConfig& cfg,
                     const std::string& out_dir);

// ------------------------------------------------------------- checkpoints

// Archive layout: json header {format, backbone, peft, step}, tensors
// "param.{name}" in store order, optionally "optim.m.{name}" /
// "optim.v.{name}" for trainable parameters.
void save_checkpoint(const std::string& path, const Model& model,
                     const OptimState* optim = nullptr, std::size_t step = 0);

struct Checkpoint {
  Model model;
  OptimState optim;
  bool has_optim = false;
  std::size_t step = 0;
};
Checkpoint load_checkpoint(const std::string& path);

// ------------------------------------------------------ config serialization

nlohmann::json backbone_config_to_json(const BackboneConfig& c);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);
nlohmann::json peft_config_to_json(const PeftConfig& c);
PeftConfig peft_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace splab
