#include "splab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splab/diagnostics.hpp"
#include "splab/errors.hpp"
#include "splab/rng.hpp"
#include "splab/serialize.hpp"

namespace splab {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool all_finite(const Tensor& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

// --------------------------------------------------------------- optimizer

void adamw_step(std::vector<Tensor*>& params,
                const std::vector<Tensor>& grads, OptimState& state,
                const AdamwConfig& cfg) {
  if (params.size() != grads.size()) {
    throw config_error("adamw_step: parameter/gradient count mismatch");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros(p->shape));
      state.v.push_back(Tensor::zeros(p->shape));
    }
  }
  if (state.m.size() != params.size()) {
    throw config_error("adamw_step: optimizer state size mismatch");
  }
  const std::size_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!same_shape(p, g) || !same_shape(p, state.m[i])) {
      throw config_error("adamw_step: shape mismatch at parameter " +
                         std::to_string(i));
    }
    if (!all_finite(g)) {
      throw numeric_error("adamw_step: non-finite gradient for parameter " +
                          std::to_string(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.data[j];
      state.m[i].data[j] = cfg.beta1 * state.m[i].data[j] +
                           (1.0 - cfg.beta1) * gj;
      state.v[i].data[j] = cfg.beta2 * state.v[i].data[j] +
                           (1.0 - cfg.beta2) * gj * gj;
      const double m_hat = state.m[i].data[j] / bc1;
      const double v_hat = state.v[i].data[j] / bc2;
      p.data[j] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                             cfg.weight_decay * p.data[j]);
    }
  }
  state.step = t;
}

double cosine_lr(double base_lr, std::size_t t, std::size_t total) {
  if (total == 0) return base_lr;
  return base_lr * 0.5 *
         (1.0 + std::cos(kPi * static_cast<double>(t) /
                         static_cast<double>(total)));
}

// -------------------------------------------------------------- train loop

namespace {

Tensor gather_batch(const Tensor& t, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> shape = t.shape;
  shape[0] = idx.size();
  Tensor out = Tensor::zeros(shape);
  const std::size_t stride = t.size() / t.shape[0];
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(
        t.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * stride),
        t.data.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * stride),
        out.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

TrainResult run_loop(Model& model, const Tensor& train_inputs,
                     const Tensor& train_targets, const Tensor& test_inputs,
                     const Tensor& test_targets, const TrainConfig& cfg,
                     const std::string& out_dir) {
  if (train_inputs.rank() < 1 || train_inputs.shape[0] == 0) {
    throw config_error("training: empty train split");
  }
  if (train_inputs.shape[0] != train_targets.shape[0]) {
    throw config_error("training: train input/target counts differ");
  }
  if (cfg.batch == 0) throw config_error("training: batch must be positive");
  if (cfg.eval_every == 0) {
    throw config_error("training: eval_every must be positive");
  }
  if (cfg.loss != "mse" && cfg.loss != "l2re") {
    throw config_error("training: loss must be \"mse\" or \"l2re\"");
  }

  const std::size_t n_train = train_inputs.shape[0];
  const std::vector<std::size_t> trainable = model.store.trainable_indices();
  Prng rng(cfg.seed);
  OptimState state;
  AdamwConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;

  auto evaluate = [&]() {
    return l2re(forward_field(model, test_inputs), test_targets);
  };
  auto checkpoint = [&](const std::string& name) {
    if (!out_dir.empty()) {
      save_checkpoint(out_dir + "/" + name, model, &state, state.step);
    }
  };

  TrainResult result;
  result.best_test_l2re = std::numeric_limits<double>::infinity();
  double last_loss = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ac.lr = cfg.cosine ? cosine_lr(cfg.lr, step, cfg.steps) : cfg.lr;
    std::vector<std::size_t> idx(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) idx[i] = rng.index(n_train);
    Tensor xb = gather_batch(train_inputs, idx);
    Tensor yb = gather_batch(train_targets, idx);

    Tape tape;
    ForwardResult fr = model_forward(tape, model, xb);
    NodeId loss = cfg.loss == "l2re" ? tape.l2re_loss(fr.output, yb)
                                     : tape.mse_loss(fr.output, yb);
    last_loss = tape.value(loss).data[0];
    if (!std::isfinite(last_loss)) {
      // Weights are still the last finite iterate: persist them, then fail.
      checkpoint("checkpoint_final.bin");
      throw numeric_error("training: non-finite loss at step " +
                          std::to_string(step));
    }
    std::vector<NodeId> wrt;
    std::vector<Tensor*> params;
    for (std::size_t i : trainable) {
      wrt.push_back(fr.param_nodes[i]);
      params.push_back(&model.store.value(i));
    }
    std::vector<Tensor> grads = tape.gradients(loss, wrt);
    try {
      adamw_step(params, grads, state, ac);
    } catch (const numeric_error&) {
      checkpoint("checkpoint_final.bin");
      throw;
    }

    if ((step + 1) % cfg.eval_every == 0 && step + 1 < cfg.steps) {
      const double te = evaluate();
      result.trace.push_back({step + 1, last_loss, te});
      if (te < result.best_test_l2re) {
        result.best_test_l2re = te;
        checkpoint("checkpoint_best.bin");
      }
    }
  }

  const double final_te = evaluate();
  result.final_test_l2re = final_te;
  result.trace.push_back({cfg.steps, last_loss, final_te});
  if (final_te < result.best_test_l2re) {
    result.best_test_l2re = final_te;
    checkpoint("checkpoint_best.bin");
  }
  checkpoint("checkpoint_final.bin");
  if (!out_dir.empty()) {
    std::vector<std::vector<double>> rows;
    for (const StepTrace& t : result.trace) {
      rows.push_back({static_cast<double>(t.step), t.train_loss,
                      t.test_l2re});
    }
    write_csv(out_dir + "/trace.csv", {"step", "train_loss", "test_l2re"},
              rows);
  }
  return result;
}

}  // namespace

TrainResult pretrain(Model& model, const Tensor& train_inputs,
                     const Tensor& train_targets, const Tensor& test_inputs,
                     const Tensor& test_targets, const TrainConfig& cfg,
                     const std::string& out_dir) {
  if (model.peft.kind != PeftKind::none) {
    throw config_error("pretrain: model already has a fine-tune attachment");
  }
  return run_loop(model, train_inputs, train_targets, test_inputs,
                  test_targets, cfg, out_dir);
}

TrainResult finetune(Model& model, const Tensor& train_inputs,
                     const Tensor& train_targets, const Tensor& test_inputs,
                     const Tensor& test_targets, const TrainConfig& cfg,
                     const std::string& out_dir) {
  if (model.peft.kind == PeftKind::none) {
    throw config_error("finetune: attach a fine-tune configuration first");
  }
  return run_loop(model, train_inputs, train_targets, test_inputs,
                  test_targets, cfg, out_dir);
}

// ------------------------------------------------------------- checkpoints

void save_checkpoint(const std::string& path, const Model& model,
                     const OptimState* optim, std::size_t step) {
  Archive ar;
  ar.header = {{"format", "splab-checkpoint-v1"},
               {"backbone", backbone_config_to_json(model.config)},
               {"peft", peft_config_to_json(model.peft)},
               {"step", step}};
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    ar.tensors.emplace_back("param." + model.store.name(i),
                            model.store.value(i));
  }
  if (optim != nullptr && !optim->m.empty()) {
    const std::vector<std::size_t> trainable =
        model.store.trainable_indices();
    if (optim->m.size() != trainable.size()) {
      throw config_error(
          "save_checkpoint: optimizer state does not match trainable set");
    }
    ar.header["optim_step"] = optim->step;
    for (std::size_t j = 0; j < trainable.size(); ++j) {
      const std::string& name = model.store.name(trainable[j]);
      ar.tensors.emplace_back("optim.m." + name, optim->m[j]);
      ar.tensors.emplace_back("optim.v." + name, optim->v[j]);
    }
  }
  write_archive(path, ar);
}

Checkpoint load_checkpoint(const std::string& path) {
  Archive ar = read_archive(path);
  if (!ar.header.contains("format") ||
      ar.header.at("format") != "splab-checkpoint-v1") {
    throw config_error("not a checkpoint file: " + path);
  }
  const BackboneConfig bc =
      backbone_config_from_json(ar.header.at("backbone"));
  const PeftConfig pc = peft_config_from_json(ar.header.at("peft"));

  Checkpoint cp;
  Prng rng(0);
  cp.model = make_model(bc, rng);
  if (pc.kind != PeftKind::none) {
    Prng attach_rng(0);
    attach_peft(cp.model, pc, attach_rng);
  }
  cp.step = ar.header.value("step", std::size_t{0});
  for (std::size_t i = 0; i < cp.model.store.size(); ++i) {
    const Tensor& stored = ar.find("param." + cp.model.store.name(i));
    if (!same_shape(stored, cp.model.store.value(i))) {
      throw config_error("checkpoint shape mismatch for " +
                         cp.model.store.name(i));
    }
    cp.model.store.value(i) = stored;
  }
  if (ar.header.contains("optim_step")) {
    cp.has_optim = true;
    cp.optim.step = ar.header.at("optim_step").get<std::size_t>();
    for (std::size_t idx : cp.model.store.trainable_indices()) {
      const std::string& name = cp.model.store.name(idx);
      cp.optim.m.push_back(ar.find("optim.m." + name));
      cp.optim.v.push_back(ar.find("optim.v." + name));
    }
  }
  return cp;
}

// ------------------------------------------------------ config serialization

nlohmann::json backbone_config_to_json(const BackboneConfig& c) {
  return {{"spatial_dims", c.spatial_dims},
          {"grid", c.grid},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"width", c.width},
          {"blocks", c.blocks},
          {"layers", c.layers},
          {"modes", c.modes},
          {"temporal_modes", c.temporal_modes},
          {"use_mlp", c.use_mlp},
          {"identity_gelu", c.identity_gelu}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.spatial_dims = j.value("spatial_dims", c.spatial_dims);
  if (j.contains("grid")) {
    c.grid = j.at("grid").get<std::vector<std::size_t>>();
  }
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.width = j.value("width", c.width);
  c.blocks = j.value("blocks", c.blocks);
  c.layers = j.value("layers", c.layers);
  c.modes = j.value("modes", c.modes);
  c.temporal_modes = j.value("temporal_modes", c.temporal_modes);
  c.use_mlp = j.value("use_mlp", c.use_mlp);
  c.identity_gelu = j.value("identity_gelu", c.identity_gelu);
  return c;
}

nlohmann::json peft_config_to_json(const PeftConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"bands", c.bands},
          {"r_min", c.r_min},
          {"r_max", c.r_max},
          {"p", c.p},
          {"adapter_scale", c.adapter_scale},
          {"annulus_bands", c.annulus_bands},
          {"series_order", c.series_order},
          {"rank", c.rank},
          {"lora_lambda", c.lora_lambda}};
}

PeftConfig peft_config_from_json(const nlohmann::json& j) {
  PeftConfig c;
  const std::string kind = j.value("kind", std::string("none"));
  c.kind = kind == "none" ? PeftKind::none : peft_kind_from_string(kind);
  c.bands = j.value("bands", c.bands);
  c.r_min = j.value("r_min", c.r_min);
  c.r_max = j.value("r_max", c.r_max);
  c.p = j.value("p", c.p);
  c.adapter_scale = j.value("adapter_scale", c.adapter_scale);
  c.annulus_bands = j.value("annulus_bands", c.annulus_bands);
  c.series_order = j.value("series_order", c.series_order);
  c.rank = j.value("rank", c.rank);
  c.lora_lambda = j.value("lora_lambda", c.lora_lambda);
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"lr", c.lr},
          {"batch", c.batch},
          {"eval_every", c.eval_every},
          {"cosine", c.cosine},
          {"weight_decay", c.weight_decay},
          {"loss", c.loss},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.cosine = j.value("cosine", c.cosine);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.loss = j.value("loss", c.loss);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace splab
