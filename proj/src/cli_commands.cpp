#include "splab/cli_commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "splab/backbone.hpp"
#include "splab/datagen.hpp"
#include "splab/diagnostics.hpp"
#include "splab/errors.hpp"
#include "splab/peft.hpp"
#include "splab/rng.hpp"
#include "splab/theory.hpp"
#include "splab/training.hpp"

namespace splab {

namespace {

using nlohmann::json;

// ----------------------------------------------------------- infrastructure

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (pipe == nullptr) return "unknown";
  char buf[256];
  std::string out;
  while (fgets(buf, sizeof(buf), pipe) != nullptr) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) {
    out.pop_back();
  }
  return out.empty() ? "unknown" : out;
}

struct RunClock {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const json& config, std::uint64_t seed,
                    const std::vector<std::string>& artifacts,
                    const RunClock& clock) {
  json manifest = {{"subcommand", subcommand},
                   {"config", config},
                   {"seed", seed},
                   {"artifacts", artifacts},
                   {"git", git_describe()},
                   {"wall_clock_seconds", clock.seconds()}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) {
    throw config_error("cannot write manifest in " + out_dir);
  }
  out << manifest.dump(2) << "\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw config_error("cannot create output directory " + dir + ": " +
                       ec.message());
  }
}

// Manual pre-scan for --config so file values can become flag defaults
// (precedence: flags > file > built-in defaults).
json load_config_file(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config file " + path + " is not valid JSON: " +
                       e.what());
  }
  if (!j.is_object()) {
    throw config_error("config file " + path + " must hold a JSON object");
  }
  return j;
}

template <typename T>
void from_cfg(const json& j, const std::string& key, T& var) {
  if (j.contains(key)) {
    try {
      var = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw config_error("config key \"" + key + "\" has the wrong type");
    }
  }
}

std::uint64_t env_seed_default() {
  const char* env = std::getenv("SPLAB_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw config_error("SPLAB_SEED must be an unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

// Parsed for interface compatibility; this build executes serially (the
// bit-exact reference mode) regardless of the requested cap.
long env_threads() {
  const char* env = std::getenv("SPLAB_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || v < 0) {
    throw config_error("SPLAB_THREADS must be a nonnegative integer");
  }
  return v;
}

Tensor with_channel(const Tensor& t) {
  std::vector<std::size_t> shape = t.shape;
  shape.push_back(1);
  return t.reshaped(shape);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ------------------------------------------------------- shared option sets

struct DataOpts {
  std::string path;
  void wire(CLI::App* sub, const json& cfg) {
    from_cfg(cfg, "data", path);
    sub->add_option("--data", path, "dataset file")->required(path.empty());
  }
};

struct TrainOpts {
  TrainConfig tc;
  void wire(CLI::App* sub, const json& cfg) {
    from_cfg(cfg, "steps", tc.steps);
    from_cfg(cfg, "lr", tc.lr);
    from_cfg(cfg, "batch", tc.batch);
    from_cfg(cfg, "eval-every", tc.eval_every);
    from_cfg(cfg, "cosine", tc.cosine);
    from_cfg(cfg, "weight-decay", tc.weight_decay);
    from_cfg(cfg, "loss", tc.loss);
    sub->add_option("--steps", tc.steps, "optimizer steps");
    sub->add_option("--lr", tc.lr, "learning rate");
    sub->add_option("--batch", tc.batch, "batch size");
    sub->add_option("--eval-every", tc.eval_every, "evaluation cadence");
    sub->add_flag("--cosine", tc.cosine, "half-cosine learning-rate decay");
    sub->add_option("--weight-decay", tc.weight_decay, "decoupled decay");
    sub->add_option("--loss", tc.loss, "training loss: mse | l2re");
  }
};

struct PeftOpts {
  std::string kind = "f-adapter";
  PeftConfig pc;
  void wire(CLI::App* sub, const json& cfg) {
    from_cfg(cfg, "kind", kind);
    from_cfg(cfg, "bands", pc.bands);
    from_cfg(cfg, "rmin", pc.r_min);
    from_cfg(cfg, "rmax", pc.r_max);
    from_cfg(cfg, "p", pc.p);
    from_cfg(cfg, "adapter-scale", pc.adapter_scale);
    from_cfg(cfg, "annulus", pc.annulus_bands);
    from_cfg(cfg, "order", pc.series_order);
    from_cfg(cfg, "rank", pc.rank);
    from_cfg(cfg, "lora-lambda", pc.lora_lambda);
    sub->add_option("--kind", kind, "fine-tune kind");
    sub->add_option("--bands", pc.bands, "frequency bands");
    sub->add_option("--rmin", pc.r_min, "smallest bottleneck width");
    sub->add_option("--rmax", pc.r_max, "largest bottleneck width");
    sub->add_option("--p", pc.p, "schedule sharpness exponent");
    sub->add_option("--adapter-scale", pc.adapter_scale, "adapter gain");
    sub->add_flag("--annulus", pc.annulus_bands,
                  "annulus-shaped 2-D frequency bands");
    sub->add_option("--order", pc.series_order,
                    "series order for chebyshev/fourierkan");
    sub->add_option("--rank", pc.rank, "low-rank factor rank");
    sub->add_option("--lora-lambda", pc.lora_lambda,
                    "low-rank scaling numerator (0: rank)");
  }
  PeftConfig resolved() const {
    PeftConfig out = pc;
    out.kind = peft_kind_from_string(kind);
    return out;
  }
};

Dataset load_data(const std::string& path) {
  if (path.empty()) throw config_error("--data is required");
  return read_dataset(path);
}

}  // namespace

// ------------------------------------------------------------------ run_cli

int run_cli(int argc, char** argv) {
  RunClock clock;
  int exit_code = 0;
  try {
    const json cfg = load_config_file(argc, argv);
    const std::uint64_t seed_default = env_seed_default();
    (void)env_threads();

    CLI::App app{
        "spectral fine-tuning laboratory: frequency-adaptive adapters on a "
        "Fourier-layer backbone, with numerical bound verifiers"};
    app.require_subcommand(1);
    app.footer(
        "Environment: SPLAB_SEED sets the default --seed; SPLAB_THREADS is "
        "parsed for compatibility (this build runs serially, the bit-exact "
        "reference mode).\nConfig files: --config FILE supplies JSON "
        "defaults; explicit flags win.");

    // ---- schedule ------------------------------------------------------
    auto* sc = app.add_subcommand(
        "schedule", "print per-band bottleneck widths for a schedule");
    struct {
      std::size_t rmin = 4, rmax = 16, bands = 4, modes = 16;
      double p = 2.0;
      bool inverse = false;
      std::string config;
    } sc_o;
    from_cfg(cfg, "rmin", sc_o.rmin);
    from_cfg(cfg, "rmax", sc_o.rmax);
    from_cfg(cfg, "p", sc_o.p);
    from_cfg(cfg, "bands", sc_o.bands);
    from_cfg(cfg, "modes", sc_o.modes);
    from_cfg(cfg, "inverse", sc_o.inverse);
    sc->add_option("--rmin", sc_o.rmin, "smallest bottleneck width");
    sc->add_option("--rmax", sc_o.rmax, "largest bottleneck width");
    sc->add_option("--p", sc_o.p, "sharpness exponent");
    sc->add_option("--bands", sc_o.bands, "number of bands");
    sc->add_option("--modes", sc_o.modes, "retained modes per axis");
    sc->add_flag("--inverse", sc_o.inverse, "widths grow with frequency");
    sc->add_option("--config", sc_o.config, "JSON defaults file");
    sc->callback([&]() {
      BandSchedule s = make_band_schedule(sc_o.modes, sc_o.bands, sc_o.rmin,
                                          sc_o.rmax, sc_o.p, sc_o.inverse);
      for (std::size_t b = 0; b < s.widths.size(); ++b) {
        std::cout << (b == 0 ? "" : " ") << s.widths[b];
      }
      std::cout << "\n";
    });

    // ---- gen-data ------------------------------------------------------
    auto* gd = app.add_subcommand("gen-data",
                                  "generate a PDE transfer dataset");
    struct {
      TaskSpec spec;
      std::string out = "out-data";
      std::string config;
    } gd_o;
    gd_o.spec.seed = seed_default;
    from_cfg(cfg, "solver", gd_o.spec.solver);
    from_cfg(cfg, "grid", gd_o.spec.grid);
    from_cfg(cfg, "alpha", gd_o.spec.alpha);
    from_cfg(cfg, "nu", gd_o.spec.nu);
    from_cfg(cfg, "dt", gd_o.spec.dt);
    from_cfg(cfg, "steps", gd_o.spec.steps);
    from_cfg(cfg, "samples", gd_o.spec.samples);
    from_cfg(cfg, "seed", gd_o.spec.seed);
    from_cfg(cfg, "amp-lo", gd_o.spec.amp_lo);
    from_cfg(cfg, "amp-hi", gd_o.spec.amp_hi);
    from_cfg(cfg, "out", gd_o.out);
    gd->add_option("--solver", gd_o.spec.solver, "heat | burgers");
    gd->add_option("--grid", gd_o.spec.grid, "grid sizes per axis");
    gd->add_option("--alpha", gd_o.spec.alpha, "input-field decay");
    gd->add_option("--nu", gd_o.spec.nu, "viscosity");
    gd->add_option("--dt", gd_o.spec.dt, "integrator step");
    gd->add_option("--steps", gd_o.spec.steps, "integrator steps");
    gd->add_option("--samples", gd_o.spec.samples, "sample count");
    gd->add_option("--seed", gd_o.spec.seed, "generation seed");
    gd->add_option("--amp-lo", gd_o.spec.amp_lo, "amplitude draw lower");
    gd->add_option("--amp-hi", gd_o.spec.amp_hi, "amplitude draw upper");
    gd->add_option("--out", gd_o.out, "output directory");
    gd->add_option("--config", gd_o.config, "JSON defaults file");
    gd->callback([&]() {
      ensure_dir(gd_o.out);
      Dataset ds = build_dataset(gd_o.spec);
      const std::string path = gd_o.out + "/dataset.bin";
      write_dataset(path, ds);
      std::cout << "wrote " << ds.spec.samples << " samples to " << path
                << "\n";
      write_manifest(gd_o.out, "gen-data", gd_o.spec.to_json(),
                     gd_o.spec.seed, {path}, clock);
    });

    // ---- pretrain ------------------------------------------------------
    auto* pt = app.add_subcommand("pretrain",
                                  "train a fresh backbone on a dataset");
    struct {
      DataOpts data;
      TrainOpts train;
      BackboneConfig bc;
      std::uint64_t seed = 0;
      std::string out = "out-pretrain";
      std::string config;
    } pt_o;
    pt_o.seed = seed_default;
    pt_o.bc.width = 16;
    pt_o.bc.blocks = 4;
    pt_o.bc.layers = 2;
    pt_o.bc.modes = 16;
    pt_o.data.wire(pt, cfg);
    pt_o.train.wire(pt, cfg);
    from_cfg(cfg, "width", pt_o.bc.width);
    from_cfg(cfg, "blocks", pt_o.bc.blocks);
    from_cfg(cfg, "layers", pt_o.bc.layers);
    from_cfg(cfg, "modes", pt_o.bc.modes);
    from_cfg(cfg, "temporal-modes", pt_o.bc.temporal_modes);
    from_cfg(cfg, "seed", pt_o.seed);
    from_cfg(cfg, "out", pt_o.out);
    pt->add_option("--width", pt_o.bc.width, "channel width");
    pt->add_option("--blocks", pt_o.bc.blocks, "channel blocks");
    pt->add_option("--layers", pt_o.bc.layers, "spectral layers");
    pt->add_option("--modes", pt_o.bc.modes, "retained modes per axis");
    pt->add_option("--temporal-modes", pt_o.bc.temporal_modes,
                   "temporal mode multiplier");
    bool pt_no_mlp = false;
    pt->add_flag("--no-mlp", pt_no_mlp, "skip the pointwise MLP");
    pt->add_option("--seed", pt_o.seed, "init/train seed");
    pt->add_option("--out", pt_o.out, "output directory");
    pt->add_option("--config", pt_o.config, "JSON defaults file");
    pt->callback([&]() {
      ensure_dir(pt_o.out);
      Dataset ds = load_data(pt_o.data.path);
      SplitView split = split_dataset(ds);
      pt_o.bc.spatial_dims = ds.spec.grid.size();
      pt_o.bc.grid = ds.spec.grid;
      pt_o.bc.in_channels = 1;
      pt_o.bc.out_channels = 1;
      pt_o.bc.use_mlp = !pt_no_mlp;
      pt_o.bc.validate();
      pt_o.train.tc.seed = pt_o.seed;
      Prng rng(pt_o.seed);
      Model model = make_model(pt_o.bc, rng);
      TrainResult res = pretrain(
          model, with_channel(split.train_inputs),
          with_channel(split.train_targets), with_channel(split.test_inputs),
          with_channel(split.test_targets), pt_o.train.tc, pt_o.out);
      std::cout << "final test L2RE " << res.final_test_l2re << " (best "
                << res.best_test_l2re << ")\n";
      json config = {{"data", pt_o.data.path},
                     {"backbone", backbone_config_to_json(pt_o.bc)},
                     {"train", train_config_to_json(pt_o.train.tc)}};
      write_manifest(pt_o.out, "pretrain", config, pt_o.seed,
                     {pt_o.out + "/checkpoint_final.bin",
                      pt_o.out + "/checkpoint_best.bin",
                      pt_o.out + "/trace.csv"},
                     clock);
    });

    // ---- finetune ------------------------------------------------------
    auto* ft = app.add_subcommand(
        "finetune", "attach a fine-tune family to a checkpoint and train");
    struct {
      DataOpts data;
      TrainOpts train;
      PeftOpts peft;
      std::string checkpoint;
      std::uint64_t seed = 0;
      std::string out = "out-finetune";
      std::string config;
    } ft_o;
    ft_o.seed = seed_default;
    ft_o.data.wire(ft, cfg);
    ft_o.train.wire(ft, cfg);
    ft_o.peft.wire(ft, cfg);
    from_cfg(cfg, "checkpoint", ft_o.checkpoint);
    from_cfg(cfg, "seed", ft_o.seed);
    from_cfg(cfg, "out", ft_o.out);
    ft->add_option("--checkpoint", ft_o.checkpoint, "pretrained weights")
        ->required(ft_o.checkpoint.empty());
    ft->add_option("--seed", ft_o.seed, "attach/train seed");
    ft->add_option("--out", ft_o.out, "output directory");
    ft->add_option("--config", ft_o.config, "JSON defaults file");
    ft->callback([&]() {
      ensure_dir(ft_o.out);
      Dataset ds = load_data(ft_o.data.path);
      SplitView split = split_dataset(ds);
      Checkpoint cp = load_checkpoint(ft_o.checkpoint);
      PeftConfig pc = ft_o.peft.resolved();
      Prng rng(ft_o.seed);
      attach_peft(cp.model, pc, rng);
      TrainableReport census = census_params(cp.model);
      std::cout << "trainable " << census.trainable << " of "
                << census.total;
      if (census.formula > 0)
        std::cout << " (closed-form " << census.formula << ")";
      std::cout << "\n";
      ft_o.train.tc.seed = ft_o.seed;
      TrainResult res = finetune(
          cp.model, with_channel(split.train_inputs),
          with_channel(split.train_targets), with_channel(split.test_inputs),
          with_channel(split.test_targets), ft_o.train.tc, ft_o.out);
      std::cout << "final test L2RE " << res.final_test_l2re << " (best "
                << res.best_test_l2re << ")\n";
      json config = {{"data", ft_o.data.path},
                     {"checkpoint", ft_o.checkpoint},
                     {"peft", peft_config_to_json(pc)},
                     {"train", train_config_to_json(ft_o.train.tc)},
                     {"trainable", census.trainable},
                     {"total", census.total}};
      write_manifest(ft_o.out, "finetune", config, ft_o.seed,
                     {ft_o.out + "/checkpoint_final.bin",
                      ft_o.out + "/checkpoint_best.bin",
                      ft_o.out + "/trace.csv"},
                     clock);
    });

    // ---- compare -------------------------------------------------------
    auto* cp_cmd = app.add_subcommand(
        "compare", "fine-tune several families at matched budgets");
    struct {
      DataOpts data;
      TrainOpts train;
      PeftOpts peft;
      std::string checkpoint;
      std::string kinds = "f-adapter,adapter,f-inverse-adapter,lora";
      std::size_t seeds = 1;
      std::uint64_t seed = 0;
      std::string out = "out-compare";
      std::string config;
    } cmp_o;
    cmp_o.seed = seed_default;
    cmp_o.data.wire(cp_cmd, cfg);
    cmp_o.train.wire(cp_cmd, cfg);
    cmp_o.peft.wire(cp_cmd, cfg);
    from_cfg(cfg, "checkpoint", cmp_o.checkpoint);
    from_cfg(cfg, "kinds", cmp_o.kinds);
    from_cfg(cfg, "seeds", cmp_o.seeds);
    from_cfg(cfg, "seed", cmp_o.seed);
    from_cfg(cfg, "out", cmp_o.out);
    cp_cmd->add_option("--checkpoint", cmp_o.checkpoint, "pretrained weights")
        ->required(cmp_o.checkpoint.empty());
    cp_cmd->add_option("--kinds", cmp_o.kinds, "comma-separated kind list");
    cp_cmd->add_option("--seeds", cmp_o.seeds, "replicate count");
    cp_cmd->add_option("--seed", cmp_o.seed, "base seed");
    cp_cmd->add_option("--out", cmp_o.out, "output directory");
    cp_cmd->add_option("--config", cmp_o.config, "JSON defaults file");
    cp_cmd->callback([&]() {
      ensure_dir(cmp_o.out);
      Dataset ds = load_data(cmp_o.data.path);
      SplitView split = split_dataset(ds);
      const Tensor tri = with_channel(split.train_inputs);
      const Tensor trt = with_channel(split.train_targets);
      const Tensor tei = with_channel(split.test_inputs);
      const Tensor tet = with_channel(split.test_targets);
      const std::vector<std::string> kinds = split_csv(cmp_o.kinds);
      if (kinds.empty()) throw config_error("compare: empty kind list");
      json results = json::array();
      std::vector<std::vector<double>> rows;
      for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        PeftConfig pc = cmp_o.peft.pc;
        pc.kind = peft_kind_from_string(kinds[ki]);
        double mean = 0.0;
        json per_seed = json::array();
        long long trainable = 0;
        for (std::size_t s = 0; s < cmp_o.seeds; ++s) {
          const std::uint64_t run_seed = cmp_o.seed + s;
          Checkpoint cp = load_checkpoint(cmp_o.checkpoint);
          Prng rng(run_seed);
          attach_peft(cp.model, pc, rng);
          trainable = census_params(cp.model).trainable;
          TrainConfig tc = cmp_o.train.tc;
          tc.seed = run_seed;
          TrainResult res =
              finetune(cp.model, tri, trt, tei, tet, tc, "");
          mean += res.final_test_l2re;
          per_seed.push_back(res.final_test_l2re);
          rows.push_back({static_cast<double>(ki),
                          static_cast<double>(run_seed),
                          static_cast<double>(trainable),
                          res.final_test_l2re});
          std::cout << kinds[ki] << " seed " << run_seed << " L2RE "
                    << res.final_test_l2re << "\n";
        }
        mean /= static_cast<double>(cmp_o.seeds);
        results.push_back({{"kind", kinds[ki]},
                           {"trainable", trainable},
                           {"l2re_per_seed", per_seed},
                           {"l2re_mean", mean}});
        std::cout << kinds[ki] << " mean L2RE " << mean << " (trainable "
                  << trainable << ")\n";
      }
      const std::string csv = csv_name(cmp_o.out, "compare", cmp_o.seed);
      write_csv(csv, {"kind_index", "seed", "trainable", "test_l2re"}, rows);
      const std::string report = cmp_o.out + "/compare.json";
      std::ofstream rf(report);
      if (!rf) throw config_error("cannot write " + report);
      rf << json({{"kinds", kinds}, {"results", results}}).dump(2) << "\n";
      json config = {{"data", cmp_o.data.path},
                     {"checkpoint", cmp_o.checkpoint},
                     {"kinds", cmp_o.kinds},
                     {"seeds", cmp_o.seeds},
                     {"train", train_config_to_json(cmp_o.train.tc)}};
      write_manifest(cmp_o.out, "compare", config, cmp_o.seed, {csv, report},
                     clock);
    });

    // ---- drop-high -----------------------------------------------------
    auto* dh = app.add_subcommand(
        "drop-high", "band-limited input sensitivity curve of a checkpoint");
    struct {
      DataOpts data;
      std::string checkpoint;
      std::size_t bands = 8;
      std::uint64_t seed = 0;
      std::string out = "out-drop-high";
      std::string config;
    } dh_o;
    dh_o.seed = seed_default;
    dh_o.data.wire(dh, cfg);
    from_cfg(cfg, "checkpoint", dh_o.checkpoint);
    from_cfg(cfg, "bands", dh_o.bands);
    from_cfg(cfg, "seed", dh_o.seed);
    from_cfg(cfg, "out", dh_o.out);
    dh->add_option("--checkpoint", dh_o.checkpoint, "model weights")
        ->required(dh_o.checkpoint.empty());
    dh->add_option("--bands", dh_o.bands, "number of uniform bands");
    dh->add_option("--seed", dh_o.seed, "label for the output file");
    dh->add_option("--out", dh_o.out, "output directory");
    dh->add_option("--config", dh_o.config, "JSON defaults file");
    dh->callback([&]() {
      ensure_dir(dh_o.out);
      Dataset ds = load_data(dh_o.data.path);
      SplitView split = split_dataset(ds);
      Checkpoint cp = load_checkpoint(dh_o.checkpoint);
      auto curve = drop_high_curve(cp.model, with_channel(split.test_inputs),
                                   with_channel(split.test_targets),
                                   dh_o.bands);
      std::vector<std::vector<double>> rows;
      for (const auto& [k, err] : curve) {
        rows.push_back({static_cast<double>(k), err});
        std::cout << "keep " << k << " bands: L2RE " << err << "\n";
      }
      const std::string csv = csv_name(dh_o.out, "drop_high", dh_o.seed);
      write_csv(csv, {"kept_bands", "test_l2re"}, rows);
      json config = {{"data", dh_o.data.path},
                     {"checkpoint", dh_o.checkpoint},
                     {"bands", dh_o.bands}};
      write_manifest(dh_o.out, "drop-high", config, dh_o.seed, {csv}, clock);
    });

    // ---- diagnose-dw ---------------------------------------------------
    auto* dw = app.add_subcommand(
        "diagnose-dw", "singular-value report of weight deltas");
    struct {
      std::string before, after;
      std::uint64_t seed = 0;
      std::string out = "out-diagnose";
      std::string config;
    } dw_o;
    dw_o.seed = seed_default;
    from_cfg(cfg, "before", dw_o.before);
    from_cfg(cfg, "after", dw_o.after);
    from_cfg(cfg, "seed", dw_o.seed);
    from_cfg(cfg, "out", dw_o.out);
    dw->add_option("--before", dw_o.before, "checkpoint before training")
        ->required(dw_o.before.empty());
    dw->add_option("--after", dw_o.after, "checkpoint after training")
        ->required(dw_o.after.empty());
    dw->add_option("--seed", dw_o.seed, "label for the output file");
    dw->add_option("--out", dw_o.out, "output directory");
    dw->add_option("--config", dw_o.config, "JSON defaults file");
    dw->callback([&]() {
      ensure_dir(dw_o.out);
      Checkpoint before = load_checkpoint(dw_o.before);
      Checkpoint after = load_checkpoint(dw_o.after);
      auto entries = diagnose_delta_w(before.model.store, after.model.store);
      const std::string report = dw_o.out + "/delta_w.json";
      std::ofstream rf(report);
      if (!rf) throw config_error("cannot write " + report);
      rf << delta_w_report_json(entries).dump(2) << "\n";
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        rows.push_back({static_cast<double>(i),
                        static_cast<double>(entries[i].effective_rank),
                        static_cast<double>(entries[i].modes_to_energy)});
        std::cout << entries[i].name << ": effective rank "
                  << entries[i].effective_rank << ", modes to 90% energy "
                  << entries[i].modes_to_energy << "\n";
      }
      const std::string csv = csv_name(dw_o.out, "delta_w", dw_o.seed);
      write_csv(csv, {"entry", "effective_rank", "modes_to_energy"}, rows);
      json config = {{"before", dw_o.before}, {"after", dw_o.after}};
      write_manifest(dw_o.out, "diagnose-dw", config, dw_o.seed,
                     {report, csv}, clock);
    });

    // ---- spectrum ------------------------------------------------------
    auto* sp = app.add_subcommand(
        "spectrum", "energy-spectrum fidelity of model predictions");
    struct {
      DataOpts data;
      std::string checkpoint;
      std::uint64_t seed = 0;
      std::string out = "out-spectrum";
      std::string config;
    } sp_o;
    sp_o.seed = seed_default;
    sp_o.data.wire(sp, cfg);
    from_cfg(cfg, "checkpoint", sp_o.checkpoint);
    from_cfg(cfg, "seed", sp_o.seed);
    from_cfg(cfg, "out", sp_o.out);
    sp->add_option("--checkpoint", sp_o.checkpoint,
                   "model weights (omit: target spectrum only)");
    sp->add_option("--seed", sp_o.seed, "label for the output file");
    sp->add_option("--out", sp_o.out, "output directory");
    sp->add_option("--config", sp_o.config, "JSON defaults file");
    sp->callback([&]() {
      ensure_dir(sp_o.out);
      Dataset ds = load_data(sp_o.data.path);
      SplitView split = split_dataset(ds);
      const std::size_t n_test = split.test_inputs.shape[0];
      if (n_test == 0) throw config_error("spectrum: empty test split");
      std::vector<Tensor> ref_fields;
      for (std::size_t i = 0; i < n_test; ++i) {
        Tensor f = take_samples(split.test_targets, i, i + 1);
        std::vector<std::size_t> s(f.shape.begin() + 1, f.shape.end());
        ref_fields.push_back(f.reshaped(s));
      }
      SpectrumProfile ref = energy_spectrum(ref_fields);
      json report = {{"shells", ref.energy.size()},
                     {"reference_residual", ref.residual}};
      std::vector<std::vector<double>> rows;
      if (!sp_o.checkpoint.empty()) {
        Checkpoint cp = load_checkpoint(sp_o.checkpoint);
        Tensor pred = forward_field(cp.model, with_channel(split.test_inputs));
        Tensor flat = pred.reshaped(split.test_inputs.shape);
        std::vector<Tensor> pred_fields;
        for (std::size_t i = 0; i < n_test; ++i) {
          Tensor f = take_samples(flat, i, i + 1);
          std::vector<std::size_t> s(f.shape.begin() + 1, f.shape.end());
          pred_fields.push_back(f.reshaped(s));
        }
        SpectrumProfile ps = energy_spectrum(pred_fields);
        std::size_t excluded = 0;
        const double rmsle = rmsle_spectrum(ps, ref, &excluded);
        const double relerr = relerr_energy(ps, ref);
        report["rmsle"] = rmsle;
        report["excluded_shells"] = excluded;
        report["energy_relerr_percent"] = relerr;
        std::cout << "RMSLE " << rmsle << " (excluded " << excluded
                  << " shells), energy error " << relerr << "%\n";
        for (std::size_t i = 0; i < ref.energy.size(); ++i) {
          rows.push_back({static_cast<double>(i), ps.energy[i],
                          ref.energy[i]});
        }
        write_csv(csv_name(sp_o.out, "spectrum", sp_o.seed),
                  {"shell", "predicted", "reference"}, rows);
      } else {
        for (std::size_t i = 0; i < ref.energy.size(); ++i) {
          rows.push_back({static_cast<double>(i), ref.energy[i]});
        }
        write_csv(csv_name(sp_o.out, "spectrum", sp_o.seed),
                  {"shell", "reference"}, rows);
        std::cout << "reference spectrum over " << ref.energy.size()
                  << " shells\n";
      }
      const std::string rp = sp_o.out + "/spectrum.json";
      std::ofstream rf(rp);
      if (!rf) throw config_error("cannot write " + rp);
      rf << report.dump(2) << "\n";
      json config = {{"data", sp_o.data.path},
                     {"checkpoint", sp_o.checkpoint}};
      write_manifest(sp_o.out, "spectrum", config, sp_o.seed,
                     {csv_name(sp_o.out, "spectrum", sp_o.seed), rp}, clock);
    });

    // ---- adapter-vs-trunc ---------------------------------------------
    auto* at = app.add_subcommand(
        "adapter-vs-trunc",
        "trained-adapter vs optimal-truncation error on synthetic data");
    struct {
      std::size_t n = 20000, dim = 64;
      std::string ranks = "4,8,16,32", widths = "4,8,16,32";
      std::uint64_t seed = 0;
      std::string out = "out-adapter-vs-trunc";
      std::string config;
    } at_o;
    at_o.seed = seed_default;
    from_cfg(cfg, "n", at_o.n);
    from_cfg(cfg, "dim", at_o.dim);
    from_cfg(cfg, "ranks", at_o.ranks);
    from_cfg(cfg, "widths", at_o.widths);
    from_cfg(cfg, "seed", at_o.seed);
    from_cfg(cfg, "out", at_o.out);
    at->add_option("--n", at_o.n, "activation rows");
    at->add_option("--dim", at_o.dim, "feature dimension");
    at->add_option("--ranks", at_o.ranks, "comma-separated ranks");
    at->add_option("--widths", at_o.widths, "comma-separated widths");
    at->add_option("--seed", at_o.seed, "problem seed");
    at->add_option("--out", at_o.out, "output directory");
    at->add_option("--config", at_o.config, "JSON defaults file");
    at->callback([&]() {
      ensure_dir(at_o.out);
      auto parse_sizes = [](const std::string& s) {
        std::vector<std::size_t> out;
        for (const std::string& tok : split_csv(s)) {
          out.push_back(static_cast<std::size_t>(std::stoull(tok)));
        }
        return out;
      };
      SyntheticActivations prob =
          make_synthetic_activation_problem(at_o.n, at_o.dim, at_o.seed);
      RmseTable table = adapter_vs_truncation_experiment(
          prob.h, prob.delta_w, parse_sizes(at_o.ranks),
          parse_sizes(at_o.widths), at_o.seed);
      const std::string rp = at_o.out + "/rmse_table.json";
      std::ofstream rf(rp);
      if (!rf) throw config_error("cannot write " + rp);
      rf << table.to_json().dump(2) << "\n";
      for (std::size_t i = 0; i < table.ranks.size(); ++i) {
        std::cout << "rank " << table.ranks[i] << ": truncation RMSE "
                  << table.truncation_rmse[i] << "\n";
      }
      for (std::size_t i = 0; i < table.widths.size(); ++i) {
        std::cout << "width " << table.widths[i] << ": adapter RMSE "
                  << table.adapter_rmse[i] << "\n";
      }
      json config = {{"n", at_o.n},
                     {"dim", at_o.dim},
                     {"ranks", at_o.ranks},
                     {"widths", at_o.widths}};
      write_manifest(at_o.out, "adapter-vs-trunc", config, at_o.seed, {rp},
                     clock);
    });

    // ---- verify-theory -------------------------------------------------
    auto* vt = app.add_subcommand(
        "verify-theory", "numerical verification of the analysis bounds");
    struct {
      int prop = 0;
      std::string lemma;
      TheoryConfig tc;
      std::string out;
      std::string config;
    } vt_o;
    vt_o.tc.seed = seed_default;
    from_cfg(cfg, "prop", vt_o.prop);
    from_cfg(cfg, "lemma", vt_o.lemma);
    from_cfg(cfg, "trials", vt_o.tc.trials);
    from_cfg(cfg, "alpha", vt_o.tc.alpha);
    from_cfg(cfg, "s", vt_o.tc.sobolev_s);
    from_cfg(cfg, "m", vt_o.tc.sobolev_m);
    from_cfg(cfg, "dim", vt_o.tc.dim);
    from_cfg(cfg, "kcut", vt_o.tc.k_cut);
    from_cfg(cfg, "seed", vt_o.tc.seed);
    from_cfg(cfg, "out", vt_o.out);
    vt->add_option("--prop", vt_o.prop,
                   "1: low-rank floor, 2: error decomposition, 3: tail "
                   "scaling");
    vt->add_option("--lemma", vt_o.lemma,
                   "named lemma checks: decay (coefficient envelope)");
    vt->add_option("--trials", vt_o.tc.trials, "random trials");
    vt->add_option("--alpha", vt_o.tc.alpha, "smoothness order");
    vt->add_option("--s", vt_o.tc.sobolev_s, "tail smoothness");
    vt->add_option("--m", vt_o.tc.sobolev_m, "tail magnitude");
    vt->add_option("--dim", vt_o.tc.dim, "spatial dimension (1 or 2)");
    vt->add_option("--kcut", vt_o.tc.k_cut, "spatial support cutoff");
    vt->add_option("--seed", vt_o.tc.seed, "trial seed");
    vt->add_option("--out", vt_o.out, "optional output directory");
    vt->add_option("--config", vt_o.config, "JSON defaults file");
    vt->callback([&]() {
      BoundReport report;
      if (!vt_o.lemma.empty()) {
        if (vt_o.lemma != "decay") {
          throw config_error("unknown lemma check \"" + vt_o.lemma +
                             "\"; available: decay");
        }
        report = verify_spectral_decay(vt_o.tc);
      } else if (vt_o.prop == 1) {
        report = verify_blockwise_lora_bound(vt_o.tc);
      } else if (vt_o.prop == 2) {
        report = verify_adapter_error_decomposition(vt_o.tc);
      } else if (vt_o.prop == 3) {
        report = verify_tail_energy_split(vt_o.tc);
      } else {
        throw config_error("verify-theory: pass --prop 1|2|3 or --lemma");
      }
      std::size_t passed = 0;
      for (const TrialRecord& t : report.trials) passed += t.pass ? 1 : 0;
      json j = report.to_json();
      j["passed_trials"] = passed;
      j["trial_count"] = report.trials.size();
      std::cout << j.dump(2) << "\n";
      std::cout << report.name << ": " << passed << "/"
                << report.trials.size() << " trials pass, overall "
                << (report.pass ? "PASS" : "FAIL") << "\n";
      if (!vt_o.out.empty()) {
        ensure_dir(vt_o.out);
        const std::string rp = vt_o.out + "/theory_report.json";
        std::ofstream rf(rp);
        if (!rf) throw config_error("cannot write " + rp);
        rf << j.dump(2) << "\n";
        json config = {{"prop", vt_o.prop},
                       {"lemma", vt_o.lemma},
                       {"trials", vt_o.tc.trials},
                       {"alpha", vt_o.tc.alpha},
                       {"s", vt_o.tc.sobolev_s},
                       {"m", vt_o.tc.sobolev_m},
                       {"dim", vt_o.tc.dim},
                       {"kcut", vt_o.tc.k_cut}};
        write_manifest(vt_o.out, "verify-theory", config, vt_o.tc.seed, {rp},
                       clock);
      }
      if (!report.pass) {
        throw numeric_error(report.name + ": bound verification failed");
      }
    });

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << e.what() << "\n"
                << "Run '" << (argc > 0 ? argv[0] : "splab")
                << " --help' for usage.\n";
      return 2;
    }
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

}  // namespace splab
