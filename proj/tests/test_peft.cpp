#include <doctest.h>

#include <cmath>
#include <vector>

#include "splab/autodiff.hpp"
#include "splab/backbone.hpp"
#include "splab/errors.hpp"
#include "splab/peft.hpp"
#include "splab/rng.hpp"

using namespace splab;

namespace {

BackboneConfig host_config() {
  BackboneConfig cfg;
  cfg.spatial_dims = 1;
  cfg.grid = {16};
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  cfg.width = 8;
  cfg.blocks = 2;
  cfg.layers = 2;
  cfg.modes = 8;
  return cfg;
}

// Fresh backbone plus an attachment, both from fixed seeds.
Model attached(PeftKind kind, std::size_t bands = 4, std::size_t r_min = 2,
               std::size_t r_max = 5) {
  Prng build(303);
  Model model = make_model(host_config(), build);
  PeftConfig pc;
  pc.kind = kind;
  pc.bands = bands;
  pc.r_min = r_min;
  pc.r_max = r_max;
  pc.p = 2.0;
  pc.rank = 3;
  Prng attach_rng(404);
  attach_peft(model, pc, attach_rng);
  return model;
}

}  // namespace

TEST_SUITE("peft") {

// ---------------------------------------------------------------- schedule

TEST_CASE("band boundaries split the retained modes evenly") {
  CHECK(band_boundaries(16, 4) ==
        std::vector<std::size_t>{0, 4, 8, 12, 16});
  CHECK(band_boundaries(16, 3) == std::vector<std::size_t>{0, 5, 10, 16});
  CHECK(band_boundaries(16, 1) == std::vector<std::size_t>{0, 16});
  std::vector<std::size_t> fine = band_boundaries(8, 8);
  for (std::size_t i = 0; i < fine.size(); ++i) CHECK(fine[i] == i);
  CHECK_THROWS_AS(band_boundaries(16, 0), config_error);
  CHECK_THROWS_AS(band_boundaries(8, 9), config_error);
}

TEST_CASE("width allocation matches hand-computed schedules") {
  const auto b = band_boundaries(16, 4);
  CHECK(allocate_widths(4, 16, 2.0, b, 16) ==
        std::vector<std::size_t>{13, 8, 5, 4});
  CHECK(inverse_widths(4, 16, 2.0, b, 16) ==
        std::vector<std::size_t>{4, 5, 8, 13});
  CHECK(allocate_widths(2, 9, 2.2, b, 16) ==
        std::vector<std::size_t>{7, 4, 2, 2});
  CHECK(inverse_widths(2, 9, 2.2, b, 16) ==
        std::vector<std::size_t>{2, 2, 4, 7});
  CHECK_THROWS_AS(allocate_widths(5, 4, 2.0, b, 16), config_error);
  CHECK_THROWS_AS(allocate_widths(0, 4, 2.0, b, 16), config_error);
  CHECK_THROWS_AS(allocate_widths(2, 4, 0.0, b, 16), config_error);
}

TEST_CASE("band schedule carries monotone widths and midpoints") {
  BandSchedule s = make_band_schedule(16, 4, 4, 16, 2.0, false);
  CHECK(s.modes == 16);
  CHECK(s.bands == 4);
  CHECK(s.boundaries == std::vector<std::size_t>{0, 4, 8, 12, 16});
  CHECK(s.centers == std::vector<double>{2.0, 6.0, 10.0, 14.0});
  CHECK(s.widths == std::vector<std::size_t>{13, 8, 5, 4});
  for (std::size_t i = 1; i < s.widths.size(); ++i) {
    CHECK(s.widths[i] <= s.widths[i - 1]);
  }
  BandSchedule inv = make_band_schedule(16, 4, 4, 16, 2.0, true);
  CHECK(inv.widths == std::vector<std::size_t>{4, 5, 8, 13});
  for (std::size_t i = 1; i < inv.widths.size(); ++i) {
    CHECK(inv.widths[i] >= inv.widths[i - 1]);
  }
}

// ----------------------------------------------------------- param counting

TEST_CASE("closed-form and enumerated budgets for banded triples") {
  ParamCounts c = count_params_eq13(8, 4, 1, {13, 8, 5, 4});
  CHECK(c.formula == 6120);  // (2*8+1)*4*(2+1)*30
  CHECK(c.actual == 6504);   // adds the up-projection biases

  ParamCounts small = count_params_eq13(2, 1, 2, {3});
  CHECK(small.formula == 60);  // 5*1*4*3
  CHECK(small.actual == 65);   // 17 + 31 + 17

  CHECK_THROWS_AS(count_params_eq13(0, 4, 1, {4}), config_error);
}

// ------------------------------------------------------ bottleneck adapter

TEST_CASE("fresh bottleneck adapter is an exact identity") {
  Prng rng(7);
  AdapterParams p = make_adapter_params(6, 3, 0.5, rng);
  CHECK(p.w_down.shape == std::vector<std::size_t>{3, 6});
  CHECK(p.b_down.shape == std::vector<std::size_t>{3});
  CHECK(p.w_up.shape == std::vector<std::size_t>{6, 3});
  for (double v : p.w_up.data) CHECK(v == 0.0);
  for (double v : p.b_up.data) CHECK(v == 0.0);
  for (double v : p.w_down.data) CHECK(std::abs(v) <= 1.0);  // sqrt(6/6)

  Tensor z = rng.normal_tensor({4, 6}, 0.0, 1.0);
  Tensor out = adapter_forward(z, p);
  CHECK(out.data == z.data);
}

TEST_CASE("bottleneck adapter matches the scalar closed form") {
  AdapterParams p;
  p.w_down = Tensor({1, 1}, {1.0});
  p.b_down = Tensor::zeros({1});
  p.w_up = Tensor({1, 1}, {1.0});
  p.b_up = Tensor::zeros({1});
  p.scale = 1.0;
  Tensor z({3, 1}, {1.0, 0.0, -1.0});
  Tensor out = adapter_forward(z, p);
  CHECK(out.data[0] ==
        doctest::Approx(1.0 + 0.8411919906082768).epsilon(1e-15));
  CHECK(out.data[1] == 0.0);
  CHECK(out.data[2] ==
        doctest::Approx(-1.0 + gelu_scalar(-1.0)).epsilon(1e-15));

  p.scale = 0.25;
  out = adapter_forward(z, p);
  CHECK(out.data[0] ==
        doctest::Approx(1.0 + 0.25 * 0.8411919906082768).epsilon(1e-15));

  Tensor wrong({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(adapter_forward(wrong, p), config_error);
}

// -------------------------------------------------------------------- lora

TEST_CASE("lora scaling and zero-init behave as documented") {
  Prng rng(8);
  LoraParams lam0 = make_lora_params(4, 2, 0.0, rng);
  CHECK(lam0.alpha == 1.0);  // lambda defaults to the rank
  LoraParams lam8 = make_lora_params(4, 2, 8.0, rng);
  CHECK(lam8.alpha == 4.0);
  CHECK(lam0.a.shape == std::vector<std::size_t>{2, 4});
  CHECK(lam0.b.shape == std::vector<std::size_t>{4, 2});
  for (double v : lam0.b.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(make_lora_params(4, 0, 0.0, rng), config_error);
  CHECK_THROWS_AS(make_lora_params(4, 5, 0.0, rng), config_error);

  Tensor w0 = rng.normal_tensor({4, 4}, 0.0, 1.0);
  Tensor x = rng.normal_tensor({4, 3}, 0.0, 1.0);
  Tensor base = matmul(w0, x);
  CHECK(lora_forward(x, w0, lam0).data == base.data);
}

TEST_CASE("lora update applies alpha * b @ a @ x") {
  LoraParams p;
  p.a = Tensor({2, 2}, {1, 0, 0, 1});
  p.b = Tensor({2, 2}, {1, 2, 3, 4});
  p.alpha = 2.0;
  Tensor w0 = Tensor::zeros({2, 2});
  Tensor x({2, 1}, {1.0, 1.0});
  Tensor out = lora_forward(x, w0, p);
  CHECK(out.data == std::vector<double>{6.0, 14.0});
  Tensor bad({3, 1}, {1, 2, 3});
  CHECK_THROWS_AS(lora_forward(bad, w0, p), config_error);
}

// --------------------------------------------------------- series adapters

TEST_CASE("chebyshev adapter: identity at creation, recurrence when loaded") {
  Prng rng(9);
  ChebyshevParams p = make_chebyshev_params(4, 2, 3, rng);
  CHECK(p.coeff.shape == std::vector<std::size_t>{4, 2, 4});
  for (double v : p.coeff.data) CHECK(v == 0.0);
  CHECK(p.alpha == 1.0);
  Tensor x = rng.normal_tensor({5, 4}, 0.0, 1.0);
  CHECK(chebyshev_adapter_forward(x, p).data == x.data);

  // One active coefficient selects T_2(tanh(x)) = 2 tanh(x)^2 - 1.
  ChebyshevParams q;
  q.w_down = Tensor({1, 1}, {1.0});
  q.b_down = Tensor::zeros({1});
  q.coeff = Tensor({1, 1, 3}, {0.0, 0.0, 1.0});
  q.alpha = 1.0;
  Tensor v({1, 1}, {0.7});
  const double z = std::tanh(0.7);
  CHECK(chebyshev_adapter_forward(v, q).data[0] ==
        doctest::Approx(0.7 + 2 * z * z - 1).epsilon(1e-15));
}

TEST_CASE("fourierkan adapter gates its series behind a zero alpha") {
  Prng rng(10);
  FourierKanParams p = make_fourierkan_params(4, 2, 3, rng);
  CHECK(p.a_coeff.shape == std::vector<std::size_t>{4, 2, 3});
  CHECK(p.b_coeff.shape == std::vector<std::size_t>{4, 2, 3});
  CHECK(p.alpha == 0.0);
  for (double v : p.ln_gamma.data) CHECK(v == 1.0);
  for (double v : p.ln_beta.data) CHECK(v == 0.0);
  // The series banks start random (attenuated by order), not zero.
  double mass = 0.0;
  for (double v : p.a_coeff.data) mass += std::abs(v);
  CHECK(mass > 0.0);

  Tensor x = rng.normal_tensor({5, 4}, 0.0, 1.0);
  CHECK(fourierkan_adapter_forward(x, p).data == x.data);
  CHECK_THROWS_AS(make_fourierkan_params(4, 2, 0, rng), config_error);
}

TEST_CASE("waveact adapter: identity at creation, wave mix when loaded") {
  Prng rng(11);
  WaveActParams p = make_waveact_params(3, 2, rng);
  CHECK(p.wave_a == 1.0);
  CHECK(p.wave_b == 1.0);
  CHECK(p.alpha == 1.0);
  for (double v : p.w_up.data) CHECK(v == 0.0);
  Tensor x = rng.normal_tensor({4, 3}, 0.0, 1.0);
  CHECK(waveact_adapter_forward(x, p).data == x.data);

  WaveActParams q;
  q.w_down = Tensor({1, 1}, {1.0});
  q.b_down = Tensor::zeros({1});
  q.w_up = Tensor({1, 1}, {1.0});
  q.b_up = Tensor::zeros({1});
  q.wave_a = 2.0;
  q.wave_b = 3.0;
  q.alpha = 1.0;
  Tensor v({1, 1}, {0.3});
  CHECK(waveact_adapter_forward(v, q).data[0] ==
        doctest::Approx(0.3 + 2 * std::sin(0.3) + 3 * std::cos(0.3))
            .epsilon(1e-15));
}

// ------------------------------------------------------------ kind strings

TEST_CASE("kind names round trip through the parser") {
  for (PeftKind kind :
       {PeftKind::full, PeftKind::lora, PeftKind::blockwise_lora,
        PeftKind::adapter, PeftKind::fadapter, PeftKind::finverse_adapter,
        PeftKind::chebyshev, PeftKind::fourierkan, PeftKind::waveact}) {
    CHECK(peft_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(peft_kind_from_string("none"), config_error);
  CHECK_THROWS_AS(peft_kind_from_string("f_adapter"), config_error);

  CHECK(is_band_kind(PeftKind::fadapter));
  CHECK(is_band_kind(PeftKind::adapter));
  CHECK(is_band_kind(PeftKind::waveact));
  CHECK_FALSE(is_band_kind(PeftKind::lora));
  CHECK_FALSE(is_band_kind(PeftKind::blockwise_lora));
  CHECK_FALSE(is_band_kind(PeftKind::full));
  CHECK_FALSE(is_band_kind(PeftKind::none));
}

// ------------------------------------------------------------- attachments

TEST_CASE("attachment freezes the backbone and adds tagged parameters") {
  Model model = attached(PeftKind::fadapter);
  Prng base_rng(303);
  Model base = make_model(host_config(), base_rng);

  for (std::size_t i = 0; i < base.store.size(); ++i) {
    CHECK_FALSE(model.store.trainable(i));
  }
  for (std::size_t i = base.store.size(); i < model.store.size(); ++i) {
    CHECK(model.store.trainable(i));
    CHECK(model.store.name(i).rfind("peft.", 0) == 0);
  }
  CHECK(model.store.find("peft.l0.k0.b0.in.w_down") != ParamStore::npos);
  CHECK(model.store.find("peft.l1.k1.b3.out.b_up") != ParamStore::npos);

  // widths from r in [2,5], p = 2 over modes 8: {4, 3, 2, 2}
  CHECK(model.schedule.widths == std::vector<std::size_t>{4, 3, 2, 2});
  TrainableReport rep = census_params(model);
  CHECK(rep.formula == 2 * 594);  // layers * (2d+1)*K*(2+h)*sum(r)
  long long backbone_total = 0;
  for (std::size_t i = 0; i < base.store.size(); ++i) {
    backbone_total += static_cast<long long>(base.store.value(i).size());
  }
  CHECK(rep.total == backbone_total + rep.trainable);
  CHECK(rep.trainable > 0);
}

TEST_CASE("flat adapter pins every band to the minimum width") {
  Model model = attached(PeftKind::adapter);
  CHECK(model.schedule.widths == std::vector<std::size_t>{2, 2, 2, 2});
  Model inv = attached(PeftKind::finverse_adapter);
  CHECK(inv.schedule.widths == std::vector<std::size_t>{2, 2, 3, 4});
}

TEST_CASE("full fine-tuning keeps everything trainable and adds nothing") {
  Model model = attached(PeftKind::full);
  Prng base_rng(303);
  Model base = make_model(host_config(), base_rng);
  CHECK(model.store.size() == base.store.size());
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    CHECK(model.store.trainable(i));
  }
  TrainableReport rep = census_params(model);
  CHECK(rep.trainable == rep.total);
  CHECK(rep.formula == 0);
}

TEST_CASE("attachment guards reject double or empty attachments") {
  Model model = attached(PeftKind::lora);
  PeftConfig pc;
  pc.kind = PeftKind::adapter;
  Prng rng(1);
  CHECK_THROWS_AS(attach_peft(model, pc, rng), config_error);

  Prng build(1);
  Model fresh = make_model(host_config(), build);
  PeftConfig none;
  CHECK_THROWS_AS(attach_peft(fresh, none, rng), config_error);

  PeftConfig huge;
  huge.kind = PeftKind::blockwise_lora;
  huge.rank = 100;  // exceeds the block width
  CHECK_THROWS_AS(attach_peft(fresh, huge, rng), config_error);
}

TEST_CASE("every fresh attachment leaves the forward pass bit-identical") {
  Prng base_rng(303);
  Model base = make_model(host_config(), base_rng);
  Prng data(505);
  Tensor x = data.normal_tensor({2, 16, 1}, 0.0, 1.0);
  Tensor want = forward_field(base, x);
  for (PeftKind kind :
       {PeftKind::lora, PeftKind::blockwise_lora, PeftKind::adapter,
        PeftKind::fadapter, PeftKind::finverse_adapter, PeftKind::chebyshev,
        PeftKind::fourierkan, PeftKind::waveact}) {
    INFO("kind " << to_string(kind));
    Model model = attached(kind);
    Tensor got = forward_field(model, x);
    CHECK(got.data == want.data);
  }
}

TEST_CASE("annulus bands keep the zero-init identity too") {
  BackboneConfig cfg = host_config();
  cfg.spatial_dims = 2;
  cfg.grid = {16, 16};
  Prng build(303);
  Model model = make_model(cfg, build);
  PeftConfig pc;
  pc.kind = PeftKind::fadapter;
  pc.bands = 4;
  pc.r_min = 2;
  pc.r_max = 5;
  pc.annulus_bands = true;
  Prng attach_rng(404);
  attach_peft(model, pc, attach_rng);
  Prng base_rng(303);
  Model base = make_model(cfg, base_rng);
  Prng data(505);
  Tensor x = data.normal_tensor({2, 16, 16, 1}, 0.0, 1.0);
  CHECK(forward_field(model, x).data == forward_field(base, x).data);
}

}  // TEST_SUITE
