#include <doctest.h>

#include <vector>

#include "splab/backbone.hpp"
#include "splab/errors.hpp"
#include "splab/rng.hpp"

using namespace splab;

namespace {

BackboneConfig small_config() {
  BackboneConfig cfg;
  cfg.spatial_dims = 1;
  cfg.grid = {16};
  cfg.in_channels = 2;
  cfg.out_channels = 3;
  cfg.width = 8;
  cfg.blocks = 2;
  cfg.layers = 2;
  cfg.modes = 8;
  return cfg;
}

// Cyclic shift along the spatial axis of a {batch, n, channels} field.
Tensor roll(const Tensor& x, std::size_t shift) {
  const std::size_t b = x.shape[0];
  const std::size_t n = x.shape[1];
  const std::size_t c = x.shape[2];
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        out.data[(i * n + (j + shift) % n) * c + k] =
            x.data[(i * n + j) * c + k];
      }
    }
  }
  return out;
}

// Paints every cell covered by `regions` onto an m x m (or m, in 1-D) grid,
// returning per-cell coverage counts and band tags.
struct Painting {
  std::vector<int> count;
  std::vector<int> band;
};

Painting paint(const std::vector<SpectralRegion>& regions, std::size_t dims,
               std::size_t m) {
  const std::size_t cells = dims == 1 ? m : m * m;
  Painting p{std::vector<int>(cells, 0), std::vector<int>(cells, -9)};
  for (const auto& reg : regions) {
    REQUIRE(reg.ranges.size() == dims);
    if (dims == 1) {
      for (std::size_t i = reg.ranges[0].first; i < reg.ranges[0].second;
           ++i) {
        p.count[i] += 1;
        p.band[i] = reg.band;
      }
    } else {
      for (std::size_t i = reg.ranges[0].first; i < reg.ranges[0].second;
           ++i) {
        for (std::size_t j = reg.ranges[1].first; j < reg.ranges[1].second;
             ++j) {
          p.count[i * m + j] += 1;
          p.band[i * m + j] = reg.band;
        }
      }
    }
  }
  return p;
}

}  // namespace

TEST_SUITE("backbone") {

// ------------------------------------------------------------- param store

TEST_CASE("param store keeps order, lookup, and the freeze mask") {
  ParamStore st;
  CHECK(st.add("a", Tensor::zeros({2}), true) == 0);
  CHECK(st.add("b", Tensor::zeros({3}), false) == 1);
  CHECK(st.add("c", Tensor::zeros({1}), true) == 2);
  CHECK(st.size() == 3);
  CHECK(st.name(1) == "b");
  CHECK(st.find("c") == 2);
  CHECK(st.find("nope") == ParamStore::npos);
  CHECK(st.at("a") == 0);
  CHECK_THROWS_AS(st.at("nope"), config_error);
  CHECK(st.trainable_indices() == std::vector<std::size_t>{0, 2});
  st.set_trainable(1, true);
  st.set_trainable(0, false);
  CHECK(st.trainable_indices() == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(st.add("a", Tensor::zeros({2}), true), config_error);
}

// ------------------------------------------------------------------ config

TEST_CASE("config validation rejects inconsistent shapes") {
  BackboneConfig ok = small_config();
  CHECK_NOTHROW(ok.validate());

  BackboneConfig bad = ok;
  bad.width = 9;  // not divisible by blocks = 2
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = ok;
  bad.grid = {12};  // not a power of two
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = ok;
  bad.modes = 10;  // half spectrum of n = 16 holds 9 bins
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = ok;
  bad.spatial_dims = 3;
  bad.grid = {8, 8, 8};
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = ok;
  bad.grid = {16, 16};  // two sizes for one axis
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = ok;
  bad.layers = 0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  BackboneConfig two = ok;
  two.spatial_dims = 2;
  two.grid = {8, 16};
  two.modes = 8;  // first axis allows up to 8, last up to 9
  CHECK_NOTHROW(two.validate());
  two.modes = 9;  // exceeds the first (full-spectrum) axis
  CHECK_THROWS_AS(two.validate(), config_error);
}

// --------------------------------------------------------------- inventory

TEST_CASE("fresh model exposes the expected parameter inventory") {
  Prng rng(11);
  Model model = make_model(small_config(), rng);
  const ParamStore& st = model.store;

  // lift(2) + layers*(blocks*4 mixing + 4 mlp)(2*12) + proj(2)
  CHECK(st.size() == 2 + 2 * (2 * 4 + 4) + 2);
  CHECK(st.name(0) == "lift.w");
  CHECK(st.value(st.at("lift.w")).shape == std::vector<std::size_t>{2, 8});
  CHECK(st.value(st.at("lift.b")).shape == std::vector<std::size_t>{8});
  CHECK(st.value(st.at("layer0.w1.k0.re")).shape ==
        std::vector<std::size_t>{4, 4});
  CHECK(st.value(st.at("layer1.w2.k1.im")).shape ==
        std::vector<std::size_t>{4, 4});
  CHECK(st.value(st.at("layer0.mlp.w1")).shape ==
        std::vector<std::size_t>{8, 8});
  CHECK(st.value(st.at("proj.w")).shape == std::vector<std::size_t>{8, 3});
  CHECK(st.value(st.at("proj.b")).shape == std::vector<std::size_t>{3});
  for (std::size_t i = 0; i < st.size(); ++i) CHECK(st.trainable(i));
  for (double v : st.value(st.at("lift.b")).data) CHECK(v == 0.0);

  BackboneConfig lean = small_config();
  lean.use_mlp = false;
  Prng rng2(11);
  Model slim = make_model(lean, rng2);
  CHECK(slim.store.find("layer0.mlp.w1") == ParamStore::npos);
  CHECK(slim.store.size() == 2 + 2 * (2 * 4) + 2);

  BackboneConfig ht = small_config();
  ht.temporal_modes = 3;
  Prng rng3(11);
  Model wide = make_model(ht, rng3);
  CHECK(wide.store.value(wide.store.at("layer0.w1.k0.re")).shape ==
        std::vector<std::size_t>{4, 12});
  CHECK(wide.store.value(wide.store.at("layer0.w2.k0.re")).shape ==
        std::vector<std::size_t>{12, 4});
}

TEST_CASE("same seed builds bitwise-identical models") {
  Prng a(77);
  Prng b(77);
  Model ma = make_model(small_config(), a);
  Model mb = make_model(small_config(), b);
  REQUIRE(ma.store.size() == mb.store.size());
  for (std::size_t i = 0; i < ma.store.size(); ++i) {
    CHECK(ma.store.value(i).data == mb.store.value(i).data);
  }
}

// ----------------------------------------------------------------- forward

TEST_CASE("forward maps batch shapes as documented") {
  Prng rng(5);
  Model model = make_model(small_config(), rng);
  Prng data(6);
  Tensor x = data.normal_tensor({3, 16, 2}, 0.0, 1.0);
  Tensor y = forward_field(model, x);
  CHECK(y.shape == std::vector<std::size_t>{3, 16, 3});
  check_finite(y, "forward output");

  Tape tape;
  ForwardResult fr = model_forward(tape, model, x);
  CHECK(tape.value(fr.output).data == y.data);
  CHECK(fr.param_nodes.size() == model.store.size());

  BackboneConfig cfg2 = small_config();
  cfg2.spatial_dims = 2;
  cfg2.grid = {8, 8};
  cfg2.modes = 4;
  Prng rng2(5);
  Model model2 = make_model(cfg2, rng2);
  Tensor x2 = data.normal_tensor({2, 8, 8, 2}, 0.0, 1.0);
  CHECK(forward_field(model2, x2).shape ==
        std::vector<std::size_t>{2, 8, 8, 3});
}

TEST_CASE("identical inputs produce identical outputs") {
  Prng rng(9);
  Model model = make_model(small_config(), rng);
  Prng data(10);
  Tensor x = data.normal_tensor({2, 16, 2}, 0.0, 1.0);
  Tensor y1 = forward_field(model, x);
  Tensor y2 = forward_field(model, x);
  CHECK(y1.data == y2.data);
}

TEST_CASE("linearised model commutes with cyclic shifts") {
  // With the nonlinearity switched to identity the whole network is a
  // translation-invariant linear map plus bias, so a cyclic shift of the
  // input must shift the output.
  BackboneConfig cfg = small_config();
  cfg.identity_gelu = true;
  Prng rng(21);
  Model model = make_model(cfg, rng);
  Prng data(22);
  Tensor x = data.normal_tensor({1, 16, 2}, 0.0, 1.0);
  for (std::size_t shift : {1, 5, 8}) {
    Tensor lhs = forward_field(model, roll(x, shift));
    Tensor rhs = roll(forward_field(model, x), shift);
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.data.size(); ++i) {
      worst = std::max(worst, std::abs(lhs.data[i] - rhs.data[i]));
    }
    CHECK(worst < 1e-8);
  }
}

// ----------------------------------------------------------------- regions

TEST_CASE("plain partition is one untagged corner") {
  auto regs = make_regions(2, 8, nullptr, false);
  REQUIRE(regs.size() == 1);
  CHECK(regs[0].band == -1);
  CHECK(regs[0].ranges ==
        AxisRanges{{0, 8}, {0, 8}});
}

TEST_CASE("one-dimensional bands tile the corner in order") {
  BandSchedule sched = make_band_schedule(16, 4, 4, 16, 2.0, false);
  auto regs = make_regions(1, 16, &sched, false);
  Painting p = paint(regs, 1, 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(p.count[i] == 1);
    CHECK(p.band[i] == static_cast<int>(i / 4));
  }
}

TEST_CASE("square partition tags diagonal blocks only") {
  BandSchedule sched = make_band_schedule(16, 4, 4, 16, 2.0, false);
  auto regs = make_regions(2, 16, &sched, false);
  Painting p = paint(regs, 2, 16);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(p.count[i * 16 + j] == 1);
      const int expect =
          (i / 4 == j / 4) ? static_cast<int>(i / 4) : -1;
      CHECK(p.band[i * 16 + j] == expect);
    }
  }
}

TEST_CASE("annulus partition tags full shells") {
  BandSchedule sched = make_band_schedule(16, 4, 4, 16, 2.0, false);
  auto regs = make_regions(2, 16, &sched, true);
  Painting p = paint(regs, 2, 16);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(p.count[i * 16 + j] == 1);
      CHECK(p.band[i * 16 + j] == static_cast<int>(std::max(i, j) / 4));
    }
  }
}

TEST_CASE("region construction rejects bad arguments") {
  CHECK_THROWS_AS(make_regions(3, 8, nullptr, false), config_error);
  BandSchedule sched = make_band_schedule(16, 4, 4, 16, 2.0, false);
  CHECK_THROWS_AS(make_regions(2, 8, &sched, false), config_error);
}

}  // TEST_SUITE
