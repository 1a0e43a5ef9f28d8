#include <doctest.h>

#include <cmath>
#include <vector>

#include "splab/autodiff.hpp"
#include "splab/rng.hpp"

using namespace splab;

namespace {

// Convenience: worst finite-difference disagreement for a two-input graph.
double fd_two(const std::function<NodeId(Tape&, NodeId, NodeId)>& build,
              const Tensor& a, const Tensor& b, double h = 1e-5) {
  auto loss_fn = [&](const std::vector<Tensor>& ps) {
    Tape t;
    NodeId na = t.input(ps[0]);
    NodeId nb = t.input(ps[1]);
    return t.value(build(t, na, nb)).data[0];
  };
  Tape tape;
  NodeId na = tape.input(a);
  NodeId nb = tape.input(b);
  NodeId loss = build(tape, na, nb);
  std::vector<Tensor> grads = tape.gradients(loss, {na, nb});
  return finite_difference_check(loss_fn, {a, b}, grads, h);
}

}  // namespace

TEST_SUITE("autodiff") {

// ------------------------------------------------------------ scalar gelu

TEST_CASE("gelu closed form") {
  CHECK(gelu_scalar(0.0) == 0.0);
  CHECK(gelu_scalar(1.0) == doctest::Approx(0.8411919906082768).epsilon(1e-15));
  // Odd-ish tails: large positive passes through, large negative vanishes.
  CHECK(gelu_scalar(10.0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::abs(gelu_scalar(-10.0)) < 1e-6);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
    const double h = 1e-6;
    const double fd = (gelu_scalar(x + h) - gelu_scalar(x - h)) / (2 * h);
    CHECK(gelu_grad_scalar(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

// ----------------------------------------------------------- value checks

TEST_CASE("tape values match the tensor kernels") {
  Prng rng(1);
  Tensor a = rng.normal_tensor({3, 4}, 0.0, 1.0);
  Tensor b = rng.normal_tensor({4, 2}, 0.0, 1.0);
  Tape tape;
  NodeId na = tape.input(a);
  NodeId nb = tape.input(b);
  NodeId prod = tape.matmul(na, nb);
  Tensor expect = matmul(a, b);
  CHECK(tape.value(prod).data == expect.data);

  VarPair spec = tape.rfft(na, {1});
  SpectralTensor ref = rfftn(a, {1});
  CHECK(tape.value(spec.re).data == ref.real.data);
  CHECK(tape.value(spec.im).data == ref.imag.data);
}

TEST_CASE("gradient of an unused input is zero") {
  Tape tape;
  NodeId a = tape.input(Tensor::full({3}, 2.0));
  NodeId b = tape.input(Tensor::full({3}, 5.0));
  NodeId loss = tape.reduce_sum(a);
  std::vector<Tensor> grads = tape.gradients(loss, {a, b});
  for (double g : grads[0].data) CHECK(g == 1.0);
  for (double g : grads[1].data) CHECK(g == 0.0);
}

// ------------------------------------------------- linear ops against FD

TEST_CASE("matmul, bias, and affine chains agree with finite differences") {
  // Quadratic losses: central differences carry ~1e-9 truncation error, so
  // the budget here is looser than for the purely linear probes below.
  Prng rng(2);
  Tensor a = rng.normal_tensor({3, 4}, 0.0, 1.0);
  Tensor b = rng.normal_tensor({4, 3}, 0.0, 1.0);
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              return t.reduce_sum(t.mul(t.matmul(x, y), t.matmul(x, y)));
            },
            a, b) < 1e-7);

  Tensor bias = rng.normal_tensor({4}, 0.0, 1.0);
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              return t.reduce_mean(t.mul(t.add_bias(x, y), t.add_bias(x, y)));
            },
            a, bias) < 1e-7);

  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              NodeId s = t.sub(t.scale(x, 3.0), x);
              return t.reduce_sum(t.mul(s, t.add(x, t.scale(x, 0.5))));
            },
            a, b) < 1e-7);
}

TEST_CASE("shape plumbing ops are exactly linear") {
  Prng rng(3);
  Tensor a = rng.normal_tensor({4, 6}, 0.0, 1.0);
  Tensor b = rng.normal_tensor({4, 6}, 0.0, 1.0);
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              NodeId r = t.reshape(x, {6, 4});
              NodeId tr = t.transpose(r);  // back to 4x6
              return t.reduce_sum(t.mul(tr, y));
            },
            a, b) < 1e-9);

  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              NodeId sl = t.slice(x, {{1, 3}, {2, 5}});
              NodeId sc = t.scatter(sl, {4, 6}, {{1, 3}, {2, 5}});
              return t.reduce_sum(t.mul(sc, y));
            },
            a, b) < 1e-9);

  Tensor c = rng.normal_tensor({2, 6}, 0.0, 1.0);
  // Quadratic in both inputs, so the finite-difference budget is looser.
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              NodeId cat = t.concat(x, y, 0);  // {6,6}
              return t.reduce_sum(t.mul(cat, cat));
            },
            a, c) < 1e-9);
}

// ---------------------------------------------- nonlinear ops against FD

TEST_CASE("pointwise nonlinearities agree with finite differences") {
  Prng rng(4);
  Tensor a = rng.normal_tensor({3, 5}, 0.0, 1.0);
  Tensor b = rng.normal_tensor({3, 5}, 0.0, 1.0);
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              return t.reduce_sum(t.mul(t.gelu(x), y));
            },
            a, b) < 1e-6);
  CHECK(fd_two(
            [](Tape& t, NodeId x, NodeId y) {
              NodeId mix = t.add(t.tanh_op(x), t.mul(t.sin_op(x), t.cos_op(y)));
              return t.reduce_mean(t.mul(mix, mix));
            },
            a, b) < 1e-6);
}

TEST_CASE("scale_by broadcasts a trainable scalar") {
  Tensor x({2, 2}, {1, 2, 3, 4});
  Tensor s({1}, {3.0});
  Tape tape;
  NodeId nx = tape.input(x);
  NodeId ns = tape.input(s);
  NodeId out = tape.scale_by(nx, ns);
  CHECK(tape.value(out).data == std::vector<double>{3, 6, 9, 12});
  NodeId loss = tape.reduce_sum(out);
  std::vector<Tensor> grads = tape.gradients(loss, {nx, ns});
  CHECK(grads[1].data[0] == 10.0);  // sum of x
  CHECK(fd_two(
            [](Tape& t, NodeId a, NodeId b) {
              return t.reduce_sum(t.mul(t.scale_by(a, b), t.scale_by(a, b)));
            },
            x, s) < 1e-9);
}

TEST_CASE("layer_norm matches finite differences") {
  Prng rng(5);
  Tensor x = rng.normal_tensor({4, 6}, 0.0, 2.0);
  Tensor gamma = rng.uniform_tensor({6}, 0.5, 1.5);
  Tensor beta = rng.normal_tensor({6}, 0.0, 0.1);
  auto loss_fn = [&](const std::vector<Tensor>& ps) {
    Tape t;
    NodeId nx = t.input(ps[0]);
    NodeId ng = t.input(ps[1]);
    NodeId nb = t.input(ps[2]);
    NodeId ln = t.layer_norm(nx, ng, nb);
    return t.value(t.reduce_sum(t.mul(ln, ln))).data[0];
  };
  Tape tape;
  NodeId nx = tape.input(x);
  NodeId ng = tape.input(gamma);
  NodeId nb = tape.input(beta);
  NodeId ln = tape.layer_norm(nx, ng, nb);
  NodeId loss = tape.reduce_sum(tape.mul(ln, ln));
  std::vector<Tensor> grads = tape.gradients(loss, {nx, ng, nb});
  CHECK(finite_difference_check(loss_fn, {x, gamma, beta}, grads) < 1e-6);
}

// -------------------------------------------------------- losses against FD

TEST_CASE("loss nodes differentiate cleanly") {
  Prng rng(6);
  Tensor pred = rng.normal_tensor({4, 8}, 0.0, 1.0);
  Tensor target = rng.normal_tensor({4, 8}, 1.0, 1.0);
  auto mse_fn = [&](const std::vector<Tensor>& ps) {
    Tape t;
    return t.value(t.mse_loss(t.input(ps[0]), target)).data[0];
  };
  Tape t1;
  NodeId p1 = t1.input(pred);
  NodeId l1 = t1.mse_loss(p1, target);
  CHECK(finite_difference_check(mse_fn, {pred}, t1.gradients(l1, {p1})) <
        1e-8);

  auto l2re_fn = [&](const std::vector<Tensor>& ps) {
    Tape t;
    return t.value(t.l2re_loss(t.input(ps[0]), target)).data[0];
  };
  Tape t2;
  NodeId p2 = t2.input(pred);
  NodeId l2 = t2.l2re_loss(p2, target);
  CHECK(finite_difference_check(l2re_fn, {pred}, t2.gradients(l2, {p2})) <
        1e-6);
}

// --------------------------------------------------- spectral ops against FD

TEST_CASE("fft round trip on tape differentiates") {
  Prng rng(7);
  Tensor x = rng.normal_tensor({2, 16}, 0.0, 1.0);
  Tensor w = rng.normal_tensor({2, 16}, 0.0, 1.0);
  CHECK(fd_two(
            [](Tape& t, NodeId a, NodeId b) {
              VarPair spec = t.rfft(a, {1});
              NodeId back = t.irfft(spec, {1}, {2, 16});
              return t.reduce_sum(t.mul(back, b));
            },
            x, w) < 1e-9);
}

TEST_CASE("complex matmul values and gradients") {
  // (1+2i) * (3+4i) = -5 + 10i as 1x1 matrices.
  Tape tape;
  VarPair a{tape.input(Tensor({1, 1}, {1.0})),
            tape.input(Tensor({1, 1}, {2.0}))};
  VarPair b{tape.input(Tensor({1, 1}, {3.0})),
            tape.input(Tensor({1, 1}, {4.0}))};
  VarPair c = tape.complex_matmul(a, b);
  CHECK(tape.value(c.re).data[0] == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK(tape.value(c.im).data[0] == doctest::Approx(10.0).epsilon(1e-15));

  Prng rng(8);
  Tensor ar = rng.normal_tensor({3, 4}, 0.0, 1.0);
  Tensor br = rng.normal_tensor({4, 2}, 0.0, 1.0);
  auto loss_fn = [&](const std::vector<Tensor>& ps) {
    Tape t;
    VarPair xa{t.input(ps[0]), t.input(ps[1])};
    VarPair xb{t.input(ps[2]), t.input(ps[3])};
    VarPair xc = t.complex_matmul(xa, xb);
    return t
        .value(t.add(t.reduce_sum(t.mul(xc.re, xc.re)),
                     t.reduce_sum(t.mul(xc.im, xc.im))))
        .data[0];
  };
  Tensor ai = rng.normal_tensor({3, 4}, 0.0, 1.0);
  Tensor bi = rng.normal_tensor({4, 2}, 0.0, 1.0);
  Tape t;
  VarPair xa{t.input(ar), t.input(ai)};
  VarPair xb{t.input(br), t.input(bi)};
  VarPair xc = t.complex_matmul(xa, xb);
  NodeId loss = t.add(t.reduce_sum(t.mul(xc.re, xc.re)),
                      t.reduce_sum(t.mul(xc.im, xc.im)));
  std::vector<Tensor> grads =
      t.gradients(loss, {xa.re, xa.im, xb.re, xb.im});
  CHECK(finite_difference_check(loss_fn, {ar, ai, br, bi}, grads) < 1e-5);
}

}  // TEST_SUITE
