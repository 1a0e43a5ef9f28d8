#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "splab/fft.hpp"
#include "splab/tensor.hpp"

namespace splab {

using NodeId = std::size_t;

// A complex-valued intermediate carried as two real nodes.
struct VarPair {
  NodeId re;
  NodeId im;
};

// Half-open index range per axis for slice/scatter.
using AxisRanges = std::vector<std::pair<std::size_t, std::size_t>>;

// Append-only reverse-mode tape.  Leaves are created with input(); every op
// records a pull-back closure; gradients() runs the reverse sweep from a
// scalar loss.
class Tape {
 public:
  NodeId input(Tensor value);

  const Tensor& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId mul(NodeId a, NodeId b);
  // x * s with s a trainable scalar (shape {1}), broadcast to x.
  NodeId scale_by(NodeId x, NodeId s);
  NodeId matmul(NodeId a, NodeId b);
  // x[..., j] + b[j], b broadcast over all leading axes.
  NodeId add_bias(NodeId x, NodeId b);

  NodeId gelu(NodeId x);
  NodeId tanh_op(NodeId x);
  NodeId sin_op(NodeId x);
  NodeId cos_op(NodeId x);
  // Normalization over the last axis with learnable gain/shift.
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);

  NodeId reshape(NodeId x, std::vector<std::size_t> shape);
  // 2-D transpose; lets column-convention weight shapes feed row-major
  // batched matmuls.
  NodeId transpose(NodeId x);
  NodeId slice(NodeId x, AxisRanges ranges);
  NodeId scatter(NodeId x, std::vector<std::size_t> full_shape,
                 AxisRanges ranges);
  NodeId concat(NodeId a, NodeId b, std::size_t axis);

  NodeId reduce_sum(NodeId x);
  NodeId reduce_mean(NodeId x);
  NodeId mse_loss(NodeId pred, const Tensor& target);
  // Mean over axis-0 rows of ||pred_row - target_row|| / ||target_row||.
  NodeId l2re_loss(NodeId pred, const Tensor& target);

  // Real FFT pair; forward values match splab::rfftn of the input.
  VarPair rfft(NodeId x, std::vector<std::size_t> axes);
  // Inverse; `source_shape` is the spatial shape to restore.
  NodeId irfft(VarPair spectrum, std::vector<std::size_t> axes,
               std::vector<std::size_t> source_shape);

  // Complex product (ar + i*ai) @ (br + i*bi) as four real matmuls.
  VarPair complex_matmul(VarPair a, VarPair b);

  // Reverse sweep from scalar `loss`; returns one gradient per requested
  // node (zeros when the loss does not depend on it).
  std::vector<Tensor> gradients(NodeId loss, const std::vector<NodeId>& wrt);

 private:
  struct Node {
    Tensor value;
    std::function<void(Tape&)> backward;  // reads grad(id), adds to parents
  };

  NodeId emplace(Tensor value, std::function<void(Tape&)> backward);
  void accumulate(NodeId id, const Tensor& g);
  Tensor& grad_ref(NodeId id);
  bool has_grad(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_set_;
};

// Scalar tanh-form GELU and its derivative (shared with module code that
// needs the closed form outside a tape).
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Worst-case relative disagreement between `analytic_grads` and central
// finite differences of `loss_fn` at `params`, using denominator
// max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn,
    const std::vector<Tensor>& params,
    const std::vector<Tensor>& analytic_grads, double h = 1e-5);

}  // namespace splab
