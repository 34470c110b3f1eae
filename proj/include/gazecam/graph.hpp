#pragma once

#include <cstdint>
#include <vector>

#include "gazecam/tensor.hpp"

namespace gazecam {

enum class Op {
  input,
  conv2d,
  relu,
  maxpool,
  global_avg_pool,
  linear,
  batchnorm,
  groupnorm,
  residual_add,
  softmax_xent,
  pick,
  sum_all,
};

// Reverse-mode tape. Nodes are appended in forward order (inputs always
// precede consumers) and backward walks the tape once in reverse. A graph is
// confined to one thread for forward + backward; parallelism lives inside the
// kernels.
class Graph {
 public:
  static constexpr float kNormEpsilon = 1e-5f;

  int add_input(Tensor value, bool requires_grad = false);

  int conv2d(int input, int kernel, int stride, int padding);
  int relu(int x);
  int maxpool(int x, int kh, int kw, int stride, int padding);
  int global_avg_pool(int x);                  // [N,C,H,W] -> [N,C]
  int linear(int x, int weight, int bias);     // bias = -1 for none
  // Training mode normalizes with batch statistics and, when update_mean /
  // update_var are given, folds them into those running buffers (momentum
  // EMA, unbiased variance). Eval mode normalizes with run_mean / run_var.
  int batchnorm(int x, int gamma, int beta, bool training,
                const Tensor* run_mean, const Tensor* run_var,
                Tensor* update_mean, Tensor* update_var, double momentum = 0.1);
  int groupnorm(int x, int gamma, int beta, int groups);
  int residual_add(int a, int b);
  int softmax_cross_entropy(int logits, std::vector<int> labels);  // scalar mean loss
  int pick(int x, int flat_index);             // scalar
  int sum_all(int x);                          // scalar

  void retain_grad(int id);

  const Tensor& value(int id) const;
  // Throws a state error unless backward ran and the node's gradient was kept
  // (leaf with requires_grad, or retained).
  const Tensor& grad(int id) const;
  // Row-wise softmax saved by softmax_cross_entropy, for inspection.
  const Tensor& softmax_probs(int xent_id) const;

  void backward(int loss_id);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op = Op::input;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool retain = false;
    bool has_grad = false;

    int kh = 0, kw = 0, stride = 1, pad = 0;
    int groups = 1;
    int pick_index = 0;
    std::vector<int> labels;
    std::vector<std::int32_t> argmax;
    Tensor saved;    // op context: x_hat for norms, probs for softmax
    Tensor saved2;   // inv_std for norms
    bool training = false;
  };

  int push(Node n);
  Node& at(int id);
  const Node& at(int id) const;
  void backward_node(Node& node);

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace gazecam
