#include "gazecam/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gazecam/errors.hpp"
#include "gazecam/kernels.hpp"

namespace gazecam {

namespace {

void expect_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw config_error(std::string(what) + " expects rank " + std::to_string(rank) +
                       " input, got shape " + t.shape_str());
  }
}

}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Graph::Node& Graph::at(int id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw internal_error("graph node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::at(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw internal_error("graph node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

int Graph::add_input(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.retain = requires_grad;
  return push(std::move(n));
}

int Graph::conv2d(int input, int kernel, int stride, int padding) {
  const Tensor& x = at(input).value;
  const Tensor& k = at(kernel).value;
  expect_rank(x, 4, "conv2d");
  expect_rank(k, 4, "conv2d kernel");
  if (x.dim(1) != k.dim(1)) {
    throw config_error("conv2d channel mismatch: input has " + std::to_string(x.dim(1)) +
                       " channels, kernel expects " + std::to_string(k.dim(1)));
  }
  auto s = kernels::conv2d_shape(x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                                 k.dim(0), k.dim(2), k.dim(3), stride, padding);
  Node n;
  n.op = Op::conv2d;
  n.inputs = {input, kernel};
  n.stride = stride;
  n.pad = padding;
  n.kh = k.dim(2);
  n.kw = k.dim(3);
  n.value = Tensor::zeros({s.n, s.cout, s.oh, s.ow});
  kernels::conv2d_forward(x.ptr(), k.ptr(), n.value.ptr(), s);
  return push(std::move(n));
}

int Graph::relu(int x_id) {
  const Tensor& x = at(x_id).value;
  Node n;
  n.op = Op::relu;
  n.inputs = {x_id};
  n.value = Tensor::zeros(x.shape);
  const std::size_t count = x.numel();
  const float* in = x.ptr();
  float* out = n.value.ptr();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  }
  return push(std::move(n));
}

int Graph::maxpool(int x_id, int kh, int kw, int stride, int padding) {
  const Tensor& x = at(x_id).value;
  expect_rank(x, 4, "maxpool");
  auto s = kernels::pool2d_shape(x.dim(0), x.dim(1), x.dim(2), x.dim(3), kh, kw, stride, padding);
  Node n;
  n.op = Op::maxpool;
  n.inputs = {x_id};
  n.kh = kh; n.kw = kw; n.stride = stride; n.pad = padding;
  n.value = Tensor::zeros({s.n, s.c, s.oh, s.ow});
  n.argmax.assign(n.value.numel(), -1);
  kernels::maxpool_forward(x.ptr(), n.value.ptr(), n.argmax.data(), s);
  return push(std::move(n));
}

int Graph::global_avg_pool(int x_id) {
  const Tensor& x = at(x_id).value;
  expect_rank(x, 4, "global_avg_pool");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Node n;
  n.op = Op::global_avg_pool;
  n.inputs = {x_id};
  n.value = Tensor::zeros({N, C});
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < C; ++c) {
      const float* p = x.ptr() + (static_cast<std::size_t>(i) * C + c) * plane;
      double acc = 0.0;
      for (std::size_t j = 0; j < plane; ++j) acc += p[j];
      n.value.data[static_cast<std::size_t>(i) * C + c] =
          static_cast<float>(acc / static_cast<double>(plane));
    }
  }
  return push(std::move(n));
}

int Graph::linear(int x_id, int weight, int bias) {
  const Tensor& x = at(x_id).value;
  const Tensor& w = at(weight).value;
  expect_rank(x, 2, "linear");
  expect_rank(w, 2, "linear weight");
  if (x.dim(1) != w.dim(1)) {
    throw config_error("linear input features " + std::to_string(x.dim(1)) +
                       " do not match weight columns " + std::to_string(w.dim(1)));
  }
  const float* b = nullptr;
  if (bias >= 0) {
    const Tensor& bv = at(bias).value;
    if (bv.rank() != 1 || bv.dim(0) != w.dim(0)) {
      throw config_error("linear bias shape " + bv.shape_str() + " does not match output " +
                         std::to_string(w.dim(0)));
    }
    b = bv.ptr();
  }
  Node n;
  n.op = Op::linear;
  n.inputs = bias >= 0 ? std::vector<int>{x_id, weight, bias} : std::vector<int>{x_id, weight};
  n.value = Tensor::zeros({x.dim(0), w.dim(0)});
  kernels::linear_forward(x.ptr(), w.ptr(), b, n.value.ptr(), x.dim(0), x.dim(1), w.dim(0));
  return push(std::move(n));
}

int Graph::batchnorm(int x_id, int gamma, int beta, bool training,
                     const Tensor* run_mean, const Tensor* run_var,
                     Tensor* update_mean, Tensor* update_var, double momentum) {
  const Tensor& x = at(x_id).value;
  expect_rank(x, 4, "batchnorm");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Tensor& g = at(gamma).value;
  const Tensor& b = at(beta).value;
  if (g.rank() != 1 || g.dim(0) != C || b.rank() != 1 || b.dim(0) != C) {
    throw config_error("batchnorm affine parameters must have shape [" + std::to_string(C) + "]");
  }
  if (!training && (run_mean == nullptr || run_var == nullptr)) {
    throw state_error("batchnorm eval mode requires running statistics");
  }

  Node n;
  n.op = Op::batchnorm;
  n.inputs = {x_id, gamma, beta};
  n.training = training;
  n.value = Tensor::zeros(x.shape);
  n.saved = Tensor::zeros(x.shape);   // x_hat
  n.saved2 = Tensor::zeros({C});      // inv_std per channel

  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t chan_stride = static_cast<std::size_t>(C) * plane;
  const double m = static_cast<double>(N) * plane;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0, sum_sq = 0.0;
      for (int i = 0; i < N; ++i) {
        const float* p = x.ptr() + static_cast<std::size_t>(i) * chan_stride + c * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const double v = p[j];
          sum += v;
          sum_sq += v * v;
        }
      }
      mean = sum / m;
      var = std::max(0.0, sum_sq / m - mean * mean);
    } else {
      mean = run_mean->data[static_cast<std::size_t>(c)];
      var = run_var->data[static_cast<std::size_t>(c)];
    }
    const double inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
    n.saved2.data[static_cast<std::size_t>(c)] = static_cast<float>(inv_std);
    const double gc = g.data[static_cast<std::size_t>(c)];
    const double bc = b.data[static_cast<std::size_t>(c)];
    for (int i = 0; i < N; ++i) {
      const float* p = x.ptr() + static_cast<std::size_t>(i) * chan_stride + c * plane;
      float* xh = n.saved.ptr() + static_cast<std::size_t>(i) * chan_stride + c * plane;
      float* out = n.value.ptr() + static_cast<std::size_t>(i) * chan_stride + c * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        const double h = (p[j] - mean) * inv_std;
        xh[j] = static_cast<float>(h);
        out[j] = static_cast<float>(gc * h + bc);
      }
    }
    if (training && update_mean != nullptr && update_var != nullptr) {
      // running variance uses the unbiased estimate, the usual convention
      const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
      float& rm = update_mean->data[static_cast<std::size_t>(c)];
      float& rv = update_var->data[static_cast<std::size_t>(c)];
      rm = static_cast<float>((1.0 - momentum) * rm + momentum * mean);
      rv = static_cast<float>((1.0 - momentum) * rv + momentum * unbiased);
    }
  }
  return push(std::move(n));
}

int Graph::groupnorm(int x_id, int gamma, int beta, int groups) {
  const Tensor& x = at(x_id).value;
  expect_rank(x, 4, "groupnorm");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (groups < 1 || C % groups != 0) {
    throw config_error("groupnorm channel count " + std::to_string(C) +
                       " not divisible by group count " + std::to_string(groups));
  }
  const Tensor& g = at(gamma).value;
  const Tensor& b = at(beta).value;
  if (g.rank() != 1 || g.dim(0) != C || b.rank() != 1 || b.dim(0) != C) {
    throw config_error("groupnorm affine parameters must have shape [" + std::to_string(C) + "]");
  }

  Node n;
  n.op = Op::groupnorm;
  n.inputs = {x_id, gamma, beta};
  n.groups = groups;
  n.value = Tensor::zeros(x.shape);
  n.saved = Tensor::zeros(x.shape);          // x_hat
  n.saved2 = Tensor::zeros({N, groups});     // inv_std per (sample, group)

  const int cg = C / groups;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t group_elems = static_cast<std::size_t>(cg) * plane;

#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < N; ++i) {
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t base = (static_cast<std::size_t>(i) * C + static_cast<std::size_t>(gi) * cg) * plane;
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t j = 0; j < group_elems; ++j) {
        const double v = x.data[base + j];
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / static_cast<double>(group_elems);
      const double var = std::max(0.0, sum_sq / static_cast<double>(group_elems) - mean * mean);
      const double inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
      n.saved2.data[static_cast<std::size_t>(i) * groups + gi] = static_cast<float>(inv_std);
      for (int cc = 0; cc < cg; ++cc) {
        const int c = gi * cg + cc;
        const double gc = g.data[static_cast<std::size_t>(c)];
        const double bc = b.data[static_cast<std::size_t>(c)];
        const std::size_t cbase = base + static_cast<std::size_t>(cc) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const double h = (x.data[cbase + j] - mean) * inv_std;
          n.saved.data[cbase + j] = static_cast<float>(h);
          n.value.data[cbase + j] = static_cast<float>(gc * h + bc);
        }
      }
    }
  }
  return push(std::move(n));
}

int Graph::residual_add(int a, int b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (!ta.same_shape(tb)) {
    throw config_error("residual_add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Node n;
  n.op = Op::residual_add;
  n.inputs = {a, b};
  n.value = Tensor::zeros(ta.shape);
  const std::size_t count = ta.numel();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    n.value.data[static_cast<std::size_t>(i)] =
        ta.data[static_cast<std::size_t>(i)] + tb.data[static_cast<std::size_t>(i)];
  }
  return push(std::move(n));
}

int Graph::softmax_cross_entropy(int logits, std::vector<int> labels) {
  const Tensor& z = at(logits).value;
  expect_rank(z, 2, "softmax_cross_entropy");
  const int N = z.dim(0), C = z.dim(1);
  if (static_cast<int>(labels.size()) != N) {
    throw input_error("softmax_cross_entropy got " + std::to_string(labels.size()) +
                      " labels for batch of " + std::to_string(N));
  }
  for (int i = 0; i < N; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= C) {
      throw input_error("label " + std::to_string(labels[static_cast<std::size_t>(i)]) +
                        " out of range [0," + std::to_string(C) + ") at row " + std::to_string(i));
    }
  }

  Node n;
  n.op = Op::softmax_xent;
  n.inputs = {logits};
  n.labels = std::move(labels);
  n.saved = Tensor::zeros(z.shape);  // probabilities

  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const float* row = z.ptr() + static_cast<std::size_t>(i) * C;
    float* prow = n.saved.ptr() + static_cast<std::size_t>(i) * C;
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double denom = 0.0;
    for (int c = 0; c < C; ++c) denom += std::exp(static_cast<double>(row[c]) - mx);
    const double log_denom = std::log(denom);
    for (int c = 0; c < C; ++c) {
      prow[c] = static_cast<float>(std::exp(static_cast<double>(row[c]) - mx) / denom);
    }
    const int lbl = n.labels[static_cast<std::size_t>(i)];
    loss += -(static_cast<double>(row[lbl]) - mx - log_denom);
  }
  n.value = Tensor::from_values({1}, {static_cast<float>(loss / N)});
  return push(std::move(n));
}

int Graph::pick(int x_id, int flat_index) {
  const Tensor& x = at(x_id).value;
  if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= x.numel()) {
    throw input_error("pick index " + std::to_string(flat_index) + " out of range for " +
                      x.shape_str());
  }
  Node n;
  n.op = Op::pick;
  n.inputs = {x_id};
  n.pick_index = flat_index;
  n.value = Tensor::from_values({1}, {x.data[static_cast<std::size_t>(flat_index)]});
  return push(std::move(n));
}

int Graph::sum_all(int x_id) {
  const Tensor& x = at(x_id).value;
  double acc = 0.0;
  for (float v : x.data) acc += v;
  Node n;
  n.op = Op::sum_all;
  n.inputs = {x_id};
  n.value = Tensor::from_values({1}, {static_cast<float>(acc)});
  return push(std::move(n));
}

void Graph::retain_grad(int id) { at(id).retain = true; }

const Tensor& Graph::value(int id) const { return at(id).value; }

const Tensor& Graph::grad(int id) const {
  const Node& n = at(id);
  if (!ran_backward_) throw state_error("gradient requested before backward");
  if (!n.has_grad || !(n.retain || n.requires_grad)) {
    throw state_error("gradient was not retained for node " + std::to_string(id));
  }
  return n.grad;
}

const Tensor& Graph::softmax_probs(int xent_id) const {
  const Node& n = at(xent_id);
  if (n.op != Op::softmax_xent) throw state_error("node is not a softmax_cross_entropy node");
  return n.saved;
}

void Graph::backward(int loss_id) {
  if (ran_backward_) throw state_error("backward already ran on this graph");
  Node& loss = at(loss_id);
  if (loss.value.numel() != 1) {
    throw state_error("backward requires a scalar loss, got " + loss.value.shape_str());
  }

  for (Node& n : nodes_) {
    n.grad = Tensor::zeros(n.value.shape);
    n.has_grad = false;
  }
  loss.grad.data[0] = 1.0f;
  loss.has_grad = true;

  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || n.op == Op::input) continue;
    backward_node(n);
  }

  ran_backward_ = true;
  // Free gradient buffers nobody asked for.
  for (Node& n : nodes_) {
    if (!(n.retain || n.requires_grad)) {
      n.grad = Tensor();
    }
  }
}

void Graph::backward_node(Node& node) {
  auto& in0 = at(node.inputs[0]);
  const Tensor& g = node.grad;

  auto mark = [](Node& n) { n.has_grad = true; };

  switch (node.op) {
    case Op::conv2d: {
      Node& kern = at(node.inputs[1]);
      auto s = kernels::conv2d_shape(in0.value.dim(0), in0.value.dim(1), in0.value.dim(2),
                                     in0.value.dim(3), kern.value.dim(0), node.kh, node.kw,
                                     node.stride, node.pad);
      kernels::conv2d_backward_input(g.ptr(), kern.value.ptr(), in0.grad.ptr(), s);
      kernels::conv2d_backward_kernel(g.ptr(), in0.value.ptr(), kern.grad.ptr(), s);
      mark(in0);
      mark(kern);
      break;
    }
    case Op::relu: {
      const std::size_t count = g.numel();
      const float* x = in0.value.ptr();
      const float* gp = g.ptr();
      float* gi = in0.grad.ptr();
#pragma omp parallel for schedule(static)
      for (long long i = 0; i < static_cast<long long>(count); ++i) {
        // subgradient at exactly 0 is 0
        if (x[i] > 0.0f) gi[i] += gp[i];
      }
      mark(in0);
      break;
    }
    case Op::maxpool: {
      auto s = kernels::pool2d_shape(in0.value.dim(0), in0.value.dim(1), in0.value.dim(2),
                                     in0.value.dim(3), node.kh, node.kw, node.stride, node.pad);
      kernels::maxpool_backward_accumulate(g.ptr(), node.argmax.data(), in0.grad.ptr(), s);
      mark(in0);
      break;
    }
    case Op::global_avg_pool: {
      const int N = in0.value.dim(0), C = in0.value.dim(1);
      const int H = in0.value.dim(2), W = in0.value.dim(3);
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      const float scale = 1.0f / static_cast<float>(plane);
#pragma omp parallel for collapse(2) schedule(static)
      for (int i = 0; i < N; ++i) {
        for (int c = 0; c < C; ++c) {
          const float gv = g.data[static_cast<std::size_t>(i) * C + c] * scale;
          float* p = in0.grad.ptr() + (static_cast<std::size_t>(i) * C + c) * plane;
          for (std::size_t j = 0; j < plane; ++j) p[j] += gv;
        }
      }
      mark(in0);
      break;
    }
    case Op::linear: {
      Node& w = at(node.inputs[1]);
      const int N = in0.value.dim(0), Cin = in0.value.dim(1), Cout = w.value.dim(0);
      kernels::linear_backward_input(g.ptr(), w.value.ptr(), in0.grad.ptr(), N, Cin, Cout);
      kernels::linear_backward_weight(g.ptr(), in0.value.ptr(), w.grad.ptr(), N, Cin, Cout);
      mark(in0);
      mark(w);
      if (node.inputs.size() == 3) {
        Node& b = at(node.inputs[2]);
        kernels::linear_backward_bias(g.ptr(), b.grad.ptr(), N, Cout);
        mark(b);
      }
      break;
    }
    case Op::batchnorm: {
      Node& gamma = at(node.inputs[1]);
      Node& beta = at(node.inputs[2]);
      const int N = in0.value.dim(0), C = in0.value.dim(1);
      const int H = in0.value.dim(2), W = in0.value.dim(3);
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      const std::size_t chan_stride = static_cast<std::size_t>(C) * plane;
      const double m = static_cast<double>(N) * plane;
#pragma omp parallel for schedule(static)
      for (int c = 0; c < C; ++c) {
        const double inv_std = node.saved2.data[static_cast<std::size_t>(c)];
        const double gc = gamma.value.data[static_cast<std::size_t>(c)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = 0; i < N; ++i) {
          const std::size_t base = static_cast<std::size_t>(i) * chan_stride + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            sum_g += g.data[base + j];
            sum_gx += static_cast<double>(g.data[base + j]) * node.saved.data[base + j];
          }
        }
        gamma.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_gx);
        beta.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_g);
        for (int i = 0; i < N; ++i) {
          const std::size_t base = static_cast<std::size_t>(i) * chan_stride + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            double gx;
            if (node.training) {
              gx = gc * inv_std *
                   (g.data[base + j] - sum_g / m - node.saved.data[base + j] * sum_gx / m);
            } else {
              gx = gc * inv_std * g.data[base + j];
            }
            in0.grad.data[base + j] += static_cast<float>(gx);
          }
        }
      }
      mark(in0);
      mark(gamma);
      mark(beta);
      break;
    }
    case Op::groupnorm: {
      Node& gamma = at(node.inputs[1]);
      Node& beta = at(node.inputs[2]);
      const int N = in0.value.dim(0), C = in0.value.dim(1);
      const int H = in0.value.dim(2), W = in0.value.dim(3);
      const int groups = node.groups;
      const int cg = C / groups;
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      const double m = static_cast<double>(cg) * plane;
      // gamma/beta gradients reduce across samples; accumulate them serially
      // after the parallel per-(n,group) input pass to stay deterministic.
#pragma omp parallel for collapse(2) schedule(static)
      for (int i = 0; i < N; ++i) {
        for (int gi = 0; gi < groups; ++gi) {
          const std::size_t base =
              (static_cast<std::size_t>(i) * C + static_cast<std::size_t>(gi) * cg) * plane;
          const double inv_std = node.saved2.data[static_cast<std::size_t>(i) * groups + gi];
          double sum_s = 0.0, sum_b = 0.0;  // sums of g*gamma*x_hat and g*gamma
          for (int cc = 0; cc < cg; ++cc) {
            const double gc = gamma.value.data[static_cast<std::size_t>(gi * cg + cc)];
            const std::size_t cbase = base + static_cast<std::size_t>(cc) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              const double gg = static_cast<double>(g.data[cbase + j]) * gc;
              sum_b += gg;
              sum_s += gg * node.saved.data[cbase + j];
            }
          }
          for (int cc = 0; cc < cg; ++cc) {
            const double gc = gamma.value.data[static_cast<std::size_t>(gi * cg + cc)];
            const std::size_t cbase = base + static_cast<std::size_t>(cc) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              const double gg = static_cast<double>(g.data[cbase + j]) * gc;
              in0.grad.data[cbase + j] += static_cast<float>(
                  inv_std * (gg - sum_b / m - node.saved.data[cbase + j] * sum_s / m));
            }
          }
        }
      }
      for (int c = 0; c < C; ++c) {
        double sum_gx = 0.0, sum_g = 0.0;
        for (int i = 0; i < N; ++i) {
          const std::size_t base = (static_cast<std::size_t>(i) * C + c) * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            sum_g += g.data[base + j];
            sum_gx += static_cast<double>(g.data[base + j]) * node.saved.data[base + j];
          }
        }
        gamma.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_gx);
        beta.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_g);
      }
      mark(in0);
      mark(gamma);
      mark(beta);
      break;
    }
    case Op::residual_add: {
      Node& in1 = at(node.inputs[1]);
      const std::size_t count = g.numel();
      for (std::size_t i = 0; i < count; ++i) {
        in0.grad.data[i] += g.data[i];
        in1.grad.data[i] += g.data[i];
      }
      mark(in0);
      mark(in1);
      break;
    }
    case Op::softmax_xent: {
      const int N = in0.value.dim(0), C = in0.value.dim(1);
      const float gl = g.data[0];
      for (int i = 0; i < N; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * C;
        const int lbl = node.labels[static_cast<std::size_t>(i)];
        for (int c = 0; c < C; ++c) {
          const float onehot = (c == lbl) ? 1.0f : 0.0f;
          in0.grad.data[base + c] +=
              gl * (node.saved.data[base + c] - onehot) / static_cast<float>(N);
        }
      }
      mark(in0);
      break;
    }
    case Op::pick: {
      in0.grad.data[static_cast<std::size_t>(node.pick_index)] += g.data[0];
      mark(in0);
      break;
    }
    case Op::sum_all: {
      const float gv = g.data[0];
      for (float& v : in0.grad.data) v += gv;
      mark(in0);
      break;
    }
    case Op::input:
      break;
  }
}

}  // namespace gazecam
