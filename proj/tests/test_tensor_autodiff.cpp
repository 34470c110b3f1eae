#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gazecam/errors.hpp"
#include "gazecam/graph.hpp"
#include "gazecam/kernels.hpp"
#include "gazecam/rng.hpp"
#include "gazecam/tensor.hpp"
#include "oracles.hpp"

using namespace gazecam;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

oracle::vecd to_double(const Tensor& t) {
  return oracle::vecd(t.data.begin(), t.data.end());
}

// Central finite differences of `loss` (a double-precision oracle) against
// the analytic gradient, element by element, relative error below 1e-3.
template <class Loss>
void check_gradient(const Tensor& x, const Tensor& analytic, Loss loss, double h = 1e-3) {
  REQUIRE(analytic.shape == x.shape);
  oracle::vecd base = to_double(x);
  for (std::size_t i = 0; i < base.size(); ++i) {
    oracle::vecd plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
    const double a = analytic.data[i];
    const double rel = std::fabs(a - fd) / std::max(std::fabs(fd), 1e-4);
    CHECK(rel < 1e-3);
  }
}

}  // namespace

TEST_CASE("conv2d on a zero input stays zero") {
  Graph g;
  const int x = g.add_input(Tensor::zeros({1, 1, 3, 3}));
  Rng rng(7);
  const int k = g.add_input(random_tensor({2, 1, 2, 2}, rng));
  const int y = g.conv2d(x, k, 1, 0);
  for (float v : g.value(y).data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d with a scalar kernel scales the input") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}));
  const int k = g.add_input(Tensor::from_values({1, 1, 1, 1}, {2}));
  const int y = g.conv2d(x, k, 1, 0);
  const std::vector<float> expected = {2, 4, 6, 8};
  CHECK(g.value(y).data == expected);
}

TEST_CASE("conv2d 3x3 input with identity-diagonal 2x2 kernel") {
  // frozen from the double-precision cross-correlation oracle
  Graph g;
  const int x = g.add_input(Tensor::from_values({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  const int k = g.add_input(Tensor::from_values({1, 1, 2, 2}, {1, 0, 0, 1}));
  const int y = g.conv2d(x, k, 1, 0);
  const std::vector<float> expected = {6, 8, 12, 14};
  CHECK(g.value(y).data == expected);

  const auto ref = oracle::conv2d({1, 2, 3, 4, 5, 6, 7, 8, 9}, 1, 1, 3, 3, {1, 0, 0, 1}, 1, 2, 2,
                                  1, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(g.value(y).data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d rejects a channel mismatch") {
  Graph g;
  const int x = g.add_input(Tensor::zeros({1, 3, 4, 4}));
  const int k = g.add_input(Tensor::zeros({2, 2, 3, 3}));
  CHECK_THROWS_AS(g.conv2d(x, k, 1, 1), Error);
}

TEST_CASE("conv2d matches the double oracle on random shapes") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + rng.uniform_int(2);
    const int cin = 1 + rng.uniform_int(3);
    const int cout = 1 + rng.uniform_int(3);
    const int h = 4 + rng.uniform_int(5);
    const int w = 4 + rng.uniform_int(5);
    const int k = 1 + rng.uniform_int(3);
    const int stride = 1 + rng.uniform_int(2);
    const int pad = rng.uniform_int(2);
    Tensor x = random_tensor({n, cin, h, w}, rng);
    Tensor kern = random_tensor({cout, cin, k, k}, rng);
    Graph g;
    const int y = g.conv2d(g.add_input(x), g.add_input(kern), stride, pad);
    const auto ref = oracle::conv2d(to_double(x), n, cin, h, w, to_double(kern), cout, k, k,
                                    stride, pad);
    REQUIRE(g.value(y).numel() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(g.value(y).data[i] == doctest::Approx(ref[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("relu clamps below zero") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({3}, {-1, 0, 2}));
  const int y = g.relu(x);
  const std::vector<float> expected = {0, 0, 2};
  CHECK(g.value(y).data == expected);
}

TEST_CASE("groupnorm of a constant group is the affine bias") {
  Graph g;
  const int x = g.add_input(Tensor::full({1, 4, 3, 3}, 5.0f));
  const int gamma = g.add_input(Tensor::full({4}, 2.0f));
  const int beta = g.add_input(Tensor::from_values({4}, {0.5f, 1.0f, -1.0f, 3.0f}));
  const int y = g.groupnorm(x, gamma, beta, 2);
  const Tensor& out = g.value(y);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 9; ++i) {
      CHECK(out.data[static_cast<std::size_t>(c) * 9 + i] ==
            doctest::Approx(g.value(beta).data[static_cast<std::size_t>(c)]).epsilon(1e-6));
    }
  }
}

TEST_CASE("groupnorm rejects indivisible group counts") {
  Graph g;
  const int x = g.add_input(Tensor::zeros({1, 6, 2, 2}));
  const int gamma = g.add_input(Tensor::full({6}, 1.0f));
  const int beta = g.add_input(Tensor::zeros({6}));
  CHECK_THROWS_AS(g.groupnorm(x, gamma, beta, 4), Error);
}

TEST_CASE("batchnorm statistics match the double oracle on a 2-sample batch") {
  Rng rng(23);
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({3}, rng);
  Graph g;
  const int y = g.batchnorm(g.add_input(x), g.add_input(gamma), g.add_input(beta), true, nullptr,
                            nullptr, nullptr, nullptr);
  const auto ref =
      oracle::batchnorm_train(to_double(x), 2, 3, 4, 4, to_double(gamma), to_double(beta));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(g.value(y).data[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }
}

TEST_CASE("softmax cross entropy of uniform logits is ln(C)") {
  Graph g;
  const int z = g.add_input(Tensor::zeros({2, 12}));
  const int loss = g.softmax_cross_entropy(z, {3, 7});
  CHECK(g.value(loss).data[0] == doctest::Approx(std::log(12.0)).epsilon(1e-6));
}

TEST_CASE("softmax cross entropy saturates toward zero on dominant logits") {
  Graph g;
  Tensor z = Tensor::zeros({1, 5});
  z.data[2] = 1e4f;
  const int loss = g.softmax_cross_entropy(g.add_input(z), {2});
  CHECK(g.value(loss).data[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("softmax cross entropy matches the direct formula oracle") {
  Rng rng(31);
  Tensor z = random_tensor({3, 4}, rng, -3.0, 3.0);
  const std::vector<int> labels = {1, 0, 3};
  Graph g;
  const int loss = g.softmax_cross_entropy(g.add_input(z), labels);
  const double ref = oracle::softmax_xent_mean(to_double(z), 3, 4, labels);
  CHECK(g.value(loss).data[0] == doctest::Approx(ref).epsilon(1e-5));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(37);
  Tensor z = random_tensor({8, 12}, rng, -5.0, 5.0);
  Graph g;
  const int loss = g.softmax_cross_entropy(g.add_input(z), std::vector<int>(8, 0));
  const Tensor& probs = g.softmax_probs(loss);
  for (int r = 0; r < 8; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 12; ++c) sum += probs.data[static_cast<std::size_t>(r) * 12 + c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("softmax cross entropy rejects out-of-range labels") {
  Graph g;
  const int z = g.add_input(Tensor::zeros({1, 4}));
  CHECK_THROWS_AS(g.softmax_cross_entropy(z, {4}), Error);
}

TEST_CASE("backward of a sum is all ones") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({4}, {1, -2, 3, 0}), true);
  const int loss = g.sum_all(x);
  g.backward(loss);
  for (float v : g.grad(x).data) CHECK(v == 1.0f);
}

TEST_CASE("relu subgradient at zero is zero") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({3}, {-1, 0, 2}), true);
  const int loss = g.sum_all(g.relu(x));
  g.backward(loss);
  const std::vector<float> expected = {0, 0, 1};
  CHECK(g.grad(x).data == expected);
}

TEST_CASE("gradient access before backward is a state error") {
  Graph g;
  const int x = g.add_input(Tensor::zeros({2}), true);
  CHECK_THROWS_AS(g.grad(x), Error);
}

TEST_CASE("double backward is a state error") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({2}, {1, 2}), true);
  const int loss = g.sum_all(x);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), Error);
}

TEST_CASE("maxpool tie-break routes the gradient to the first index") {
  Graph g;
  const int x = g.add_input(Tensor::from_values({1, 1, 2, 2}, {5, 5, 1, 2}), true);
  const int loss = g.sum_all(g.maxpool(x, 2, 2, 1, 0));
  g.backward(loss);
  const std::vector<float> expected = {1, 0, 0, 0};
  CHECK(g.grad(x).data == expected);
}

TEST_CASE("per-primitive gradients match central finite differences") {
  Rng rng(101);

  SUBCASE("conv2d input and kernel") {
    Tensor x = random_tensor({2, 2, 5, 5}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Graph g;
    const int xi = g.add_input(x, true);
    const int ki = g.add_input(k, true);
    const int loss = g.sum_all(g.conv2d(xi, ki, 2, 1));
    g.backward(loss);
    auto sum = [](const oracle::vecd& v) {
      double a = 0.0;
      for (double e : v) a += e;
      return a;
    };
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      return sum(oracle::conv2d(p, 2, 2, 5, 5, to_double(k), 3, 3, 3, 2, 1));
    });
    check_gradient(k, g.grad(ki), [&](const oracle::vecd& p) {
      return sum(oracle::conv2d(to_double(x), 2, 2, 5, 5, p, 3, 3, 3, 2, 1));
    });
  }

  SUBCASE("maxpool (inputs kept away from ties)") {
    Tensor x = Tensor::zeros({1, 2, 6, 6});
    for (std::size_t i = 0; i < x.numel(); ++i) {
      x.data[i] = static_cast<float>(0.01 * static_cast<double>((i * 37) % 71) + 0.1);
    }
    Graph g;
    const int xi = g.add_input(x, true);
    const int loss = g.sum_all(g.maxpool(xi, 3, 3, 2, 1));
    g.backward(loss);
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      const auto pooled = oracle::maxpool(p, 1, 2, 6, 6, 3, 3, 2, 1);
      double a = 0.0;
      for (double e : pooled) a += e;
      return a;
    }, 1e-4);
  }

  SUBCASE("global average pool") {
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Graph g;
    const int xi = g.add_input(x, true);
    const int loss = g.sum_all(g.global_avg_pool(xi));
    g.backward(loss);
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      const auto pooled = oracle::global_avg_pool(p, 2, 3, 4, 4);
      double a = 0.0;
      for (double e : pooled) a += e;
      return a;
    });
  }

  SUBCASE("linear input, weight and bias") {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({5, 4}, rng);
    Tensor b = random_tensor({5}, rng);
    Graph g;
    const int xi = g.add_input(x, true);
    const int wi = g.add_input(w, true);
    const int bi = g.add_input(b, true);
    const int loss = g.sum_all(g.linear(xi, wi, bi));
    g.backward(loss);
    auto sum = [](const oracle::vecd& v) {
      double a = 0.0;
      for (double e : v) a += e;
      return a;
    };
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      return sum(oracle::linear(p, 3, 4, to_double(w), to_double(b), 5));
    });
    check_gradient(w, g.grad(wi), [&](const oracle::vecd& p) {
      return sum(oracle::linear(to_double(x), 3, 4, p, to_double(b), 5));
    });
    check_gradient(b, g.grad(bi), [&](const oracle::vecd& p) {
      return sum(oracle::linear(to_double(x), 3, 4, to_double(w), p, 5));
    });
  }

  SUBCASE("batchnorm in training mode") {
    Tensor x = random_tensor({2, 2, 3, 3}, rng);
    Tensor gamma = random_tensor({2}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({2}, rng);
    // weight the output so per-element gradients are non-uniform
    Tensor weights = random_tensor({2, 2, 3, 3}, rng);
    Graph g;
    const int xi = g.add_input(x, true);
    const int gi = g.add_input(gamma, true);
    const int bi = g.add_input(beta, true);
    const int y = g.batchnorm(xi, gi, bi, true, nullptr, nullptr, nullptr, nullptr);
    const int wi = g.add_input(weights, false);
    const int loss = g.sum_all(g.residual_add(y, wi));  // sum(y) + const
    g.backward(loss);
    auto weighted = [&](const oracle::vecd& out) {
      double a = 0.0;
      for (double e : out) a += e;
      return a;
    };
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      return weighted(oracle::batchnorm_train(p, 2, 2, 3, 3, to_double(gamma), to_double(beta)));
    });
    check_gradient(gamma, g.grad(gi), [&](const oracle::vecd& p) {
      return weighted(oracle::batchnorm_train(to_double(x), 2, 2, 3, 3, p, to_double(beta)));
    });
    check_gradient(beta, g.grad(bi), [&](const oracle::vecd& p) {
      return weighted(oracle::batchnorm_train(to_double(x), 2, 2, 3, 3, to_double(gamma), p));
    });
  }

  SUBCASE("groupnorm") {
    Tensor x = random_tensor({2, 4, 3, 3}, rng);
    Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({4}, rng);
    Graph g;
    const int xi = g.add_input(x, true);
    const int gi = g.add_input(gamma, true);
    const int bi = g.add_input(beta, true);
    const int loss = g.sum_all(g.groupnorm(xi, gi, bi, 2));
    g.backward(loss);
    auto sum = [](const oracle::vecd& v) {
      double a = 0.0;
      for (double e : v) a += e;
      return a;
    };
    check_gradient(x, g.grad(xi), [&](const oracle::vecd& p) {
      return sum(oracle::groupnorm(p, 2, 4, 3, 3, 2, to_double(gamma), to_double(beta)));
    });
    check_gradient(gamma, g.grad(gi), [&](const oracle::vecd& p) {
      return sum(oracle::groupnorm(to_double(x), 2, 4, 3, 3, 2, p, to_double(beta)));
    });
    check_gradient(beta, g.grad(bi), [&](const oracle::vecd& p) {
      return sum(oracle::groupnorm(to_double(x), 2, 4, 3, 3, 2, to_double(gamma), p));
    });
  }

  SUBCASE("softmax cross entropy logits") {
    Tensor z = random_tensor({3, 5}, rng, -2.0, 2.0);
    const std::vector<int> labels = {4, 2, 0};
    Graph g;
    const int zi = g.add_input(z, true);
    const int loss = g.softmax_cross_entropy(zi, labels);
    g.backward(loss);
    check_gradient(z, g.grad(zi), [&](const oracle::vecd& p) {
      return oracle::softmax_xent_mean(p, 3, 5, labels);
    });
  }
}

TEST_CASE("two-conv network gradients match finite differences end to end") {
  // Seed 19 keeps every pre-relu activation well clear of zero, so central
  // differences at h = 1e-3 never step across the kink.
  Rng rng(19);
  Tensor input = random_tensor({1, 2, 6, 6}, rng);
  Tensor k1 = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  Tensor k2 = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
  Tensor w = random_tensor({3, 4}, rng, -0.5, 0.5);
  Tensor b = random_tensor({3}, rng, -0.1, 0.1);
  const std::vector<int> labels = {1};

  Graph g;
  const int xi = g.add_input(input, false);
  const int k1i = g.add_input(k1, true);
  const int k2i = g.add_input(k2, true);
  const int wi = g.add_input(w, true);
  const int bi = g.add_input(b, true);
  const int c1 = g.conv2d(xi, k1i, 1, 1);
  int node = g.relu(c1);
  const int c2 = g.conv2d(node, k2i, 2, 1);
  node = g.relu(c2);
  node = g.global_avg_pool(node);
  node = g.linear(node, wi, bi);
  const int loss = g.softmax_cross_entropy(node, labels);
  g.backward(loss);

  // fixture validity: the finite-difference step must not flip any relu
  float m1 = 1e9f, m2 = 1e9f;
  for (float v : g.value(c1).data) m1 = std::min(m1, std::fabs(v));
  for (float v : g.value(c2).data) m2 = std::min(m2, std::fabs(v));
  REQUIRE(m1 > 4e-3f);
  REQUIRE(m2 > 3e-2f);

  // double-precision forward of the same network
  auto net_loss = [&](const oracle::vecd& pk1, const oracle::vecd& pk2, const oracle::vecd& pw,
                      const oracle::vecd& pb) {
    auto h1 = oracle::relu(oracle::conv2d(to_double(input), 1, 2, 6, 6, pk1, 3, 3, 3, 1, 1));
    auto h2 = oracle::relu(oracle::conv2d(h1, 1, 3, 6, 6, pk2, 4, 3, 3, 2, 1));
    auto pooled = oracle::global_avg_pool(h2, 1, 4, 3, 3);
    auto logits = oracle::linear(pooled, 1, 4, pw, pb, 3);
    return oracle::softmax_xent_mean(logits, 1, 3, labels);
  };
  check_gradient(k1, g.grad(k1i), [&](const oracle::vecd& p) {
    return net_loss(p, to_double(k2), to_double(w), to_double(b));
  });
  check_gradient(k2, g.grad(k2i), [&](const oracle::vecd& p) {
    return net_loss(to_double(k1), p, to_double(w), to_double(b));
  });
  check_gradient(w, g.grad(wi), [&](const oracle::vecd& p) {
    return net_loss(to_double(k1), to_double(k2), p, to_double(b));
  });
  check_gradient(b, g.grad(bi), [&](const oracle::vecd& p) {
    return net_loss(to_double(k1), to_double(k2), to_double(w), p);
  });
}

TEST_CASE("conv and pool output shapes agree with an exhaustive placement count") {
  for (int h = 1; h <= 16; ++h) {
    for (int k = 1; k <= h + 2; ++k) {
      for (int stride = 1; stride <= 4; ++stride) {
        for (int pad = 0; pad <= 2; ++pad) {
          if (h + 2 * pad < k) continue;
          // count window placements directly
          int count = 0;
          for (int start = 0; start + k <= h + 2 * pad; start += stride) ++count;
          CHECK(kernels::conv_output_dim(h, k, stride, pad) == count);
        }
      }
    }
  }
}

TEST_CASE("identical inputs produce bit-identical conv outputs across runs") {
  Rng rng(333);
  Tensor x = random_tensor({2, 3, 16, 16}, rng);
  Tensor k = random_tensor({4, 3, 3, 3}, rng);
  Graph g1, g2;
  const int y1 = g1.conv2d(g1.add_input(x), g1.add_input(k), 2, 1);
  const int y2 = g2.conv2d(g2.add_input(x), g2.add_input(k), 2, 1);
  CHECK(g1.value(y1).data == g2.value(y2).data);
}

TEST_CASE("operations on finite inputs stay finite") {
  Rng rng(47);
  Tensor x = random_tensor({2, 4, 8, 8}, rng, -10.0, 10.0);
  Tensor k = random_tensor({4, 4, 3, 3}, rng, -2.0, 2.0);
  Tensor gamma = random_tensor({4}, rng, 0.5, 2.0);
  Tensor beta = random_tensor({4}, rng);
  Graph g;
  const int xi = g.add_input(x, true);
  int node = g.conv2d(xi, g.add_input(k), 1, 1);
  node = g.groupnorm(node, g.add_input(gamma), g.add_input(beta), 2);
  node = g.relu(node);
  node = g.maxpool(node, 2, 2, 2, 0);
  node = g.global_avg_pool(node);
  const int loss = g.sum_all(node);
  CHECK(g.value(loss).all_finite());
  g.backward(loss);
  CHECK(g.grad(xi).all_finite());
}
