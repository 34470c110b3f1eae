// The OpenMP kernels and their serial references must agree bit for bit:
// parallel loops only split output elements, never a reduction.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gazecam/kernels.hpp"
#include "gazecam/rng.hpp"

using namespace gazecam;

namespace {

std::vector<float> random_values(std::size_t count, Rng& rng) {
  std::vector<float> v(count);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

}  // namespace

TEST_CASE("conv2d forward/backward parity") {
  Rng rng(1);
  const auto s = kernels::conv2d_shape(2, 3, 17, 13, 5, 3, 3, 2, 1);
  const auto input = random_values(static_cast<std::size_t>(s.n) * s.cin * s.h * s.w, rng);
  const auto kernel = random_values(static_cast<std::size_t>(s.cout) * s.cin * s.kh * s.kw, rng);
  const std::size_t out_count = static_cast<std::size_t>(s.n) * s.cout * s.oh * s.ow;

  std::vector<float> out_par(out_count), out_ser(out_count);
  kernels::conv2d_forward(input.data(), kernel.data(), out_par.data(), s);
  kernels::ref::conv2d_forward(input.data(), kernel.data(), out_ser.data(), s);
  CHECK(out_par == out_ser);

  const auto grad_out = random_values(out_count, rng);
  std::vector<float> gi_par(input.size(), 0.0f), gi_ser(input.size(), 0.0f);
  kernels::conv2d_backward_input(grad_out.data(), kernel.data(), gi_par.data(), s);
  kernels::ref::conv2d_backward_input(grad_out.data(), kernel.data(), gi_ser.data(), s);
  CHECK(gi_par == gi_ser);

  std::vector<float> gk_par(kernel.size(), 0.0f), gk_ser(kernel.size(), 0.0f);
  kernels::conv2d_backward_kernel(grad_out.data(), input.data(), gk_par.data(), s);
  kernels::ref::conv2d_backward_kernel(grad_out.data(), input.data(), gk_ser.data(), s);
  CHECK(gk_par == gk_ser);
}

TEST_CASE("maxpool parity") {
  Rng rng(2);
  const auto s = kernels::pool2d_shape(2, 4, 15, 11, 3, 3, 2, 1);
  const auto input = random_values(static_cast<std::size_t>(s.n) * s.c * s.h * s.w, rng);
  const std::size_t out_count = static_cast<std::size_t>(s.n) * s.c * s.oh * s.ow;

  std::vector<float> out_par(out_count), out_ser(out_count);
  std::vector<std::int32_t> am_par(out_count), am_ser(out_count);
  kernels::maxpool_forward(input.data(), out_par.data(), am_par.data(), s);
  kernels::ref::maxpool_forward(input.data(), out_ser.data(), am_ser.data(), s);
  CHECK(out_par == out_ser);
  CHECK(am_par == am_ser);

  const auto grad_out = random_values(out_count, rng);
  std::vector<float> gi_par(input.size(), 0.0f), gi_ser(input.size(), 0.0f);
  kernels::maxpool_backward_accumulate(grad_out.data(), am_par.data(), gi_par.data(), s);
  kernels::ref::maxpool_backward_accumulate(grad_out.data(), am_ser.data(), gi_ser.data(), s);
  CHECK(gi_par == gi_ser);
}

TEST_CASE("linear parity") {
  Rng rng(3);
  const int n = 7, cin = 13, cout = 9;
  const auto x = random_values(static_cast<std::size_t>(n) * cin, rng);
  const auto w = random_values(static_cast<std::size_t>(cout) * cin, rng);
  const auto b = random_values(static_cast<std::size_t>(cout), rng);

  std::vector<float> y_par(static_cast<std::size_t>(n) * cout), y_ser(y_par.size());
  kernels::linear_forward(x.data(), w.data(), b.data(), y_par.data(), n, cin, cout);
  kernels::ref::linear_forward(x.data(), w.data(), b.data(), y_ser.data(), n, cin, cout);
  CHECK(y_par == y_ser);

  const auto gy = random_values(y_par.size(), rng);
  std::vector<float> gx_par(x.size(), 0.0f), gx_ser(x.size(), 0.0f);
  kernels::linear_backward_input(gy.data(), w.data(), gx_par.data(), n, cin, cout);
  kernels::ref::linear_backward_input(gy.data(), w.data(), gx_ser.data(), n, cin, cout);
  CHECK(gx_par == gx_ser);

  std::vector<float> gw_par(w.size(), 0.0f), gw_ser(w.size(), 0.0f);
  kernels::linear_backward_weight(gy.data(), x.data(), gw_par.data(), n, cin, cout);
  kernels::ref::linear_backward_weight(gy.data(), x.data(), gw_ser.data(), n, cin, cout);
  CHECK(gw_par == gw_ser);

  std::vector<float> gb_par(b.size(), 0.0f), gb_ser(b.size(), 0.0f);
  kernels::linear_backward_bias(gy.data(), gb_par.data(), n, cout);
  kernels::ref::linear_backward_bias(gy.data(), gb_ser.data(), n, cout);
  CHECK(gb_par == gb_ser);
}

TEST_CASE("gaussian blur parity") {
  Rng rng(4);
  const int h = 96, w = 80;
  const auto input = random_values(static_cast<std::size_t>(h) * w, rng);
  std::vector<float> out_par(input.size()), out_ser(input.size());
  kernels::gaussian_blur(input.data(), out_par.data(), h, w, 15.0, 45);
  kernels::ref::gaussian_blur(input.data(), out_ser.data(), h, w, 15.0, 45);
  CHECK(out_par == out_ser);
}

TEST_CASE("bilinear resize parity") {
  Rng rng(5);
  const int c = 3, ih = 37, iw = 53, oh = 64, ow = 48;
  const auto input = random_values(static_cast<std::size_t>(c) * ih * iw, rng);
  std::vector<float> out_par(static_cast<std::size_t>(c) * oh * ow), out_ser(out_par.size());
  kernels::resize_bilinear_chw(input.data(), c, ih, iw, out_par.data(), oh, ow);
  kernels::ref::resize_bilinear_chw(input.data(), c, ih, iw, out_ser.data(), oh, ow);
  CHECK(out_par == out_ser);
}

TEST_CASE("grid upsample parity") {
  Rng rng(6);
  const int gh = 7, gw = 7, oh = 224, ow = 224;
  const auto grid = random_values(static_cast<std::size_t>(gh) * gw, rng);
  std::vector<float> out_par(static_cast<std::size_t>(oh) * ow), out_ser(out_par.size());
  kernels::upsample_grid_bilinear(grid.data(), gh, gw, out_par.data(), oh, ow);
  kernels::ref::upsample_grid_bilinear(grid.data(), gh, gw, out_ser.data(), oh, ow);
  CHECK(out_par == out_ser);
}
