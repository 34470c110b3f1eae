#pragma once

#include <cstdint>

namespace gazecam::kernels {

// Geometry for NCHW cross-correlation (no kernel flip).
// Output sizes follow floor((size + 2*pad - k) / stride) + 1.
struct Conv2dShape {
  int n = 0, cin = 0, h = 0, w = 0;
  int cout = 0, kh = 0, kw = 0;
  int stride = 1, pad = 0;
  int oh = 0, ow = 0;
};

struct Pool2dShape {
  int n = 0, c = 0, h = 0, w = 0;
  int kh = 0, kw = 0;
  int stride = 1, pad = 0;
  int oh = 0, ow = 0;
};

int conv_output_dim(int size, int k, int stride, int pad);

Conv2dShape conv2d_shape(int n, int cin, int h, int w, int cout, int kh, int kw,
                         int stride, int pad);

Pool2dShape pool2d_shape(int n, int c, int h, int w, int kh, int kw, int stride, int pad);

// All kernels below exist twice: the OpenMP-parallel versions here and serial
// references in kernels::ref. Parallel loops split work by output element
// only; every output element is reduced by a single thread in a fixed order,
// so both versions produce bit-identical results for any thread count.

void conv2d_forward(const float* input, const float* kernel, float* output,
                    const Conv2dShape& s);
// Gather form of the transposed convolution: one thread per input element.
void conv2d_backward_input(const float* grad_out, const float* kernel, float* grad_in,
                           const Conv2dShape& s);
void conv2d_backward_kernel(const float* grad_out, const float* input, float* grad_kernel,
                            const Conv2dShape& s);

// argmax stores flat (h*W + w) indices into the input plane; ties resolve to
// the first maximal element in row-major window order.
void maxpool_forward(const float* input, float* output, std::int32_t* argmax,
                     const Pool2dShape& s);
void maxpool_backward_accumulate(const float* grad_out, const std::int32_t* argmax,
                                 float* grad_in, const Pool2dShape& s);

// y[n][co] = sum_ci x[n][ci] * w[co][ci] + b[co]; bias may be null.
void linear_forward(const float* x, const float* w, const float* bias, float* y,
                    int n, int cin, int cout);
void linear_backward_input(const float* grad_y, const float* w, float* grad_x,
                           int n, int cin, int cout);
void linear_backward_weight(const float* grad_y, const float* x, float* grad_w,
                            int n, int cin, int cout);
void linear_backward_bias(const float* grad_y, float* grad_b, int n, int cout);

// Truncated Gaussian (square support |dx|,|dy| <= radius), kernel normalized
// to sum 1, zero padding outside the map. Separable two-pass implementation.
void gaussian_blur(const float* in, float* out, int h, int w, double sigma, int radius);

// Half-pixel-center bilinear resize on channel-planar data:
// src = (dst + 0.5) * in/out - 0.5, clamped.
void resize_bilinear_chw(const float* in, int c, int ih, int iw, float* out, int oh, int ow);

// Grid upsample where integer pixel index x maps to grid coordinate
// x * gw / ow - 0.5, so grid cell centers land exactly on pixels
// ((j+0.5)*ow/gw, (i+0.5)*oh/gh).
void upsample_grid_bilinear(const float* grid, int gh, int gw, float* out, int oh, int ow);

namespace ref {

void conv2d_forward(const float* input, const float* kernel, float* output,
                    const Conv2dShape& s);
void conv2d_backward_input(const float* grad_out, const float* kernel, float* grad_in,
                           const Conv2dShape& s);
void conv2d_backward_kernel(const float* grad_out, const float* input, float* grad_kernel,
                            const Conv2dShape& s);
void maxpool_forward(const float* input, float* output, std::int32_t* argmax,
                     const Pool2dShape& s);
void maxpool_backward_accumulate(const float* grad_out, const std::int32_t* argmax,
                                 float* grad_in, const Pool2dShape& s);
void linear_forward(const float* x, const float* w, const float* bias, float* y,
                    int n, int cin, int cout);
void linear_backward_input(const float* grad_y, const float* w, float* grad_x,
                           int n, int cin, int cout);
void linear_backward_weight(const float* grad_y, const float* x, float* grad_w,
                            int n, int cin, int cout);
void linear_backward_bias(const float* grad_y, float* grad_b, int n, int cout);
void gaussian_blur(const float* in, float* out, int h, int w, double sigma, int radius);
void resize_bilinear_chw(const float* in, int c, int ih, int iw, float* out, int oh, int ow);
void upsample_grid_bilinear(const float* grid, int gh, int gw, float* out, int oh, int ow);

}  // namespace ref

}  // namespace gazecam::kernels
