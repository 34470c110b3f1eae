#include "gazecam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "gazecam/errors.hpp"

namespace gazecam::kernels {

int conv_output_dim(int size, int k, int stride, int pad) {
  return (size + 2 * pad - k) / stride + 1;
}

Conv2dShape conv2d_shape(int n, int cin, int h, int w, int cout, int kh, int kw,
                         int stride, int pad) {
  if (stride < 1) throw config_error("conv2d stride must be positive, got " + std::to_string(stride));
  if (pad < 0) throw config_error("conv2d padding must be non-negative, got " + std::to_string(pad));
  if (h + 2 * pad < kh || w + 2 * pad < kw) {
    throw config_error("conv2d kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                       " exceeds padded input " + std::to_string(h + 2 * pad) + "x" +
                       std::to_string(w + 2 * pad));
  }
  Conv2dShape s;
  s.n = n; s.cin = cin; s.h = h; s.w = w;
  s.cout = cout; s.kh = kh; s.kw = kw;
  s.stride = stride; s.pad = pad;
  s.oh = conv_output_dim(h, kh, stride, pad);
  s.ow = conv_output_dim(w, kw, stride, pad);
  return s;
}

Pool2dShape pool2d_shape(int n, int c, int h, int w, int kh, int kw, int stride, int pad) {
  if (stride < 1) throw config_error("pool stride must be positive");
  if (pad < 0) throw config_error("pool padding must be non-negative");
  if (h + 2 * pad < kh || w + 2 * pad < kw) {
    throw config_error("pool window exceeds padded input");
  }
  Pool2dShape s;
  s.n = n; s.c = c; s.h = h; s.w = w;
  s.kh = kh; s.kw = kw; s.stride = stride; s.pad = pad;
  s.oh = conv_output_dim(h, kh, stride, pad);
  s.ow = conv_output_dim(w, kw, stride, pad);
  return s;
}

void conv2d_forward(const float* input, const float* kernel, float* output,
                    const Conv2dShape& s) {
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(s.oh) * s.ow;
  const std::size_t k_per_cout = static_cast<std::size_t>(s.cin) * s.kh * s.kw;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int co = 0; co < s.cout; ++co) {
      const float* in_n = input + static_cast<std::size_t>(n) * s.cin * in_plane;
      const float* k_co = kernel + static_cast<std::size_t>(co) * k_per_cout;
      float* out_p = output + (static_cast<std::size_t>(n) * s.cout + co) * out_plane;
      for (int oh = 0; oh < s.oh; ++oh) {
        for (int ow = 0; ow < s.ow; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < s.cin; ++ci) {
            const float* in_c = in_n + static_cast<std::size_t>(ci) * in_plane;
            const float* k_c = k_co + static_cast<std::size_t>(ci) * s.kh * s.kw;
            for (int kh = 0; kh < s.kh; ++kh) {
              const int ih = oh * s.stride + kh - s.pad;
              if (ih < 0 || ih >= s.h) continue;
              const float* in_row = in_c + static_cast<std::size_t>(ih) * s.w;
              const float* k_row = k_c + static_cast<std::size_t>(kh) * s.kw;
              for (int kw = 0; kw < s.kw; ++kw) {
                const int iw = ow * s.stride + kw - s.pad;
                if (iw < 0 || iw >= s.w) continue;
                acc += static_cast<double>(in_row[iw]) * k_row[kw];
              }
            }
          }
          out_p[static_cast<std::size_t>(oh) * s.ow + ow] = static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward_input(const float* grad_out, const float* kernel, float* grad_in,
                           const Conv2dShape& s) {
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(s.oh) * s.ow;
  const std::size_t k_per_cout = static_cast<std::size_t>(s.cin) * s.kh * s.kw;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int ci = 0; ci < s.cin; ++ci) {
      float* gin = grad_in + (static_cast<std::size_t>(n) * s.cin + ci) * in_plane;
      for (int ih = 0; ih < s.h; ++ih) {
        for (int iw = 0; iw < s.w; ++iw) {
          double acc = 0.0;
          for (int co = 0; co < s.cout; ++co) {
            const float* gout = grad_out + (static_cast<std::size_t>(n) * s.cout + co) * out_plane;
            const float* k_c = kernel + static_cast<std::size_t>(co) * k_per_cout +
                               static_cast<std::size_t>(ci) * s.kh * s.kw;
            for (int kh = 0; kh < s.kh; ++kh) {
              const int oh_num = ih + s.pad - kh;
              if (oh_num < 0 || oh_num % s.stride != 0) continue;
              const int oh = oh_num / s.stride;
              if (oh >= s.oh) continue;
              for (int kw = 0; kw < s.kw; ++kw) {
                const int ow_num = iw + s.pad - kw;
                if (ow_num < 0 || ow_num % s.stride != 0) continue;
                const int ow = ow_num / s.stride;
                if (ow >= s.ow) continue;
                acc += static_cast<double>(gout[static_cast<std::size_t>(oh) * s.ow + ow]) *
                       k_c[static_cast<std::size_t>(kh) * s.kw + kw];
              }
            }
          }
          gin[static_cast<std::size_t>(ih) * s.w + iw] += static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward_kernel(const float* grad_out, const float* input, float* grad_kernel,
                            const Conv2dShape& s) {
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(s.oh) * s.ow;
  const std::size_t k_per_cout = static_cast<std::size_t>(s.cin) * s.kh * s.kw;

#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < s.cout; ++co) {
    for (int ci = 0; ci < s.cin; ++ci) {
      float* gk = grad_kernel + static_cast<std::size_t>(co) * k_per_cout +
                  static_cast<std::size_t>(ci) * s.kh * s.kw;
      for (int kh = 0; kh < s.kh; ++kh) {
        for (int kw = 0; kw < s.kw; ++kw) {
          double acc = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const float* gout = grad_out + (static_cast<std::size_t>(n) * s.cout + co) * out_plane;
            const float* in_c = input + (static_cast<std::size_t>(n) * s.cin + ci) * in_plane;
            for (int oh = 0; oh < s.oh; ++oh) {
              const int ih = oh * s.stride + kh - s.pad;
              if (ih < 0 || ih >= s.h) continue;
              const float* in_row = in_c + static_cast<std::size_t>(ih) * s.w;
              const float* g_row = gout + static_cast<std::size_t>(oh) * s.ow;
              for (int ow = 0; ow < s.ow; ++ow) {
                const int iw = ow * s.stride + kw - s.pad;
                if (iw < 0 || iw >= s.w) continue;
                acc += static_cast<double>(g_row[ow]) * in_row[iw];
              }
            }
          }
          gk[static_cast<std::size_t>(kh) * s.kw + kw] += static_cast<float>(acc);
        }
      }
    }
  }
}

void maxpool_forward(const float* input, float* output, std::int32_t* argmax,
                     const Pool2dShape& s) {
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(s.oh) * s.ow;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* in_p = input + (static_cast<std::size_t>(n) * s.c + c) * in_plane;
      float* out_p = output + (static_cast<std::size_t>(n) * s.c + c) * out_plane;
      std::int32_t* am_p = argmax + (static_cast<std::size_t>(n) * s.c + c) * out_plane;
      for (int oh = 0; oh < s.oh; ++oh) {
        for (int ow = 0; ow < s.ow; ++ow) {
          float best = -std::numeric_limits<float>::infinity();
          std::int32_t best_idx = -1;
          for (int kh = 0; kh < s.kh; ++kh) {
            const int ih = oh * s.stride + kh - s.pad;
            if (ih < 0 || ih >= s.h) continue;
            for (int kw = 0; kw < s.kw; ++kw) {
              const int iw = ow * s.stride + kw - s.pad;
              if (iw < 0 || iw >= s.w) continue;
              const float v = in_p[static_cast<std::size_t>(ih) * s.w + iw];
              // strict > keeps the first maximal element on ties
              if (v > best) {
                best = v;
                best_idx = static_cast<std::int32_t>(ih * s.w + iw);
              }
            }
          }
          // window entirely in padding can't happen: k <= size + 2*pad and
          // windows start inside the padded area with at least one real cell
          // whenever pad < k (validated by callers).
          out_p[static_cast<std::size_t>(oh) * s.ow + ow] = best;
          am_p[static_cast<std::size_t>(oh) * s.ow + ow] = best_idx;
        }
      }
    }
  }
}

void maxpool_backward_accumulate(const float* grad_out, const std::int32_t* argmax,
                                 float* grad_in, const Pool2dShape& s) {
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(s.oh) * s.ow;

  // Scatter within one (n, c) plane stays on one thread; overlapping windows
  // of the same plane never race.
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* g_p = grad_out + (static_cast<std::size_t>(n) * s.c + c) * out_plane;
      const std::int32_t* am_p = argmax + (static_cast<std::size_t>(n) * s.c + c) * out_plane;
      float* gin_p = grad_in + (static_cast<std::size_t>(n) * s.c + c) * in_plane;
      for (std::size_t i = 0; i < out_plane; ++i) {
        if (am_p[i] >= 0) gin_p[am_p[i]] += g_p[i];
      }
    }
  }
}

void linear_forward(const float* x, const float* w, const float* bias, float* y,
                    int n, int cin, int cout) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int co = 0; co < cout; ++co) {
      const float* xi = x + static_cast<std::size_t>(i) * cin;
      const float* wc = w + static_cast<std::size_t>(co) * cin;
      double acc = bias ? static_cast<double>(bias[co]) : 0.0;
      for (int ci = 0; ci < cin; ++ci) acc += static_cast<double>(xi[ci]) * wc[ci];
      y[static_cast<std::size_t>(i) * cout + co] = static_cast<float>(acc);
    }
  }
}

void linear_backward_input(const float* grad_y, const float* w, float* grad_x,
                           int n, int cin, int cout) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int ci = 0; ci < cin; ++ci) {
      const float* gy = grad_y + static_cast<std::size_t>(i) * cout;
      double acc = 0.0;
      for (int co = 0; co < cout; ++co) {
        acc += static_cast<double>(gy[co]) * w[static_cast<std::size_t>(co) * cin + ci];
      }
      grad_x[static_cast<std::size_t>(i) * cin + ci] += static_cast<float>(acc);
    }
  }
}

void linear_backward_weight(const float* grad_y, const float* x, float* grad_w,
                            int n, int cin, int cout) {
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += static_cast<double>(grad_y[static_cast<std::size_t>(i) * cout + co]) *
               x[static_cast<std::size_t>(i) * cin + ci];
      }
      grad_w[static_cast<std::size_t>(co) * cin + ci] += static_cast<float>(acc);
    }
  }
}

void linear_backward_bias(const float* grad_y, float* grad_b, int n, int cout) {
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += grad_y[static_cast<std::size_t>(i) * cout + co];
    grad_b[co] += static_cast<float>(acc);
  }
}

namespace {

std::vector<double> gaussian_taps(double sigma, int radius) {
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    double v = std::exp(-0.5 * (static_cast<double>(d) * d) / (sigma * sigma));
    taps[static_cast<std::size_t>(d + radius)] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

}  // namespace

void gaussian_blur(const float* in, float* out, int h, int w, double sigma, int radius) {
  if (sigma <= 0.0 || radius < 0) throw config_error("gaussian_blur needs sigma > 0 and radius >= 0");
  const std::vector<double> taps = gaussian_taps(sigma, radius);
  std::vector<float> tmp(static_cast<std::size_t>(h) * w);

  // horizontal pass, zero outside the map
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const float* row = in + static_cast<std::size_t>(y) * w;
    float* trow = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      const int lo = std::max(-radius, -x);
      const int hi = std::min(radius, w - 1 - x);
      for (int d = lo; d <= hi; ++d) {
        acc += taps[static_cast<std::size_t>(d + radius)] * row[x + d];
      }
      trow[x] = static_cast<float>(acc);
    }
  }

  // vertical pass
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    float* orow = out + static_cast<std::size_t>(y) * w;
    const int lo = std::max(-radius, -y);
    const int hi = std::min(radius, h - 1 - y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = lo; d <= hi; ++d) {
        acc += taps[static_cast<std::size_t>(d + radius)] *
               tmp[static_cast<std::size_t>(y + d) * w + x];
      }
      orow[x] = static_cast<float>(acc);
    }
  }
}

void resize_bilinear_chw(const float* in, int c, int ih, int iw, float* out, int oh, int ow) {
  const double sy = static_cast<double>(ih) / oh;
  const double sx = static_cast<double>(iw) / ow;

#pragma omp parallel for collapse(2) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      const float* plane = in + static_cast<std::size_t>(ch) * ih * iw;
      float* orow = out + (static_cast<std::size_t>(ch) * oh + y) * ow;
      double fy = (y + 0.5) * sy - 0.5;
      fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, ih - 1);
      const double wy = fy - y0;
      for (int x = 0; x < ow; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, iw - 1);
        const double wx = fx - x0;
        const double v00 = plane[static_cast<std::size_t>(y0) * iw + x0];
        const double v01 = plane[static_cast<std::size_t>(y0) * iw + x1];
        const double v10 = plane[static_cast<std::size_t>(y1) * iw + x0];
        const double v11 = plane[static_cast<std::size_t>(y1) * iw + x1];
        orow[x] = static_cast<float>((1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                     wy * ((1.0 - wx) * v10 + wx * v11));
      }
    }
  }
}

void upsample_grid_bilinear(const float* grid, int gh, int gw, float* out, int oh, int ow) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    double fy = static_cast<double>(y) * gh / oh - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(gh - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, gh - 1);
    const double wy = fy - y0;
    float* orow = out + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double fx = static_cast<double>(x) * gw / ow - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(gw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, gw - 1);
      const double wx = fx - x0;
      const double v00 = grid[static_cast<std::size_t>(y0) * gw + x0];
      const double v01 = grid[static_cast<std::size_t>(y0) * gw + x1];
      const double v10 = grid[static_cast<std::size_t>(y1) * gw + x0];
      const double v11 = grid[static_cast<std::size_t>(y1) * gw + x1];
      orow[x] = static_cast<float>((1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                   wy * ((1.0 - wx) * v10 + wx * v11));
    }
  }
}

}  // namespace gazecam::kernels
