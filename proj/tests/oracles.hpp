#pragma once

// Double-precision reference implementations used as independent oracles.
// They share no code with the gazecam kernels: plain loops, double storage,
// written straight from the definitions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using vecd = std::vector<double>;

inline int out_dim(int size, int k, int stride, int pad) {
  return (size + 2 * pad - k) / stride + 1;
}

inline vecd conv2d(const vecd& in, int n, int cin, int h, int w, const vecd& kernel, int cout,
                   int kh, int kw, int stride, int pad) {
  const int oh = out_dim(h, kh, stride, pad);
  const int ow = out_dim(w, kw, stride, pad);
  vecd out(static_cast<size_t>(n) * cout * oh * ow, 0.0);
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < cout; ++co) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int ci = 0; ci < cin; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = y * stride + ky - pad;
                const int ix = x * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += in[((static_cast<size_t>(b) * cin + ci) * h + iy) * w + ix] *
                       kernel[((static_cast<size_t>(co) * cin + ci) * kh + ky) * kw + kx];
              }
            }
          }
          out[((static_cast<size_t>(b) * cout + co) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
  return out;
}

inline vecd relu(const vecd& in) {
  vecd out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return out;
}

inline vecd maxpool(const vecd& in, int n, int c, int h, int w, int kh, int kw, int stride,
                    int pad) {
  const int oh = out_dim(h, kh, stride, pad);
  const int ow = out_dim(w, kw, stride, pad);
  vecd out(static_cast<size_t>(n) * c * oh * ow, 0.0);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = y * stride + ky - pad;
              const int ix = x * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              best = std::max(best, in[((static_cast<size_t>(b) * c + ch) * h + iy) * w + ix]);
            }
          }
          out[((static_cast<size_t>(b) * c + ch) * oh + y) * ow + x] = best;
        }
      }
    }
  }
  return out;
}

inline vecd global_avg_pool(const vecd& in, int n, int c, int h, int w) {
  vecd out(static_cast<size_t>(n) * c, 0.0);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int i = 0; i < h * w; ++i) {
        acc += in[(static_cast<size_t>(b) * c + ch) * h * w + i];
      }
      out[static_cast<size_t>(b) * c + ch] = acc / (static_cast<double>(h) * w);
    }
  }
  return out;
}

inline vecd linear(const vecd& x, int n, int cin, const vecd& w, const vecd& bias, int cout) {
  vecd out(static_cast<size_t>(n) * cout, 0.0);
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < cout; ++co) {
      double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(co)];
      for (int ci = 0; ci < cin; ++ci) {
        acc += x[static_cast<size_t>(b) * cin + ci] * w[static_cast<size_t>(co) * cin + ci];
      }
      out[static_cast<size_t>(b) * cout + co] = acc;
    }
  }
  return out;
}

inline vecd batchnorm_train(const vecd& x, int n, int c, int h, int w, const vecd& gamma,
                            const vecd& beta, double eps = 1e-5) {
  vecd out(x.size(), 0.0);
  const double m = static_cast<double>(n) * h * w;
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0, sum_sq = 0.0;
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i < h * w; ++i) {
        const double v = x[(static_cast<size_t>(b) * c + ch) * h * w + i];
        sum += v;
        sum_sq += v * v;
      }
    }
    const double mean = sum / m;
    const double var = std::max(0.0, sum_sq / m - mean * mean);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i < h * w; ++i) {
        const size_t idx = (static_cast<size_t>(b) * c + ch) * h * w + i;
        out[idx] = gamma[static_cast<size_t>(ch)] * (x[idx] - mean) * inv +
                   beta[static_cast<size_t>(ch)];
      }
    }
  }
  return out;
}

inline vecd groupnorm(const vecd& x, int n, int c, int h, int w, int groups, const vecd& gamma,
                      const vecd& beta, double eps = 1e-5) {
  vecd out(x.size(), 0.0);
  const int cg = c / groups;
  const double m = static_cast<double>(cg) * h * w;
  for (int b = 0; b < n; ++b) {
    for (int g = 0; g < groups; ++g) {
      double sum = 0.0, sum_sq = 0.0;
      for (int cc = 0; cc < cg; ++cc) {
        for (int i = 0; i < h * w; ++i) {
          const double v = x[(static_cast<size_t>(b) * c + g * cg + cc) * h * w + i];
          sum += v;
          sum_sq += v * v;
        }
      }
      const double mean = sum / m;
      const double var = std::max(0.0, sum_sq / m - mean * mean);
      const double inv = 1.0 / std::sqrt(var + eps);
      for (int cc = 0; cc < cg; ++cc) {
        const int ch = g * cg + cc;
        for (int i = 0; i < h * w; ++i) {
          const size_t idx = (static_cast<size_t>(b) * c + ch) * h * w + i;
          out[idx] = gamma[static_cast<size_t>(ch)] * (x[idx] - mean) * inv +
                     beta[static_cast<size_t>(ch)];
        }
      }
    }
  }
  return out;
}

inline vecd residual_add(const vecd& a, const vecd& b) {
  vecd out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline double softmax_xent_mean(const vecd& logits, int n, int c, const std::vector<int>& labels) {
  double total = 0.0;
  for (int b = 0; b < n; ++b) {
    double mx = logits[static_cast<size_t>(b) * c];
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits[static_cast<size_t>(b) * c + j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(logits[static_cast<size_t>(b) * c + j] - mx);
    total += -(logits[static_cast<size_t>(b) * c + labels[static_cast<size_t>(b)]] - mx -
               std::log(denom));
  }
  return total / n;
}

// Half-pixel-center bilinear sample of an h*w plane at output pixel (ox, oy)
// of an oh*ow target.
inline double bilinear_resize_at(const vecd& plane, int h, int w, int oh, int ow, int oy, int ox) {
  double fy = (oy + 0.5) * (static_cast<double>(h) / oh) - 0.5;
  double fx = (ox + 0.5) * (static_cast<double>(w) / ow) - 0.5;
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double wy = fy - y0, wx = fx - x0;
  return (1 - wy) * ((1 - wx) * plane[static_cast<size_t>(y0) * w + x0] +
                     wx * plane[static_cast<size_t>(y0) * w + x1]) +
         wy * ((1 - wx) * plane[static_cast<size_t>(y1) * w + x0] +
               wx * plane[static_cast<size_t>(y1) * w + x1]);
}

// Index-as-coordinate bilinear sample used by the saliency upsampler.
inline double grid_upsample_at(const vecd& grid, int gh, int gw, int oh, int ow, int oy, int ox) {
  double fy = static_cast<double>(oy) * gh / oh - 0.5;
  double fx = static_cast<double>(ox) * gw / ow - 0.5;
  fy = std::clamp(fy, 0.0, static_cast<double>(gh - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(gw - 1));
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
  const double wy = fy - y0, wx = fx - x0;
  return (1 - wy) * ((1 - wx) * grid[static_cast<size_t>(y0) * gw + x0] +
                     wx * grid[static_cast<size_t>(y0) * gw + x1]) +
         wy * ((1 - wx) * grid[static_cast<size_t>(y1) * gw + x0] +
               wx * grid[static_cast<size_t>(y1) * gw + x1]);
}

}  // namespace oracle
