#include "gazecam/imgstats.hpp"

#include <algorithm>
#include <cmath>

#include "gazecam/errors.hpp"
#include "gazecam/kernels.hpp"
#include "gazecam/stats.hpp"
#include "gazecam/tensor.hpp"

namespace gazecam {

void fft_inplace(std::complex<double>* a, int n, bool inverse) {
  if (n < 1 || (n & (n - 1)) != 0) throw internal_error("fft size must be a power of two");

  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (int len = 2; len <= n; len <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / len;
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (int i = 0; i < n; ++i) a[i] /= n;
  }
}

double image_entropy_bits(const ImageU8& image) {
  if (image.width < 1 || image.height < 1) throw input_error("entropy of an empty image");
  const std::vector<double> luma = image_to_luma(image);
  std::vector<std::size_t> histogram(256, 0);
  for (double v : luma) {
    const int bin = std::clamp(static_cast<int>(v), 0, 255);
    histogram[static_cast<std::size_t>(bin)]++;
  }
  const double total = static_cast<double>(luma.size());
  double entropy = 0.0;
  for (std::size_t count : histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

std::vector<double> fft2_power(const std::vector<double>& gray, int h, int w) {
  if (h < 1 || w < 1 || h > kFftSize || w > kFftSize) {
    throw input_error("fft2_power input must fit the " + std::to_string(kFftSize) + " grid");
  }
  if (gray.size() != static_cast<std::size_t>(h) * w) {
    throw input_error("fft2_power size mismatch");
  }
  // The mean is removed before padding: otherwise the brightness rectangle
  // leaks into every off-DC bin and swamps the spectral structure the
  // peak-to-mean ratio is after.
  double mean = 0.0;
  for (double v : gray) mean += v;
  mean /= static_cast<double>(gray.size());

  const int n = kFftSize;
  std::vector<std::complex<double>> grid(static_cast<std::size_t>(n) * n, {0.0, 0.0});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      grid[static_cast<std::size_t>(y) * n + x] =
          gray[static_cast<std::size_t>(y) * w + x] - mean;
    }
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < n; ++y) {
    fft_inplace(grid.data() + static_cast<std::size_t>(y) * n, n, false);
  }

#pragma omp parallel for schedule(static)
  for (int x = 0; x < n; ++x) {
    std::vector<std::complex<double>> column(static_cast<std::size_t>(n));
    for (int y = 0; y < n; ++y) column[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * n + x];
    fft_inplace(column.data(), n, false);
    for (int y = 0; y < n; ++y) grid[static_cast<std::size_t>(y) * n + x] = column[static_cast<std::size_t>(y)];
  }

  std::vector<double> power(static_cast<std::size_t>(n) * n);
  for (std::size_t i = 0; i < power.size(); ++i) {
    power[i] = std::norm(grid[i]);
  }
  return power;
}

double peak_to_mean(const std::vector<double>& power) {
  if (power.size() < 2) throw input_error("peak_to_mean needs a spectrum");
  double max_value = 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < power.size(); ++i) {  // bin 0 is DC
    max_value = std::max(max_value, power[i]);
    sum += power[i];
  }
  // degenerate spectra (all power in DC, up to FFT rounding noise) report 1
  if (sum <= std::max(1e-300, 1e-12 * power[0])) return 1.0;
  const double mean = sum / static_cast<double>(power.size() - 1);
  return max_value / mean;
}

namespace {

double at_clamped(const std::vector<double>& gray, int h, int w, int y, int x) {
  y = std::clamp(y, 0, h - 1);
  x = std::clamp(x, 0, w - 1);
  return gray[static_cast<std::size_t>(y) * w + x];
}

std::vector<double> sobel_magnitude(const std::vector<double>& gray, int h, int w) {
  std::vector<double> magnitude(static_cast<std::size_t>(h) * w);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tl = at_clamped(gray, h, w, y - 1, x - 1);
      const double tc = at_clamped(gray, h, w, y - 1, x);
      const double tr = at_clamped(gray, h, w, y - 1, x + 1);
      const double ml = at_clamped(gray, h, w, y, x - 1);
      const double mr = at_clamped(gray, h, w, y, x + 1);
      const double bl = at_clamped(gray, h, w, y + 1, x - 1);
      const double bc = at_clamped(gray, h, w, y + 1, x);
      const double br = at_clamped(gray, h, w, y + 1, x + 1);
      const double gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      magnitude[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return magnitude;
}

}  // namespace

double shape_edge_density(const std::vector<double>& gray01, int h, int w) {
  const std::vector<double> magnitude = sobel_magnitude(gray01, h, w);
  std::vector<double> sorted = magnitude;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = stats::percentile_type7(sorted, 0.75);
  std::size_t above = 0;
  for (double m : magnitude) {
    if (m > threshold) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(magnitude.size());
}

double texture_local_deviation(const std::vector<double>& gray01, int h, int w) {
  // per-row partials summed serially afterwards; an omp reduction would
  // combine in thread-arrival order and lose bit determinism
  std::vector<double> row_totals(static_cast<std::size_t>(h), 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double row_total = 0.0;
    for (int x = 0; x < w; ++x) {
      double sum = 0.0, sum_sq = 0.0;
      int count = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -2; dx <= 2; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const double v = gray01[static_cast<std::size_t>(yy) * w + xx];
          sum += v;
          sum_sq += v * v;
          ++count;
        }
      }
      const double mean = sum / count;
      const double var = std::max(0.0, sum_sq / count - mean * mean);
      row_total += std::sqrt(var);
    }
    row_totals[static_cast<std::size_t>(y)] = row_total;
  }
  double total = 0.0;
  for (double v : row_totals) total += v;
  return total / (static_cast<double>(h) * w);
}

ImageProperties compute_image_properties(const ImageU8& image) {
  ImageProperties props;
  props.entropy = image_entropy_bits(image);

  std::vector<double> luma = image_to_luma(image);
  int h = image.height, w = image.width;
  if (h != 224 || w != 224) {
    // bring arbitrary inputs to the working resolution first
    std::vector<float> src(luma.size());
    for (std::size_t i = 0; i < luma.size(); ++i) src[i] = static_cast<float>(luma[i]);
    std::vector<float> dst(224 * 224);
    kernels::resize_bilinear_chw(src.data(), 1, h, w, dst.data(), 224, 224);
    luma.assign(dst.begin(), dst.end());
    h = w = 224;
  }

  std::vector<double> gray01(luma.size());
  for (std::size_t i = 0; i < luma.size(); ++i) gray01[i] = luma[i] / 255.0;

  props.shape = shape_edge_density(gray01, h, w);
  props.texture = texture_local_deviation(gray01, h, w);
  props.peak_to_mean = peak_to_mean(fft2_power(gray01, h, w));
  return props;
}

}  // namespace gazecam
