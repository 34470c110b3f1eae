#pragma once

#include <complex>
#include <string>
#include <vector>

#include "gazecam/image.hpp"

namespace gazecam {

struct ImageProperties {
  double entropy = 0.0;       // bits, 256-bin grayscale histogram
  double shape = 0.0;         // Sobel edge density in [0,1]
  double texture = 0.0;       // mean local standard deviation, intensities in [0,1]
  double peak_to_mean = 1.0;  // non-DC power spectral peak over mean, >= 1
};

// In-place iterative radix-2 transform; n must be a power of two.
void fft_inplace(std::complex<double>* a, int n, bool inverse);

// Shannon entropy (log2) of the 256-bin histogram of luma values.
double image_entropy_bits(const ImageU8& image);

constexpr int kFftSize = 256;  // 224x224 inputs are zero-padded to 256x256

// Squared magnitudes of the 2D FFT of the mean-subtracted, zero-padded
// grayscale image. `gray` is h*w row-major, h,w <= 256; returns 256*256
// power bins (constant inputs transform to an all-zero spectrum).
std::vector<double> fft2_power(const std::vector<double>& gray, int h, int w);

// Max over non-DC bins divided by their mean; 1 when there is no non-DC power.
double peak_to_mean(const std::vector<double>& power);

// Fraction of pixels whose Sobel gradient magnitude exceeds the 75th
// percentile of all magnitudes. Intensities in [0,1], clamped borders.
double shape_edge_density(const std::vector<double>& gray01, int h, int w);

// Mean over pixels of the population standard deviation of the 5x5
// neighborhood (truncated at borders). Intensities in [0,1].
double texture_local_deviation(const std::vector<double>& gray01, int h, int w);

// All four properties of a (resize-cropped 224x224) image.
ImageProperties compute_image_properties(const ImageU8& image);

}  // namespace gazecam
