#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazecam/tensor.hpp"

namespace gazecam {

// 8-bit image, interleaved rows (RGB for channels == 3, gray for 1).
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Reads PPM (P6/P3), PGM (P5/P2) or the raw sidecar format (magic GZCMI001,
// u32 width, u32 height, RGB8 rows). Throws an ingestion error naming the path.
ImageU8 load_image(const std::string& path);

void save_ppm(const std::string& path, const ImageU8& image);
void save_pgm(const std::string& path, const ImageU8& image);
void save_raw_rgb(const std::string& path, const ImageU8& image);

// Values clamped to [0,1] and scaled to 8 bits.
void save_pgm_float(const std::string& path, const float* map, int h, int w);

// [3,H,W] float in [0,1]; gray inputs replicate to three channels.
Tensor image_to_chw(const ImageU8& image);

// 0.299 R + 0.587 G + 0.114 B, range [0,255].
std::vector<double> image_to_luma(const ImageU8& image);

}  // namespace gazecam
