#include "gazecam/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gazecam/errors.hpp"

namespace gazecam {

namespace {

constexpr char kRawMagic[8] = {'G', 'Z', 'C', 'M', 'I', '0', '0', '1'};

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw format_error("cannot read image '" + path + "': " + why);
}

// Skips whitespace and '#' comment lines in PNM headers.
int read_pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) fail(path, "malformed header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

ImageU8 load_pnm(std::ifstream& in, const std::string& path, char kind) {
  const bool color = (kind == '6' || kind == '3');
  const bool binary = (kind == '6' || kind == '5');
  ImageU8 img;
  img.channels = color ? 3 : 1;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (img.width <= 0 || img.height <= 0) fail(path, "non-positive dimensions");
  if (maxval != 255) fail(path, "only maxval 255 is supported");
  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(count);
  if (binary) {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) fail(path, "truncated pixel data");
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = read_pnm_int(in, path);
      if (v > 255) fail(path, "sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

ImageU8 load_raw(std::ifstream& in, const std::string& path) {
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) fail(path, "bad raw header");
  ImageU8 img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = 3;
  const std::size_t count = static_cast<std::size_t>(w) * h * 3;
  img.pixels.resize(count);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) fail(path, "truncated pixel data");
  return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  char head[8] = {};
  in.read(head, 2);
  if (in.gcount() != 2) fail(path, "empty file");
  if (head[0] == 'P' && (head[1] == '2' || head[1] == '3' || head[1] == '5' || head[1] == '6')) {
    return load_pnm(in, path, head[1]);
  }
  in.read(head + 2, 6);
  if (in.gcount() == 6 && std::memcmp(head, kRawMagic, 8) == 0) {
    return load_raw(in, path);
  }
  fail(path, "unknown format (expected PPM/PGM or GZCMI001 raw)");
}

void save_ppm(const std::string& path, const ImageU8& image) {
  if (image.channels != 3) throw internal_error("save_ppm expects a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

void save_pgm(const std::string& path, const ImageU8& image) {
  if (image.channels != 1) throw internal_error("save_pgm expects a 1-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

void save_raw_rgb(const std::string& path, const ImageU8& image) {
  if (image.channels != 3) throw internal_error("save_raw_rgb expects a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out.write(kRawMagic, 8);
  const std::uint32_t w = static_cast<std::uint32_t>(image.width);
  const std::uint32_t h = static_cast<std::uint32_t>(image.height);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

void save_pgm_float(const std::string& path, const float* map, int h, int w) {
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(map[i], 0.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  save_pgm(path, img);
}

Tensor image_to_chw(const ImageU8& image) {
  Tensor t = Tensor::zeros({3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
      for (int c = 0; c < 3; ++c) {
        const int src = image.channels == 3 ? c : 0;
        t.data[static_cast<std::size_t>(c) * plane + p] =
            static_cast<float>(image.at(y, x, src)) / 255.0f;
      }
    }
  }
  return t;
}

std::vector<double> image_to_luma(const ImageU8& image) {
  std::vector<double> luma(static_cast<std::size_t>(image.width) * image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
      if (image.channels == 3) {
        luma[p] = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) +
                  0.114 * image.at(y, x, 2);
      } else {
        luma[p] = image.at(y, x, 0);
      }
    }
  }
  return luma;
}

}  // namespace gazecam
