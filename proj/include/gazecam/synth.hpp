#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gazecam {

// Desk-scale surrogate corpus: one colored glyph per category on a textured
// grayscale background, with the glyph centroid recorded per image.
struct SyntheticImagesSpec {
  int n_categories = 12;   // <= 12
  int per_category = 30;
  int image_size = 224;
};

struct ManifestRow {
  std::string image;      // id = "<category>_<index>"
  std::string category;
  int category_id = 0;
  int animate = 0;
  double cx = 0.0, cy = 0.0;  // glyph centroid, image coordinates
  double human_acc = 0.0;     // surrogate per-image human accuracy (percent)
  double arousal = 0.0;       // surrogate 1..7 rating
  double valence = 0.0;       // surrogate 1..7 rating
};

// Writes <out_dir>/<category>/<image>.ppm and <out_dir>/manifest.csv;
// deterministic per seed. Returns the manifest rows.
std::vector<ManifestRow> synth_images(const SyntheticImagesSpec& spec,
                                      const std::string& out_dir, std::uint64_t seed);

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

struct SyntheticGazeSpec {
  int participants = 10;
  int samples_cap = 3000;        // per trial, 1000 Hz
  double central_sigma = 30.0;   // image px, central fixation bias
  double object_sigma = 2.0;     // image px, spread around the glyph centroid
  double object_weight = 0.7;    // probability a fixation targets the glyph
};

// One trial per (participant, image); presentation alternates 150/3000 ms and
// the side alternates left/right. Gaze starts at the screen center, crosses
// the image boundary within the first ~120 ms, then fixates points drawn from
// the central-bias/object mixture. Output validates against the gaze CSV
// schema with zero rejected rows.
void synth_gaze(const SyntheticGazeSpec& spec, const std::vector<ManifestRow>& manifest,
                const std::string& out_csv, std::uint64_t seed);

}  // namespace gazecam
