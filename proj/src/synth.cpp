#include "gazecam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/gaze.hpp"
#include "gazecam/image.hpp"
#include "gazecam/rng.hpp"

namespace fs = std::filesystem;

namespace gazecam {

namespace {

enum class Glyph {
  disk,
  square,
  triangle,
  diamond,
  ellipse,
  vbar,
  cross,
  hbar,
  ring,
  frame,
  star,
  half_disk,
};

struct CategoryDef {
  const char* name;
  bool animate;
  Glyph glyph;
  std::uint8_t r, g, b;
};

// The six animate categories come first in the table; directory order (and
// therefore class ids) is lexicographic at load time.
const CategoryDef kCategories[12] = {
    {"human", true, Glyph::disk, 235, 170, 130},
    {"dog", true, Glyph::square, 150, 90, 40},
    {"cat", true, Glyph::triangle, 250, 150, 20},
    {"bird", true, Glyph::diamond, 40, 140, 250},
    {"fish", true, Glyph::ellipse, 20, 200, 210},
    {"snake", true, Glyph::vbar, 40, 160, 40},
    {"car", false, Glyph::cross, 220, 30, 60},
    {"train", false, Glyph::hbar, 120, 120, 140},
    {"house", false, Glyph::ring, 180, 40, 40},
    {"bed", false, Glyph::frame, 150, 110, 220},
    {"flower", false, Glyph::star, 250, 100, 180},
    {"ball", false, Glyph::half_disk, 250, 210, 30},
};

bool glyph_hit(Glyph glyph, double dx, double dy, double radius) {
  const double ax = std::fabs(dx), ay = std::fabs(dy);
  switch (glyph) {
    case Glyph::disk:
      return dx * dx + dy * dy <= radius * radius;
    case Glyph::square:
      return ax <= radius && ay <= radius;
    case Glyph::triangle:
      return dy >= -radius && dy <= radius && ax <= (dy + radius) * 0.5;
    case Glyph::diamond:
      return ax + ay <= radius;
    case Glyph::ellipse:
      return (dx * dx) / (radius * radius) + (dy * dy) / (0.36 * radius * radius) <= 1.0;
    case Glyph::vbar:
      return ax <= radius * 0.3 && ay <= radius;
    case Glyph::cross:
      return (ax <= radius * 0.3 && ay <= radius) || (ay <= radius * 0.3 && ax <= radius);
    case Glyph::hbar:
      return ay <= radius * 0.3 && ax <= radius;
    case Glyph::ring: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= radius * radius && d2 >= 0.35 * radius * radius;
    }
    case Glyph::frame:
      return (ax <= radius && ay <= radius) && (ax >= 0.55 * radius || ay >= 0.55 * radius);
    case Glyph::star:
      return ax + ay <= radius || (ax <= radius * 0.35 && ay <= radius * 1.2) ||
             (ay <= radius * 0.35 && ax <= radius * 1.2);
    case Glyph::half_disk:
      return dx * dx + dy * dy <= radius * radius && dy <= 0.0;
  }
  return false;
}

}  // namespace

std::vector<ManifestRow> synth_images(const SyntheticImagesSpec& spec,
                                      const std::string& out_dir, std::uint64_t seed) {
  if (spec.n_categories < 2 || spec.n_categories > 12) {
    throw config_error("synth_images supports 2..12 categories, got " +
                       std::to_string(spec.n_categories));
  }
  if (spec.per_category < 1) throw config_error("per_category must be positive");
  if (spec.image_size != 224) throw config_error("image_size is fixed at 224");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory '" + out_dir + "': " + ec.message());

  const int size = spec.image_size;
  std::vector<ManifestRow> manifest;
  Rng base = Rng(seed).fork("synth_images");

  // alternate animate/inanimate picks so truncated corpora keep both groups
  std::vector<int> order;
  for (int i = 0; i < spec.n_categories; ++i) {
    order.push_back(i % 2 == 0 ? i / 2 : 6 + i / 2);
  }
  // category ids follow lexicographic directory order
  std::sort(order.begin(), order.end(), [](int a, int b) {
    return std::string(kCategories[a].name) < std::string(kCategories[b].name);
  });

  for (int rank = 0; rank < spec.n_categories; ++rank) {
    const CategoryDef& cat = kCategories[order[static_cast<std::size_t>(rank)]];
    const fs::path cat_dir = fs::path(out_dir) / cat.name;
    fs::create_directories(cat_dir, ec);
    if (ec) throw io_error("cannot create '" + cat_dir.string() + "': " + ec.message());

    Rng rng = base.fork(cat.name);
    for (int i = 0; i < spec.per_category; ++i) {
      ImageU8 img;
      img.width = img.height = size;
      img.channels = 3;
      img.pixels.assign(static_cast<std::size_t>(size) * size * 3, 0);

      // textured grayscale background: base level, horizontal ramp, noise
      const double base_level = rng.uniform(80.0, 170.0);
      const double ramp = rng.uniform(-20.0, 20.0);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double v = base_level + ramp * (static_cast<double>(x) / size - 0.5) +
                           rng.uniform(-25.0, 25.0);
          const auto value = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
          const std::size_t p = (static_cast<std::size_t>(y) * size + x) * 3;
          img.pixels[p] = img.pixels[p + 1] = img.pixels[p + 2] = value;
        }
      }

      const double radius = rng.uniform(20.0, 40.0);
      const double margin = radius + 6.0;
      const double cx = rng.uniform(margin, size - margin);
      const double cy = rng.uniform(margin, size - margin);
      const double jr = rng.uniform(-15.0, 15.0);
      const double jg = rng.uniform(-15.0, 15.0);
      const double jb = rng.uniform(-15.0, 15.0);

      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (!glyph_hit(cat.glyph, x - cx, y - cy, radius)) continue;
          const std::size_t p = (static_cast<std::size_t>(y) * size + x) * 3;
          img.pixels[p] = static_cast<std::uint8_t>(std::clamp(cat.r + jr, 0.0, 255.0));
          img.pixels[p + 1] = static_cast<std::uint8_t>(std::clamp(cat.g + jg, 0.0, 255.0));
          img.pixels[p + 2] = static_cast<std::uint8_t>(std::clamp(cat.b + jb, 0.0, 255.0));
        }
      }

      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d", cat.name, i);
      save_ppm((cat_dir / (std::string(name) + ".ppm")).string(), img);

      ManifestRow row;
      row.image = name;
      row.category = cat.name;
      row.category_id = rank;
      row.animate = cat.animate ? 1 : 0;
      row.cx = cx;
      row.cy = cy;
      // most images get a perfect surrogate human score so the control /
      // challenge partition has members at the default 100% threshold
      row.human_acc = rng.uniform() < 0.85 ? 100.0 : std::round(rng.uniform(60.0, 95.0));
      row.arousal = cat.animate ? rng.uniform(3.5, 6.5) : rng.uniform(1.5, 5.0);
      row.valence = rng.uniform(2.0, 6.0);
      manifest.push_back(std::move(row));
    }
  }

  write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  return manifest;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  CsvWriter csv(path, {"image", "category", "category_id", "animate", "cx", "cy", "human_acc",
                       "arousal", "valence"});
  for (const ManifestRow& r : rows) {
    csv.write_row({r.image, r.category, std::to_string(r.category_id), std::to_string(r.animate),
                   format_double(r.cx), format_double(r.cy), format_double(r.human_acc),
                   format_double(r.arousal), format_double(r.valence)});
  }
  csv.close();
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_image = table.require_column("image");
  const int c_cat = table.require_column("category");
  const int c_id = table.require_column("category_id");
  const int c_anim = table.require_column("animate");
  const int c_cx = table.require_column("cx");
  const int c_cy = table.require_column("cy");
  const int c_acc = table.require_column("human_acc");
  const int c_ar = table.require_column("arousal");
  const int c_va = table.require_column("valence");

  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  for (const auto& cells : table.rows) {
    ManifestRow r;
    r.image = cells[static_cast<std::size_t>(c_image)];
    if (!seen.insert(r.image).second) {
      throw input_error("duplicate image id '" + r.image + "' in manifest '" + path + "'");
    }
    r.category = cells[static_cast<std::size_t>(c_cat)];
    r.category_id = std::stoi(cells[static_cast<std::size_t>(c_id)]);
    r.animate = std::stoi(cells[static_cast<std::size_t>(c_anim)]);
    r.cx = std::stod(cells[static_cast<std::size_t>(c_cx)]);
    r.cy = std::stod(cells[static_cast<std::size_t>(c_cy)]);
    r.human_acc = std::stod(cells[static_cast<std::size_t>(c_acc)]);
    r.arousal = std::stod(cells[static_cast<std::size_t>(c_ar)]);
    r.valence = std::stod(cells[static_cast<std::size_t>(c_va)]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw input_error("manifest '" + path + "' has no rows");
  return rows;
}

void synth_gaze(const SyntheticGazeSpec& spec, const std::vector<ManifestRow>& manifest,
                const std::string& out_csv, std::uint64_t seed) {
  if (spec.participants < 1) throw config_error("participants must be positive");
  if (spec.samples_cap < 1) throw config_error("samples_cap must be positive");
  if (spec.object_weight < 0.0 || spec.object_weight > 1.0) {
    throw config_error("object_weight must lie in [0,1]");
  }

  CsvWriter csv(out_csv, {"participant", "trial", "image", "side", "rect_x", "rect_y",
                          "presentation_ms", "t_ms", "x", "y", "kind"});

  // left/right rects are horizontally symmetric around the screen center
  const int rect_y = (kScreenHeight - TrialRecord::rect_size) / 2;
  const int rect_left_x = 236;
  const int rect_right_x = kScreenWidth - rect_left_x - TrialRecord::rect_size;

  Rng base = Rng(seed).fork("synth_gaze");
  for (int p = 0; p < spec.participants; ++p) {
    char pid[16];
    std::snprintf(pid, sizeof(pid), "p%02d", p);
    Rng rng = base.fork(pid);
    int trial_id = 0;

    for (std::size_t mi = 0; mi < manifest.size(); ++mi) {
      const ManifestRow& row = manifest[mi];
      ++trial_id;
      const bool long_presentation = (static_cast<std::size_t>(p) + mi) % 2 == 1;
      const int presentation = long_presentation ? 3000 : 150;
      const bool left = (mi % 2 == 0) != (p % 2 == 1);
      const int rect_x = left ? rect_left_x : rect_right_x;

      auto emit = [&](double t, double x, double y, const char* kind) {
        csv.write_row({pid, std::to_string(trial_id), row.image, left ? "l" : "r",
                       std::to_string(rect_x), std::to_string(rect_y),
                       std::to_string(presentation), format_double(t), format_double(x),
                       format_double(y), kind});
      };

      // pre-entry samples hover at the fixation cross (outside the rect)
      const int entry = 20 + static_cast<int>(rng.uniform(0.0, 100.0));
      for (int t = 0; t < entry; t += 4) {
        const double x = std::clamp(rng.normal(kScreenWidth / 2.0, 4.0), 0.0, kScreenWidth - 1.0);
        const double y = std::clamp(rng.normal(kScreenHeight / 2.0, 4.0), 0.0, kScreenHeight - 1.0);
        emit(t, x, y, "sample");
      }

      // fixation sequence inside the image
      const int end = std::min(presentation, entry + spec.samples_cap);
      int t = entry;
      while (t < end) {
        double fx, fy;  // image coordinates
        if (rng.uniform() < spec.object_weight) {
          fx = rng.normal(row.cx, spec.object_sigma);
          fy = rng.normal(row.cy, spec.object_sigma);
        } else {
          fx = rng.normal(112.0, spec.central_sigma);
          fy = rng.normal(112.0, spec.central_sigma);
        }
        fx = std::clamp(fx, 1.0, 222.0);
        fy = std::clamp(fy, 1.0, 222.0);
        const double sx = rect_x + 2.0 * fx;
        const double sy = rect_y + 2.0 * fy;

        const int dwell = 150 + static_cast<int>(rng.uniform(0.0, 250.0));
        const int fix_end = std::min(end, t + dwell);
        emit(t, sx, sy, "fixation_start");
        for (int ts = t; ts < fix_end; ++ts) {
          const double jx = std::clamp(sx + rng.normal(0.0, 1.2),
                                       static_cast<double>(rect_x),
                                       static_cast<double>(rect_x + TrialRecord::rect_size - 1));
          const double jy = std::clamp(sy + rng.normal(0.0, 1.2),
                                       static_cast<double>(rect_y),
                                       static_cast<double>(rect_y + TrialRecord::rect_size - 1));
          emit(ts + 0.5, jx, jy, "sample");  // samples interleave between events
        }
        emit(fix_end - 0.25, sx, sy, "fixation_end");
        t = fix_end;
      }
    }
  }
  csv.close();
}

}  // namespace gazecam
