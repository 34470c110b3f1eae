#include "gazecam/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/kernels.hpp"

namespace gazecam {

namespace {

constexpr char kHeatmapMagic[8] = {'G', 'Z', 'C', 'M', 'H', '0', '0', '1'};

std::optional<SampleKind> kind_from_token(const std::string& s) {
  if (s == "sample") return SampleKind::sample;
  if (s == "fixation_start") return SampleKind::fixation_start;
  if (s == "fixation_end") return SampleKind::fixation_end;
  return std::nullopt;
}

bool parse_number(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_integer(const std::string& s, int& out) {
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

GazeParseResult parse_gaze_log(const std::string& path) {
  CsvTable table = read_csv(path);
  const char* required[] = {"participant", "trial",  "image", "side",
                            "rect_x",      "rect_y", "presentation_ms",
                            "t_ms",        "x",      "y",     "kind"};
  int col[11];
  for (int i = 0; i < 11; ++i) {
    const int c = table.column(required[i]);
    if (c < 0) {
      throw format_error("'" + path + "': missing required column '" + std::string(required[i]) +
                         "'");
    }
    col[i] = c;
  }

  GazeParseResult result;
  // key: participant, trial id
  std::map<std::pair<std::string, int>, std::size_t> trial_index;

  int line_no = 1;  // header was line 1
  for (const auto& row : table.rows) {
    ++line_no;
    auto reject = [&](const std::string& reason) {
      result.rejects.push_back({line_no, reason});
    };
    if (row.size() != table.header.size()) {
      reject("wrong column count");
      continue;
    }

    const std::string& participant = row[static_cast<std::size_t>(col[0])];
    int trial_id = 0;
    if (participant.empty() || !parse_integer(row[static_cast<std::size_t>(col[1])], trial_id)) {
      reject("bad participant/trial");
      continue;
    }
    const std::string& image = row[static_cast<std::size_t>(col[2])];
    const std::string& side_tok = row[static_cast<std::size_t>(col[3])];
    if (image.empty() || side_tok.size() != 1 || (side_tok[0] != 'l' && side_tok[0] != 'r')) {
      reject("bad image/side");
      continue;
    }
    int rect_x = 0, rect_y = 0, presentation = 0;
    if (!parse_integer(row[static_cast<std::size_t>(col[4])], rect_x) ||
        !parse_integer(row[static_cast<std::size_t>(col[5])], rect_y) ||
        !parse_integer(row[static_cast<std::size_t>(col[6])], presentation)) {
      reject("bad rect/presentation");
      continue;
    }
    double t = 0.0, x = 0.0, y = 0.0;
    if (!parse_number(row[static_cast<std::size_t>(col[7])], t) ||
        !parse_number(row[static_cast<std::size_t>(col[8])], x) ||
        !parse_number(row[static_cast<std::size_t>(col[9])], y)) {
      reject("bad t/x/y");
      continue;
    }
    const auto kind = kind_from_token(row[static_cast<std::size_t>(col[10])]);
    if (!kind) {
      reject("unknown kind '" + row[static_cast<std::size_t>(col[10])] + "'");
      continue;
    }
    if (t < 0.0) {
      reject("negative timestamp");
      continue;
    }
    if (x < 0.0 || x >= kScreenWidth || y < 0.0 || y >= kScreenHeight) {
      reject("gaze position outside the screen");
      continue;
    }

    const auto key = std::make_pair(participant, trial_id);
    auto it = trial_index.find(key);
    if (it == trial_index.end()) {
      TrialRecord trial;
      trial.participant = participant;
      trial.trial = trial_id;
      trial.image = image;
      trial.side = side_tok[0];
      trial.rect_x = rect_x;
      trial.rect_y = rect_y;
      trial.presentation_ms = presentation;
      if (presentation != 150 && presentation != 3000) {
        trial.valid = false;
        trial.invalid_reason = "presentation_ms must be 150 or 3000";
      }
      if (rect_x < 0 || rect_y < 0 || rect_x + TrialRecord::rect_size > kScreenWidth ||
          rect_y + TrialRecord::rect_size > kScreenHeight) {
        trial.valid = false;
        trial.invalid_reason = "image rect extends beyond the screen";
      }
      trial_index.emplace(key, result.trials.size());
      result.trials.push_back(std::move(trial));
      it = trial_index.find(key);
    }
    TrialRecord& trial = result.trials[it->second];
    if (trial.image != image || trial.rect_x != rect_x || trial.rect_y != rect_y ||
        trial.presentation_ms != presentation) {
      reject("row contradicts trial metadata");
      continue;
    }
    trial.samples.push_back({t, x, y, *kind});
  }

  // rows may arrive in any order; sort within each trial by timestamp
  for (TrialRecord& trial : result.trials) {
    std::stable_sort(trial.samples.begin(), trial.samples.end(),
                     [](const GazeSample& a, const GazeSample& b) { return a.t_ms < b.t_ms; });
    // duplicate plain-sample timestamps cannot be ordered meaningfully at
    // 1000 Hz; flag the trial instead of guessing
    for (std::size_t i = 1; i < trial.samples.size(); ++i) {
      if (trial.samples[i].kind == SampleKind::sample &&
          trial.samples[i - 1].kind == SampleKind::sample &&
          trial.samples[i].t_ms == trial.samples[i - 1].t_ms) {
        trial.valid = false;
        trial.invalid_reason = "duplicate sample timestamp " + format_double(trial.samples[i].t_ms);
        break;
      }
    }
  }
  return result;
}

std::optional<double> boundary_entry(const TrialRecord& trial) {
  for (const GazeSample& s : trial.samples) {
    if (trial.inside_rect(s.x, s.y)) return s.t_ms;
  }
  return std::nullopt;
}

WindowSplit window_split(const TrialRecord& trial, double t0) {
  WindowSplit split;
  const double cut = t0 + 150.0;
  const double end = static_cast<double>(trial.presentation_ms);
  for (const GazeSample& s : trial.samples) {
    if (!trial.inside_rect(s.x, s.y)) continue;
    if (s.t_ms < t0) continue;
    if (s.t_ms < cut) {
      split.feedforward.push_back(&s);
    } else if (s.t_ms < end) {
      split.recurrent.push_back(&s);
    }
  }
  return split;
}

std::pair<double, double> to_image_coords(double x, double y, int rect_x, int rect_y) {
  const double ix = (x - rect_x) / 2.0;
  const double iy = (y - rect_y) / 2.0;
  return {std::clamp(ix, 0.0, 223.0), std::clamp(iy, 0.0, 223.0)};
}

std::optional<FixationPoint> compile_fixation(const std::vector<const GazeSample*>& window,
                                              const TrialRecord& trial) {
  if (window.empty()) return std::nullopt;

  double sum_x = 0.0, sum_y = 0.0;
  int events = 0;
  for (const GazeSample* s : window) {
    if (s->kind != SampleKind::sample) {
      auto [ix, iy] = to_image_coords(s->x, s->y, trial.rect_x, trial.rect_y);
      sum_x += ix;
      sum_y += iy;
      ++events;
    }
  }
  FixationPoint point;
  if (events > 0) {
    point.x = sum_x / events;
    point.y = sum_y / events;
    point.from_events = true;
    return point;
  }
  for (const GazeSample* s : window) {
    auto [ix, iy] = to_image_coords(s->x, s->y, trial.rect_x, trial.rect_y);
    sum_x += ix;
    sum_y += iy;
  }
  point.x = sum_x / static_cast<double>(window.size());
  point.y = sum_y / static_cast<double>(window.size());
  point.from_events = false;
  return point;
}

Heatmap build_heatmap(const std::vector<const TrialRecord*>& trials, HeatWindow window) {
  Heatmap heatmap;
  heatmap.window = window;
  const int size = Heatmap::size;
  const std::size_t pixels = static_cast<std::size_t>(size) * size;

  // participant -> accumulated count map
  std::map<std::string, std::vector<double>> per_participant;
  std::string image_id;

  for (const TrialRecord* trial : trials) {
    if (!trial->valid) continue;
    image_id = trial->image;
    const auto t0 = boundary_entry(*trial);
    if (!t0) continue;
    const WindowSplit split = window_split(*trial, *t0);
    const auto& samples =
        window == HeatWindow::feedforward ? split.feedforward : split.recurrent;
    if (samples.empty()) continue;
    auto& acc = per_participant.try_emplace(trial->participant, pixels, 0.0).first->second;
    for (const GazeSample* s : samples) {
      auto [ix, iy] = to_image_coords(s->x, s->y, trial->rect_x, trial->rect_y);
      const int px = std::min(size - 1, static_cast<int>(ix));
      const int py = std::min(size - 1, static_cast<int>(iy));
      acc[static_cast<std::size_t>(py) * size + px] += 1.0;
    }
  }

  if (per_participant.empty()) {
    throw input_error("no gaze samples contribute to the heatmap of image '" + image_id + "'");
  }
  heatmap.n_participants = static_cast<int>(per_participant.size());

  std::vector<float> mean(pixels, 0.0f);
  for (const auto& [participant, acc] : per_participant) {
    (void)participant;
    for (std::size_t i = 0; i < pixels; ++i) {
      mean[i] += static_cast<float>(acc[i]);
    }
  }
  for (float& v : mean) v /= static_cast<float>(heatmap.n_participants);

  heatmap.map.assign(pixels, 0.0f);
  kernels::gaussian_blur(mean.data(), heatmap.map.data(), size, size, kHeatmapSigma,
                         kHeatmapRadius);

  float max_value = 0.0f;
  for (float v : heatmap.map) max_value = std::max(max_value, v);
  if (max_value > 0.0f) {
    for (float& v : heatmap.map) v /= max_value;
  }
  return heatmap;
}

void save_heatmap_raw(const std::string& path, const float* map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out.write(kHeatmapMagic, 8);
  out.write(reinterpret_cast<const char*>(map),
            static_cast<std::streamsize>(sizeof(float) * Heatmap::size * Heatmap::size));
  if (!out) throw io_error("write failed for '" + path + "'");
}

std::vector<float> load_heatmap_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kHeatmapMagic, 8) != 0) {
    throw format_error("'" + path + "': bad magic, not a GZCMH001 map file");
  }
  std::vector<float> map(static_cast<std::size_t>(Heatmap::size) * Heatmap::size);
  in.read(reinterpret_cast<char*>(map.data()),
          static_cast<std::streamsize>(map.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != map.size() * sizeof(float)) {
    throw format_error("'" + path + "': truncated map data");
  }
  return map;
}

void write_rejects_csv(const std::string& path, const std::vector<GazeReject>& rejects) {
  CsvWriter csv(path, {"line", "reason"});
  for (const GazeReject& r : rejects) {
    csv.write_row({std::to_string(r.line), r.reason});
  }
  csv.close();
}

}  // namespace gazecam
