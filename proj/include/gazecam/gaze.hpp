#pragma once

#include <optional>
#include <string>
#include <vector>

namespace gazecam {

enum class SampleKind { sample, fixation_start, fixation_end };

struct GazeSample {
  double t_ms = 0.0;  // milliseconds from image onset
  double x = 0.0, y = 0.0;  // screen pixels
  SampleKind kind = SampleKind::sample;
};

// One presentation: a 448x448 on-screen rectangle, 150 or 3000 ms.
struct TrialRecord {
  static constexpr int rect_size = 448;

  std::string participant;
  int trial = 0;
  std::string image;
  char side = 'l';  // 'l' or 'r'
  int rect_x = 0, rect_y = 0;
  int presentation_ms = 150;
  std::vector<GazeSample> samples;  // sorted by t_ms
  bool valid = true;
  std::string invalid_reason;

  bool inside_rect(double x, double y) const {
    return x >= rect_x && x < rect_x + rect_size && y >= rect_y && y < rect_y + rect_size;
  }
};

struct GazeReject {
  int line = 0;
  std::string reason;
};

struct GazeParseResult {
  std::vector<TrialRecord> trials;
  std::vector<GazeReject> rejects;
};

// Screen bounds used for row validation (the presentation display).
constexpr int kScreenWidth = 1920;
constexpr int kScreenHeight = 1080;

// CSV schema: participant,trial,image,side,rect_x,rect_y,presentation_ms,
// t_ms,x,y,kind. Rows are grouped by (participant, trial), sorted by t_ms
// within a trial; malformed rows land in the rejects list, not on the floor.
GazeParseResult parse_gaze_log(const std::string& path);

// Timestamp of the first sample inside the image rectangle; nullopt when gaze
// never enters (the trial is excluded downstream).
std::optional<double> boundary_entry(const TrialRecord& trial);

struct WindowSplit {
  std::vector<const GazeSample*> feedforward;  // [t0, t0+150), inside the rect
  std::vector<const GazeSample*> recurrent;    // [t0+150, presentation), inside the rect
};

WindowSplit window_split(const TrialRecord& trial, double t0);

// Screen -> 224x224 image coordinates: subtract the rect origin, divide by
// two, clamp to [0,223]. The sample must already be inside the rect.
std::pair<double, double> to_image_coords(double x, double y, int rect_x, int rect_y);

struct FixationPoint {
  double x = 0.0, y = 0.0;  // image coordinates
  bool from_events = false; // centroid of fixation events vs sample fallback
};

// Centroid of fixation-event rows in the window when any exist, otherwise
// the centroid of all window samples (flagged via from_events = false).
// nullopt when the window is empty.
std::optional<FixationPoint> compile_fixation(const std::vector<const GazeSample*>& window,
                                              const TrialRecord& trial);

enum class HeatWindow { feedforward, recurrent };

struct Heatmap {
  static constexpr int size = 224;
  std::vector<float> map;  // 224*224, max 1 (or all zero)
  HeatWindow window = HeatWindow::feedforward;
  int n_participants = 0;
};

constexpr double kHeatmapSigma = 15.0;
constexpr int kHeatmapRadius = 45;  // 3 sigma

// Per-participant accumulation of in-window sample positions, mean across
// participants, truncated Gaussian blur (sigma 15, radius 45, kernel sum 1,
// zero padding), then division by the maximum.
Heatmap build_heatmap(const std::vector<const TrialRecord*>& trials, HeatWindow window);

// Container: 8-byte magic GZCMH001 followed by 224*224 little-endian floats.
void save_heatmap_raw(const std::string& path, const float* map);
std::vector<float> load_heatmap_raw(const std::string& path);

void write_rejects_csv(const std::string& path, const std::vector<GazeReject>& rejects);

}  // namespace gazecam
