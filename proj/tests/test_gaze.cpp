#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gazecam/errors.hpp"
#include "gazecam/gaze.hpp"
#include "gazecam/rng.hpp"

using namespace gazecam;
namespace fs = std::filesystem;

namespace {

const char* kHeader = "participant,trial,image,side,rect_x,rect_y,presentation_ms,t_ms,x,y,kind";

std::string write_fixture(const std::string& name, const std::vector<std::string>& rows,
                          const std::string& header = kHeader) {
  const fs::path path = fs::temp_directory_path() / ("gazecam_gaze_" + name + ".csv");
  std::ofstream out(path);
  out << header << "\n";
  for (const std::string& row : rows) out << row << "\n";
  return path.string();
}

// Builds a trial whose samples are given in image coordinates.
TrialRecord make_trial(std::string image, int presentation,
                       const std::vector<std::array<double, 3>>& t_xy_image,
                       const std::string& participant = "p1", int rect_x = 600, int rect_y = 316) {
  TrialRecord trial;
  trial.participant = participant;
  trial.trial = 1;
  trial.image = std::move(image);
  trial.side = 'l';
  trial.rect_x = rect_x;
  trial.rect_y = rect_y;
  trial.presentation_ms = presentation;
  for (const auto& [t, ix, iy] : t_xy_image) {
    trial.samples.push_back({t, rect_x + 2.0 * ix, rect_y + 2.0 * iy, SampleKind::sample});
  }
  return trial;
}

}  // namespace

TEST_CASE("a two-trial fixture parses into two records with correct counts") {
  const std::string path = write_fixture(
      "two_trials",
      {
          "p1,1,img_a,l,600,316,150,0,700,400,sample",
          "p1,1,img_a,l,600,316,150,1,702,401,sample",
          "p1,1,img_a,l,600,316,150,2,703,402,sample",
          "p2,5,img_b,r,1200,316,3000,0,1300,500,sample",
          "p2,5,img_b,r,1200,316,3000,1,1301,501,sample",
      });
  const GazeParseResult result = parse_gaze_log(path);
  REQUIRE(result.trials.size() == 2);
  CHECK(result.rejects.empty());
  CHECK(result.trials[0].samples.size() == 3);
  CHECK(result.trials[1].samples.size() == 2);
  CHECK(result.trials[0].participant == "p1");
  CHECK(result.trials[1].image == "img_b");
}

TEST_CASE("rows outside the screen are rejected while the trial survives") {
  const std::string path = write_fixture(
      "reject_offscreen",
      {
          "p1,1,img,l,600,316,150,0,700,400,sample",
          "p1,1,img,l,600,316,150,1,5000,400,sample",  // x beyond 1920
          "p1,1,img,l,600,316,150,2,702,401,sample",
      });
  const GazeParseResult result = parse_gaze_log(path);
  REQUIRE(result.trials.size() == 1);
  CHECK(result.trials[0].valid);
  CHECK(result.trials[0].samples.size() == 2);
  REQUIRE(result.rejects.size() == 1);
  CHECK(result.rejects[0].line == 3);
}

TEST_CASE("shuffled rows parse into identical trials after the within-trial sort") {
  std::vector<std::string> rows;
  Rng rng(3);
  for (int t = 0; t < 40; ++t) {
    rows.push_back("p1,1,img,l,600,316,3000," + std::to_string(t) + "," +
                   std::to_string(610 + t) + ",400,sample");
  }
  const std::string ordered = write_fixture("ordered", rows);
  std::vector<std::string> shuffled = rows;
  rng.shuffle(shuffled);
  const std::string scrambled = write_fixture("scrambled", shuffled);

  const GazeParseResult a = parse_gaze_log(ordered);
  const GazeParseResult b = parse_gaze_log(scrambled);
  REQUIRE(a.trials.size() == 1);
  REQUIRE(b.trials.size() == 1);
  REQUIRE(a.trials[0].samples.size() == b.trials[0].samples.size());
  for (std::size_t i = 0; i < a.trials[0].samples.size(); ++i) {
    CHECK(a.trials[0].samples[i].t_ms == b.trials[0].samples[i].t_ms);
    CHECK(a.trials[0].samples[i].x == b.trials[0].samples[i].x);
  }
}

TEST_CASE("a missing required column is a format error") {
  const std::string path = write_fixture("missing_col", {"p1,1,img,l,600,316,150,0,700,400"},
                                         "participant,trial,image,side,rect_x,rect_y,"
                                         "presentation_ms,t_ms,x,y");
  CHECK_THROWS_AS(parse_gaze_log(path), Error);
}

TEST_CASE("duplicate plain-sample timestamps invalidate the trial") {
  const std::string path = write_fixture(
      "dup_t",
      {
          "p1,1,img,l,600,316,150,5,700,400,sample",
          "p1,1,img,l,600,316,150,5,710,410,sample",
      });
  const GazeParseResult result = parse_gaze_log(path);
  REQUIRE(result.trials.size() == 1);
  CHECK_FALSE(result.trials[0].valid);
}

TEST_CASE("boundary entry finds the first in-rect sample") {
  SUBCASE("entry at t = 80") {
    TrialRecord trial = make_trial("img", 3000, {});
    trial.samples.push_back({0, 100, 100, SampleKind::sample});   // outside
    trial.samples.push_back({80, 700, 400, SampleKind::sample});  // inside
    trial.samples.push_back({81, 701, 401, SampleKind::sample});
    const auto t0 = boundary_entry(trial);
    REQUIRE(t0.has_value());
    CHECK(*t0 == 80.0);
  }
  SUBCASE("gaze never inside yields no entry") {
    TrialRecord trial = make_trial("img", 3000, {});
    trial.samples.push_back({0, 100, 100, SampleKind::sample});
    CHECK_FALSE(boundary_entry(trial).has_value());
  }
  SUBCASE("starting inside counts from zero") {
    const TrialRecord trial = make_trial("img", 3000, {{0, 50, 50}});
    const auto t0 = boundary_entry(trial);
    REQUIRE(t0.has_value());
    CHECK(*t0 == 0.0);
  }
}

TEST_CASE("window split uses half-open intervals at the 150 ms cut") {
  const TrialRecord trial = make_trial(
      "img", 3000, {{10, 50, 50}, {159, 60, 60}, {160, 70, 70}, {161, 80, 80}});
  const WindowSplit split = window_split(trial, 10.0);
  REQUIRE(split.feedforward.size() == 2);
  REQUIRE(split.recurrent.size() == 2);
  CHECK(split.feedforward[0]->t_ms == 10.0);
  CHECK(split.feedforward[1]->t_ms == 159.0);
  CHECK(split.recurrent[0]->t_ms == 160.0);
}

TEST_CASE("a 150 ms presentation has an empty recurrent window") {
  const TrialRecord trial = make_trial("img", 150, {{0, 50, 50}, {100, 60, 60}, {149, 70, 70}});
  const WindowSplit split = window_split(trial, 0.0);
  CHECK(split.feedforward.size() == 3);
  CHECK(split.recurrent.empty());
}

TEST_CASE("uniform 1000 Hz sampling puts 150 samples into the feedforward window") {
  std::vector<std::array<double, 3>> samples;
  for (int t = 0; t < 3000; ++t) samples.push_back({static_cast<double>(t), 100, 100});
  const TrialRecord trial = make_trial("img", 3000, samples);
  const WindowSplit split = window_split(trial, 0.0);
  CHECK(split.feedforward.size() == 150);
  CHECK(split.recurrent.size() == 2850);
}

TEST_CASE("window split partitions the in-image samples") {
  Rng rng(17);
  std::vector<std::array<double, 3>> samples;
  for (int i = 0; i < 500; ++i) {
    samples.push_back({rng.uniform(0.0, 3000.0), rng.uniform(0.0, 223.0), rng.uniform(0.0, 223.0)});
  }
  TrialRecord trial = make_trial("img", 3000, samples);
  std::stable_sort(trial.samples.begin(), trial.samples.end(),
                   [](const GazeSample& a, const GazeSample& b) { return a.t_ms < b.t_ms; });
  const auto t0 = boundary_entry(trial);
  REQUIRE(t0.has_value());
  const WindowSplit split = window_split(trial, *t0);
  std::size_t in_image = 0;
  for (const GazeSample& s : trial.samples) {
    if (trial.inside_rect(s.x, s.y) && s.t_ms >= *t0 &&
        s.t_ms < trial.presentation_ms) {
      ++in_image;
    }
  }
  CHECK(split.feedforward.size() + split.recurrent.size() == in_image);
  for (const GazeSample* s : split.feedforward) CHECK(s->t_ms < *t0 + 150.0);
  for (const GazeSample* s : split.recurrent) CHECK(s->t_ms >= *t0 + 150.0);
}

TEST_CASE("screen to image coordinates") {
  CHECK(to_image_coords(600, 316, 600, 316) == std::make_pair(0.0, 0.0));
  CHECK(to_image_coords(600 + 224, 316 + 224, 600, 316) == std::make_pair(112.0, 112.0));
  CHECK(to_image_coords(700, 416, 600, 316) == std::make_pair(50.0, 50.0));
  // clamped into [0,223] even at the far rect edge
  const auto [x, y] = to_image_coords(600 + 447, 316 + 447, 600, 316);
  CHECK(x <= 223.0);
  CHECK(y <= 223.0);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto [cx, cy] =
        to_image_coords(600 + rng.uniform(0.0, 448.0), 316 + rng.uniform(0.0, 448.0), 600, 316);
    CHECK(cx >= 0.0);
    CHECK(cx <= 223.0);
    CHECK(cy >= 0.0);
    CHECK(cy <= 223.0);
  }
}

TEST_CASE("fixation compilation prefers events and falls back to samples") {
  TrialRecord trial = make_trial("img", 3000, {});
  const double rx = trial.rect_x, ry = trial.rect_y;

  SUBCASE("constant samples compile to that point") {
    trial.samples.push_back({0, rx + 200, ry + 160, SampleKind::sample});
    trial.samples.push_back({1, rx + 200, ry + 160, SampleKind::sample});
    const WindowSplit split = window_split(trial, 0.0);
    const auto fix = compile_fixation(split.feedforward, trial);
    REQUIRE(fix.has_value());
    CHECK(fix->x == doctest::Approx(100.0));
    CHECK(fix->y == doctest::Approx(80.0));
    CHECK_FALSE(fix->from_events);
  }
  SUBCASE("two samples average") {
    trial.samples.push_back({0, rx + 0, ry + 0, SampleKind::sample});
    trial.samples.push_back({1, rx + 200, ry + 200, SampleKind::sample});
    const WindowSplit split = window_split(trial, 0.0);
    const auto fix = compile_fixation(split.feedforward, trial);
    REQUIRE(fix.has_value());
    CHECK(fix->x == doctest::Approx(50.0));
    CHECK(fix->y == doctest::Approx(50.0));
  }
  SUBCASE("fixation events dominate plain samples") {
    // hand-computed centroid of the two event rows: ((30+50)/2, (40+60)/2)
    trial.samples.push_back({0, rx + 2 * 10, ry + 2 * 10, SampleKind::sample});
    trial.samples.push_back({1, rx + 2 * 30, ry + 2 * 40, SampleKind::fixation_start});
    trial.samples.push_back({2, rx + 2 * 200, ry + 2 * 200, SampleKind::sample});
    trial.samples.push_back({3, rx + 2 * 50, ry + 2 * 60, SampleKind::fixation_end});
    const WindowSplit split = window_split(trial, 0.0);
    const auto fix = compile_fixation(split.feedforward, trial);
    REQUIRE(fix.has_value());
    CHECK(fix->from_events);
    CHECK(fix->x == doctest::Approx(40.0));
    CHECK(fix->y == doctest::Approx(50.0));
  }
  SUBCASE("an empty window compiles to nothing") {
    const WindowSplit split = window_split(trial, 0.0);
    CHECK_FALSE(compile_fixation(split.feedforward, trial).has_value());
  }
}

TEST_CASE("single-sample heatmap equals the truncated Gaussian oracle") {
  const TrialRecord trial = make_trial("img", 3000, {{0, 112, 112}});
  const Heatmap heatmap = build_heatmap({&trial}, HeatWindow::feedforward);
  CHECK(heatmap.n_participants == 1);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      const int dx = x - 112, dy = y - 112;
      const double expected =
          (std::abs(dx) <= kHeatmapRadius && std::abs(dy) <= kHeatmapRadius)
              ? std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) /
                         (2.0 * kHeatmapSigma * kHeatmapSigma))
              : 0.0;
      CHECK(heatmap.map[static_cast<std::size_t>(y) * 224 + x] ==
            doctest::Approx(expected).epsilon(0).scale(1).epsilon(1e-6));
    }
  }
}

TEST_CASE("uniform coverage blurs to a constant interior") {
  std::vector<std::array<double, 3>> samples;
  samples.reserve(224 * 224);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      samples.push_back({y * 0.0005 + x * 0.000001, static_cast<double>(x), static_cast<double>(y)});
    }
  }
  const TrialRecord trial = make_trial("img", 3000, samples);
  const Heatmap heatmap = build_heatmap({&trial}, HeatWindow::feedforward);
  for (int y = kHeatmapRadius; y < 224 - kHeatmapRadius; y += 13) {
    for (int x = kHeatmapRadius; x < 224 - kHeatmapRadius; x += 13) {
      CHECK(heatmap.map[static_cast<std::size_t>(y) * 224 + x] == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("two participants with disjoint peaks contribute equally") {
  const TrialRecord a = make_trial("img", 3000, {{0, 50, 50}}, "p1");
  TrialRecord b = make_trial("img", 3000, {{0, 170, 170}}, "p2");
  b.trial = 2;
  const Heatmap heatmap = build_heatmap({&a, &b}, HeatWindow::feedforward);
  CHECK(heatmap.n_participants == 2);
  CHECK(heatmap.map[50 * 224 + 50] == doctest::Approx(1.0));
  CHECK(heatmap.map[170 * 224 + 170] == doctest::Approx(1.0));
}

TEST_CASE("heatmaps reject inputs with no contributing samples") {
  TrialRecord trial = make_trial("img_x", 150, {{0, 50, 50}});
  // 150 ms presentation: the recurrent window is empty
  CHECK_THROWS_AS(build_heatmap({&trial}, HeatWindow::recurrent), Error);
}

TEST_CASE("heatmap values are non-negative with max exactly one") {
  Rng rng(23);
  std::vector<std::array<double, 3>> samples;
  for (int i = 0; i < 300; ++i) {
    samples.push_back({static_cast<double>(i), rng.uniform(0.0, 223.0), rng.uniform(0.0, 223.0)});
  }
  const TrialRecord trial = make_trial("img", 3000, samples);
  const Heatmap heatmap = build_heatmap({&trial}, HeatWindow::feedforward);
  float max_value = 0.0f;
  for (float v : heatmap.map) {
    CHECK(v >= 0.0f);
    max_value = std::max(max_value, v);
  }
  CHECK(max_value == 1.0f);
}

TEST_CASE("interior blur response shifts exactly with the input sample") {
  const TrialRecord a = make_trial("img", 3000, {{0, 100, 100}});
  const TrialRecord b = make_trial("img", 3000, {{0, 103, 105}});
  const Heatmap ha = build_heatmap({&a}, HeatWindow::feedforward);
  const Heatmap hb = build_heatmap({&b}, HeatWindow::feedforward);
  for (int y = 55; y <= 145; ++y) {
    for (int x = 55; x <= 145; ++x) {
      CHECK(ha.map[static_cast<std::size_t>(y) * 224 + x] ==
            hb.map[static_cast<std::size_t>(y + 5) * 224 + (x + 3)]);
    }
  }
}

TEST_CASE("heatmap raw files round-trip through the GZCMH001 container") {
  const TrialRecord trial = make_trial("img", 3000, {{0, 60, 80}});
  const Heatmap heatmap = build_heatmap({&trial}, HeatWindow::feedforward);
  const fs::path path = fs::temp_directory_path() / "gazecam_heatmap_roundtrip.gzh";
  save_heatmap_raw(path.string(), heatmap.map.data());
  const std::vector<float> loaded = load_heatmap_raw(path.string());
  CHECK(loaded == heatmap.map);

  std::ofstream(path) << "corrupt";
  CHECK_THROWS_AS(load_heatmap_raw(path.string()), Error);
}
