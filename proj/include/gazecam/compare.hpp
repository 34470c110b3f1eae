#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gazecam/gaze.hpp"
#include "gazecam/saliency.hpp"

namespace gazecam {

// One of 16 equally sized 56x56-pixel cells of the 224x224 image (the lowest
// saliency grid resolution).
struct TargetBlock {
  int index = 0;  // 4*row + col
  int row = 0;
  int col = 0;
};

constexpr int kBlockGrid = 4;
constexpr int kBlockCount = kBlockGrid * kBlockGrid;

TargetBlock block_of(double x, double y);

// Mean absolute pixel deviation of two max-normalized 224x224 maps.
double mae(std::span<const float> e, std::span<const float> s);
double mae(const Heatmap& e, const SaliencyMap& s);

// Percentage of pairs where human and model block agree.
double block_agreement(const std::vector<std::pair<int, int>>& pairs);

struct ImagePartition {
  std::set<std::string> control;      // humans and every model correct
  std::set<std::string> challenge;    // humans correct, every model wrong
  std::set<std::string> unclassified;
};

// `model_correct`: model name -> image -> correctness. Requires flags from at
// least two models for every image with human accuracy at the threshold.
ImagePartition partition_images(const std::map<std::string, double>& human_acc,
                                const std::map<std::string, std::map<std::string, bool>>& model_correct,
                                double min_human_acc = 100.0);

struct ImageMeta {
  std::string category;
  int animate = 0;
  double human_acc = 0.0;
  double arousal = 0.0;
  double valence = 0.0;
};

struct CompareInputs {
  std::map<std::string, ImageMeta> meta;          // keyed by image id
  std::map<std::string, int> human_block;         // image -> block index
  std::vector<std::string> models;                // column order
  // model -> image -> value
  std::map<std::string, std::map<std::string, bool>> correct;
  // model -> image -> tap -> block (nullopt: degenerate or missing)
  std::map<std::string, std::map<std::string, std::map<Tap, std::optional<int>>>> blocks;
  // model -> image -> (window, tap) -> MAE
  std::map<std::string, std::map<std::string, std::map<std::pair<HeatWindow, Tap>, double>>> maes;
  double min_human_acc = 100.0;
};

struct ComparisonTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // one per image, sorted by id
};

// One row per image: metadata, tertile labels, human block, per-model blocks,
// MAE columns, partition label and a flags column for missing inputs. Images
// appearing in model outputs but not in the metadata are orphans and raise an
// input error listing them.
ComparisonTable compare_run(const CompareInputs& inputs);

void write_comparison_csv(const std::string& path, const ComparisonTable& table);

}  // namespace gazecam
