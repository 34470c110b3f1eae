#pragma once

#include <string>
#include <vector>

#include "gazecam/model.hpp"
#include "gazecam/tensor.hpp"

namespace gazecam {

enum class ClassSource { predicted, ground_truth };

struct SaliencyGrid {
  Tap tap = Tap::late;
  int h = 0, w = 0;
  std::vector<float> values;  // h*w, non-negative (post-ReLU)
  int class_used = -1;
  ClassSource class_source = ClassSource::predicted;

  float at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * w + col];
  }
};

struct SaliencyMap {
  static constexpr int size = 224;
  std::vector<float> map;  // 224*224 in [0,1]; max 1 unless the grid was all-zero
};

struct MaxPoint {
  double x = 0.0, y = 0.0;  // 224x224 image coordinates
  bool degenerate = false;  // all-zero grid, no meaningful maximum
};

// Channel weights are the spatial means of d(logit)/d(activation) at the
// tapped layer; the grid is ReLU of the weighted channel sum. The gradient is
// taken on the pre-softmax logit of `class_id` (or the predicted top-1 class
// when source is predicted; class_id is ignored then).
SaliencyGrid gradcam(const Model& model, const Tensor& preprocessed_image, Tap tap,
                     ClassSource source, int class_id = -1);

// Centroid of the 4-connected plateau of maximal cells containing the
// row-major-first maximum, mapped to image coordinates; cell (i,j) center is
// ((j+0.5)*224/w, (i+0.5)*224/h).
MaxPoint global_maximum(const SaliencyGrid& grid);

// Bilinear upsample to 224x224 (cell centers land on exact pixels), then
// divide by the maximum; an all-zero grid stays all-zero.
SaliencyMap upsample_and_normalize(const SaliencyGrid& grid);

void write_grid_csv(const std::string& path, const SaliencyGrid& grid);

}  // namespace gazecam
