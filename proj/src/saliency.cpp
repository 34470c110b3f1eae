#include "gazecam/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/graph.hpp"
#include "gazecam/kernels.hpp"

namespace gazecam {

SaliencyGrid gradcam(const Model& model, const Tensor& preprocessed_image, Tap tap,
                     ClassSource source, int class_id) {
  if (preprocessed_image.rank() != 3 || preprocessed_image.dim(0) != 3 ||
      preprocessed_image.dim(1) != 224 || preprocessed_image.dim(2) != 224) {
    throw input_error("gradcam expects a [3,224,224] image, got " +
                      preprocessed_image.shape_str());
  }

  Graph graph;
  Tensor batch = Tensor::zeros({1, 3, 224, 224});
  std::copy(preprocessed_image.data.begin(), preprocessed_image.data.end(), batch.data.begin());
  const int input = graph.add_input(std::move(batch), false);

  ForwardOptions opts;
  opts.want_taps = true;
  const ForwardResult fwd = model_forward(graph, model, input, opts);

  auto tap_it = fwd.taps.find(tap);
  if (tap_it == fwd.taps.end()) {
    throw config_error(std::string("architecture has no layer tagged '") + tap_name(tap) + "'");
  }
  const int tap_node = tap_it->second;

  const Tensor& logits = graph.value(fwd.logits);
  const int classes = logits.dim(1);
  int target = class_id;
  if (source == ClassSource::predicted) {
    target = 0;
    for (int c = 1; c < classes; ++c) {
      if (logits.data[static_cast<std::size_t>(c)] > logits.data[static_cast<std::size_t>(target)]) {
        target = c;
      }
    }
  } else if (target < 0 || target >= classes) {
    throw input_error("class id " + std::to_string(target) + " out of range [0," +
                      std::to_string(classes) + ")");
  }

  const int logit_node = graph.pick(fwd.logits, target);
  graph.backward(logit_node);

  const Tensor& activation = graph.value(tap_node);  // [1,K,gh,gw]
  const Tensor& gradient = graph.grad(tap_node);
  const int channels = activation.dim(1);
  const int gh = activation.dim(2);
  const int gw = activation.dim(3);
  const std::size_t plane = static_cast<std::size_t>(gh) * gw;

  SaliencyGrid grid;
  grid.tap = tap;
  grid.h = gh;
  grid.w = gw;
  grid.class_used = target;
  grid.class_source = source;
  grid.values.assign(plane, 0.0f);

  std::vector<double> alpha(static_cast<std::size_t>(channels));
  for (int k = 0; k < channels; ++k) {
    const float* g = gradient.ptr() + static_cast<std::size_t>(k) * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += g[i];
    alpha[static_cast<std::size_t>(k)] = acc / static_cast<double>(plane);
  }
  for (std::size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int k = 0; k < channels; ++k) {
      acc += alpha[static_cast<std::size_t>(k)] *
             activation.data[static_cast<std::size_t>(k) * plane + i];
    }
    grid.values[i] = acc > 0.0 ? static_cast<float>(acc) : 0.0f;
  }
  return grid;
}

MaxPoint global_maximum(const SaliencyGrid& grid) {
  if (grid.h < 1 || grid.w < 1 || grid.values.empty()) {
    throw input_error("global_maximum on an empty grid");
  }

  float max_value = grid.values[0];
  std::size_t first_max = 0;
  for (std::size_t i = 1; i < grid.values.size(); ++i) {
    if (grid.values[i] > max_value) {
      max_value = grid.values[i];
      first_max = i;
    }
  }

  MaxPoint point;
  if (max_value <= 0.0f) {
    point.degenerate = true;
    point.x = point.y = 112.0;  // callers must check the flag before use
    return point;
  }

  // 4-connected plateau of exact-maximum cells containing the row-major-first
  // maximum; the returned point is the mean of the member cell centers.
  std::vector<char> in_component(grid.values.size(), 0);
  std::deque<std::size_t> queue;
  queue.push_back(first_max);
  in_component[first_max] = 1;
  double sum_x = 0.0, sum_y = 0.0;
  int count = 0;
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    const int row = static_cast<int>(idx) / grid.w;
    const int col = static_cast<int>(idx) % grid.w;
    sum_x += (col + 0.5) * 224.0 / grid.w;
    sum_y += (row + 0.5) * 224.0 / grid.h;
    ++count;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int d = 0; d < 4; ++d) {
      const int r = row + dr[d];
      const int c = col + dc[d];
      if (r < 0 || r >= grid.h || c < 0 || c >= grid.w) continue;
      const std::size_t nidx = static_cast<std::size_t>(r) * grid.w + c;
      if (!in_component[nidx] && grid.values[nidx] == max_value) {
        in_component[nidx] = 1;
        queue.push_back(nidx);
      }
    }
  }
  point.x = sum_x / count;
  point.y = sum_y / count;
  return point;
}

SaliencyMap upsample_and_normalize(const SaliencyGrid& grid) {
  if (grid.h < 1 || grid.w < 1) throw input_error("upsample on an empty grid");
  SaliencyMap out;
  out.map.assign(static_cast<std::size_t>(SaliencyMap::size) * SaliencyMap::size, 0.0f);
  kernels::upsample_grid_bilinear(grid.values.data(), grid.h, grid.w, out.map.data(),
                                  SaliencyMap::size, SaliencyMap::size);
  float max_value = 0.0f;
  for (float v : out.map) max_value = std::max(max_value, v);
  if (max_value > 0.0f) {
    for (float& v : out.map) v /= max_value;
  }
  return out;
}

void write_grid_csv(const std::string& path, const SaliencyGrid& grid) {
  CsvWriter csv(path, {"row", "col", "value"});
  for (int r = 0; r < grid.h; ++r) {
    for (int c = 0; c < grid.w; ++c) {
      csv.write_row({std::to_string(r), std::to_string(c), format_double(grid.at(r, c))});
    }
  }
  csv.close();
}

}  // namespace gazecam
