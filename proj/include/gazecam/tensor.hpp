#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gazecam {

// Dense row-major float32 array. Kernels accumulate in double and store
// float; tensors are treated as immutable once an operation produced them.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from_values(std::vector<int> shape, std::vector<float> values);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
};

// Product of dims; throws config error on non-positive dims.
std::size_t shape_numel(const std::vector<int>& shape);

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace gazecam
