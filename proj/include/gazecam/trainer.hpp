#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gazecam/image.hpp"
#include "gazecam/model.hpp"
#include "gazecam/tensor.hpp"

namespace gazecam {

struct TrainConfig {
  int epochs = 80;
  int batch_size = 128;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool fine_tune = false;
  int fine_tune_epochs = 50;

  void validate() const;  // all hyperparameters positive
};

struct DatasetRecord {
  std::string path;
  int category = 0;

  bool operator==(const DatasetRecord&) const = default;
};

// Directory-per-class corpus; categories ordered lexicographically.
struct DatasetIndex {
  std::vector<DatasetRecord> records;
  std::vector<std::string> categories;

  std::vector<int> category_counts() const;
};

DatasetIndex load_dataset_index(const std::string& root);

// Exactly min-per-category records from every category, drawn without
// replacement; deterministic per seed.
DatasetIndex balanced_sample(const DatasetIndex& index, std::uint64_t seed);

// Per-channel standardization statistics over the training corpus, computed
// once after resize + crop (intensities in [0,1]).
struct PreprocessStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

// Bilinear resize to 256x256, center crop to 224x224, intensities in [0,1].
Tensor resize_center_crop(const ImageU8& image);

// resize_center_crop followed by per-channel standardization. Channels with
// near-zero spread divide by 1 so constant corpora standardize to zero.
Tensor preprocess_image(const ImageU8& image, const PreprocessStats& stats);

PreprocessStats compute_corpus_stats(const std::vector<Tensor>& cropped_images);

PreprocessStats stats_from_model(const Model& model);
void stats_into_model(Model& model, const PreprocessStats& stats);

// 0.5 * lr0 * (1 + cos(pi * epoch / epochs)); decays to zero at epoch == epochs.
double cosine_lr(int epoch, const TrainConfig& config);

// Classic momentum SGD with decay folded into the gradient:
//   v <- momentum * v + g + weight_decay * w;  w <- w - lr * v
// Velocity buffers live in `velocity` keyed by parameter name; frozen
// parameters are left untouched.
void sgd_step(Model& model, std::map<std::string, Tensor>& velocity,
              const std::vector<std::pair<std::string, Tensor>>& gradients, double lr,
              const TrainConfig& config, const std::set<std::string>& frozen);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  double final_train_acc = 0.0;  // eval-mode pass after the last epoch
};

TrainResult train(Model& model, const DatasetIndex& dataset, const TrainConfig& config);

// Replaces the final linear classifier, freezes everything else (including
// batchnorm running statistics) and trains for fine_tune_epochs.
TrainResult fine_tune(Model& model, const DatasetIndex& dataset, const TrainConfig& config);

// Eval-mode predictions in dataset order.
std::vector<int> predict(const Model& model, const DatasetIndex& dataset, int batch_size = 16);

double evaluate_accuracy(const Model& model, const DatasetIndex& dataset, int batch_size = 16);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);

}  // namespace gazecam
