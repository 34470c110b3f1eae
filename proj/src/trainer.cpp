#include "gazecam/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/graph.hpp"
#include "gazecam/kernels.hpp"
#include "gazecam/rng.hpp"

namespace fs = std::filesystem;

namespace gazecam {

void TrainConfig::validate() const {
  if (epochs < 0) throw config_error("epochs must be non-negative");
  if (batch_size < 1) throw config_error("batch_size must be positive");
  if (lr0 <= 0.0) throw config_error("lr0 must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw config_error("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw config_error("weight_decay must be non-negative");
  if (fine_tune_epochs < 0) throw config_error("fine_tune_epochs must be non-negative");
}

std::vector<int> DatasetIndex::category_counts() const {
  std::vector<int> counts(categories.size(), 0);
  for (const DatasetRecord& r : records) {
    counts[static_cast<std::size_t>(r.category)]++;
  }
  return counts;
}

DatasetIndex load_dataset_index(const std::string& root) {
  if (!fs::is_directory(root)) {
    throw input_error("dataset root '" + root + "' is not a directory");
  }
  DatasetIndex index;
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
  }
  std::sort(dirs.begin(), dirs.end());  // category order is lexicographic
  if (dirs.empty()) throw input_error("dataset root '" + root + "' has no category directories");

  index.categories = dirs;
  for (std::size_t c = 0; c < dirs.size(); ++c) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / dirs[c])) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".ppm" || ext == ".pgm" || ext == ".rgb") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (std::string& f : files) {
      index.records.push_back({std::move(f), static_cast<int>(c)});
    }
  }
  if (index.records.empty()) throw input_error("dataset root '" + root + "' holds no images");
  return index;
}

DatasetIndex balanced_sample(const DatasetIndex& index, std::uint64_t seed) {
  const std::vector<int> counts = index.category_counts();
  int n = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw config_error("category '" + index.categories[c] + "' is empty; cannot balance");
    }
    n = (c == 0) ? counts[c] : std::min(n, counts[c]);
  }

  DatasetIndex balanced;
  balanced.categories = index.categories;
  Rng rng = Rng(seed).fork("balanced_sample");
  for (std::size_t c = 0; c < index.categories.size(); ++c) {
    std::vector<const DatasetRecord*> members;
    for (const DatasetRecord& r : index.records) {
      if (r.category == static_cast<int>(c)) members.push_back(&r);
    }
    rng.shuffle(members);
    members.resize(static_cast<std::size_t>(n));
    // restore path order within the category so the result is a set, not a
    // permutation artifact
    std::sort(members.begin(), members.end(),
              [](const DatasetRecord* a, const DatasetRecord* b) { return a->path < b->path; });
    for (const DatasetRecord* r : members) balanced.records.push_back(*r);
  }
  return balanced;
}

Tensor resize_center_crop(const ImageU8& image) {
  if (image.width < 1 || image.height < 1) throw input_error("image has no pixels");
  Tensor chw = image_to_chw(image);
  Tensor resized = Tensor::zeros({3, 256, 256});
  kernels::resize_bilinear_chw(chw.ptr(), 3, image.height, image.width, resized.ptr(), 256, 256);
  // center crop keeps rows/cols 16..239
  Tensor out = Tensor::zeros({3, 224, 224});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 224; ++y) {
      const float* src = resized.ptr() + (static_cast<std::size_t>(c) * 256 + y + 16) * 256 + 16;
      float* dst = out.ptr() + (static_cast<std::size_t>(c) * 224 + y) * 224;
      std::copy(src, src + 224, dst);
    }
  }
  return out;
}

namespace {

void standardize_in_place(Tensor& t, const PreprocessStats& stats) {
  const std::size_t plane = 224 * 224;
  for (int c = 0; c < 3; ++c) {
    const double mean = stats.mean[static_cast<std::size_t>(c)];
    const double sd = stats.stddev[static_cast<std::size_t>(c)];
    const double div = sd > 1e-8 ? sd : 1.0;  // constant channels standardize to 0
    float* p = t.ptr() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = static_cast<float>((p[i] - mean) / div);
    }
  }
}

}  // namespace

Tensor preprocess_image(const ImageU8& image, const PreprocessStats& stats) {
  Tensor t = resize_center_crop(image);
  standardize_in_place(t, stats);
  return t;
}

PreprocessStats compute_corpus_stats(const std::vector<Tensor>& cropped_images) {
  if (cropped_images.empty()) throw input_error("cannot compute statistics of an empty corpus");
  PreprocessStats stats;
  const std::size_t plane = 224 * 224;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    for (const Tensor& t : cropped_images) {
      const float* p = t.ptr() + static_cast<std::size_t>(c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += p[i];
        sum_sq += static_cast<double>(p[i]) * p[i];
      }
    }
    const double count = static_cast<double>(cropped_images.size()) * plane;
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.stddev[static_cast<std::size_t>(c)] = std::sqrt(var);
  }
  return stats;
}

PreprocessStats stats_from_model(const Model& model) {
  auto mit = model.buffers.find("preprocess.mean");
  auto sit = model.buffers.find("preprocess.std");
  if (mit == model.buffers.end() || sit == model.buffers.end()) {
    throw state_error("model carries no preprocessing statistics (was it trained?)");
  }
  PreprocessStats stats;
  for (int c = 0; c < 3; ++c) {
    stats.mean[static_cast<std::size_t>(c)] = mit->second.data[static_cast<std::size_t>(c)];
    stats.stddev[static_cast<std::size_t>(c)] = sit->second.data[static_cast<std::size_t>(c)];
  }
  return stats;
}

void stats_into_model(Model& model, const PreprocessStats& stats) {
  model.buffers["preprocess.mean"] = Tensor::from_values(
      {3}, {static_cast<float>(stats.mean[0]), static_cast<float>(stats.mean[1]),
            static_cast<float>(stats.mean[2])});
  model.buffers["preprocess.std"] = Tensor::from_values(
      {3}, {static_cast<float>(stats.stddev[0]), static_cast<float>(stats.stddev[1]),
            static_cast<float>(stats.stddev[2])});
}

double cosine_lr(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs) {
    throw input_error("epoch " + std::to_string(epoch) + " outside [0," +
                      std::to_string(config.epochs) + ")");
  }
  return 0.5 * config.lr0 * (1.0 + std::cos(3.14159265358979323846 * epoch / config.epochs));
}

void sgd_step(Model& model, std::map<std::string, Tensor>& velocity,
              const std::vector<std::pair<std::string, Tensor>>& gradients, double lr,
              const TrainConfig& config, const std::set<std::string>& frozen) {
  for (const auto& [name, grad] : gradients) {
    if (frozen.count(name)) continue;
    auto it = model.params.find(name);
    if (it == model.params.end()) {
      throw internal_error("gradient for unknown parameter '" + name + "'");
    }
    Tensor& w = it->second;
    if (!w.same_shape(grad)) {
      throw internal_error("gradient shape " + grad.shape_str() + " does not match parameter '" +
                           name + "' " + w.shape_str());
    }
    Tensor& v = velocity.try_emplace(name, Tensor::zeros(w.shape)).first->second;
    const float mom = static_cast<float>(config.momentum);
    const float wd = static_cast<float>(config.weight_decay);
    const float step = static_cast<float>(lr);
    for (std::size_t i = 0; i < w.numel(); ++i) {
      v.data[i] = mom * v.data[i] + grad.data[i] + wd * w.data[i];
      w.data[i] -= step * v.data[i];
    }
  }
}

namespace {

std::vector<Tensor> load_and_crop(const DatasetIndex& dataset) {
  std::vector<Tensor> cropped;
  cropped.reserve(dataset.records.size());
  for (const DatasetRecord& r : dataset.records) {
    cropped.push_back(resize_center_crop(load_image(r.path)));
  }
  return cropped;
}

Tensor assemble_batch(const std::vector<Tensor>& images, const std::vector<int>& order,
                      std::size_t first, std::size_t count) {
  Tensor batch = Tensor::zeros({static_cast<int>(count), 3, 224, 224});
  const std::size_t stride = 3 * 224 * 224;
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& img = images[static_cast<std::size_t>(order[first + i])];
    std::copy(img.data.begin(), img.data.end(), batch.data.begin() + i * stride);
  }
  return batch;
}

// Shared epoch loop for train and fine_tune. `epochs_total` drives the cosine
// schedule; `freeze_norm` pins batchnorm to its running statistics.
std::vector<EpochMetrics> run_epochs(Model& model, const std::vector<Tensor>& images,
                                     const std::vector<int>& labels, const TrainConfig& config,
                                     int epochs_total, const std::set<std::string>& frozen,
                                     bool freeze_norm) {
  std::vector<EpochMetrics> metrics;
  const std::size_t n = images.size();
  std::map<std::string, Tensor> velocity;
  Rng shuffle_rng = Rng(config.seed).fork("epoch_shuffle");

  TrainConfig sched = config;
  sched.epochs = epochs_total;

  for (int epoch = 0; epoch < epochs_total; ++epoch) {
    const double lr = cosine_lr(epoch, sched);

    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(config.batch_size), n - first);
      Tensor batch = assemble_batch(images, order, first, count);
      std::vector<int> batch_labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch_labels[i] = labels[static_cast<std::size_t>(order[first + i])];
      }

      Graph graph;
      const int input = graph.add_input(std::move(batch), false);
      ForwardOptions opts;
      opts.training = true;
      opts.freeze_norm = freeze_norm;
      opts.frozen_params = frozen;
      ForwardResult fwd = model_forward(graph, model, input, opts, &model);
      const int loss_node = graph.softmax_cross_entropy(fwd.logits, batch_labels);

      const double batch_loss = graph.value(loss_node).data[0];
      if (!std::isfinite(batch_loss)) {
        throw state_error("training diverged (non-finite loss) at epoch " +
                          std::to_string(epoch) + ", batch " +
                          std::to_string(first / static_cast<std::size_t>(config.batch_size)));
      }
      loss_sum += batch_loss * static_cast<double>(count);

      const Tensor& logits = graph.value(fwd.logits);
      const int classes = logits.dim(1);
      for (std::size_t i = 0; i < count; ++i) {
        const float* row = logits.ptr() + i * static_cast<std::size_t>(classes);
        int best = 0;
        for (int c = 1; c < classes; ++c) {
          if (row[c] > row[best]) best = c;
        }
        if (best == batch_labels[i]) ++correct;
      }

      graph.backward(loss_node);
      std::vector<std::pair<std::string, Tensor>> grads;
      grads.reserve(fwd.param_nodes.size());
      for (const auto& [name, node] : fwd.param_nodes) {
        if (frozen.count(name)) continue;
        grads.push_back({name, graph.grad(node)});
      }
      sgd_step(model, velocity, grads, lr, config, frozen);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(n);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    m.lr = lr;
    metrics.push_back(m);
  }
  return metrics;
}

double eval_accuracy_cached(const Model& model, const std::vector<Tensor>& images,
                            const std::vector<int>& labels, int batch_size) {
  std::size_t correct = 0;
  const std::size_t n = images.size();
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), n - first);
    Tensor batch = assemble_batch(images, order, first, count);
    Graph graph;
    const int input = graph.add_input(std::move(batch), false);
    ForwardOptions opts;
    ForwardResult fwd = model_forward(graph, model, input, opts);
    const Tensor& logits = graph.value(fwd.logits);
    const int classes = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const float* row = logits.ptr() + i * static_cast<std::size_t>(classes);
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      if (best == labels[first + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TrainResult train(Model& model, const DatasetIndex& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.records.empty()) throw input_error("training dataset is empty");
  if (static_cast<int>(dataset.categories.size()) > model.config.num_classes) {
    throw config_error("dataset has " + std::to_string(dataset.categories.size()) +
                       " categories but the model only has " +
                       std::to_string(model.config.num_classes) + " classes");
  }

  std::vector<Tensor> cropped = load_and_crop(dataset);
  const PreprocessStats stats = compute_corpus_stats(cropped);
  stats_into_model(model, stats);
  for (Tensor& t : cropped) standardize_in_place(t, stats);

  std::vector<int> labels;
  labels.reserve(dataset.records.size());
  for (const DatasetRecord& r : dataset.records) labels.push_back(r.category);

  TrainResult result;
  result.metrics = run_epochs(model, cropped, labels, config, config.epochs, {}, false);
  result.final_train_acc =
      config.epochs > 0 ? eval_accuracy_cached(model, cropped, labels, config.batch_size) : 0.0;
  return result;
}

TrainResult fine_tune(Model& model, const DatasetIndex& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.records.empty()) throw input_error("fine-tune dataset is empty");

  const std::string fc = classifier_layer(model.config);
  reinit_classifier(model, config.seed);

  std::set<std::string> frozen;
  for (const auto& [name, tensor] : model.params) {
    (void)tensor;
    if (name != fc + ".weight" && name != fc + ".bias") frozen.insert(name);
  }

  std::vector<Tensor> cropped = load_and_crop(dataset);
  // Reuse the pretrained preprocessing statistics when present; otherwise
  // they come from this corpus.
  PreprocessStats stats;
  if (model.buffers.count("preprocess.mean") && model.buffers.count("preprocess.std")) {
    stats = stats_from_model(model);
  } else {
    stats = compute_corpus_stats(cropped);
    stats_into_model(model, stats);
  }
  for (Tensor& t : cropped) standardize_in_place(t, stats);

  std::vector<int> labels;
  labels.reserve(dataset.records.size());
  for (const DatasetRecord& r : dataset.records) labels.push_back(r.category);

  TrainResult result;
  result.metrics = run_epochs(model, cropped, labels, config, config.fine_tune_epochs, frozen, true);
  result.final_train_acc = config.fine_tune_epochs > 0
                               ? eval_accuracy_cached(model, cropped, labels, config.batch_size)
                               : 0.0;
  return result;
}

std::vector<int> predict(const Model& model, const DatasetIndex& dataset, int batch_size) {
  const PreprocessStats stats = stats_from_model(model);
  std::vector<int> predictions;
  predictions.reserve(dataset.records.size());

  for (std::size_t first = 0; first < dataset.records.size();
       first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), dataset.records.size() - first);
    Tensor batch = Tensor::zeros({static_cast<int>(count), 3, 224, 224});
    const std::size_t stride = 3 * 224 * 224;
    for (std::size_t i = 0; i < count; ++i) {
      Tensor img = preprocess_image(load_image(dataset.records[first + i].path), stats);
      std::copy(img.data.begin(), img.data.end(), batch.data.begin() + i * stride);
    }
    Graph graph;
    const int input = graph.add_input(std::move(batch), false);
    ForwardOptions opts;
    ForwardResult fwd = model_forward(graph, model, input, opts);
    const Tensor& logits = graph.value(fwd.logits);
    const int classes = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const float* row = logits.ptr() + i * static_cast<std::size_t>(classes);
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      predictions.push_back(best);
    }
  }
  return predictions;
}

double evaluate_accuracy(const Model& model, const DatasetIndex& dataset, int batch_size) {
  const std::vector<int> predictions = predict(model, dataset, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == dataset.records[i].category) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
  CsvWriter csv(path, {"epoch", "loss", "train_acc", "lr"});
  for (const EpochMetrics& m : metrics) {
    csv.write_row({std::to_string(m.epoch), format_double(m.loss), format_double(m.train_acc),
                   format_double(m.lr)});
  }
  csv.close();
}

}  // namespace gazecam
