#include "gazecam/compare.hpp"

#include <algorithm>
#include <cmath>

#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/stats.hpp"

namespace gazecam {

TargetBlock block_of(double x, double y) {
  if (x < 0.0 || x >= 224.0 || y < 0.0 || y >= 224.0) {
    throw input_error("block_of point (" + format_double(x) + "," + format_double(y) +
                      ") outside the 224x224 image");
  }
  TargetBlock block;
  block.col = std::min(kBlockGrid - 1, static_cast<int>(x / 56.0));
  block.row = std::min(kBlockGrid - 1, static_cast<int>(y / 56.0));
  block.index = kBlockGrid * block.row + block.col;
  return block;
}

double mae(std::span<const float> e, std::span<const float> s) {
  if (e.size() != s.size() || e.empty()) {
    throw input_error("mae needs equal non-empty maps, got " + std::to_string(e.size()) +
                      " vs " + std::to_string(s.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    acc += std::fabs(static_cast<double>(e[i]) - static_cast<double>(s[i]));
  }
  return acc / static_cast<double>(e.size());
}

double mae(const Heatmap& e, const SaliencyMap& s) {
  return mae(std::span<const float>(e.map), std::span<const float>(s.map));
}

double block_agreement(const std::vector<std::pair<int, int>>& pairs) {
  if (pairs.empty()) throw input_error("block_agreement on an empty pair list");
  std::size_t matches = 0;
  for (const auto& [human, model] : pairs) {
    if (human == model) ++matches;
  }
  return 100.0 * static_cast<double>(matches) / static_cast<double>(pairs.size());
}

ImagePartition partition_images(
    const std::map<std::string, double>& human_acc,
    const std::map<std::string, std::map<std::string, bool>>& model_correct,
    double min_human_acc) {
  if (model_correct.size() < 2) {
    throw input_error("partition_images needs correctness flags from at least two models, got " +
                      std::to_string(model_correct.size()));
  }
  ImagePartition partition;
  for (const auto& [image, acc] : human_acc) {
    int correct_models = 0, wrong_models = 0;
    for (const auto& [model, flags] : model_correct) {
      auto it = flags.find(image);
      if (it == flags.end()) {
        throw input_error("partition_images: model '" + model + "' has no flag for image '" +
                          image + "'");
      }
      (it->second ? correct_models : wrong_models)++;
    }
    if (acc >= min_human_acc && wrong_models == 0) {
      partition.control.insert(image);
    } else if (acc >= min_human_acc && correct_models == 0) {
      partition.challenge.insert(image);
    } else {
      partition.unclassified.insert(image);
    }
  }
  return partition;
}

namespace {

const Tap kTaps[3] = {Tap::early, Tap::middle, Tap::late};
const HeatWindow kWindows[2] = {HeatWindow::feedforward, HeatWindow::recurrent};

const char* window_name(HeatWindow w) {
  return w == HeatWindow::feedforward ? "ff" : "rec";
}

}  // namespace

ComparisonTable compare_run(const CompareInputs& inputs) {
  // orphan scan: every id used anywhere must exist in the metadata
  std::vector<std::string> orphans;
  auto check_id = [&](const std::string& image) {
    if (!inputs.meta.count(image)) orphans.push_back(image);
  };
  for (const auto& [image, block] : inputs.human_block) {
    (void)block;
    check_id(image);
  }
  for (const auto& [model, per_image] : inputs.correct) {
    (void)model;
    for (const auto& [image, flag] : per_image) {
      (void)flag;
      check_id(image);
    }
  }
  for (const auto& [model, per_image] : inputs.blocks) {
    (void)model;
    for (const auto& [image, taps] : per_image) {
      (void)taps;
      check_id(image);
    }
  }
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    orphans.erase(std::unique(orphans.begin(), orphans.end()), orphans.end());
    std::string list;
    for (const std::string& o : orphans) list += (list.empty() ? "" : ", ") + o;
    throw input_error("images missing from metadata: " + list);
  }

  // tertile labels over the image set (sorted id order)
  std::vector<std::string> ids;
  ids.reserve(inputs.meta.size());
  for (const auto& [image, meta] : inputs.meta) {
    (void)meta;
    ids.push_back(image);
  }
  std::vector<double> arousal, valence;
  for (const std::string& id : ids) {
    arousal.push_back(inputs.meta.at(id).arousal);
    valence.push_back(inputs.meta.at(id).valence);
  }
  const stats::TertileSplit arousal_split = stats::tertile_split(arousal);
  const stats::TertileSplit valence_split = stats::tertile_split(valence);

  // partition needs two from-scratch models; fewer models leave the column
  // unclassified
  ImagePartition partition;
  const bool have_partition = inputs.correct.size() >= 2;
  if (have_partition) {
    std::map<std::string, double> acc;
    for (const std::string& id : ids) acc[id] = inputs.meta.at(id).human_acc;
    partition = partition_images(acc, inputs.correct, inputs.min_human_acc);
  }

  ComparisonTable table;
  table.header = {"image",   "category",        "animacy",         "human_acc",
                  "arousal", "valence",         "arousal_tertile", "valence_tertile",
                  "human_block"};
  for (const std::string& model : inputs.models) {
    table.header.push_back(model + "_correct");
    for (Tap tap : kTaps) {
      table.header.push_back(model + "_block_" + tap_name(tap));
    }
    for (HeatWindow window : kWindows) {
      for (Tap tap : kTaps) {
        table.header.push_back(model + "_mae_" + window_name(window) + "_" + tap_name(tap));
      }
    }
  }
  table.header.push_back("partition");
  table.header.push_back("flags");

  for (std::size_t idx = 0; idx < ids.size(); ++idx) {
    const std::string& id = ids[idx];
    const ImageMeta& meta = inputs.meta.at(id);
    std::vector<std::string> row;
    std::string flags;
    auto flag = [&](const std::string& f) { flags += (flags.empty() ? "" : ";") + f; };

    row.push_back(id);
    row.push_back(meta.category);
    row.push_back(meta.animate ? "animate" : "inanimate");
    row.push_back(format_double(meta.human_acc));
    row.push_back(format_double(meta.arousal));
    row.push_back(format_double(meta.valence));
    row.push_back(stats::tertile_label_name(arousal_split.labels[idx]));
    row.push_back(stats::tertile_label_name(valence_split.labels[idx]));

    if (auto it = inputs.human_block.find(id); it != inputs.human_block.end()) {
      row.push_back(std::to_string(it->second));
    } else {
      row.push_back("");
      flag("missing_human_block");
    }

    for (const std::string& model : inputs.models) {
      // correctness
      bool have_correct = false;
      if (auto mit = inputs.correct.find(model); mit != inputs.correct.end()) {
        if (auto iit = mit->second.find(id); iit != mit->second.end()) {
          row.push_back(iit->second ? "1" : "0");
          have_correct = true;
        }
      }
      if (!have_correct) {
        row.push_back("");
        flag("missing_correct:" + model);
      }
      // blocks
      for (Tap tap : kTaps) {
        std::optional<int> block;
        bool present = false;
        if (auto mit = inputs.blocks.find(model); mit != inputs.blocks.end()) {
          if (auto iit = mit->second.find(id); iit != mit->second.end()) {
            if (auto tit = iit->second.find(tap); tit != iit->second.end()) {
              present = true;
              block = tit->second;
            }
          }
        }
        if (present && block) {
          row.push_back(std::to_string(*block));
        } else if (present) {
          row.push_back("");
          flag(std::string("degenerate_grid:") + model + ":" + tap_name(tap));
        } else {
          row.push_back("");
          flag(std::string("missing_saliency:") + model + ":" + tap_name(tap));
        }
      }
      // MAE columns
      for (HeatWindow window : kWindows) {
        for (Tap tap : kTaps) {
          bool present = false;
          double value = 0.0;
          if (auto mit = inputs.maes.find(model); mit != inputs.maes.end()) {
            if (auto iit = mit->second.find(id); iit != mit->second.end()) {
              if (auto wit = iit->second.find({window, tap}); wit != iit->second.end()) {
                present = true;
                value = wit->second;
              }
            }
          }
          if (present) {
            row.push_back(format_double(value));
          } else {
            row.push_back("");
            flag(std::string("missing_mae:") + model + ":" + window_name(window) + ":" +
                 tap_name(tap));
          }
        }
      }
    }

    if (!have_partition) {
      row.push_back("unclassified");
    } else if (partition.control.count(id)) {
      row.push_back("control");
    } else if (partition.challenge.count(id)) {
      row.push_back("challenge");
    } else {
      row.push_back("unclassified");
    }
    row.push_back(flags);
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_comparison_csv(const std::string& path, const ComparisonTable& table) {
  CsvWriter csv(path, table.header);
  for (const auto& row : table.rows) csv.write_row(row);
  csv.close();
}

}  // namespace gazecam
