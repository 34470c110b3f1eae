#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gazecam {

// Plain `key = value` configuration with [section] headers and # comments.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_text(const std::string& text, const std::string& origin = "<text>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // Sections and keys in sorted order; the config hash is FNV-1a over this.
  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct PipelineConfig {
  std::string out_dir;
  std::uint64_t seed = 1234;
  bool force = false;

  // synth-images
  int categories = 4;
  int per_category = 20;
  // synth-gaze
  int participants = 5;
  int samples_cap = 600;
  double central_sigma = 30.0;
  double object_sigma = 2.0;
  double object_weight = 1.0;
  // train: each named model trains the same architecture with a derived seed
  std::string arch = "smoke";
  std::vector<std::string> models = {"model_a", "model_b"};
  int epochs = 10;
  int batch_size = 16;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // gradcam
  bool use_ground_truth_class = false;
  // compare
  double min_human_acc = 100.0;
  // stats
  double alpha = 0.05;

  std::uint64_t config_hash = 0;

  static PipelineConfig from_kv(const KvConfig& kv);
};

// Executes synth-images -> imgstats -> train (per model) -> predictions ->
// synth-gaze -> fixations/heatmaps -> gradcam/maxima -> compare -> stats,
// writing every artifact plus a run manifest under out_dir. Rerunning with
// the same config and seed reproduces byte-identical CSV artifacts.
void run_pipeline(const PipelineConfig& config);

// Stage helpers shared by the CLI subcommands (each reads upstream artifacts
// from `run_dir` following the documented layout).
void stage_fixations_and_heatmaps(const std::string& gaze_csv, const std::string& run_dir,
                                  bool render_pgm, bool render_csv = false);
void stage_gradcam(const std::string& run_dir, const std::string& model_name,
                   const std::string& weights_path, const std::string& arch,
                   bool use_ground_truth_class, bool render_pgm);
void stage_compare(const std::string& run_dir, const std::vector<std::string>& models,
                   double min_human_acc);
void stage_stats(const std::string& run_dir, const std::vector<std::string>& models,
                 double alpha, std::uint64_t seed);

}  // namespace gazecam
