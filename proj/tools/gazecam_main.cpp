// gazecam: train small CNNs, extract their saliency maps, build gaze
// heatmaps from fixation logs, and quantify the agreement.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gazecam/compare.hpp"
#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/gaze.hpp"
#include "gazecam/image.hpp"
#include "gazecam/imgstats.hpp"
#include "gazecam/model.hpp"
#include "gazecam/pipeline.hpp"
#include "gazecam/saliency.hpp"
#include "gazecam/synth.hpp"
#include "gazecam/trainer.hpp"

namespace fs = std::filesystem;
using namespace gazecam;

namespace {

std::optional<std::uint64_t> env_seed_override() {
  const char* env = std::getenv("GAZECAM_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    return std::stoull(env);
  } catch (...) {
    throw config_error("GAZECAM_SEED is not an integer");
  }
}

void require_absent(const std::string& path, bool force) {
  if (!fs::exists(path)) return;
  if (force) return;
  throw config_error("'" + path + "' already exists; pass --force to overwrite");
}

std::vector<std::string> split_models(const std::string& csv) {
  std::vector<std::string> models;
  std::string token;
  std::istringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) models.push_back(token);
  }
  if (models.empty()) throw config_error("model list is empty");
  return models;
}

int run(int argc, char** argv) {
  CLI::App app{"gazecam: human-gaze vs CNN-saliency comparison workbench"};
  app.require_subcommand(1);

  // ---- synth-images
  auto* cmd_synth_images = app.add_subcommand("synth-images", "generate a synthetic corpus");
  std::string si_out;
  SyntheticImagesSpec si_spec;
  std::uint64_t si_seed = 1234;
  bool si_force = false;
  cmd_synth_images->add_option("--out", si_out, "output directory")->required();
  cmd_synth_images->add_option("--categories", si_spec.n_categories, "category count (2..12)");
  cmd_synth_images->add_option("--per-category", si_spec.per_category, "images per category");
  cmd_synth_images->add_option("--seed", si_seed, "random seed");
  cmd_synth_images->add_flag("--force", si_force, "overwrite existing output");
  cmd_synth_images->callback([&] {
    if (auto s = env_seed_override()) si_seed = *s;
    require_absent(si_out, si_force);
    if (si_force && fs::exists(si_out)) fs::remove_all(si_out);
    const auto manifest = synth_images(si_spec, si_out, si_seed);
    std::printf("wrote %zu images under %s\n", manifest.size(), si_out.c_str());
  });

  // ---- synth-gaze
  auto* cmd_synth_gaze = app.add_subcommand("synth-gaze", "generate a synthetic gaze log");
  std::string sg_manifest, sg_out;
  SyntheticGazeSpec sg_spec;
  std::uint64_t sg_seed = 1234;
  bool sg_force = false;
  cmd_synth_gaze->add_option("--manifest", sg_manifest, "image manifest csv")->required();
  cmd_synth_gaze->add_option("--out", sg_out, "output gaze csv")->required();
  cmd_synth_gaze->add_option("--participants", sg_spec.participants, "participant count");
  cmd_synth_gaze->add_option("--samples-cap", sg_spec.samples_cap, "max in-image samples per trial");
  cmd_synth_gaze->add_option("--central-sigma", sg_spec.central_sigma, "central bias sigma (image px)");
  cmd_synth_gaze->add_option("--object-sigma", sg_spec.object_sigma, "object spread sigma (image px)");
  cmd_synth_gaze->add_option("--object-weight", sg_spec.object_weight, "object attraction weight [0,1]");
  cmd_synth_gaze->add_option("--seed", sg_seed, "random seed");
  cmd_synth_gaze->add_flag("--force", sg_force, "overwrite existing output");
  cmd_synth_gaze->callback([&] {
    if (auto s = env_seed_override()) sg_seed = *s;
    require_absent(sg_out, sg_force);
    synth_gaze(sg_spec, read_manifest(sg_manifest), sg_out, sg_seed);
    std::printf("wrote gaze log %s\n", sg_out.c_str());
  });

  // ---- train
  auto* cmd_train = app.add_subcommand("train", "train a model from scratch");
  std::string tr_data, tr_out, tr_arch = "smoke", tr_metrics, tr_eval;
  TrainConfig tr_config;
  bool tr_force = false;
  cmd_train->add_option("--data", tr_data, "dataset root (directory per category)")->required();
  cmd_train->add_option("--out", tr_out, "output weights file")->required();
  cmd_train->add_option("--arch", tr_arch, "resnet18 | vnet | smoke | architecture file");
  cmd_train->add_option("--epochs", tr_config.epochs, "training epochs");
  cmd_train->add_option("--batch-size", tr_config.batch_size, "batch size");
  cmd_train->add_option("--lr0", tr_config.lr0, "initial learning rate");
  cmd_train->add_option("--momentum", tr_config.momentum, "SGD momentum");
  cmd_train->add_option("--weight-decay", tr_config.weight_decay, "weight decay");
  cmd_train->add_option("--seed", tr_config.seed, "random seed");
  cmd_train->add_option("--metrics", tr_metrics, "per-epoch metrics csv");
  cmd_train->add_option("--eval", tr_eval, "held-out directory to evaluate after training");
  cmd_train->add_flag("--force", tr_force, "overwrite existing output");
  cmd_train->callback([&] {
    if (auto s = env_seed_override()) tr_config.seed = *s;
    require_absent(tr_out, tr_force);
    const DatasetIndex index = load_dataset_index(tr_data);
    const ArchitectureConfig arch =
        resolve_architecture(tr_arch, static_cast<int>(index.categories.size()));
    Model model = build_model(arch, tr_config.seed);
    const DatasetIndex balanced = balanced_sample(index, tr_config.seed);
    const TrainResult result = train(model, balanced, tr_config);
    save_weights(model, tr_out);
    if (!tr_metrics.empty()) write_metrics_csv(tr_metrics, result.metrics);
    std::printf("final train accuracy %.4f\n", result.final_train_acc);
    if (!tr_eval.empty()) {
      const DatasetIndex eval_index = load_dataset_index(tr_eval);
      std::printf("eval accuracy %.4f\n", evaluate_accuracy(model, eval_index));
    }
  });

  // ---- finetune
  auto* cmd_finetune = app.add_subcommand("finetune", "replace and retrain the final classifier");
  std::string ft_weights, ft_data, ft_out, ft_arch = "smoke", ft_metrics;
  TrainConfig ft_config;
  bool ft_force = false;
  cmd_finetune->add_option("--weights", ft_weights, "pretrained weights")->required();
  cmd_finetune->add_option("--data", ft_data, "dataset root")->required();
  cmd_finetune->add_option("--out", ft_out, "output weights file")->required();
  cmd_finetune->add_option("--arch", ft_arch, "architecture of the weights");
  cmd_finetune->add_option("--epochs", ft_config.fine_tune_epochs, "fine-tune epochs");
  cmd_finetune->add_option("--batch-size", ft_config.batch_size, "batch size");
  cmd_finetune->add_option("--lr0", ft_config.lr0, "initial learning rate");
  cmd_finetune->add_option("--momentum", ft_config.momentum, "SGD momentum");
  cmd_finetune->add_option("--weight-decay", ft_config.weight_decay, "weight decay");
  cmd_finetune->add_option("--seed", ft_config.seed, "random seed");
  cmd_finetune->add_option("--metrics", ft_metrics, "per-epoch metrics csv");
  cmd_finetune->add_flag("--force", ft_force, "overwrite existing output");
  cmd_finetune->callback([&] {
    if (auto s = env_seed_override()) ft_config.seed = *s;
    require_absent(ft_out, ft_force);
    ft_config.fine_tune = true;
    const DatasetIndex index = load_dataset_index(ft_data);
    const ArchitectureConfig arch =
        resolve_architecture(ft_arch, static_cast<int>(index.categories.size()));
    Model model = load_weights(arch, ft_weights);
    const DatasetIndex balanced = balanced_sample(index, ft_config.seed);
    const TrainResult result = fine_tune(model, balanced, ft_config);
    save_weights(model, ft_out);
    if (!ft_metrics.empty()) write_metrics_csv(ft_metrics, result.metrics);
    std::printf("final train accuracy %.4f\n", result.final_train_acc);
  });

  // ---- gradcam
  auto* cmd_gradcam = app.add_subcommand("gradcam", "extract saliency grids and maps");
  std::string gc_weights, gc_arch = "smoke", gc_image, gc_run, gc_model = "model";
  std::string gc_tap = "late", gc_class_source = "predicted";
  std::string gc_out_grid, gc_out_map, gc_out_pgm;
  int gc_class_id = -1;
  int gc_num_classes = 12;
  bool gc_pgm = false;
  cmd_gradcam->add_option("--weights", gc_weights, "trained weights")->required();
  cmd_gradcam->add_option("--arch", gc_arch, "architecture");
  cmd_gradcam->add_option("--image", gc_image, "single image input");
  cmd_gradcam->add_option("--run", gc_run, "run directory (process the whole corpus)");
  cmd_gradcam->add_option("--model", gc_model, "model name inside the run directory");
  cmd_gradcam->add_option("--tap", gc_tap, "early | middle | late (single image mode)");
  cmd_gradcam->add_option("--class-source", gc_class_source, "predicted | ground_truth");
  cmd_gradcam->add_option("--class-id", gc_class_id, "class for ground_truth source");
  cmd_gradcam->add_option("--num-classes", gc_num_classes, "classifier width (single image mode)");
  cmd_gradcam->add_option("--out-grid", gc_out_grid, "grid csv output (single image mode)");
  cmd_gradcam->add_option("--out-map", gc_out_map, "224x224 map output (single image mode)");
  cmd_gradcam->add_option("--out-pgm", gc_out_pgm, "pgm render output (single image mode)");
  cmd_gradcam->add_flag("--pgm", gc_pgm, "also render pgm files (run mode)");
  cmd_gradcam->callback([&] {
    const bool ground_truth = gc_class_source == "ground_truth";
    if (!ground_truth && gc_class_source != "predicted") {
      throw config_error("--class-source must be predicted or ground_truth");
    }
    if (!gc_run.empty()) {
      stage_gradcam(gc_run, gc_model, gc_weights, gc_arch, ground_truth, gc_pgm);
      std::printf("wrote saliency artifacts under %s\n",
                  (fs::path(gc_run) / "saliency" / gc_model).string().c_str());
      return;
    }
    if (gc_image.empty()) throw config_error("either --image or --run is required");
    const auto tap = tap_from_name(gc_tap);
    if (!tap) throw config_error("--tap must be early, middle or late");
    const ArchitectureConfig arch = resolve_architecture(gc_arch, gc_num_classes);
    const Model model = load_weights(arch, gc_weights);
    const Tensor input = preprocess_image(load_image(gc_image), stats_from_model(model));
    const SaliencyGrid grid =
        ground_truth ? gradcam(model, input, *tap, ClassSource::ground_truth, gc_class_id)
                     : gradcam(model, input, *tap, ClassSource::predicted);
    std::printf("grid %dx%d, class %d (%s)\n", grid.h, grid.w, grid.class_used,
                gc_class_source.c_str());
    const MaxPoint point = global_maximum(grid);
    if (point.degenerate) {
      std::printf("global maximum: degenerate (all-zero grid)\n");
    } else {
      std::printf("global maximum: (%.2f, %.2f), block %d\n", point.x, point.y,
                  block_of(point.x, point.y).index);
    }
    if (!gc_out_grid.empty()) write_grid_csv(gc_out_grid, grid);
    if (!gc_out_map.empty() || !gc_out_pgm.empty()) {
      const SaliencyMap map = upsample_and_normalize(grid);
      if (!gc_out_map.empty()) save_heatmap_raw(gc_out_map, map.map.data());
      if (!gc_out_pgm.empty()) {
        save_pgm_float(gc_out_pgm, map.map.data(), SaliencyMap::size, SaliencyMap::size);
      }
    }
  });

  // ---- heatmap
  auto* cmd_heatmap = app.add_subcommand("heatmap", "build fixations and gaze heatmaps");
  std::string hm_gaze, hm_run;
  bool hm_pgm = false, hm_csv = false;
  cmd_heatmap->add_option("--gaze", hm_gaze, "gaze log csv")->required();
  cmd_heatmap->add_option("--run", hm_run, "run directory for outputs")->required();
  cmd_heatmap->add_flag("--pgm", hm_pgm, "also render pgm files");
  cmd_heatmap->add_flag("--csv", hm_csv, "also write row,col,value csv maps");
  cmd_heatmap->callback([&] {
    fs::create_directories(hm_run);
    stage_fixations_and_heatmaps(hm_gaze, hm_run, hm_pgm, hm_csv);
    std::printf("wrote fixations.csv and heatmaps/ under %s\n", hm_run.c_str());
  });

  // ---- imgstats
  auto* cmd_imgstats = app.add_subcommand("imgstats", "per-image property table");
  std::string is_data, is_out;
  bool is_force = false;
  cmd_imgstats->add_option("--data", is_data, "dataset root")->required();
  cmd_imgstats->add_option("--out", is_out, "output csv")->required();
  cmd_imgstats->add_flag("--force", is_force, "overwrite existing output");
  cmd_imgstats->callback([&] {
    require_absent(is_out, is_force);
    const DatasetIndex index = load_dataset_index(is_data);
    CsvWriter csv(is_out, {"image", "entropy", "shape", "texture", "peak_to_mean"});
    for (const DatasetRecord& record : index.records) {
      const ImageProperties props = compute_image_properties(load_image(record.path));
      csv.write_row({fs::path(record.path).stem().string(), format_double(props.entropy),
                     format_double(props.shape), format_double(props.texture),
                     format_double(props.peak_to_mean)});
    }
    csv.close();
    std::printf("wrote %s\n", is_out.c_str());
  });

  // ---- compare
  auto* cmd_compare = app.add_subcommand("compare", "assemble the comparison table");
  std::string cp_run, cp_models;
  double cp_min_acc = 100.0;
  cmd_compare->add_option("--run", cp_run, "run directory")->required();
  cmd_compare->add_option("--models", cp_models, "comma-separated model names")->required();
  cmd_compare->add_option("--min-human-acc", cp_min_acc,
                          "human accuracy threshold for the control/challenge partition");
  cmd_compare->callback([&] {
    stage_compare(cp_run, split_models(cp_models), cp_min_acc);
    std::printf("wrote %s\n", (fs::path(cp_run) / "comparison.csv").string().c_str());
  });

  // ---- stats
  auto* cmd_stats = app.add_subcommand("stats", "statistical report over the comparison table");
  std::string st_run, st_models;
  double st_alpha = 0.05;
  std::uint64_t st_seed = 1234;
  cmd_stats->add_option("--run", st_run, "run directory")->required();
  cmd_stats->add_option("--models", st_models, "comma-separated model names")->required();
  cmd_stats->add_option("--alpha", st_alpha, "significance level");
  cmd_stats->add_option("--seed", st_seed, "seed for the chance-sample draw");
  cmd_stats->callback([&] {
    if (auto s = env_seed_override()) st_seed = *s;
    stage_stats(st_run, split_models(st_models), st_alpha, st_seed);
    std::printf("wrote %s\n", (fs::path(st_run) / "stats_report.csv").string().c_str());
  });

  // ---- pipeline
  auto* cmd_pipeline = app.add_subcommand("pipeline", "run the whole workbench end to end");
  std::string pl_config, pl_out;
  std::uint64_t pl_seed = 0;
  bool pl_seed_set = false, pl_force = false;
  cmd_pipeline->add_option("--config", pl_config, "pipeline config file")->required();
  cmd_pipeline->add_option("--out", pl_out, "override [run] out");
  cmd_pipeline->add_option("--seed", pl_seed, "override [run] seed")
      ->each([&](const std::string&) { pl_seed_set = true; });
  cmd_pipeline->add_flag("--force", pl_force, "overwrite a non-empty output directory");
  cmd_pipeline->callback([&] {
    KvConfig kv = KvConfig::parse_file(pl_config);
    if (!pl_out.empty()) kv.set("run", "out", pl_out);
    if (pl_seed_set) kv.set("run", "seed", std::to_string(pl_seed));
    if (auto s = env_seed_override()) kv.set("run", "seed", std::to_string(*s));
    if (pl_force) kv.set("run", "force", "true");
    run_pipeline(PipelineConfig::from_kv(kv));
    std::printf("pipeline complete: %s\n", kv.get("run", "out", "").c_str());
  });

  // ---- validate-arch
  auto* cmd_validate = app.add_subcommand("validate-arch", "check architecture constraints");
  std::string va_arch;
  int va_classes = 12;
  bool va_print = false;
  cmd_validate->add_option("--arch", va_arch, "resnet18 | vnet | smoke | file")->required();
  cmd_validate->add_option("--num-classes", va_classes, "classifier width");
  cmd_validate->add_flag("--print", va_print, "print the layer table, grids and receptive fields");
  cmd_validate->callback([&] {
    const ArchitectureConfig config = resolve_architecture(va_arch, va_classes);
    if (va_print) {
      std::printf("%s", format_architecture(config).c_str());
      std::printf("\nlayer output grids (224x224 input):\n");
      const auto shapes = propagate_shapes(config);
      for (std::size_t i = 0; i < config.layers.size(); ++i) {
        std::printf("  %-12s %4d x %-4d channels %d\n", config.layers[i].name.c_str(),
                    shapes[i][1], shapes[i][2], shapes[i][0]);
      }
      std::printf("\ntheoretical receptive fields (main path):\n");
      for (const RfsEntry& e : theoretical_rfs(config)) {
        std::printf("  %-12s rfs %-5lld jump %lld\n", e.layer.c_str(), e.rfs, e.jump);
      }
      std::printf("\n");
    }
    const ValidationReport report = validate_vnet_constraints(config);
    for (const ConstraintCheck& check : report.checks) {
      std::printf("[%s] %s: %s\n", check.pass ? "PASS" : "FAIL", check.name.c_str(),
                  check.detail.c_str());
    }
    std::printf("%s\n", report.all_pass() ? "all constraints hold" : "constraints violated");
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "gazecam: error: %s: %s\n", e.kind_name(), e.what());
    switch (e.kind()) {
      case ErrorKind::config:
      case ErrorKind::input:
      case ErrorKind::format:
        return 1;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gazecam: error: internal: %s\n", e.what());
    return 2;
  }
}
