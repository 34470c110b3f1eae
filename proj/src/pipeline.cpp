#include "gazecam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gazecam/compare.hpp"
#include "gazecam/csv.hpp"
#include "gazecam/errors.hpp"
#include "gazecam/gaze.hpp"
#include "gazecam/image.hpp"
#include "gazecam/imgstats.hpp"
#include "gazecam/model.hpp"
#include "gazecam/rng.hpp"
#include "gazecam/saliency.hpp"
#include "gazecam/stats.hpp"
#include "gazecam/synth.hpp"
#include "gazecam/trainer.hpp"

namespace fs = std::filesystem;

namespace gazecam {

// ---- key = value config --------------------------------------------------------

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
  KvConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section = "run";
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw format_error(origin + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw format_error(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw format_error(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    config.sections_[section][key] = value;
  }
  return config;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path);
}

bool KvConfig::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string KvConfig::get(const std::string& section, const std::string& key,
                          const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

int KvConfig::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoi(get(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + " is not an integer");
  }
}

double KvConfig::get_double(const std::string& section, const std::string& key,
                            double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stod(get(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + " is not a number");
  }
}

bool KvConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw config_error("config [" + section + "] " + key + " is not a boolean");
}

std::uint64_t KvConfig::get_u64(const std::string& section, const std::string& key,
                                std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoull(get(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + " is not an integer");
  }
}

void KvConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string KvConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [section, keys] : sections_) {
    os << "[" << section << "]\n";
    for (const auto& [key, value] : keys) {
      os << key << " = " << value << "\n";
    }
  }
  return os.str();
}

std::uint64_t KvConfig::hash() const {
  const std::string text = canonical();
  std::uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

PipelineConfig PipelineConfig::from_kv(const KvConfig& kv) {
  PipelineConfig p;
  p.out_dir = kv.get("run", "out", "");
  if (p.out_dir.empty()) throw config_error("config [run] out is required");
  p.seed = kv.get_u64("run", "seed", p.seed);
  p.force = kv.get_bool("run", "force", p.force);

  p.categories = kv.get_int("synth-images", "categories", p.categories);
  p.per_category = kv.get_int("synth-images", "per_category", p.per_category);

  p.participants = kv.get_int("synth-gaze", "participants", p.participants);
  p.samples_cap = kv.get_int("synth-gaze", "samples_cap", p.samples_cap);
  p.central_sigma = kv.get_double("synth-gaze", "central_sigma", p.central_sigma);
  p.object_sigma = kv.get_double("synth-gaze", "object_sigma", p.object_sigma);
  p.object_weight = kv.get_double("synth-gaze", "object_weight", p.object_weight);

  p.arch = kv.get("train", "arch", p.arch);
  if (kv.has("train", "models")) {
    p.models.clear();
    std::istringstream ss(kv.get("train", "models", ""));
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) p.models.push_back(token);
    }
    if (p.models.empty()) throw config_error("config [train] models is empty");
  }
  p.epochs = kv.get_int("train", "epochs", p.epochs);
  p.batch_size = kv.get_int("train", "batch_size", p.batch_size);
  p.lr0 = kv.get_double("train", "lr0", p.lr0);
  p.momentum = kv.get_double("train", "momentum", p.momentum);
  p.weight_decay = kv.get_double("train", "weight_decay", p.weight_decay);

  p.use_ground_truth_class =
      kv.get("gradcam", "class_source", "predicted") == "ground_truth";
  p.min_human_acc = kv.get_double("compare", "min_human_acc", p.min_human_acc);
  p.alpha = kv.get_double("stats", "alpha", p.alpha);

  p.config_hash = kv.hash();
  return p;
}

// ---- shared stage helpers --------------------------------------------------------

namespace {

const Tap kTaps[3] = {Tap::early, Tap::middle, Tap::late};

const char* window_dir(HeatWindow w) { return w == HeatWindow::feedforward ? "ff" : "rec"; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string image_id_from_path(const std::string& path) {
  return fs::path(path).stem().string();
}

struct FixationRow {
  std::string participant;
  int trial = 0;
  std::string image;
  double x = 0.0, y = 0.0;
  int block = 0;
  int from_events = 0;
};

std::vector<FixationRow> read_fixations(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_p = table.require_column("participant");
  const int c_t = table.require_column("trial");
  const int c_i = table.require_column("image");
  const int c_x = table.require_column("x");
  const int c_y = table.require_column("y");
  const int c_b = table.require_column("block");
  const int c_e = table.require_column("from_events");
  std::vector<FixationRow> rows;
  for (const auto& cells : table.rows) {
    FixationRow r;
    r.participant = cells[static_cast<std::size_t>(c_p)];
    r.trial = std::stoi(cells[static_cast<std::size_t>(c_t)]);
    r.image = cells[static_cast<std::size_t>(c_i)];
    r.x = std::stod(cells[static_cast<std::size_t>(c_x)]);
    r.y = std::stod(cells[static_cast<std::size_t>(c_y)]);
    r.block = std::stoi(cells[static_cast<std::size_t>(c_b)]);
    r.from_events = std::stoi(cells[static_cast<std::size_t>(c_e)]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

namespace {

void write_map_csv(const std::string& path, const float* map, int size) {
  CsvWriter csv(path, {"row", "col", "value"});
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      csv.write_row({std::to_string(r), std::to_string(c),
                     format_double(map[static_cast<std::size_t>(r) * size + c])});
    }
  }
  csv.close();
}

}  // namespace

void stage_fixations_and_heatmaps(const std::string& gaze_csv, const std::string& run_dir,
                                  bool render_pgm, bool render_csv) {
  const GazeParseResult parsed = parse_gaze_log(gaze_csv);
  write_rejects_csv((fs::path(run_dir) / "gaze_rejects.csv").string(), parsed.rejects);

  // fixations per trial
  CsvWriter fixations((fs::path(run_dir) / "fixations.csv").string(),
                      {"participant", "trial", "image", "x", "y", "block", "from_events"});
  std::map<std::string, std::vector<const TrialRecord*>> by_image;
  for (const TrialRecord& trial : parsed.trials) {
    if (!trial.valid) continue;
    by_image[trial.image].push_back(&trial);
    const auto t0 = boundary_entry(trial);
    if (!t0) continue;
    const WindowSplit split = window_split(trial, *t0);
    const auto fix = compile_fixation(split.feedforward, trial);
    if (!fix) continue;
    const TargetBlock block = block_of(fix->x, fix->y);
    fixations.write_row({trial.participant, std::to_string(trial.trial), trial.image,
                         format_double(fix->x), format_double(fix->y),
                         std::to_string(block.index), fix->from_events ? "1" : "0"});
  }
  fixations.close();

  ensure_dir(fs::path(run_dir) / "heatmaps" / "ff");
  ensure_dir(fs::path(run_dir) / "heatmaps" / "rec");
  for (const auto& [image, trials] : by_image) {
    for (HeatWindow window : {HeatWindow::feedforward, HeatWindow::recurrent}) {
      try {
        const Heatmap heatmap = build_heatmap(trials, window);
        const fs::path base = fs::path(run_dir) / "heatmaps" / window_dir(window) / image;
        save_heatmap_raw(base.string() + ".gzh", heatmap.map.data());
        if (render_pgm) {
          save_pgm_float(base.string() + ".pgm", heatmap.map.data(), Heatmap::size, Heatmap::size);
        }
        if (render_csv) {
          write_map_csv(base.string() + ".csv", heatmap.map.data(), Heatmap::size);
        }
      } catch (const Error&) {
        // images with no contributing samples in this window have no heatmap;
        // downstream rows carry a missing-input flag instead
      }
    }
  }
}

void stage_gradcam(const std::string& run_dir, const std::string& model_name,
                   const std::string& weights_path, const std::string& arch,
                   bool use_ground_truth_class, bool render_pgm) {
  const std::vector<ManifestRow> manifest =
      read_manifest((fs::path(run_dir) / "data" / "manifest.csv").string());
  const ArchitectureConfig config = resolve_architecture(arch, [&] {
    int max_id = 0;
    for (const ManifestRow& r : manifest) max_id = std::max(max_id, r.category_id);
    return max_id + 1;
  }());
  const Model model = load_weights(config, weights_path);
  const PreprocessStats stats = stats_from_model(model);

  const fs::path model_dir = fs::path(run_dir) / "saliency" / model_name;
  for (Tap tap : kTaps) ensure_dir(model_dir / tap_name(tap));

  CsvWriter maxima((model_dir / "maxima.csv").string(),
                   {"image", "tap", "x", "y", "degenerate", "block", "class_used", "class_source"});

  for (const ManifestRow& row : manifest) {
    const fs::path image_path = fs::path(run_dir) / "data" / row.category / (row.image + ".ppm");
    const Tensor input = preprocess_image(load_image(image_path.string()), stats);
    for (Tap tap : kTaps) {
      const SaliencyGrid grid =
          use_ground_truth_class
              ? gradcam(model, input, tap, ClassSource::ground_truth, row.category_id)
              : gradcam(model, input, tap, ClassSource::predicted);
      const fs::path base = model_dir / tap_name(tap) / row.image;
      write_grid_csv(base.string() + ".csv", grid);
      const SaliencyMap map = upsample_and_normalize(grid);
      save_heatmap_raw(base.string() + ".gzh", map.map.data());
      if (render_pgm) {
        save_pgm_float(base.string() + ".pgm", map.map.data(), SaliencyMap::size,
                       SaliencyMap::size);
      }
      const MaxPoint point = global_maximum(grid);
      std::string block;
      if (!point.degenerate) block = std::to_string(block_of(point.x, point.y).index);
      maxima.write_row({row.image, tap_name(tap), format_double(point.x), format_double(point.y),
                        point.degenerate ? "1" : "0", block, std::to_string(grid.class_used),
                        grid.class_source == ClassSource::predicted ? "predicted"
                                                                    : "ground_truth"});
    }
  }
  maxima.close();
}

void stage_compare(const std::string& run_dir, const std::vector<std::string>& models,
                   double min_human_acc) {
  const std::vector<ManifestRow> manifest =
      read_manifest((fs::path(run_dir) / "data" / "manifest.csv").string());

  CompareInputs inputs;
  inputs.models = models;
  inputs.min_human_acc = min_human_acc;
  for (const ManifestRow& r : manifest) {
    ImageMeta meta;
    meta.category = r.category;
    meta.animate = r.animate;
    meta.human_acc = r.human_acc;
    meta.arousal = r.arousal;
    meta.valence = r.valence;
    if (!inputs.meta.emplace(r.image, meta).second) {
      throw input_error("duplicate image id '" + r.image + "' in manifest");
    }
  }

  // human block: centroid of per-trial compiled fixations per image
  {
    const auto fixations = read_fixations((fs::path(run_dir) / "fixations.csv").string());
    std::map<std::string, std::pair<double, double>> sums;
    std::map<std::string, int> counts;
    for (const FixationRow& f : fixations) {
      sums[f.image].first += f.x;
      sums[f.image].second += f.y;
      counts[f.image]++;
    }
    for (const auto& [image, sum] : sums) {
      const int n = counts[image];
      inputs.human_block[image] = block_of(sum.first / n, sum.second / n).index;
    }
  }

  for (const std::string& model : models) {
    // predictions
    const fs::path pred_path = fs::path(run_dir) / "predictions" / (model + ".csv");
    const CsvTable pred = read_csv(pred_path.string());
    const int c_img = pred.require_column("image");
    const int c_ok = pred.require_column("correct");
    for (const auto& cells : pred.rows) {
      inputs.correct[model][cells[static_cast<std::size_t>(c_img)]] =
          cells[static_cast<std::size_t>(c_ok)] == "1";
    }
    // maxima -> blocks
    const fs::path maxima_path = fs::path(run_dir) / "saliency" / model / "maxima.csv";
    const CsvTable maxima = read_csv(maxima_path.string());
    const int m_img = maxima.require_column("image");
    const int m_tap = maxima.require_column("tap");
    const int m_deg = maxima.require_column("degenerate");
    const int m_block = maxima.require_column("block");
    for (const auto& cells : maxima.rows) {
      const auto tap = tap_from_name(cells[static_cast<std::size_t>(m_tap)]);
      if (!tap) throw format_error("bad tap in '" + maxima_path.string() + "'");
      std::optional<int> block;
      if (cells[static_cast<std::size_t>(m_deg)] == "0") {
        block = std::stoi(cells[static_cast<std::size_t>(m_block)]);
      }
      inputs.blocks[model][cells[static_cast<std::size_t>(m_img)]][*tap] = block;
    }
    // MAE per window/tap where both maps exist
    for (const ManifestRow& r : manifest) {
      for (HeatWindow window : {HeatWindow::feedforward, HeatWindow::recurrent}) {
        const fs::path heat_path =
            fs::path(run_dir) / "heatmaps" / window_dir(window) / (r.image + ".gzh");
        if (!fs::exists(heat_path)) continue;
        const std::vector<float> heat = load_heatmap_raw(heat_path.string());
        for (Tap tap : kTaps) {
          const fs::path sal_path =
              fs::path(run_dir) / "saliency" / model / tap_name(tap) / (r.image + ".gzh");
          if (!fs::exists(sal_path)) continue;
          const std::vector<float> sal = load_heatmap_raw(sal_path.string());
          inputs.maes[model][r.image][{window, tap}] =
              mae(std::span<const float>(heat), std::span<const float>(sal));
        }
      }
    }
  }

  const ComparisonTable table = compare_run(inputs);
  write_comparison_csv((fs::path(run_dir) / "comparison.csv").string(), table);
}

// ---- stats stage ---------------------------------------------------------------

namespace {

struct ReportWriter {
  CsvWriter csv;
  explicit ReportWriter(const std::string& path)
      : csv(path, {"analysis", "statistic", "value", "p", "p_adjusted", "effect_r", "n",
                   "method"}) {}

  void add(const std::string& analysis, const std::string& statistic, double value,
           std::optional<double> p, std::optional<double> p_adj, std::optional<double> r, int n,
           const std::string& method) {
    csv.write_row({analysis, statistic, format_double(value), p ? format_double(*p) : "",
                   p_adj ? format_double(*p_adj) : "", r ? format_double(*r) : "",
                   std::to_string(n), method});
  }

  void add_test(const std::string& analysis, const stats::TestResult& t,
                std::optional<double> p_adj = std::nullopt) {
    add(analysis, t.statistic_name, t.statistic, t.p_value, p_adj, t.effect_size_r, t.n,
        t.degenerate ? t.method + " [degenerate]" : t.method);
  }
};

double cell_to_double(const std::string& cell) {
  return cell.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell);
}

}  // namespace

void stage_stats(const std::string& run_dir, const std::vector<std::string>& models,
                 double alpha, std::uint64_t seed) {
  const CsvTable table = read_csv((fs::path(run_dir) / "comparison.csv").string());
  const int c_human_block = table.require_column("human_block");
  const int c_human_acc = table.require_column("human_acc");
  const int c_animacy = table.require_column("animacy");
  const int c_category = table.require_column("category");
  const int c_arousal_t = table.require_column("arousal_tertile");

  ReportWriter report((fs::path(run_dir) / "stats_report.csv").string());
  Rng chance_rng = Rng(seed).fork("stats.chance");

  // human accuracy location estimate
  {
    std::vector<double> acc;
    for (const auto& row : table.rows) {
      acc.push_back(cell_to_double(row[static_cast<std::size_t>(c_human_acc)]));
    }
    const stats::HodgesLehmann hl = stats::hodges_lehmann_ci(acc, alpha);
    report.add("hl:human_acc", "estimate", hl.estimate, std::nullopt, std::nullopt, std::nullopt,
               static_cast<int>(acc.size()),
               "hodges-lehmann, ci=[" + format_double(hl.lo) + "," + format_double(hl.hi) +
                   "] alpha=" + format_double(alpha) + (hl.full_range ? " [full range]" : ""));
  }

  for (const std::string& model : models) {
    const int c_mae_rec_late = table.require_column(model + "_mae_rec_late");

    // block agreement per tap
    for (Tap tap : kTaps) {
      const int c_block = table.require_column(model + "_block_" + tap_name(tap));
      std::vector<std::pair<int, int>> pairs;
      for (const auto& row : table.rows) {
        const std::string& human = row[static_cast<std::size_t>(c_human_block)];
        const std::string& m = row[static_cast<std::size_t>(c_block)];
        if (human.empty() || m.empty()) continue;
        pairs.push_back({std::stoi(human), std::stoi(m)});
      }
      if (pairs.empty()) continue;
      report.add("block_agreement:" + model + ":" + tap_name(tap), "pct", block_agreement(pairs),
                 std::nullopt, std::nullopt, std::nullopt, static_cast<int>(pairs.size()),
                 "percent of matching target blocks");

      // against chance: observed match indicators vs seeded uniform pairs
      std::vector<double> observed;
      for (const auto& [h, m] : pairs) observed.push_back(h == m ? 1.0 : 0.0);
      std::vector<double> chance;
      for (std::size_t i = 0; i < pairs.size() * 4; ++i) {
        chance.push_back(chance_rng.uniform_int(kBlockCount) ==
                                 chance_rng.uniform_int(kBlockCount)
                             ? 1.0
                             : 0.0);
      }
      report.add_test("block_agreement_chance:" + model + ":" + tap_name(tap),
                      stats::wilcoxon_rank_sum(observed, chance));
    }

    // MAE columns
    std::vector<double> mae_rec_late, human_acc, animacy;
    std::map<std::string, std::vector<double>> mae_by_category;
    std::map<std::string, std::vector<double>> mae_by_arousal;
    for (const auto& row : table.rows) {
      const double rec = cell_to_double(row[static_cast<std::size_t>(c_mae_rec_late)]);
      mae_rec_late.push_back(rec);
      human_acc.push_back(cell_to_double(row[static_cast<std::size_t>(c_human_acc)]));
      animacy.push_back(row[static_cast<std::size_t>(c_animacy)] == "animate" ? 1.0 : 0.0);
      if (!std::isnan(rec)) {
        mae_by_category[row[static_cast<std::size_t>(c_category)]].push_back(rec);
        mae_by_arousal[row[static_cast<std::size_t>(c_arousal_t)]].push_back(rec);
      }
    }

    {
      std::vector<double> clean;
      for (double v : mae_rec_late) {
        if (!std::isnan(v)) clean.push_back(v);
      }
      if (clean.size() >= 2) {
        const stats::HodgesLehmann hl = stats::hodges_lehmann_ci(clean, alpha);
        report.add("hl:mae_rec_late:" + model, "estimate", hl.estimate, std::nullopt, std::nullopt,
                   std::nullopt, static_cast<int>(clean.size()),
                   "hodges-lehmann, ci=[" + format_double(hl.lo) + "," + format_double(hl.hi) +
                       "] alpha=" + format_double(alpha) + (hl.full_range ? " [full range]" : ""));
      }
    }

    report.add_test("spearman:human_acc~mae_rec_late:" + model,
                    stats::spearman(human_acc, mae_rec_late));
    report.add_test("partial_spearman:human_acc~mae_rec_late|animacy:" + model,
                    stats::partial_spearman(human_acc, mae_rec_late, animacy));

    if (mae_by_category.size() >= 2) {
      std::vector<std::vector<double>> groups;
      for (const auto& [category, values] : mae_by_category) groups.push_back(values);
      report.add_test("kruskal:mae_rec_late~category:" + model, stats::kruskal_wallis(groups));
    }

    if (mae_by_arousal.size() >= 2) {
      std::vector<std::vector<double>> groups;
      std::vector<std::string> names;
      for (const auto& [label, values] : mae_by_arousal) {
        groups.push_back(values);
        names.push_back(label);
      }
      report.add_test("kruskal:mae_rec_late~arousal_tertile:" + model,
                      stats::kruskal_wallis(groups));
      // pairwise rank-sum with bonferroni correction
      std::vector<stats::TestResult> pairwise;
      std::vector<std::string> labels;
      std::vector<double> raw_p;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
          stats::TestResult t = stats::wilcoxon_rank_sum(groups[i], groups[j]);
          labels.push_back(names[i] + "-vs-" + names[j]);
          raw_p.push_back(t.p_value.value_or(1.0));
          pairwise.push_back(std::move(t));
        }
      }
      const std::vector<double> adjusted = stats::bonferroni(raw_p);
      for (std::size_t i = 0; i < pairwise.size(); ++i) {
        report.add_test("pairwise_wilcoxon:mae_rec_late~arousal:" + model + ":" + labels[i],
                        pairwise[i], adjusted[i]);
      }
    }
  }

  // paired late-layer MAE comparison between the first two models
  if (models.size() >= 2) {
    const int c_a = table.require_column(models[0] + "_mae_rec_late");
    const int c_b = table.require_column(models[1] + "_mae_rec_late");
    std::vector<double> diffs;
    for (const auto& row : table.rows) {
      const double a = cell_to_double(row[static_cast<std::size_t>(c_a)]);
      const double b = cell_to_double(row[static_cast<std::size_t>(c_b)]);
      if (std::isnan(a) || std::isnan(b)) continue;
      diffs.push_back(a - b);
    }
    bool all_zero = true;
    for (double d : diffs) {
      if (d != 0.0) all_zero = false;
    }
    if (!diffs.empty() && !all_zero) {
      report.add_test("mae_paired_wilcoxon:" + models[0] + "-vs-" + models[1] + ":rec_late",
                      stats::wilcoxon_signed_rank(diffs, 0.0));
    }
  }

  report.csv.close();
}

// ---- full pipeline ---------------------------------------------------------------

namespace {

void write_run_manifest(const fs::path& run_dir, std::uint64_t config_hash, std::uint64_t seed) {
  std::vector<std::string> artifacts;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), run_dir).generic_string();
    if (rel == "manifest.txt" || rel == "INCOMPLETE") continue;
    artifacts.push_back(rel);
  }
  std::sort(artifacts.begin(), artifacts.end());

  std::ofstream out(run_dir / "manifest.txt");
  if (!out) throw io_error("cannot write run manifest");
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash));
  out << "config_hash = " << hash_hex << "\n";
  out << "seed = " << seed << "\n";
  for (const std::string& a : artifacts) out << "artifact " << a << "\n";
}

}  // namespace

void run_pipeline(const PipelineConfig& config) {
  const fs::path run_dir(config.out_dir);
  if (fs::exists(run_dir) && !fs::is_empty(run_dir)) {
    if (!config.force) {
      throw config_error("output directory '" + config.out_dir +
                         "' is not empty; pass force to overwrite");
    }
    fs::remove_all(run_dir);
  }
  ensure_dir(run_dir);
  {
    std::ofstream marker(run_dir / "INCOMPLETE");
    marker << "pipeline in progress\n";
  }

  const Rng base(config.seed);
  std::string stage = "setup";
  try {
    {
      KvConfig snapshot;  // reconstruct the effective configuration
      snapshot.set("run", "out", config.out_dir);
      snapshot.set("run", "seed", std::to_string(config.seed));
      snapshot.set("synth-images", "categories", std::to_string(config.categories));
      snapshot.set("synth-images", "per_category", std::to_string(config.per_category));
      snapshot.set("synth-gaze", "participants", std::to_string(config.participants));
      snapshot.set("synth-gaze", "samples_cap", std::to_string(config.samples_cap));
      snapshot.set("synth-gaze", "central_sigma", format_double(config.central_sigma));
      snapshot.set("synth-gaze", "object_sigma", format_double(config.object_sigma));
      snapshot.set("synth-gaze", "object_weight", format_double(config.object_weight));
      snapshot.set("train", "arch", config.arch);
      std::string models;
      for (const std::string& m : config.models) models += (models.empty() ? "" : ",") + m;
      snapshot.set("train", "models", models);
      snapshot.set("train", "epochs", std::to_string(config.epochs));
      snapshot.set("train", "batch_size", std::to_string(config.batch_size));
      snapshot.set("train", "lr0", format_double(config.lr0));
      snapshot.set("train", "momentum", format_double(config.momentum));
      snapshot.set("train", "weight_decay", format_double(config.weight_decay));
      snapshot.set("gradcam", "class_source",
                   config.use_ground_truth_class ? "ground_truth" : "predicted");
      snapshot.set("compare", "min_human_acc", format_double(config.min_human_acc));
      snapshot.set("stats", "alpha", format_double(config.alpha));
      std::ofstream out(run_dir / "config.snapshot");
      out << snapshot.canonical();
    }

    stage = "synth-images";
    std::printf("[pipeline] %s\n", stage.c_str());
    SyntheticImagesSpec images_spec;
    images_spec.n_categories = config.categories;
    images_spec.per_category = config.per_category;
    const std::vector<ManifestRow> manifest =
        synth_images(images_spec, (run_dir / "data").string(), config.seed);

    stage = "imgstats";
    std::printf("[pipeline] %s\n", stage.c_str());
    {
      CsvWriter csv((run_dir / "imgstats.csv").string(),
                    {"image", "entropy", "shape", "texture", "peak_to_mean"});
      for (const ManifestRow& row : manifest) {
        const fs::path path = run_dir / "data" / row.category / (row.image + ".ppm");
        const ImageProperties props = compute_image_properties(load_image(path.string()));
        csv.write_row({row.image, format_double(props.entropy), format_double(props.shape),
                       format_double(props.texture), format_double(props.peak_to_mean)});
      }
      csv.close();
    }

    stage = "train";
    ensure_dir(run_dir / "models");
    ensure_dir(run_dir / "predictions");
    const DatasetIndex full_index = load_dataset_index((run_dir / "data").string());
    for (const std::string& name : config.models) {
      std::printf("[pipeline] train %s\n", name.c_str());
      const std::uint64_t model_seed = Rng(config.seed).fork("train:" + name).next_u64();
      const ArchitectureConfig arch = resolve_architecture(config.arch, config.categories);
      Model model = build_model(arch, model_seed);

      TrainConfig train_config;
      train_config.epochs = config.epochs;
      train_config.batch_size = config.batch_size;
      train_config.lr0 = config.lr0;
      train_config.momentum = config.momentum;
      train_config.weight_decay = config.weight_decay;
      train_config.seed = model_seed;

      const DatasetIndex balanced = balanced_sample(full_index, model_seed);
      const TrainResult result = train(model, balanced, train_config);
      save_weights(model, (run_dir / "models" / (name + ".gzw")).string());
      write_metrics_csv((run_dir / "models" / (name + "_metrics.csv")).string(), result.metrics);

      // predictions over the full corpus
      const std::vector<int> predictions = predict(model, full_index);
      CsvWriter pred_csv((run_dir / "predictions" / (name + ".csv")).string(),
                         {"image", "category_id", "predicted", "correct"});
      for (std::size_t i = 0; i < full_index.records.size(); ++i) {
        const DatasetRecord& record = full_index.records[i];
        pred_csv.write_row({image_id_from_path(record.path), std::to_string(record.category),
                            std::to_string(predictions[i]),
                            predictions[i] == record.category ? "1" : "0"});
      }
      pred_csv.close();
    }

    stage = "synth-gaze";
    std::printf("[pipeline] %s\n", stage.c_str());
    SyntheticGazeSpec gaze_spec;
    gaze_spec.participants = config.participants;
    gaze_spec.samples_cap = config.samples_cap;
    gaze_spec.central_sigma = config.central_sigma;
    gaze_spec.object_sigma = config.object_sigma;
    gaze_spec.object_weight = config.object_weight;
    synth_gaze(gaze_spec, manifest, (run_dir / "gaze.csv").string(), config.seed);

    stage = "heatmaps";
    std::printf("[pipeline] %s\n", stage.c_str());
    stage_fixations_and_heatmaps((run_dir / "gaze.csv").string(), run_dir.string(), false);

    stage = "gradcam";
    for (const std::string& name : config.models) {
      std::printf("[pipeline] gradcam %s\n", name.c_str());
      stage_gradcam(run_dir.string(), name, (run_dir / "models" / (name + ".gzw")).string(),
                    config.arch, config.use_ground_truth_class, false);
    }

    stage = "compare";
    std::printf("[pipeline] %s\n", stage.c_str());
    stage_compare(run_dir.string(), config.models, config.min_human_acc);

    stage = "stats";
    std::printf("[pipeline] %s\n", stage.c_str());
    stage_stats(run_dir.string(), config.models, config.alpha, config.seed);

    write_run_manifest(run_dir, config.config_hash, config.seed);
    fs::remove(run_dir / "INCOMPLETE");
  } catch (const Error& e) {
    throw Error(e.kind(), "pipeline stage '" + stage + "' failed: " + e.what());
  }
}

}  // namespace gazecam
