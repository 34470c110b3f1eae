#include "gazecam/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gazecam/errors.hpp"
#include "gazecam/kernels.hpp"
#include "gazecam/rng.hpp"

namespace gazecam {

namespace {

constexpr char kWeightsMagic[8] = {'G', 'Z', 'C', 'M', 'W', '0', '0', '1'};

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::global_avg_pool: return "gap";
    case LayerKind::linear: return "linear";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::groupnorm: return "groupnorm";
    case LayerKind::residual_add: return "residual_add";
  }
  return "?";
}

std::optional<LayerKind> kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "relu") return LayerKind::relu;
  if (s == "maxpool") return LayerKind::maxpool;
  if (s == "gap" || s == "global_avg_pool") return LayerKind::global_avg_pool;
  if (s == "linear") return LayerKind::linear;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "groupnorm") return LayerKind::groupnorm;
  if (s == "residual_add" || s == "add") return LayerKind::residual_add;
  return std::nullopt;
}

int default_groups(int channels) { return std::min(32, channels); }

int resolve_groups(const LayerSpec& layer, int channels) {
  return layer.norm_groups > 0 ? layer.norm_groups : default_groups(channels);
}

[[noreturn]] void bad_layer(const std::string& name, const std::string& why) {
  throw config_error("layer '" + name + "': " + why);
}

}  // namespace

const char* tap_name(Tap tap) {
  switch (tap) {
    case Tap::early: return "early";
    case Tap::middle: return "middle";
    case Tap::late: return "late";
  }
  return "?";
}

std::optional<Tap> tap_from_name(const std::string& name) {
  if (name == "early") return Tap::early;
  if (name == "middle") return Tap::middle;
  if (name == "late") return Tap::late;
  return std::nullopt;
}

// ---- built-in configurations ------------------------------------------------

namespace {

LayerSpec conv_spec(std::string name, int k, int stride, int pad, int channels,
                    NormKind norm, int groups = 0) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::conv;
  l.kh = k;
  l.kw = k;
  l.stride = stride;
  l.padding = pad;
  l.channels_out = channels;
  l.norm = norm;
  l.norm_groups = groups;
  return l;
}

LayerSpec plain_spec(std::string name, LayerKind kind) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  return l;
}

}  // namespace

ArchitectureConfig builtin_resnet18(int num_classes) {
  ArchitectureConfig cfg;
  cfg.label = "resnet18";
  cfg.num_classes = num_classes;
  auto& L = cfg.layers;

  L.push_back(conv_spec("stem", 7, 2, 3, 64, NormKind::batch));
  L.push_back(plain_spec("stem_relu", LayerKind::relu));
  {
    LayerSpec pool = plain_spec("stem_pool", LayerKind::maxpool);
    pool.kh = pool.kw = 3;
    pool.stride = 2;
    pool.padding = 1;
    L.push_back(pool);
  }

  const int stage_channels[4] = {64, 128, 256, 512};
  std::string block_input = "stem_pool";
  for (int s = 1; s <= 4; ++s) {
    const int c = stage_channels[s - 1];
    for (int b = 1; b <= 2; ++b) {
      const bool downsample = (s > 1 && b == 1);
      const int stride = downsample ? 2 : 1;
      const std::string p = "s" + std::to_string(s) + "b" + std::to_string(b);

      L.push_back(conv_spec(p + "_c1", 3, stride, 1, c, NormKind::batch));
      L.push_back(plain_spec(p + "_r1", LayerKind::relu));
      L.push_back(conv_spec(p + "_c2", 3, 1, 1, c, NormKind::batch));
      LayerSpec add = plain_spec(p + "_add", LayerKind::residual_add);
      if (downsample) {
        LayerSpec proj = conv_spec(p + "_proj", 1, stride, 0, c, NormKind::batch);
        proj.residual_source = block_input;  // branch off the block input
        L.push_back(proj);
        add.residual_source = p + "_c2";
      } else {
        add.residual_source = block_input;
      }
      L.push_back(add);
      LayerSpec out = plain_spec(p + "_out", LayerKind::relu);
      if (s == 1 && b == 2) out.tap = Tap::early;
      if (s == 3 && b == 2) out.tap = Tap::middle;
      if (s == 4 && b == 2) out.tap = Tap::late;
      L.push_back(out);
      block_input = p + "_out";
    }
  }

  L.push_back(plain_spec("head_pool", LayerKind::global_avg_pool));
  L.push_back(plain_spec("fc", LayerKind::linear));
  return cfg;
}

ArchitectureConfig builtin_vnet(int num_classes) {
  // Ten GroupNorm convolutions with strictly increasing receptive fields;
  // six stride-2 layers bring the grid to 4x4 by conv9 (the late tap).
  ArchitectureConfig cfg;
  cfg.label = "vnet";
  cfg.num_classes = num_classes;
  auto& L = cfg.layers;

  struct Row { int stride; int channels; };
  const Row rows[10] = {
      {2, 32}, {1, 32}, {2, 64}, {1, 64}, {2, 128},
      {1, 128}, {2, 256}, {2, 256}, {2, 512}, {1, 512},
  };
  for (int i = 0; i < 10; ++i) {
    const std::string idx = std::to_string(i + 1);
    L.push_back(conv_spec("conv" + idx, 3, rows[i].stride, 1, rows[i].channels, NormKind::group));
    LayerSpec r = plain_spec("relu" + idx, LayerKind::relu);
    if (i + 1 == 2) r.tap = Tap::early;
    if (i + 1 == 6) r.tap = Tap::middle;
    if (i + 1 == 9) r.tap = Tap::late;
    L.push_back(r);
  }
  L.push_back(plain_spec("head_pool", LayerKind::global_avg_pool));
  L.push_back(plain_spec("fc", LayerKind::linear));
  return cfg;
}

ArchitectureConfig builtin_smoke(int num_classes) {
  ArchitectureConfig cfg;
  cfg.label = "custom";
  cfg.num_classes = num_classes;
  auto& L = cfg.layers;

  L.push_back(conv_spec("c1", 5, 4, 2, 16, NormKind::group, 8));
  L.push_back(plain_spec("r1", LayerKind::relu));
  L.push_back(conv_spec("c2", 3, 2, 1, 32, NormKind::group, 8));
  {
    LayerSpec r = plain_spec("r2", LayerKind::relu);
    r.tap = Tap::early;
    L.push_back(r);
  }
  L.push_back(conv_spec("c3", 3, 2, 1, 64, NormKind::group, 16));
  {
    LayerSpec r = plain_spec("r3", LayerKind::relu);
    r.tap = Tap::middle;
    L.push_back(r);
  }
  L.push_back(conv_spec("c4", 3, 2, 1, 64, NormKind::group, 16));
  {
    LayerSpec r = plain_spec("r4", LayerKind::relu);
    r.tap = Tap::late;
    L.push_back(r);
  }
  L.push_back(plain_spec("head_pool", LayerKind::global_avg_pool));
  L.push_back(plain_spec("fc", LayerKind::linear));
  return cfg;
}

ArchitectureConfig resolve_architecture(const std::string& name_or_path, int num_classes) {
  if (name_or_path == "resnet18") return builtin_resnet18(num_classes);
  if (name_or_path == "vnet") return builtin_vnet(num_classes);
  if (name_or_path == "smoke") return builtin_smoke(num_classes);
  return parse_architecture_file(name_or_path, num_classes);
}

// ---- architecture file -------------------------------------------------------

ArchitectureConfig parse_architecture_file(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open architecture file '" + path + "'");

  ArchitectureConfig cfg;
  cfg.label = "custom";
  cfg.num_classes = num_classes;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    std::string t;
    while (ss >> t) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tok.size() != 10) {
      throw format_error(where + ": expected 10 columns "
                         "(name kind kh kw stride pad channels norm residual_source tap), got " +
                         std::to_string(tok.size()));
    }
    auto num = [&](const std::string& v, int dflt) {
      if (v == "-") return dflt;
      try {
        return std::stoi(v);
      } catch (...) {
        throw format_error(where + ": bad number '" + v + "'");
      }
    };

    LayerSpec l;
    l.name = tok[0];
    auto kind = kind_from_name(tok[1]);
    if (!kind) throw format_error(where + ": unknown layer kind '" + tok[1] + "'");
    l.kind = *kind;
    l.kh = num(tok[2], 0);
    l.kw = num(tok[3], 0);
    l.stride = num(tok[4], 1);
    l.padding = num(tok[5], 0);
    l.channels_out = num(tok[6], 0);
    if (tok[7] == "-" || tok[7] == "none") {
      l.norm = NormKind::none;
    } else if (tok[7] == "batch") {
      l.norm = NormKind::batch;
    } else if (tok[7] == "group") {
      l.norm = NormKind::group;
    } else if (tok[7].rfind("group:", 0) == 0) {
      l.norm = NormKind::group;
      l.norm_groups = num(tok[7].substr(6), 0);
    } else {
      throw format_error(where + ": unknown norm '" + tok[7] + "'");
    }
    if (tok[8] != "-") l.residual_source = tok[8];
    if (tok[9] != "-") {
      auto tap = tap_from_name(tok[9]);
      if (!tap) throw format_error(where + ": unknown tap '" + tok[9] + "'");
      l.tap = tap;
    }
    cfg.layers.push_back(std::move(l));
  }
  if (cfg.layers.empty()) throw format_error(path + ": no layers defined");
  return cfg;
}

std::string format_architecture(const ArchitectureConfig& config) {
  std::ostringstream os;
  os << "# name kind kh kw stride pad channels norm residual_source tap\n";
  for (const LayerSpec& l : config.layers) {
    os << l.name << " " << kind_name(l.kind) << " ";
    if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) {
      os << l.kh << " " << l.kw << " " << l.stride << " " << l.padding << " ";
    } else {
      os << "- - - - ";
    }
    if (l.kind == LayerKind::conv) {
      os << l.channels_out << " ";
    } else {
      os << "- ";
    }
    switch (l.norm) {
      case NormKind::none: os << "- "; break;
      case NormKind::batch: os << "batch "; break;
      case NormKind::group:
        if (l.norm_groups > 0) {
          os << "group:" << l.norm_groups << " ";
        } else {
          os << "group ";
        }
        break;
    }
    os << (l.residual_source.empty() ? "-" : l.residual_source) << " ";
    os << (l.tap ? tap_name(*l.tap) : "-") << "\n";
  }
  return os.str();
}

// ---- shape propagation -------------------------------------------------------

std::vector<LayerShape> propagate_shapes(const ArchitectureConfig& config) {
  if (config.layers.empty()) throw config_error("architecture has no layers");
  if (config.num_classes < 2) throw config_error("num_classes must be at least 2");

  std::map<std::string, int> index;
  std::vector<LayerShape> shapes;
  shapes.reserve(config.layers.size());

  auto shape_of_input = [&](const LayerSpec& l, int i) -> LayerShape {
    if (!l.residual_source.empty() && l.kind != LayerKind::residual_add) {
      auto it = index.find(l.residual_source);
      if (it == index.end() || it->second >= i) {
        bad_layer(l.name, "residual_source '" + l.residual_source + "' is not an earlier layer");
      }
      return shapes[static_cast<std::size_t>(it->second)];
    }
    if (i == 0) {
      return {ArchitectureConfig::input_channels, ArchitectureConfig::input_size,
              ArchitectureConfig::input_size};
    }
    return shapes[static_cast<std::size_t>(i - 1)];
  };

  for (int i = 0; i < static_cast<int>(config.layers.size()); ++i) {
    const LayerSpec& l = config.layers[static_cast<std::size_t>(i)];
    if (l.name.empty()) throw config_error("layer " + std::to_string(i) + " has an empty name");
    if (index.count(l.name)) bad_layer(l.name, "duplicate layer name");

    const LayerShape in = shape_of_input(l, i);
    const bool spatial = in[1] > 0;
    LayerShape out = in;

    switch (l.kind) {
      case LayerKind::conv: {
        if (!spatial) bad_layer(l.name, "conv requires a spatial input");
        if (l.kh < 1 || l.kw < 1) bad_layer(l.name, "kernel must be at least 1x1");
        if (l.stride < 1) bad_layer(l.name, "stride must be positive");
        if (l.padding < 0) bad_layer(l.name, "padding must be non-negative");
        if (l.channels_out < 1) bad_layer(l.name, "channels_out must be positive");
        if (in[1] + 2 * l.padding < l.kh || in[2] + 2 * l.padding < l.kw) {
          bad_layer(l.name, "kernel exceeds padded input");
        }
        out = {l.channels_out,
               kernels::conv_output_dim(in[1], l.kh, l.stride, l.padding),
               kernels::conv_output_dim(in[2], l.kw, l.stride, l.padding)};
        if (l.norm == NormKind::group) {
          const int groups = resolve_groups(l, l.channels_out);
          if (l.channels_out % groups != 0) {
            bad_layer(l.name, "channel count " + std::to_string(l.channels_out) +
                                  " not divisible by group count " + std::to_string(groups));
          }
        }
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool: {
        if (!spatial) bad_layer(l.name, "maxpool requires a spatial input");
        if (l.kh < 1 || l.kw < 1) bad_layer(l.name, "window must be at least 1x1");
        if (l.padding >= l.kh || l.padding >= l.kw) {
          bad_layer(l.name, "padding must be smaller than the window");
        }
        out = {in[0],
               kernels::conv_output_dim(in[1], l.kh, l.stride, l.padding),
               kernels::conv_output_dim(in[2], l.kw, l.stride, l.padding)};
        break;
      }
      case LayerKind::global_avg_pool:
        if (!spatial) bad_layer(l.name, "global_avg_pool requires a spatial input");
        out = {in[0], 0, 0};
        break;
      case LayerKind::linear:
        if (spatial) bad_layer(l.name, "linear requires a flattened input (use gap first)");
        out = {config.num_classes, 0, 0};
        break;
      case LayerKind::batchnorm:
      case LayerKind::groupnorm: {
        if (!spatial) bad_layer(l.name, "normalization requires a spatial input");
        if (l.kind == LayerKind::groupnorm) {
          const int groups = resolve_groups(l, in[0]);
          if (in[0] % groups != 0) {
            bad_layer(l.name, "channel count " + std::to_string(in[0]) +
                                  " not divisible by group count " + std::to_string(groups));
          }
        }
        break;
      }
      case LayerKind::residual_add: {
        if (l.residual_source.empty()) bad_layer(l.name, "residual_add needs a residual_source");
        auto it = index.find(l.residual_source);
        if (it == index.end()) {
          bad_layer(l.name, "residual_source '" + l.residual_source + "' is not an earlier layer");
        }
        const LayerShape other = shapes[static_cast<std::size_t>(it->second)];
        if (other != in) {
          bad_layer(l.name, "residual shapes differ: " +
                                std::to_string(in[0]) + "x" + std::to_string(in[1]) + "x" +
                                std::to_string(in[2]) + " vs " + std::to_string(other[0]) + "x" +
                                std::to_string(other[1]) + "x" + std::to_string(other[2]));
        }
        break;
      }
    }
    shapes.push_back(out);
    index[l.name] = i;
  }
  return shapes;
}

std::vector<LayerShape> validate_config(const ArchitectureConfig& config) {
  auto shapes = propagate_shapes(config);
  int early = 0, middle = 0, late = 0;
  for (const LayerSpec& l : config.layers) {
    if (!l.tap) continue;
    switch (*l.tap) {
      case Tap::early: ++early; break;
      case Tap::middle: ++middle; break;
      case Tap::late: ++late; break;
    }
  }
  if (early != 1 || middle != 1 || late != 1) {
    throw config_error("architecture must tag exactly one early/middle/late tap (got " +
                       std::to_string(early) + "/" + std::to_string(middle) + "/" +
                       std::to_string(late) + ")");
  }
  if (config.layers.back().kind != LayerKind::linear) {
    throw config_error("final layer must be a linear classifier, got '" +
                       config.layers.back().name + "'");
  }
  return shapes;
}

std::pair<int, int> output_grid(const ArchitectureConfig& config, const std::string& layer_name) {
  auto shapes = propagate_shapes(config);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (config.layers[i].name == layer_name) {
      const LayerShape& s = shapes[i];
      return {s[1] > 0 ? s[1] : 1, s[2] > 0 ? s[2] : 1};
    }
  }
  throw input_error("unknown layer '" + layer_name + "'");
}

std::pair<int, int> output_grid(const ArchitectureConfig& config, Tap tap) {
  for (const LayerSpec& l : config.layers) {
    if (l.tap && *l.tap == tap) return output_grid(config, l.name);
  }
  throw input_error(std::string("no layer tagged '") + tap_name(tap) + "'");
}

std::vector<RfsEntry> theoretical_rfs(const ArchitectureConfig& config) {
  std::vector<RfsEntry> entries;
  long long r = 1, j = 1;
  for (const LayerSpec& l : config.layers) {
    // rerouted layers branch off the main path and don't extend the chain
    const bool on_chain = l.residual_source.empty() || l.kind == LayerKind::residual_add;
    if (!on_chain) continue;
    if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) {
      const long long k = std::max(l.kh, l.kw);
      r = r + (k - 1) * j;
      j = j * l.stride;
    }
    entries.push_back({l.name, r, j});
  }
  if (entries.empty()) entries.push_back({"(input)", 1, 1});
  return entries;
}

bool ValidationReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

ValidationReport validate_vnet_constraints(const ArchitectureConfig& config) {
  ValidationReport report;

  int conv_count = 0;
  for (const LayerSpec& l : config.layers) {
    if (l.kind == LayerKind::conv) ++conv_count;
  }
  report.checks.push_back({"conv_layer_count",
                           conv_count == 10,
                           "expected 10 convolutional layers, found " + std::to_string(conv_count)});

  // strictly increasing RFS across main-path conv layers
  {
    bool increasing = true;
    std::string detail = "receptive field strictly increases across conv layers";
    long long prev = 1;
    std::map<std::string, LayerKind> kinds;
    for (const LayerSpec& l : config.layers) kinds[l.name] = l.kind;
    for (const RfsEntry& e : theoretical_rfs(config)) {
      auto it = kinds.find(e.layer);
      if (it == kinds.end() || it->second != LayerKind::conv) continue;
      if (e.rfs <= prev) {
        increasing = false;
        detail = "receptive field does not grow at layer '" + e.layer + "' (" +
                 std::to_string(e.rfs) + " after " + std::to_string(prev) + ")";
        break;
      }
      prev = e.rfs;
    }
    report.checks.push_back({"rfs_strictly_increasing", increasing, detail});
  }

  // late tap grid must be 4x4
  {
    bool pass = false;
    std::string detail = "no layer tagged 'late'";
    for (const LayerSpec& l : config.layers) {
      if (l.tap && *l.tap == Tap::late) {
        try {
          auto [h, w] = output_grid(config, l.name);
          pass = (h == 4 && w == 4);
          detail = "late tap '" + l.name + "' grid is " + std::to_string(h) + "x" +
                   std::to_string(w);
        } catch (const Error& e) {
          detail = e.what();
        }
        break;
      }
    }
    report.checks.push_back({"late_grid_4x4", pass, detail});
  }
  return report;
}

// ---- model construction ------------------------------------------------------

namespace {

// Conv and linear weights live under "<layer>.weight"; attached norms under
// "<layer>.norm.gamma" etc.; standalone norms under "<layer>.gamma".
struct ParamPlan {
  std::vector<std::pair<std::string, std::vector<int>>> weights;  // fan-in init
};

ParamPlan plan_parameters(const ArchitectureConfig& config,
                          const std::vector<LayerShape>& shapes) {
  ParamPlan plan;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    auto input_shape = [&]() -> LayerShape {
      if (!l.residual_source.empty() && l.kind != LayerKind::residual_add) {
        for (std::size_t k = 0; k < i; ++k) {
          if (config.layers[k].name == l.residual_source) return shapes[k];
        }
      }
      if (i == 0) {
        return {ArchitectureConfig::input_channels, ArchitectureConfig::input_size,
                ArchitectureConfig::input_size};
      }
      return shapes[i - 1];
    };
    if (l.kind == LayerKind::conv) {
      plan.weights.push_back({l.name + ".weight", {l.channels_out, input_shape()[0], l.kh, l.kw}});
    } else if (l.kind == LayerKind::linear) {
      plan.weights.push_back({l.name + ".weight", {config.num_classes, input_shape()[0]}});
    }
  }
  return plan;
}

Tensor fan_in_normal(const std::vector<int>& shape, Rng rng) {
  Tensor t = Tensor::zeros(shape);
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= static_cast<std::size_t>(shape[i]);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, std_dev));
  return t;
}

}  // namespace

Model build_model(const ArchitectureConfig& config, std::uint64_t seed) {
  auto shapes = validate_config(config);
  Model model;
  model.config = config;

  // Each weight tensor draws from its own named stream, so parameters are
  // bit-identical per seed regardless of what else the model contains.
  const Rng base(seed);
  const ParamPlan plan = plan_parameters(config, shapes);
  for (const auto& [name, shape] : plan.weights) {
    model.params[name] = fan_in_normal(shape, base.fork(name));
  }
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    if (l.kind == LayerKind::conv && l.norm != NormKind::none) {
      model.params[l.name + ".norm.gamma"] = Tensor::full({l.channels_out}, 1.0f);
      model.params[l.name + ".norm.beta"] = Tensor::zeros({l.channels_out});
      if (l.norm == NormKind::batch) {
        model.buffers[l.name + ".norm.running_mean"] = Tensor::zeros({l.channels_out});
        model.buffers[l.name + ".norm.running_var"] = Tensor::full({l.channels_out}, 1.0f);
      }
    } else if (l.kind == LayerKind::batchnorm || l.kind == LayerKind::groupnorm) {
      const int c = shapes[i][0];
      model.params[l.name + ".gamma"] = Tensor::full({c}, 1.0f);
      model.params[l.name + ".beta"] = Tensor::zeros({c});
      if (l.kind == LayerKind::batchnorm) {
        model.buffers[l.name + ".running_mean"] = Tensor::zeros({c});
        model.buffers[l.name + ".running_var"] = Tensor::full({c}, 1.0f);
      }
    } else if (l.kind == LayerKind::linear) {
      model.params[l.name + ".bias"] = Tensor::zeros({config.num_classes});
    }
  }
  return model;
}

std::string classifier_layer(const ArchitectureConfig& config) {
  for (auto it = config.layers.rbegin(); it != config.layers.rend(); ++it) {
    if (it->kind == LayerKind::linear) return it->name;
  }
  throw config_error("architecture has no linear classifier");
}

void reinit_classifier(Model& model, std::uint64_t seed) {
  const std::string fc = classifier_layer(model.config);
  Tensor& w = model.params.at(fc + ".weight");
  const Rng base(seed);
  w = fan_in_normal(w.shape, base.fork(fc + ".weight"));
  Tensor& b = model.params.at(fc + ".bias");
  b = Tensor::zeros(b.shape);
}

// ---- forward -----------------------------------------------------------------

ForwardResult model_forward(Graph& graph, const Model& model, int input_node,
                            const ForwardOptions& options, Model* stats_sink) {
  const Tensor& input = graph.value(input_node);
  if (input.rank() != 4 || input.dim(1) != ArchitectureConfig::input_channels ||
      input.dim(2) != ArchitectureConfig::input_size ||
      input.dim(3) != ArchitectureConfig::input_size) {
    throw input_error("model input must be [N,3,224,224], got " + input.shape_str());
  }

  ForwardResult result;
  std::map<std::string, int> nodes;  // layer name -> output node

  auto param_node = [&](const std::string& name) {
    auto it = model.params.find(name);
    if (it == model.params.end()) throw internal_error("missing parameter '" + name + "'");
    const bool trainable = options.frozen_params.count(name) == 0;
    const int id = graph.add_input(it->second, trainable);
    result.param_nodes.push_back({name, id});
    return id;
  };

  const bool norm_training = options.training && !options.freeze_norm;

  auto batchnorm_node = [&](int x, const std::string& prefix) {
    const int gamma = param_node(prefix + ".gamma");
    const int beta = param_node(prefix + ".beta");
    const Tensor& rm = model.buffers.at(prefix + ".running_mean");
    const Tensor& rv = model.buffers.at(prefix + ".running_var");
    Tensor* um = nullptr;
    Tensor* uv = nullptr;
    if (norm_training && stats_sink != nullptr) {
      um = &stats_sink->buffers.at(prefix + ".running_mean");
      uv = &stats_sink->buffers.at(prefix + ".running_var");
    }
    return graph.batchnorm(x, gamma, beta, norm_training, &rm, &rv, um, uv);
  };

  int prev = input_node;
  for (const LayerSpec& l : model.config.layers) {
    int in = prev;
    if (!l.residual_source.empty() && l.kind != LayerKind::residual_add) {
      in = nodes.at(l.residual_source);
    }
    int out = -1;
    switch (l.kind) {
      case LayerKind::conv: {
        const int kernel = param_node(l.name + ".weight");
        out = graph.conv2d(in, kernel, l.stride, l.padding);
        if (l.norm == NormKind::batch) {
          out = batchnorm_node(out, l.name + ".norm");
        } else if (l.norm == NormKind::group) {
          const int gamma = param_node(l.name + ".norm.gamma");
          const int beta = param_node(l.name + ".norm.beta");
          out = graph.groupnorm(out, gamma, beta, resolve_groups(l, l.channels_out));
        }
        break;
      }
      case LayerKind::relu:
        out = graph.relu(in);
        break;
      case LayerKind::maxpool:
        out = graph.maxpool(in, l.kh, l.kw, l.stride, l.padding);
        break;
      case LayerKind::global_avg_pool:
        out = graph.global_avg_pool(in);
        break;
      case LayerKind::linear: {
        const int w = param_node(l.name + ".weight");
        const int b = param_node(l.name + ".bias");
        out = graph.linear(in, w, b);
        break;
      }
      case LayerKind::batchnorm:
        out = batchnorm_node(in, l.name);
        break;
      case LayerKind::groupnorm: {
        const int gamma = param_node(l.name + ".gamma");
        const int beta = param_node(l.name + ".beta");
        const int c = graph.value(in).dim(1);
        out = graph.groupnorm(in, gamma, beta, resolve_groups(l, c));
        break;
      }
      case LayerKind::residual_add: {
        const int other = nodes.at(l.residual_source);
        out = graph.residual_add(in, other);
        break;
      }
    }
    nodes[l.name] = out;
    result.layer_nodes[l.name] = out;
    if (l.tap && options.want_taps) {
      graph.retain_grad(out);
      result.taps[*l.tap] = out;
    }
    prev = out;
  }
  result.logits = prev;
  return result;
}

// ---- weights file ------------------------------------------------------------

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path, const std::string& what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (in.gcount() != 4) throw format_error("'" + path + "': truncated file reading " + what);
  return v;
}

void write_entry(std::ofstream& out, const std::string& name, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

}  // namespace

void save_weights(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out.write(kWeightsMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(model.params.size() + model.buffers.size()));
  for (const auto& [name, tensor] : model.params) write_entry(out, name, tensor);
  for (const auto& [name, tensor] : model.buffers) write_entry(out, name, tensor);
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

Model load_weights(const ArchitectureConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open weights file '" + path + "'");
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kWeightsMagic, 8) != 0) {
    throw format_error("'" + path + "': bad magic, not a GZCMW001 weights file");
  }

  Model model = build_model(config, 0);
  std::set<std::string> filled;

  const std::uint32_t count = read_u32(in, path, "entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = read_u32(in, path, "entry name length");
    if (name_len == 0 || name_len > 4096) {
      throw format_error("'" + path + "': entry " + std::to_string(e) + " has bad name length");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw format_error("'" + path + "': truncated file reading entry name");
    }
    const std::uint32_t rank = read_u32(in, path, "rank of '" + name + "'");
    if (rank > 8) throw format_error("'" + path + "': entry '" + name + "' has rank " + std::to_string(rank));
    std::vector<int> dims(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      dims[d] = static_cast<int>(read_u32(in, path, "dims of '" + name + "'"));
      if (dims[d] <= 0) throw format_error("'" + path + "': entry '" + name + "' has bad dimension");
      numel *= static_cast<std::size_t>(dims[d]);
    }

    Tensor* dst = nullptr;
    if (auto it = model.params.find(name); it != model.params.end()) dst = &it->second;
    if (auto it = model.buffers.find(name); it != model.buffers.end()) dst = &it->second;
    if (dst == nullptr && name.rfind("preprocess.", 0) == 0) {
      // corpus statistics travel with the weights but are not architecture
      // parameters
      dst = &model.buffers[name];
      *dst = Tensor::zeros(dims);
    }
    if (dst == nullptr) {
      throw format_error("'" + path + "': entry '" + name + "' does not exist in architecture '" +
                         config.label + "'");
    }
    if (dst->shape != dims) {
      throw format_error("'" + path + "': entry '" + name + "' has shape " +
                         shape_to_string(dims) + ", expected " + dst->shape_str());
    }
    in.read(reinterpret_cast<char*>(dst->data.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(numel * sizeof(float))) {
      throw format_error("'" + path + "': truncated data for entry '" + name + "'");
    }
    filled.insert(name);
  }

  for (const auto& [name, tensor] : model.params) {
    (void)tensor;
    if (!filled.count(name)) {
      throw format_error("'" + path + "': missing entry '" + name + "'");
    }
  }
  for (const auto& [name, tensor] : model.buffers) {
    (void)tensor;
    // preprocess stats are optional buffers (present once a model was trained)
    if (!filled.count(name) && name.rfind("preprocess.", 0) != 0) {
      throw format_error("'" + path + "': missing entry '" + name + "'");
    }
  }
  return model;
}

}  // namespace gazecam
