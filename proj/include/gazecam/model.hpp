#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gazecam/graph.hpp"
#include "gazecam/tensor.hpp"

namespace gazecam {

enum class LayerKind {
  conv,
  relu,
  maxpool,
  global_avg_pool,
  linear,
  batchnorm,
  groupnorm,
  residual_add,
};

enum class NormKind { none, batch, group };

enum class Tap { early, middle, late };

const char* tap_name(Tap tap);
std::optional<Tap> tap_from_name(const std::string& name);

// One line of an architecture file. Each layer consumes the previous layer's
// output; residual_source names an additional earlier input: the second
// addend for residual_add, a replacement input for any other kind (this is
// how projection branches of residual blocks are written in a flat list).
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int kh = 0, kw = 0;
  int stride = 1;
  int padding = 0;
  int channels_out = 0;   // conv output channels; ignored elsewhere
  NormKind norm = NormKind::none;  // attached normalization after a conv
  int norm_groups = 0;             // 0 = default rule min(32, channels)
  std::string residual_source;     // empty = none
  std::optional<Tap> tap;
};

struct ArchitectureConfig {
  static constexpr int input_size = 224;
  static constexpr int input_channels = 3;

  std::string label = "custom";  // resnet18 | vnet | custom
  int num_classes = 12;
  std::vector<LayerSpec> layers;
};

// [channels, height, width] of every layer's output for a 224x224 input.
using LayerShape = std::array<int, 3>;

struct Model {
  ArchitectureConfig config;
  std::map<std::string, Tensor> params;   // trainable parameters
  std::map<std::string, Tensor> buffers;  // running stats, preprocess stats
};

// ---- built-in configurations ------------------------------------------------

ArchitectureConfig builtin_resnet18(int num_classes = 12);
ArchitectureConfig builtin_vnet(int num_classes = 12);
// Small GroupNorm net for desk-scale runs; label "custom".
ArchitectureConfig builtin_smoke(int num_classes = 12);

// Resolves "resnet18" / "vnet" / "smoke" or treats the string as a file path.
ArchitectureConfig resolve_architecture(const std::string& name_or_path, int num_classes);

ArchitectureConfig parse_architecture_file(const std::string& path, int num_classes = 12);
std::string format_architecture(const ArchitectureConfig& config);

// ---- validation & geometry --------------------------------------------------

// Shape-propagates the whole config (names, sources, shape compatibility);
// throws a configuration error naming the offending layer. Returns per-layer
// output shapes in layer order; flattened outputs use h = w = 0.
std::vector<LayerShape> propagate_shapes(const ArchitectureConfig& config);

// propagate_shapes plus the structural invariants a trainable network needs:
// exactly one early/middle/late tap and a final linear classifier.
std::vector<LayerShape> validate_config(const ArchitectureConfig& config);

// (h, w) of the named layer's activation for a 224x224 input.
std::pair<int, int> output_grid(const ArchitectureConfig& config, const std::string& layer_name);
std::pair<int, int> output_grid(const ArchitectureConfig& config, Tap tap);

struct RfsEntry {
  std::string layer;
  long long rfs = 1;
  long long jump = 1;
};

// Receptive field recurrence r_l = r_{l-1} + (k_l - 1) * j_{l-1},
// j_l = j_{l-1} * s_l along the sequential main path (conv/pool layers whose
// input is the previous layer; rerouted branch layers are skipped).
std::vector<RfsEntry> theoretical_rfs(const ArchitectureConfig& config);

struct ConstraintCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConstraintCheck> checks;
  bool all_pass() const;
};

// Three checks: 10 conv layers, strictly increasing RFS over conv layers,
// late-tap grid of 4x4.
ValidationReport validate_vnet_constraints(const ArchitectureConfig& config);

// ---- model construction & forward -------------------------------------------

// Fan-in-scaled normal init (std = sqrt(2 / fan_in)); deterministic per seed.
Model build_model(const ArchitectureConfig& config, std::uint64_t seed);

// Reinitializes the final linear classifier only.
void reinit_classifier(Model& model, std::uint64_t seed);

// Name of the final linear layer.
std::string classifier_layer(const ArchitectureConfig& config);

struct ForwardOptions {
  bool training = false;
  // Eval-mode normalization even while training (frozen-backbone fine-tune).
  bool freeze_norm = false;
  std::set<std::string> frozen_params;   // excluded from requires_grad
  bool want_taps = false;
};

struct ForwardResult {
  int logits = -1;
  std::map<Tap, int> taps;                      // tap -> graph node id
  std::vector<std::pair<std::string, int>> param_nodes;  // name -> graph node id
  std::map<std::string, int> layer_nodes;       // layer name -> graph node id
};

// Records the whole forward pass on the graph. Running batchnorm statistics
// are updated only when options.training is set and stats_sink is non-null
// (the trainer passes the model itself).
ForwardResult model_forward(Graph& graph, const Model& model, int input_node,
                            const ForwardOptions& options, Model* stats_sink = nullptr);

// ---- weights file ------------------------------------------------------------

// Binary little-endian container, magic GZCMW001: u32 entry count, then per
// entry u32 name length, name bytes, u32 rank, u32 dims, float32 data.
void save_weights(const Model& model, const std::string& path);

// Builds the model from `config`, then fills parameters and buffers from the
// file; format errors name the first offending entry.
Model load_weights(const ArchitectureConfig& config, const std::string& path);

}  // namespace gazecam
