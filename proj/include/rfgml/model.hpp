#pragma once

// The machine-listener network. Fixed block sequence: In-A, SE, In-A, SE,
// In-B, SE, In-C, global average pool, three FC layers, then a 2-unit head
// producing (mu_raw, log_a) with mu = 100 * sigmoid(mu_raw). The full-
// reference variant takes 8 input planes (reference L,R,M,S then degraded
// L,R,M,S); the reference-free variant takes the 4 degraded planes only.
// Branch/width tables live in ModelConfig so the desk-scale defaults here and
// larger configurations share one implementation.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfgml/dsp.hpp"
#include "rfgml/score.hpp"
#include "rfgml/tensor.hpp"

namespace rfgml {

enum class Variant { full_reference, reference_free };
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// Weight initialization / transfer modes:
//   def  — fresh fan-in uniform init everywhere
//   deg  — first block's input-facing kernels take the donor's degraded-
//          channel slices (donor channels 4..7), everything else fresh
//   degF — deg, plus the transferred tensors are frozen for training
//   all  — all four inception blocks and the SE blocks copied from the donor
//          (first-block input convs sliced as in deg); FC layers fresh
enum class InitMode { def, deg, degF, all };
InitMode init_mode_from_string(const std::string& s);
std::string to_string(InitMode m);

struct ConvSpec {
  int out_ch = 0;
  int kh = 1;
  int kw = 1;
};

struct BranchSpec {
  bool pool_first = false;  // 3x3 stride-1 average pool before the convs
  std::vector<ConvSpec> convs;
};

struct BlockSpec {
  std::string kind;  // "in_a", "in_b" or "in_c"
  std::vector<BranchSpec> branches;
  int pool_stride = 1;  // output average pool (downsample) when > 1
};

struct ModelConfig {
  Variant variant = Variant::reference_free;
  FrontendConfig frontend;
  std::vector<BlockSpec> blocks;
  int se_ratio = 4;
  std::vector<int> fc_widths;  // three hidden FC widths

  int input_channels() const {
    return variant == Variant::full_reference ? 8 : 4;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  // Desk-scale defaults (~139k parameters).
  static ModelConfig desk_default(Variant v);
};

std::size_t param_count(const ModelConfig& config);

// Per-band, per-plane input normalization; FR inputs reuse the 4-plane stats
// for both the reference and degraded halves.
struct NormStats {
  int bands = 0;
  std::vector<double> mean;  // 4 * bands, plane-major
  std::vector<double> std;   // 4 * bands, floored at 1e-6

  static NormStats identity(int bands);
};

class Model {
 public:
  static Model build(const ModelConfig& config, InitMode mode,
                     const Model* donor, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, Tensor>>& named_params() const {
    return params_;
  }
  Tensor param(const std::string& name) const;
  std::vector<Tensor> parameters() const;  // stable construction order
  const std::vector<std::string>& frozen_names() const { return frozen_; }
  std::size_t param_count() const;

  NormStats& norm() { return norm_; }
  const NormStats& norm() const { return norm_; }

  // Builds the forward graph on an already-normalized input tensor of shape
  // (input_channels x bands x segment_frames). Returns (mu, log_a) scalars.
  std::pair<Tensor, Tensor> forward_graph(Graph& g, const Tensor& input) const;

  // Normalized input tensors from raw segments.
  Tensor input_tensor(const SpectrogramSegment& degraded) const;
  Tensor input_tensor(const SpectrogramSegment& reference,
                      const SpectrogramSegment& degraded) const;

  // Single-segment inference.
  ScoreDistribution forward(const SpectrogramSegment& degraded) const;
  ScoreDistribution forward(const SpectrogramSegment& reference,
                            const SpectrogramSegment& degraded) const;

 private:
  Model() = default;
  friend Model load_checkpoint_impl(const std::string&, nlohmann::json*);
  ModelConfig cfg_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> frozen_;
  NormStats norm_;
};

// File-level prediction: per-segment forward, mu and the scale a averaged
// arithmetically across segments. Mono input is treated as dual-mono.
ScoreDistribution predict_file(const Model& model, const AudioBuffer& audio);
ScoreDistribution predict_pair(const Model& model, const AudioBuffer& reference,
                               const AudioBuffer& degraded);
// Same pooling on already-extracted segments (cached-feature path).
ScoreDistribution predict_segments(const Model& model,
                                   const std::vector<SpectrogramSegment>& degraded);
ScoreDistribution predict_segments(const Model& model,
                                   const std::vector<SpectrogramSegment>& reference,
                                   const std::vector<SpectrogramSegment>& degraded);

// Checkpoint container ("RFGM"): magic, version, canonical JSON block with
// the config and caller metadata, named parameter table (dtype f64), then
// normalization statistics. Round-trips bit-exactly and preserves forward
// outputs.
void save_checkpoint(const Model& model, const std::string& path,
                     const nlohmann::json& meta = nlohmann::json::object());
Model load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace rfgml
