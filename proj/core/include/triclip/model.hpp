// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Single-channel ViT towers, one per modality.
//
// encode(): patchify -> linear patch embedding + learned positions ->
// `depth` pre-norm blocks (multi-head self-attention, GELU MLP) -> final
// LayerNorm -> mean over tokens -> linear head -> L2 normalisation.
// Forward and backward passes are written out by hand in float64.

#ifndef TRICLIP_MODEL_HPP_
#define TRICLIP_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "triclip/rng.hpp"
#include "triclip/types.hpp"

namespace triclip {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct EncoderConfig {
  int image_hw = 64;
  int patch = 8;
  int depth = 4;
  int width = 128;
  int heads = 4;
  int embed_dim = 64;
  double mlp_ratio = 4.0;

  int grid() const { return image_hw / patch; }
  int tokens() const { return grid() * grid(); }
  int patch_dim() const { return patch * patch; }
  int head_dim() const { return width / heads; }
  int mlp_hidden() const;

  // Throws InvalidArgument unless image_hw % patch == 0, width % heads == 0
  // and every size is positive.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Closed-form trainable parameter count of one tower.
std::int64_t param_count(const EncoderConfig& config);

struct BlockParams {
  Mat ln1_g, ln1_b;
  Mat qkv_w, qkv_b;
  Mat proj_w, proj_b;
  Mat ln2_g, ln2_b;
  Mat fc1_w, fc1_b;
  Mat fc2_w, fc2_b;
};

struct NamedTensor {
  std::string name;
  Mat* value;
  bool decay;  // weight matrices take weight decay; biases, norms, positions do not
};

struct ConstNamedTensor {
  std::string name;
  const Mat* value;
  bool decay;
};

// One tower's parameters. Biases and norm gains are 1 x n matrices so every
// tensor shares one type.
struct EncoderParams {
  Mat patch_w, patch_b;
  Mat pos;
  std::vector<BlockParams> blocks;
  Mat norm_g, norm_b;
  Mat head_w, head_b;

  static EncoderParams zeros(const EncoderConfig& config);
  // Patch embedding truncated-normal(1/sqrt(fan_in)), other weight matrices
  // Glorot-uniform, positions truncated-normal(0.02), unit norm gains, zero
  // biases.
  static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);

  // Fixed enumeration order used by the optimizer and checkpoints.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;

  std::int64_t count() const;
  void set_zero();
  // this += scale * other
  void add_scaled(const EncoderParams& other, double scale);
};

// Per-image activations kept for the backward pass.
struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

struct BlockTrace {
  LayerNormCache ln1;
  Mat h1, qkv;
  std::vector<Mat> attn;  // per head, tokens x tokens softmax rows
  Mat heads_out;
  LayerNormCache ln2;
  Mat h2, pre_act, act;
};

struct EncodeTrace {
  Mat patches;
  std::vector<BlockTrace> blocks;
  LayerNormCache final_norm;
  Mat pooled;  // 1 x width
  Vec z;       // pre-normalisation head output
  Vec embedding;
};

// Rearranges an H x W image into tokens x patch_dim rows.
Mat patchify(const Mat& image, int patch);

// Throws InvalidArgument unless image is image_hw x image_hw.
Vec encode(const EncoderConfig& config, const EncoderParams& params,
           const Mat& image, EncodeTrace* trace = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(embedding).
void encode_backward(const EncoderConfig& config, const EncoderParams& params,
                     const EncodeTrace& trace, const Vec& d_embedding,
                     EncoderParams& grads);

inline constexpr double kMinTemperature = 0.01;
inline constexpr double kMaxTemperature = 100.0;
inline constexpr double kInitTemperature = 0.07;

// Per-modality input standardisation, (x - mean) / sd, applied to every
// channel image before patchify. Fitted on the training split; not a
// trainable parameter. The default is the identity.
struct InputNorm {
  std::array<double, kNumModalities> mean{0.0, 0.0, 0.0};
  std::array<double, kNumModalities> sd{1.0, 1.0, 1.0};
  bool fitted = false;

  friend bool operator==(const InputNorm&, const InputNorm&) = default;
};

// Mean and sd over every available channel pixel of each modality.
// Modalities without data keep the identity.
InputNorm fit_input_norm(std::span<const ModalityChip* const> chips);

// Three disjoint towers sharing one config, plus the shared learnable
// log-temperature of the contrastive loss.
struct TowerSet {
  EncoderConfig config;
  std::array<EncoderParams, kNumModalities> towers;
  double log_temperature = 0.0;
  InputNorm input;

  static TowerSet init(const EncoderConfig& config, std::uint64_t seed);

  EncoderParams& tower(Modality m) { return towers[index_of(m)]; }
  const EncoderParams& tower(Modality m) const { return towers[index_of(m)]; }
  // exp(log_temperature) clamped to [kMinTemperature, kMaxTemperature].
  double temperature() const;
  bool temperature_clamped() const;
  std::int64_t parameter_count() const;
};

// Uniform draw among the available channels. Throws MissingDataError when
// the mask is all false.
int sample_channel(const ModalityChip& chip, Rng& rng);

// Channel `c` of a chip as a float64 image.
Mat channel_image(const ModalityChip& chip, int c);

// channel_image standardised with the tower set's input statistics.
Mat input_image(const TowerSet& towers, const ModalityChip& chip, int c);

struct EmbedMode {
  enum class Kind { kRandomSingle, kFixed, kMeanOverChannels };
  Kind kind = Kind::kMeanOverChannels;
  int channel = 0;

  static EmbedMode random_single() { return {Kind::kRandomSingle, 0}; }
  static EmbedMode fixed(int c) { return {Kind::kFixed, c}; }
  static EmbedMode mean_over_channels() { return {Kind::kMeanOverChannels, 0}; }
};

// Accepts "random", "mean" and "fixed:<k>".
EmbedMode parse_embed_mode(const std::string& text);
std::string to_string(const EmbedMode& mode);

// random-single encodes one sampled channel, fixed encodes channel k, and
// mean-over-channels re-normalises the mean of every available channel's
// encoding.
Vec embed_chip(const TowerSet& towers, const ModalityChip& chip, EmbedMode mode,
               Rng& rng);

// Checkpoint directory: checkpoint.json (config, step, val_loss, input
// statistics, tensor table with named offsets) and params.bin (flat little-endian float32).
struct Checkpoint {
  TowerSet towers;
  std::int64_t step = 0;
  double val_loss = 0.0;
};

void save_checkpoint(const TowerSet& towers, std::int64_t step, double val_loss,
                     const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace triclip

#endif  // TRICLIP_MODEL_HPP_
