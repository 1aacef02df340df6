#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/frames.hpp"
#include "lsm/masking.hpp"
#include "lsm/optim.hpp"
#include "lsm/tensor.hpp"

namespace lsm::model {

struct ModelConfig {
  std::string variant = "tiny";
  std::size_t enc_blocks = 4;
  std::size_t dec_blocks = 2;
  std::size_t enc_dim = 192;
  std::size_t dec_dim = 128;
  std::size_t enc_heads = 3;
  std::size_t dec_heads = 4;
  std::size_t patch_time = 10;
  std::size_t patch_signals = 5;
  std::size_t mlp_ratio = 4;

  void validate() const;
  masking::PatchGrid grid() const { return masking::make_grid(patch_time, patch_signals); }
};

/// tiny, small, base or large with the default 10 x 5 patches.
ModelConfig variant(std::string_view name);

/// Parameters of one pre-norm transformer block of width d.
std::size_t block_params(std::size_t d, std::size_t mlp_ratio);
std::size_t encoder_param_count(const ModelConfig& cfg);
std::size_t decoder_param_count(const ModelConfig& cfg);
/// Patch embedding, encoder blocks and norms, decoder projection, mask token,
/// decoder blocks and norms, reconstruction head. Positional tables are fixed.
std::size_t count_params(const ModelConfig& cfg);

/// Forward GFLOPs per sample: dense layers at 2 FLOPs per weight per token
/// (encoder over visible tokens only) plus attention score and mix products.
double estimate_flops(const ModelConfig& cfg, const masking::PatchGrid& grid, double mask_ratio);

/// Fixed 2-D sine/cosine table [n_time * n_signal, dim], time-major patch order.
std::vector<double> sincos_2d(std::size_t n_time, std::size_t n_signal, std::size_t dim);

struct Block {
  ag::Tensor ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_1, b_1, w_2, b_2;
};

/// Per-sample patch tensors. input and target are [batch * patches, patch_dim];
/// masked is per patch. Every sample must hide the same number of patches.
struct Batch {
  std::size_t size = 0;
  std::vector<double> input;
  std::vector<double> target;
  std::vector<std::uint8_t> masked;
};

struct ForwardOutput {
  ag::Tensor loss;            // masked-cell MSE
  ag::Tensor reconstruction;  // [batch * patches, patch_dim]
  ag::Tensor target;
  std::size_t encoder_tokens = 0;  // per sample
};

struct Embedding {
  std::vector<double> patches;  // [patches x enc_dim]
  std::vector<double> pooled;   // [enc_dim]
};

class MaeModel {
 public:
  MaeModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const masking::PatchGrid& grid() const { return grid_; }

  /// Every trainable tensor in a fixed order.
  const std::vector<optim::NamedParam>& params() const { return params_; }
  std::vector<optim::NamedParam> encoder_params() const;
  std::size_t num_params() const;

  /// Masked-autoencoder pass. Padded cells are forced to zero before encoding
  /// and the loss covers only real cells of hidden patches.
  ForwardOutput forward(const Batch& batch) const;

  /// Full encoder pass over all patches of `batch` samples packed in
  /// `patches` ([batch * num_patches, patch_dim]); returns [batch, num_patches, enc_dim].
  ag::Tensor encode_all(const std::vector<double>& patches, std::size_t batch) const;

  Embedding embed(const frames::SensorFrame& prepared) const;

  /// Copies parameter values from another model of identical configuration.
  void load_values(const std::vector<std::vector<double>>& values);
  std::vector<std::vector<double>> values() const;

 private:
  ag::Tensor run_blocks(ag::Tensor x, const std::vector<Block>& blocks, std::size_t batch,
                        std::size_t tokens, std::size_t heads) const;
  ag::Tensor encode_tokens(const ag::Tensor& patch_rows, const std::vector<std::size_t>& positions,
                           std::size_t batch, std::size_t tokens) const;

  ModelConfig cfg_;
  masking::PatchGrid grid_;
  std::vector<double> real_mask_;  // one patch worth of padding mask per patch index
  std::vector<double> enc_pos_, dec_pos_;

  ag::Tensor patch_w_, patch_b_;
  std::vector<Block> enc_blocks_;
  ag::Tensor enc_norm_g_, enc_norm_b_;
  ag::Tensor dec_embed_w_, dec_embed_b_, mask_token_;
  std::vector<Block> dec_blocks_;
  ag::Tensor dec_norm_g_, dec_norm_b_, head_w_, head_b_;
  std::vector<optim::NamedParam> params_;
  std::size_t encoder_param_end_ = 0;  // params_[0, end) belong to the encoder
};

/// Patch tensor of a prepared frame with padding rows zero.
std::vector<double> frame_patches(const frames::SensorFrame& prepared, const masking::PatchGrid& grid);

// --- Augmentation -----------------------------------------------------------

struct AugmentSpec {
  double flip_p = 0.0;
  double stretch_max = 1.0;
  double noise_sigma = 0.0;
};

/// Time flip (probability flip_p), time stretch by a factor in [1, stretch_max]
/// resampled linearly and cropped at a random offset, and additive Gaussian noise.
std::vector<double> augment(std::span<const double> values, const AugmentSpec& spec,
                            std::uint64_t seed, std::size_t signals = kNumSignals,
                            std::size_t minutes = kWindowMinutes);

std::vector<double> flip_time(std::span<const double> values, std::size_t signals = kNumSignals,
                              std::size_t minutes = kWindowMinutes);
std::vector<double> stretch_time(std::span<const double> values, double factor, double offset,
                                 std::size_t signals = kNumSignals,
                                 std::size_t minutes = kWindowMinutes);

// --- Pretraining ------------------------------------------------------------

struct PretrainParams {
  std::size_t batch = 16;
  std::size_t steps = 2000;
  std::size_t warmup = 100;
  double base_lr = 1e-3;
  double mask_ratio = 0.8;
  masking::Strategy strategy = masking::Strategy::Random;
  AugmentSpec augment{};
  optim::AdamWConfig adamw{};
  double clip = 1.0;
  std::size_t eval_every = 0;  // 0 disables held-out evaluation
  std::size_t eval_frames = 64;
};

struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct PretrainResult {
  std::vector<LossPoint> train_curve;
  std::vector<LossPoint> eval_curve;
  std::size_t steps = 0;
  double data_hours = 0.0;
  optim::OptimizerState optimizer;
};

/// Reproducible random-masking batch from prepared frames.
Batch make_batch(const std::vector<const frames::SensorFrame*>& frames, const masking::PatchGrid& grid,
                 masking::Strategy strategy, double ratio, const AugmentSpec& aug,
                 std::uint64_t seed);

/// Trains `model` in place. `train` and `eval` hold prepared (gap-filled,
/// normalized) frames. Deterministic for a fixed seed.
PretrainResult pretrain(MaeModel& model, const std::vector<frames::SensorFrame>& train,
                        const std::vector<frames::SensorFrame>& eval, const PretrainParams& hp,
                        std::uint64_t seed,
                        const std::function<void(const LossPoint&)>& on_step = {});

/// Mean masked loss over `frames` with deterministic plans derived from seed.
double masked_eval_loss(const MaeModel& model, const std::vector<frames::SensorFrame>& frames,
                        double mask_ratio, masking::Strategy strategy, std::uint64_t seed,
                        std::size_t batch = 16);

}  // namespace lsm::model
