#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/baselines.hpp"
#include "lsm/frames.hpp"
#include "lsm/masking.hpp"
#include "lsm/model.hpp"

namespace lsm::eval {

// --- Generative tasks -------------------------------------------------------

enum class GenTask { RandomImputation, TemporalInterpolation, SensorImputation, TemporalExtrapolation };

std::string_view task_name(GenTask t);
GenTask task_from_name(std::string_view name);

struct GenTaskSpec {
  GenTask task = GenTask::TemporalInterpolation;
  std::size_t duration = 60;      // minutes; unused for random imputation
  double ratio = 0.8;             // random imputation patch ratio
  double sensor_fraction = 0.67;  // share of signals hidden in sensor imputation
  std::uint64_t seed = 0;
};

/// round-half-up(fraction * 26).
std::size_t sensor_task_signal_count(double fraction);

/// Cell mask (26 x 300, signal-major) for one frame. `grid` sets the patch
/// layout of the random task.
std::vector<std::uint8_t> make_task_mask(const GenTaskSpec& spec, const masking::PatchGrid& grid,
                                         std::uint64_t seed);

/// Returns a completed 26 x 300 matrix; cells outside the mask are ignored.
using Imputer = std::function<std::vector<double>(const frames::SensorFrame& prepared,
                                                  const std::vector<std::uint8_t>& cell_mask)>;

Imputer baseline_imputer(baselines::ImputeMethod method);
/// Masked cells are read from the decoder output; observed cells are kept.
Imputer model_imputer(std::shared_ptr<const model::MaeModel> model);

struct GenResult {
  std::string task;
  std::size_t duration = 0;
  std::string method;
  double mae = 0.0;
  double mse = 0.0;
  std::size_t n = 0;  // scored cells
  std::array<double, kNumSignals> signal_mae{};
  std::array<double, kNumSignals> signal_mse{};
  std::array<std::size_t, kNumSignals> signal_n{};
};

/// Scores masked cells that were observed at the source (originally missing
/// cells carry gap-fill values, not ground truth). Frame i of `test` gets the
/// mask seeded by derive_seed(spec.seed, i), so every imputer sees the same masks.
std::vector<GenResult> eval_generative(const Imputer& imputer, const std::string& method,
                                       const std::vector<frames::SensorFrame>& test,
                                       const std::vector<GenTaskSpec>& specs,
                                       const masking::PatchGrid& grid);

/// MAE and MSE over paired cells; throws on length mismatch or empty input.
std::pair<double, double> error_metrics(std::span<const double> truth, std::span<const double> pred);

// --- Discriminative tasks ---------------------------------------------------

struct ClsReport {
  double accuracy = 0.0;  // percent
  double map = 0.0;       // percent, mean over classes with positives
  std::vector<double> per_class_ap;  // fraction; NaN for classes without positives
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

/// Average precision of one class from a descending-score sweep without
/// precision interpolation. Ties keep input order.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positive);

/// `scores` is [n x classes] row-major.
ClsReport cls_metrics(std::span<const double> scores, const std::vector<int>& labels,
                      std::size_t classes);

class InsufficientClass : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Exactly k examples of every class in `classes`; indices into `labels`.
std::vector<std::size_t> few_shot_subset(const std::vector<int>& labels, std::size_t k,
                                         std::size_t classes, std::uint64_t seed);

std::vector<double> class_counts(const std::vector<int>& labels, std::size_t classes);

struct TrainParams {
  std::size_t steps = 300;
  std::size_t batch = 16;
  std::size_t warmup = 15;
  double base_lr = 1e-3;
  double noise_sigma = 0.0;
  optim::AdamWConfig adamw{};
  double clip = 1.0;
};

enum class ProbeKind { Linear, Conv };

std::string_view probe_name(ProbeKind k);
ProbeKind probe_from_name(std::string_view name);

/// Frozen-encoder classifier head. Linear: affine map on the pooled embedding.
/// Conv: two 3x3 convolutions over the patch-embedding grid, mean pool, affine.
class Probe {
 public:
  Probe(ProbeKind kind, std::size_t embed_dim, std::size_t grid_time, std::size_t grid_signal,
        std::size_t classes, std::uint64_t seed, std::size_t conv_channels = 16);

  ProbeKind kind() const { return kind_; }
  std::size_t classes() const { return classes_; }
  const std::vector<optim::NamedParam>& params() const { return params_; }
  std::size_t num_params() const;

  /// Logits [n, classes] from embeddings. Linear probes take pooled [n, D];
  /// conv probes take patch embeddings [n, grid_time * grid_signal, D].
  ag::Tensor logits(const ag::Tensor& input) const;

 private:
  ProbeKind kind_;
  std::size_t dim_, gt_, gs_, classes_, channels_;
  ag::Tensor c1_w_, c1_b_, c2_w_, c2_b_, w_, b_;
  std::vector<optim::NamedParam> params_;
};

/// Trains a probe on precomputed embeddings with the balanced softmax loss.
/// `embeddings` holds one vector per example (pooled or patch-level).
Probe train_probe(const std::vector<std::vector<double>>& embeddings, const std::vector<int>& labels,
                  ProbeKind kind, std::size_t classes, const masking::PatchGrid& grid,
                  std::size_t embed_dim, const TrainParams& hp, std::uint64_t seed);

std::vector<double> probe_scores(const Probe& probe, const std::vector<std::vector<double>>& embeddings,
                                 const masking::PatchGrid& grid, std::size_t embed_dim);

/// Encoder plus an affine head on the mean-pooled patch embeddings.
struct Classifier {
  std::shared_ptr<model::MaeModel> backbone;
  ag::Tensor head_w, head_b;
  std::size_t classes = 0;

  std::vector<optim::NamedParam> params() const;
  ag::Tensor logits(const std::vector<double>& patches, std::size_t batch) const;
};

Classifier make_classifier(std::shared_ptr<model::MaeModel> backbone, std::size_t classes,
                           std::uint64_t seed);

/// Trains encoder and head jointly (balanced softmax, warmup + cosine, optional
/// Gaussian noise augmentation). `frames` are prepared frames.
void train_classifier(Classifier& clf, const std::vector<frames::SensorFrame>& frames,
                      const std::vector<int>& labels, const TrainParams& hp, std::uint64_t seed);

/// Starts from a copy of `pretrained`.
Classifier fine_tune(const model::MaeModel& pretrained, const std::vector<frames::SensorFrame>& frames,
                     const std::vector<int>& labels, std::size_t classes, const TrainParams& hp,
                     std::uint64_t seed);

/// Same architecture from random initialization.
Classifier supervised(const model::ModelConfig& cfg, const std::vector<frames::SensorFrame>& frames,
                      const std::vector<int>& labels, std::size_t classes, const TrainParams& hp,
                      std::uint64_t seed);

std::vector<double> classifier_scores(const Classifier& clf,
                                      const std::vector<frames::SensorFrame>& frames,
                                      std::size_t batch = 16);

}  // namespace lsm::eval
