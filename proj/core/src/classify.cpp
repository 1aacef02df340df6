#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lsm/eval.hpp"

namespace lsm::eval {

namespace {

ag::Tensor xavier_param(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return ag::Tensor::parameter({in, out}, std::move(w));
}

ag::Tensor zero_param(std::size_t n) { return ag::Tensor::parameter({n}, std::vector<double>(n, 0.0)); }

std::vector<double> log_prior(const std::vector<int>& labels, std::size_t classes) {
  auto counts = class_counts(labels, classes);
  for (auto& c : counts) c = std::log(std::max(c, 1.0));
  return counts;
}

void check_labels(const std::vector<int>& labels, std::size_t classes) {
  if (labels.empty()) throw InvalidArgument("no training labels");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw InvalidArgument("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); })) {
    throw InvalidArgument("training labels contain a single class");
  }
}

/// Batches drawn from successive seeded permutations of [0, n).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    const std::size_t want = std::min(batch, n_);
    while (out.size() < want) {
      if (cursor_ >= order_.size()) {
        order_ = seeded_permutation(n_, derive_seed(seed_, epoch_++));
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0, epoch_ = 0;
};

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes) {
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r * classes < logits.size(); ++r) {
    const auto row = logits.subspan(r * classes, classes);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t k = 0; k < classes; ++k) s += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < classes; ++k) out[r * classes + k] = std::exp(row[k] - mx) / s;
  }
  return out;
}

}  // namespace

// --- Metrics ----------------------------------------------------------------

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("average_precision: length mismatch");
  const auto total_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(),
                                                                [](auto p) { return p != 0; }));
  if (total_pos == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive[order[rank]]) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
  }
  return ap / static_cast<double>(total_pos);
}

ClsReport cls_metrics(std::span<const double> scores, const std::vector<int>& labels, std::size_t classes) {
  if (classes == 0) throw InvalidArgument("cls_metrics: zero classes");
  if (scores.size() != labels.size() * classes) {
    throw InvalidArgument("cls_metrics: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(labels.size()) + " labels x " + std::to_string(classes) +
                          " classes");
  }
  if (labels.empty()) throw InvalidArgument("cls_metrics: no examples");
  ClsReport r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw InvalidArgument("cls_metrics: label out of range");
    }
    const auto row = scores.subspan(i * classes, classes);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    ++r.confusion[static_cast<std::size_t>(labels[i])][pred];
    if (pred == static_cast<std::size_t>(labels[i])) ++correct;
  }
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
  double ap_sum = 0.0;
  std::size_t ap_n = 0;
  std::vector<double> col(labels.size());
  std::vector<std::uint8_t> pos(labels.size());
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores[i * classes + k];
      pos[i] = static_cast<std::size_t>(labels[i]) == k ? 1 : 0;
    }
    const double ap = average_precision(col, pos);
    r.per_class_ap.push_back(ap);
    if (!std::isnan(ap)) {
      ap_sum += ap;
      ++ap_n;
    }
  }
  r.map = ap_n > 0 ? 100.0 * ap_sum / static_cast<double>(ap_n) : 0.0;
  return r;
}

std::vector<double> class_counts(const std::vector<int>& labels, std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw InvalidArgument("class_counts: label out of range");
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  return counts;
}

std::vector<std::size_t> few_shot_subset(const std::vector<int>& labels, std::size_t k, std::size_t classes,
                                         std::uint64_t seed) {
  if (k == 0) throw InvalidArgument("few_shot_subset: k must be > 0");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw InvalidArgument("few_shot_subset: label out of range");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& pool = by_class[c];
    if (pool.size() < k) {
      throw InsufficientClass("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                              " examples, fewer than k = " + std::to_string(k));
    }
    const auto perm = seeded_permutation(pool.size(), derive_seed(seed, c));
    for (std::size_t j = 0; j < k; ++j) out.push_back(pool[perm[j]]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- Probes -----------------------------------------------------------------

std::string_view probe_name(ProbeKind k) { return k == ProbeKind::Linear ? "linear" : "conv"; }

ProbeKind probe_from_name(std::string_view name) {
  if (name == "linear") return ProbeKind::Linear;
  if (name == "conv") return ProbeKind::Conv;
  throw InvalidArgument("unknown probe kind: " + std::string(name));
}

Probe::Probe(ProbeKind kind, std::size_t embed_dim, std::size_t grid_time, std::size_t grid_signal,
             std::size_t classes, std::uint64_t seed, std::size_t conv_channels)
    : kind_(kind), dim_(embed_dim), gt_(grid_time), gs_(grid_signal), classes_(classes), channels_(conv_channels) {
  if (classes < 2) throw InvalidArgument("probe needs at least two classes");
  if (embed_dim == 0) throw InvalidArgument("probe embedding dimension must be > 0");
  Rng rng(seed);
  if (kind == ProbeKind::Conv) {
    if (conv_channels == 0 || grid_time == 0 || grid_signal == 0) throw InvalidArgument("empty conv probe");
    c1_w_ = xavier_param(9 * dim_, channels_, rng);
    c1_b_ = zero_param(channels_);
    c2_w_ = xavier_param(9 * channels_, channels_, rng);
    c2_b_ = zero_param(channels_);
    params_.push_back({"probe.conv1_w", c1_w_, true});
    params_.push_back({"probe.conv1_b", c1_b_, false});
    params_.push_back({"probe.conv2_w", c2_w_, true});
    params_.push_back({"probe.conv2_b", c2_b_, false});
    w_ = xavier_param(channels_, classes_, rng);
  } else {
    w_ = xavier_param(dim_, classes_, rng);
  }
  b_ = zero_param(classes_);
  params_.push_back({"probe.w", w_, true});
  params_.push_back({"probe.b", b_, false});
}

std::size_t Probe::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

namespace {

/// Row indices of a 3x3 same-padded im2col over an [n, gt, gs] grid whose
/// rows are packed time-major; out-of-grid taps read row `zero_row`.
std::vector<std::size_t> im2col_rows(std::size_t n, std::size_t gt, std::size_t gs, std::size_t zero_row) {
  std::vector<std::size_t> rows;
  rows.reserve(n * gt * gs * 9);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < gt; ++t) {
      for (std::size_t s = 0; s < gs; ++s) {
        for (int dt = -1; dt <= 1; ++dt) {
          for (int ds = -1; ds <= 1; ++ds) {
            const auto tt = static_cast<std::ptrdiff_t>(t) + dt;
            const auto ss = static_cast<std::ptrdiff_t>(s) + ds;
            if (tt < 0 || ss < 0 || tt >= static_cast<std::ptrdiff_t>(gt) || ss >= static_cast<std::ptrdiff_t>(gs)) {
              rows.push_back(zero_row);
            } else {
              rows.push_back(b * gt * gs + static_cast<std::size_t>(tt) * gs + static_cast<std::size_t>(ss));
            }
          }
        }
      }
    }
  }
  return rows;
}

ag::Tensor conv3x3(const ag::Tensor& x, std::size_t n, std::size_t gt, std::size_t gs, std::size_t channels_in,
                   const ag::Tensor& w, const ag::Tensor& b) {
  const std::size_t cells = n * gt * gs;
  const auto padded = ag::concat({x, ag::Tensor::zeros({1, channels_in})});
  const auto cols = ag::reshape(ag::gather(padded, im2col_rows(n, gt, gs, cells)), {cells, 9 * channels_in});
  return ag::add(ag::matmul(cols, w), b);
}

}  // namespace

ag::Tensor Probe::logits(const ag::Tensor& input) const {
  if (kind_ == ProbeKind::Linear) {
    if (input.rank() != 2 || input.dim(1) != dim_) {
      throw InvalidArgument("linear probe expects [n, " + std::to_string(dim_) + "], got " +
                            ag::shape_str(input.shape()));
    }
    return ag::add(ag::matmul(input, w_), b_);
  }
  const std::size_t tokens = gt_ * gs_;
  if (input.rank() != 3 || input.dim(1) != tokens || input.dim(2) != dim_) {
    throw InvalidArgument("conv probe expects [n, " + std::to_string(tokens) + ", " + std::to_string(dim_) +
                          "], got " + ag::shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0);
  auto x = ag::reshape(input, {n * tokens, dim_});
  x = ag::gelu(conv3x3(x, n, gt_, gs_, dim_, c1_w_, c1_b_));
  x = ag::gelu(conv3x3(x, n, gt_, gs_, channels_, c2_w_, c2_b_));
  const auto pooled = ag::mean_tokens(ag::reshape(x, {n, tokens, channels_}));
  return ag::add(ag::matmul(pooled, w_), b_);
}

namespace {

ag::Tensor probe_input(const std::vector<std::vector<double>>& embeddings, const std::vector<std::size_t>& idx,
                       ProbeKind kind, const masking::PatchGrid& grid, std::size_t dim) {
  const std::size_t per = kind == ProbeKind::Linear ? dim : grid.num_patches() * dim;
  std::vector<double> flat;
  flat.reserve(idx.size() * per);
  for (auto i : idx) {
    if (embeddings[i].size() != per) {
      throw InvalidArgument("embedding " + std::to_string(i) + " has " + std::to_string(embeddings[i].size()) +
                            " values, expected " + std::to_string(per));
    }
    flat.insert(flat.end(), embeddings[i].begin(), embeddings[i].end());
  }
  if (kind == ProbeKind::Linear) return ag::Tensor::constant({idx.size(), dim}, std::move(flat));
  return ag::Tensor::constant({idx.size(), grid.num_patches(), dim}, std::move(flat));
}

}  // namespace

Probe train_probe(const std::vector<std::vector<double>>& embeddings, const std::vector<int>& labels,
                  ProbeKind kind, std::size_t classes, const masking::PatchGrid& grid, std::size_t embed_dim,
                  const TrainParams& hp, std::uint64_t seed) {
  if (embeddings.size() != labels.size()) throw InvalidArgument("train_probe: embeddings and labels differ in length");
  check_labels(labels, classes);
  Probe probe(kind, embed_dim, grid.n_time_patches, grid.n_signal_patches, classes, derive_seed(seed, 1));
  const auto prior = log_prior(labels, classes);
  optim::AdamW opt(probe.params(), hp.adamw);
  const optim::LrSchedule schedule{hp.warmup, hp.steps, hp.base_lr};
  BatchSampler sampler(labels.size(), derive_seed(seed, 2));
  for (std::size_t step = 0; step < hp.steps; ++step) {
    const auto idx = sampler.next(hp.batch);
    std::vector<int> y;
    for (auto i : idx) y.push_back(labels[i]);
    auto loss = ag::cross_entropy(probe.logits(probe_input(embeddings, idx, kind, grid, embed_dim)), y, prior);
    if (!std::isfinite(loss.item())) throw TrainingDiverged("non-finite probe loss", step);
    loss.backward();
    optim::clip_gradients(opt.params(), hp.clip);
    opt.step(optim::lr_at(step + 1, schedule));
    opt.zero_grad();
  }
  return probe;
}

std::vector<double> probe_scores(const Probe& probe, const std::vector<std::vector<double>>& embeddings,
                                 const masking::PatchGrid& grid, std::size_t embed_dim) {
  ag::NoGradGuard no_grad;
  std::vector<double> out;
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < embeddings.size(); start += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(embeddings.size(), start + chunk); ++i) idx.push_back(i);
    const auto z = probe.logits(probe_input(embeddings, idx, probe.kind(), grid, embed_dim));
    const auto p = softmax_rows(z.value(), probe.classes());
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// --- Encoder classifiers ----------------------------------------------------

std::vector<optim::NamedParam> Classifier::params() const {
  auto out = backbone->encoder_params();
  out.push_back({"head.w", head_w, true});
  out.push_back({"head.b", head_b, false});
  return out;
}

ag::Tensor Classifier::logits(const std::vector<double>& patches, std::size_t batch) const {
  const auto tokens = backbone->encode_all(patches, batch);
  return ag::add(ag::matmul(ag::mean_tokens(tokens), head_w), head_b);
}

Classifier make_classifier(std::shared_ptr<model::MaeModel> backbone, std::size_t classes, std::uint64_t seed) {
  if (!backbone) throw InvalidArgument("make_classifier: no backbone");
  if (classes < 2) throw InvalidArgument("make_classifier: need at least two classes");
  Rng rng(seed);
  Classifier c;
  c.head_w = xavier_param(backbone->config().enc_dim, classes, rng);
  c.head_b = zero_param(classes);
  c.classes = classes;
  c.backbone = std::move(backbone);
  return c;
}

void train_classifier(Classifier& clf, const std::vector<frames::SensorFrame>& frames,
                      const std::vector<int>& labels, const TrainParams& hp, std::uint64_t seed) {
  if (frames.size() != labels.size()) throw InvalidArgument("train_classifier: frames and labels differ in length");
  check_labels(labels, clf.classes);
  if (hp.steps == 0) return;
  const auto prior = log_prior(labels, clf.classes);
  const auto& grid = clf.backbone->grid();
  optim::AdamW opt(clf.params(), hp.adamw);
  const optim::LrSchedule schedule{hp.warmup, hp.steps, hp.base_lr};
  BatchSampler sampler(frames.size(), derive_seed(seed, 2));
  model::AugmentSpec aug;
  aug.noise_sigma = hp.noise_sigma;
  for (std::size_t step = 0; step < hp.steps; ++step) {
    const auto idx = sampler.next(hp.batch);
    std::vector<double> patches;
    std::vector<int> y;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& f = frames[idx[j]];
      const auto values = hp.noise_sigma > 0.0 ? model::augment(f.values, aug, derive_seed(seed, 0xA0000000ULL + step * 4096 + j))
                                               : f.values;
      const auto p = masking::patchify(values, grid);
      patches.insert(patches.end(), p.begin(), p.end());
      y.push_back(labels[idx[j]]);
    }
    auto loss = ag::cross_entropy(clf.logits(patches, idx.size()), y, prior);
    if (!std::isfinite(loss.item())) throw TrainingDiverged("non-finite classifier loss", step);
    loss.backward();
    optim::clip_gradients(opt.params(), hp.clip);
    opt.step(optim::lr_at(step + 1, schedule));
    opt.zero_grad();
  }
}

Classifier fine_tune(const model::MaeModel& pretrained, const std::vector<frames::SensorFrame>& frames,
                     const std::vector<int>& labels, std::size_t classes, const TrainParams& hp,
                     std::uint64_t seed) {
  auto backbone = std::make_shared<model::MaeModel>(pretrained.config(), 0);
  backbone->load_values(pretrained.values());
  auto clf = make_classifier(std::move(backbone), classes, derive_seed(seed, 1));
  train_classifier(clf, frames, labels, hp, seed);
  return clf;
}

Classifier supervised(const model::ModelConfig& cfg, const std::vector<frames::SensorFrame>& frames,
                      const std::vector<int>& labels, std::size_t classes, const TrainParams& hp,
                      std::uint64_t seed) {
  auto backbone = std::make_shared<model::MaeModel>(cfg, derive_seed(seed, 3));
  auto clf = make_classifier(std::move(backbone), classes, derive_seed(seed, 1));
  train_classifier(clf, frames, labels, hp, seed);
  return clf;
}

std::vector<double> classifier_scores(const Classifier& clf, const std::vector<frames::SensorFrame>& frames,
                                      std::size_t batch) {
  if (batch == 0) throw InvalidArgument("classifier_scores: batch must be > 0");
  ag::NoGradGuard no_grad;
  const auto& grid = clf.backbone->grid();
  std::vector<double> out;
  for (std::size_t start = 0; start < frames.size(); start += batch) {
    const std::size_t end = std::min(frames.size(), start + batch);
    std::vector<double> patches;
    for (std::size_t i = start; i < end; ++i) {
      const auto p = masking::patchify(frames[i].values, grid);
      patches.insert(patches.end(), p.begin(), p.end());
    }
    const auto z = clf.logits(patches, end - start);
    const auto p = softmax_rows(z.value(), clf.classes);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace lsm::eval
