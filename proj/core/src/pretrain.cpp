#include <cmath>

#include "lsm/model.hpp"

namespace lsm::model {

Batch make_batch(const std::vector<const frames::SensorFrame*>& frames, const masking::PatchGrid& grid,
                 masking::Strategy strategy, double ratio, const AugmentSpec& aug,
                 std::uint64_t seed) {
  Batch b;
  b.size = frames.size();
  const bool augmenting = aug.flip_p > 0.0 || aug.stretch_max > 1.0 || aug.noise_sigma > 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = *frames[i];
    const auto values = augmenting ? augment(f.values, aug, derive_seed(seed, 2 * i)) : f.values;
    const auto patches = masking::patchify(values, grid);
    const auto plan = masking::plan_mask(grid, strategy, ratio, derive_seed(seed, 2 * i + 1));
    b.input.insert(b.input.end(), patches.begin(), patches.end());
    b.masked.insert(b.masked.end(), plan.masked.begin(), plan.masked.end());
  }
  b.target = b.input;
  return b;
}

double masked_eval_loss(const MaeModel& model, const std::vector<frames::SensorFrame>& frames,
                        double mask_ratio, masking::Strategy strategy, std::uint64_t seed,
                        std::size_t batch) {
  if (frames.empty()) throw InvalidArgument("masked_eval_loss: no frames");
  ag::NoGradGuard no_grad;
  double weighted = 0.0;
  double count = 0.0;
  for (std::size_t start = 0; start < frames.size(); start += batch) {
    const std::size_t end = std::min(frames.size(), start + batch);
    std::vector<const frames::SensorFrame*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&frames[i]);
    const auto b = make_batch(ptrs, model.grid(), strategy, mask_ratio, {}, derive_seed(seed, start));
    const auto out = model.forward(b);
    weighted += out.loss.item() * static_cast<double>(end - start);
    count += static_cast<double>(end - start);
  }
  return weighted / count;
}

PretrainResult pretrain(MaeModel& model, const std::vector<frames::SensorFrame>& train,
                        const std::vector<frames::SensorFrame>& eval, const PretrainParams& hp,
                        std::uint64_t seed, const std::function<void(const LossPoint&)>& on_step) {
  if (train.empty()) throw InvalidArgument("pretrain: empty training slice");
  if (hp.batch == 0) throw InvalidArgument("pretrain: batch must be > 0");
  PretrainResult result;
  result.data_hours = 5.0 * static_cast<double>(train.size());
  optim::AdamW opt(model.params(), hp.adamw);
  const optim::LrSchedule schedule{hp.warmup, hp.steps, hp.base_lr};

  std::vector<frames::SensorFrame> eval_set(
      eval.begin(), eval.begin() + static_cast<std::ptrdiff_t>(std::min(eval.size(), hp.eval_frames)));

  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  for (std::size_t step = 0; step < hp.steps; ++step) {
    std::vector<const frames::SensorFrame*> ptrs;
    while (ptrs.size() < hp.batch) {
      if (cursor >= order.size()) {
        order = seeded_permutation(train.size(), derive_seed(seed, 0x5EED0000 + epoch++));
        cursor = 0;
      }
      ptrs.push_back(&train[order[cursor++]]);
    }
    const auto batch = make_batch(ptrs, model.grid(), hp.strategy, hp.mask_ratio, hp.augment,
                                  derive_seed(seed, step));
    const double lr = optim::lr_at(step + 1, schedule);
    auto out = model.forward(batch);
    const double loss = out.loss.item();
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss", step);
    out.loss.backward();
    optim::clip_gradients(opt.params(), hp.clip);
    opt.step(lr);
    opt.zero_grad();

    const LossPoint point{step, loss, lr};
    result.train_curve.push_back(point);
    if (on_step) on_step(point);
    if (hp.eval_every > 0 && !eval_set.empty() && ((step + 1) % hp.eval_every == 0 || step + 1 == hp.steps)) {
      result.eval_curve.push_back(
          {step + 1, masked_eval_loss(model, eval_set, hp.mask_ratio, hp.strategy, seed ^ 0xE7A1ULL), lr});
    }
  }
  result.steps = hp.steps;
  result.optimizer = opt.state();
  return result;
}

}  // namespace lsm::model
