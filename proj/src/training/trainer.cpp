#include <algorithm>
#include <cmath>
#include <numeric>

#include "lunet/error.hpp"
#include "lunet/training.hpp"

namespace lunet::training {

Trainer::Trainer(UnetModel& model, const data::Dataset& train, const TrainConfig& cfg)
    : model_(model), train_(train), cfg_(cfg), rng_(cfg.seed ^ 0x5eed7a11ULL), order_(train.size()) {
  cfg_.validate();
  if (train.size() == 0) throw ConfigError("training set is empty");
  if (model.spec().num_labels != train.model_outputs())
    throw ConfigError("model predicts " + std::to_string(model.spec().num_labels) + " channels but the dataset needs " +
                      std::to_string(train.model_outputs()));
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

double Trainer::run_epoch(const pruning::DropoutPlan* plan) {
  std::shuffle(order_.begin(), order_.end(), rng_);
  const auto params = model_.parameters();
  const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order_.size(); start += bs) {
    const std::size_t n = std::min(bs, order_.size() - start);
    const auto batch = data::make_batch(train_, std::span(order_).subspan(start, n));
    for (Parameter* p : params) p->value.zero_grad();
    Tape tape;
    std::vector<Tensor> scales;
    ForwardOptions opt;
    if (plan && !plan->probabilities.empty()) {
      scales = pruning::sample_channel_scales(*plan, model_, n, rng_);
      opt.channel_scales = &scales;
    }
    const Var input = tape.constant_ref(batch.images);
    const Var pred = model_.forward(tape, input, opt);
    const Var target = tape.constant(data::loss_target(batch, model_.spec().num_labels));
    const Var loss = ops::loss(tape, pred, target, cfg_.loss);
    const double value = tape.value(loss)[0];
    if (!std::isfinite(value)) throw NanError("training loss became non-finite");
    tape.backward(loss);
    adam_step(params, adam_, cfg_);
    total += value;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

DiceScores evaluate(UnetModel& model, const data::Dataset& ds, std::size_t batch_size) {
  DiceScores out;
  out.per_label.assign(static_cast<std::size_t>(ds.num_labels), 0.0);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    const auto batch = data::make_batch(ds, idx);
    const Tensor probs = model.predict(batch.images);
    if (!probs.all_finite()) throw NanError("non-finite prediction during evaluation");
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto pred = label_map(probs, b);
      const auto d = dice(pred, ds.samples[idx[b]].labels, ds.num_labels);
      out.mean += d.mean;
      for (std::size_t l = 0; l < d.per_label.size(); ++l) out.per_label[l] += d.per_label[l];
    }
  }
  const double n = static_cast<double>(ds.size());
  out.mean /= n;
  for (double& d : out.per_label) d /= n;
  return out;
}

RunResult train(UnetModel& model, const data::Dataset& train_set, const data::Dataset& test, const TrainConfig& cfg,
                const pruning::DropoutPlan* plan) {
  Trainer trainer(model, train_set, cfg);
  RunResult result;
  result.n_params = model.n_params();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      rec.train_loss = trainer.run_epoch(plan);
      const auto scores = evaluate(model, test, static_cast<std::size_t>(cfg.batch_size));
      rec.test_dice = scores.mean;
      rec.per_label_dice = scores.per_label;
    } catch (const NanError&) {
      result.diverged = true;
      break;
    }
    if (result.history.empty() || rec.test_dice > result.max_test_dice) {
      result.max_test_dice = rec.test_dice;
      result.n_params_at_max = model.n_params();
    }
    result.final_dice = rec.test_dice;
    result.history.push_back(std::move(rec));
  }
  return result;
}

}  // namespace lunet::training
