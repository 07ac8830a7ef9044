#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "lunet/dataset.hpp"
#include "lunet/model.hpp"
#include "lunet/ops.hpp"
#include "lunet/pruning.hpp"

namespace lunet::training {

struct TrainConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 10;
  ops::LossKind loss = ops::LossKind::soft_dice;
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
};

struct AdamState {
  std::int64_t step = 0;
};

// Bias-corrected ADAM on each parameter's value using value.grad().
void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& cfg);

struct DiceScores {
  std::vector<double> per_label;  // foreground labels 1..L
  double mean = 0.0;
};

// 2|P & T| / (|P| + |T|) per foreground label; 1 when both are empty.
DiceScores dice(std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> target, int num_labels);

// Label map of one sample of a probability tensor: 0.5 threshold for a single
// channel, channel argmax otherwise.
std::vector<std::uint8_t> label_map(const Tensor& probabilities, std::size_t sample);

// Mean over samples of the per-sample mean foreground Dice.
DiceScores evaluate(UnetModel& model, const data::Dataset& ds, std::size_t batch_size = 8);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_dice = 0.0;
  std::vector<double> per_label_dice;
};

struct RunResult {
  std::vector<EpochRecord> history;
  double max_test_dice = 0.0;
  double final_dice = 0.0;
  std::int64_t n_params = 0;
  std::int64_t n_params_at_max = 0;
  bool diverged = false;
};

// Minibatch ADAM over one dataset, carrying optimizer and shuffling state
// across epochs.
class Trainer {
 public:
  Trainer(UnetModel& model, const data::Dataset& train, const TrainConfig& cfg);

  // One pass over the training data; returns the mean batch loss. Throws
  // NanError when the loss or predictions become non-finite.
  double run_epoch(const pruning::DropoutPlan* plan = nullptr);

  UnetModel& model() { return model_; }

 private:
  UnetModel& model_;
  const data::Dataset& train_;
  TrainConfig cfg_;
  AdamState adam_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
};

// Trains for cfg.epochs, evaluating test Dice after every epoch.
RunResult train(UnetModel& model, const data::Dataset& train, const data::Dataset& test, const TrainConfig& cfg,
                const pruning::DropoutPlan* plan = nullptr);

struct Summary {
  double median = 0.0;
  double mad = 0.0;
};

// Median and median absolute deviation. Throws Error on empty input.
Summary aggregate(std::span<const double> values);

// epoch,loss,dice[,dice_1..dice_L]
void write_run_csv(std::ostream& out, const RunResult& result);

}  // namespace lunet::training
