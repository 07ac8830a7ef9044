#include <algorithm>

#include "lunet/error.hpp"
#include "lunet/pruning.hpp"
#include "lunet/training.hpp"

namespace lunet::pruning {

namespace {

std::vector<int> flat_widths(const UnetModel& model) {
  std::vector<int> out;
  for (int li = 0; li < model.layer_count(); ++li) out.push_back(static_cast<int>(model.layer(li).out_channels()));
  return out;
}

bool exhausted(const UnetModel& model) {
  for (int li = 0; li < model.layer_count(); ++li)
    if (model.layer(li).out_channels() > 1) return false;
  return true;
}

// Fixed slice of the training data used for every ranking.
std::vector<Tensor> criterion_batches(const data::Dataset& train, int batches, int batch_size) {
  std::vector<Tensor> out;
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t total = std::min(train.size(), static_cast<std::size_t>(batches) * bs);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < total; start += bs) {
    idx.clear();
    for (std::size_t i = start; i < std::min(total, start + bs); ++i) idx.push_back(i);
    out.push_back(data::make_batch(train, idx).images);
  }
  return out;
}

}  // namespace

PruneLog stamp_loop(UnetModel& model, const data::Dataset& train, const data::Dataset& test,
                    const training::TrainConfig& train_cfg, const StampConfig& cfg, const StampCallbacks& callbacks) {
  if (cfg.recovery_epochs < 0) throw ConfigError("recovery_epochs must be >= 0");
  if (cfg.criterion_batches < 1) throw ConfigError("criterion_batches must be >= 1");
  PruneLog log;
  log.initial_channels = count(model.spec()).n_channels;
  log.initial_params = model.n_params();
  log.initial_widths = flat_widths(model);
  if (exhausted(model)) {
    log.termination = Termination::exhausted;
    return log;
  }

  training::Trainer trainer(model, train, train_cfg);
  const auto ranking_data = criterion_batches(train, cfg.criterion_batches, train_cfg.batch_size);
  std::mt19937_64 rng(cfg.seed ^ 0x9a11e7ULL);
  int ranking = 0;
  DropoutPlan plan;
  try {
    plan = update_dropout(compute_criterion(model, ranking_data, cfg.scaling, ranking++), cfg.base_p);
  } catch (const NanError& err) {
    log.termination = Termination::diverged;
    log.note = err.what();
    return log;
  }

  for (int step = 1;; ++step) {
    double loss = 0.0;
    try {
      for (int e = 0; e < cfg.recovery_epochs; ++e) loss = trainer.run_epoch(&plan);
    } catch (const NanError& err) {
      log.termination = Termination::diverged;
      log.note = err.what();
      break;
    }
    CriterionReport report;
    try {
      report = compute_criterion(model, ranking_data, cfg.scaling, ranking++);
    } catch (const NanError& err) {
      log.termination = Termination::diverged;
      log.note = err.what();
      break;
    }
    const ChannelId victim = select_victim(cfg.strategy, &report, model, rng);
    remove_channel(model, victim);
    CriterionReport remaining = report;
    erase_from_report(remaining, victim);
    plan = update_dropout(remaining, cfg.base_p);

    PruneEvent event;
    event.step = step;
    event.removed = victim;
    event.strategy = cfg.strategy;
    event.channels_remaining = log.channels_after(step - 1) - 1;
    event.pct_channels_remaining =
        100.0 * static_cast<double>(event.channels_remaining) / static_cast<double>(log.initial_channels);
    event.widths = flat_widths(model);
    event.n_params = model.n_params();
    event.train_loss = loss;
    try {
      event.dice = training::evaluate(model, test, static_cast<std::size_t>(train_cfg.batch_size)).mean;
    } catch (const NanError&) {
      event.dice.reset();
    }
    log.append(event);
    if (callbacks.on_step) callbacks.on_step(log.events.back(), report, model);
    if (exhausted(model)) {
      log.termination = Termination::exhausted;
      break;
    }
    if (callbacks.should_stop && callbacks.should_stop(log)) {
      log.termination = Termination::stopped;
      break;
    }
  }
  return log;
}

}  // namespace lunet::pruning
