#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lunet/arch_spec.hpp"
#include "lunet/model.hpp"

namespace lunet::data {
struct Dataset;
}
namespace lunet::training {
struct TrainConfig;
}

namespace lunet::pruning {

// ---- criterion ----

struct CriterionEntry {
  ChannelId id;
  double value = 0.0;
};

// One entry per prunable channel, ordered by ChannelId.
struct CriterionReport {
  std::vector<CriterionEntry> entries;
  int batch_id = 0;
};

enum class CriterionScaling {
  // ||a_c||_2 / sqrt(#elements of a_c)
  per_element,
  // per_element, then each layer's vector divided by its own L2 norm
  per_layer,
};

std::string to_string(CriterionScaling s);
CriterionScaling parse_criterion_scaling(const std::string& s);

// Post-activation channel magnitudes over `batches` (each [B, Cin, S...]).
// Throws NanError on non-finite activations.
CriterionReport compute_criterion(UnetModel& model, std::span<const Tensor> batches,
                                  CriterionScaling scaling = CriterionScaling::per_element, int batch_id = 0);

// Drops `id` from the report and renumbers later channels of the same conv.
void erase_from_report(CriterionReport& report, ChannelId id);

// ---- surgery ----

// Deletes one output channel and the matching input slice of every consumer.
// Returns the number of parameters removed. Throws LastChannelError when the
// conv has a single channel.
std::int64_t remove_channel(UnetModel& model, ChannelId id);

// ---- targeted dropout ----

inline constexpr double kMaxDropout = 0.5;

struct DropoutPlan {
  std::map<ChannelId, double> probabilities;

  double probability(ChannelId id) const;
};

// Bottom quartile of the ranking (ceil(N/4) channels, ties by ChannelId) gets
// 3 * base_p, the rest base_p; capped at kMaxDropout.
DropoutPlan update_dropout(const CriterionReport& report, double base_p);

// Per prunable layer a [batch, Cout] tensor of keep-masks rescaled by 1/(1-p).
std::vector<Tensor> sample_channel_scales(const DropoutPlan& plan, const UnetModel& model, std::size_t batch,
                                          std::mt19937_64& rng);

// ---- victim selection ----

enum class Strategy { stamp, stamp_layer_random, widest_block };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

// Widest prunable layer; ties go to the deepest level, then encoder before
// decoder, then the lower conv index.
int widest_layer(const ArchSpec& spec);

// Throws ExhaustedError when every conv is down to one channel.
ChannelId select_victim(Strategy strategy, const CriterionReport* report, const UnetModel& model,
                        std::mt19937_64& rng);

// Row s holds every prunable conv's width (layer order) after s removals;
// row 0 is the starting spec. Data independent.
std::vector<std::vector<int>> widest_schedule(const ArchSpec& spec, std::int64_t total_removals);

// ---- log ----

struct PruneEvent {
  int step = 0;
  ChannelId removed;
  Strategy strategy = Strategy::stamp;
  std::int64_t channels_remaining = 0;
  double pct_channels_remaining = 0.0;
  std::vector<int> widths;  // per prunable conv after the removal
  std::int64_t n_params = 0;
  std::optional<double> dice;
  double train_loss = 0.0;
};

enum class Termination { exhausted, stopped, diverged };

struct PruneLog {
  std::int64_t initial_channels = 0;
  std::int64_t initial_params = 0;
  std::vector<int> initial_widths;
  std::vector<PruneEvent> events;
  Termination termination = Termination::exhausted;
  std::string note;

  std::int64_t channels_after(int step) const;
  // Throws Error if the event breaks the one-channel-per-step invariant.
  void append(PruneEvent e);
  // Widths when floor(percent / 100 * initial_channels) channels remain, or
  // nullopt if the run never got there.
  std::optional<std::vector<int>> widths_at_percent(double percent) const;
  std::optional<std::size_t> event_at_percent(double percent) const;
  std::optional<double> max_dice() const;
};

std::string to_string(Termination t);

// Name of a prunable conv in layer order, e.g. enc0.1, bottleneck.0, dec2.1.
std::string layer_name(const ArchSpec& spec, int layer);

// step,block,conv,channel,strategy,pct_channels_remaining,n_params,dice
void write_log_csv(std::ostream& out, const PruneLog& log);
// step,pct_channels_remaining,L0,L1,... one column per prunable conv (row 0 = initial)
void write_widths_csv(std::ostream& out, const PruneLog& log, const ArchSpec& spec);
// block,level,part,conv,width at one snapshot
void write_snapshot_csv(std::ostream& out, const ArchSpec& spec, const std::vector<int>& widths);

// ---- gradual pruning loop ----

struct StampConfig {
  int recovery_epochs = 1;
  double base_p = 0.05;
  Strategy strategy = Strategy::stamp;
  CriterionScaling scaling = CriterionScaling::per_element;
  int criterion_batches = 4;
  std::uint64_t seed = 0;
};

struct StampCallbacks {
  // Polled after every removal; returning true ends the loop.
  std::function<bool(const PruneLog&)> should_stop;
  // Called after every removal with the report that chose the victim.
  std::function<void(const PruneEvent&, const CriterionReport&, const UnetModel&)> on_step;
};

// Alternates recovery training, ranking, removal and dropout updates until
// every conv has one channel or should_stop fires. Test Dice is recorded
// after each removal. Non-finite training ends the run with Termination::diverged.
PruneLog stamp_loop(UnetModel& model, const data::Dataset& train, const data::Dataset& test,
                    const training::TrainConfig& train_cfg, const StampConfig& cfg,
                    const StampCallbacks& callbacks = {});

}  // namespace lunet::pruning
