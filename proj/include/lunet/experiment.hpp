#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lunet/arch_spec.hpp"
#include "lunet/dataset.hpp"
#include "lunet/pruning.hpp"
#include "lunet/training.hpp"

namespace lunet::experiment {

namespace fs = std::filesystem;

struct DataSource {
  std::optional<fs::path> path;  // LUTN dataset directory; synthetic generation when unset
  data::SynthSpec synth;
};

struct ArchParams {
  Family family = Family::unet;
  int n_f = 4;
  int levels = 4;
  int convs_per_block = 2;
  std::optional<double> scale_percent;
  int kernel = 3;
  bool norm = false;
};

struct PruneParams {
  pruning::StampConfig stamp;
  int warmup_epochs = 0;
  std::vector<double> snapshot_percents{75.0, 50.0, 25.0};
  double stop_percent = 0.0;        // stop once this share of channels remains; 0 runs to exhaustion
  double histogram_percent = 95.0;  // criterion dump taken when this share remains
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataSource data;
  ArchParams arch;
  training::TrainConfig train;
  PruneParams prune;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  fs::path output_dir = "out";
  bool svg = true;

  // Throws ConfigError; checks referenced paths and seed distinctness.
  void validate() const;
};

// Named presets: harp200, harp50, synthetic-default, synthetic-50.
ExperimentConfig profile(const std::string& name);
std::vector<std::string> profile_names();

// INI sections [experiment], [data], [arch], [train], [prune]. An optional
// `profile` key under [experiment] seeds the defaults.
ExperimentConfig load_config(const fs::path& path);
std::string config_to_string(const ExperimentConfig& cfg);

// LUNET_OUTPUT_DIR, when set, replaces cfg.output_dir.
void apply_environment(ExperimentConfig& cfg);

ArchSpec arch_spec(const ExperimentConfig& cfg, int dim, int in_channels, int num_labels);
data::SplitDataset load_data(const ExperimentConfig& cfg);

struct TrainOutcome {
  ArchSpec spec;
  Counts counts;
  std::vector<training::RunResult> runs;
  training::Summary dice;  // over per-seed final Dice
};

struct PruneOutcome {
  ArchSpec spec;
  std::vector<pruning::PruneLog> logs;
  training::Summary dice;  // over per-seed max test Dice
};

// Output layout (under cfg.output_dir):
//   train:  spec.ini, run_seed<S>.csv, summary.csv
//   prune:  spec.ini, summary.csv, seed_<S>/{warmup.csv, prune_log.csv, dice_curve.csv, widths.csv,
//           snapshot_<P>.csv, snapshot_<P>.ini, criterion_hist.csv, *.svg}
//   reinit: spec_seed<S>.ini, run_seed<S>.csv, summary.csv
TrainOutcome cmd_train(const ExperimentConfig& cfg);
PruneOutcome cmd_prune(const ExperimentConfig& cfg);
TrainOutcome cmd_reinit(const fs::path& prune_dir, double percent, const ExperimentConfig& cfg);
void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out);

struct SummaryRow {
  std::string name;
  std::string kind;  // "fixed" or "pruning"
  std::string family;
  int n_f = 0;
  int n_f_initial = 0;
  std::int64_t n_ch = 0;
  std::int64_t n_p = 0;
  double dice_median = 0.0;
  double dice_mad = 0.0;
  int seeds = 0;
};

// "0.912 ± 0.010"; pruning rows add a leading "≤".
std::string format_dice(double median, double mad, bool upper_bound = false);

void write_summary(const fs::path& path, const SummaryRow& row);
SummaryRow read_summary(const fs::path& path);

// Collates every summary.csv below `dir` into a table ordered by N_p
// (descending). Pruning rows carry a "≤" prefix on Dice. Throws Error when
// no summaries are found.
std::string cmd_report(const fs::path& dir);

// Table of widest-block widths: "step,<layer names...>".
std::string cmd_schedule(const ArchSpec& spec, std::int64_t removals);
std::string cmd_count(const ArchSpec& spec);

}  // namespace lunet::experiment
