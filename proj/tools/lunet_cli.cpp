#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "lunet/error.hpp"
#include "lunet/experiment.hpp"
#include "lunet/spec_io.hpp"

namespace ex = lunet::experiment;

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> profile;
  std::optional<std::string> name;
  std::optional<std::string> output_dir;
  std::vector<std::uint64_t> seeds;
  bool no_svg = false;

  std::optional<std::string> data_path;
  std::optional<int> dim;
  std::optional<std::size_t> side;
  std::optional<int> num_labels;
  std::optional<std::size_t> n_train;
  std::optional<std::size_t> n_test;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::string> mode;

  std::optional<std::string> family;
  std::optional<int> n_f;
  std::optional<int> levels;
  std::optional<int> convs_per_block;
  std::optional<double> scale_percent;
  std::optional<int> kernel;
  std::optional<bool> norm;

  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> epochs;
  std::optional<std::string> loss;

  std::optional<std::string> strategy;
  std::optional<std::string> scaling;
  std::optional<int> recovery_epochs;
  std::optional<double> base_p;
  std::optional<int> criterion_batches;
  std::optional<int> warmup_epochs;
  std::vector<double> snapshots;
  std::optional<double> stop_percent;
  std::optional<double> histogram_percent;
};

void add_experiment_options(CLI::App* app, Overrides& o, bool with_prune) {
  app->add_option("-c,--config", o.config, "Experiment config file")->check(CLI::ExistingFile);
  app->add_option("--profile", o.profile, "Named preset (harp200, harp50, synthetic-default, synthetic-50)");
  app->add_option("--name", o.name, "Experiment name used in summaries");
  app->add_option("-o,--output-dir", o.output_dir, "Output directory (LUNET_OUTPUT_DIR overrides)");
  app->add_option("--seeds", o.seeds, "Seeds, comma separated")->delimiter(',');
  app->add_flag("--no-svg", o.no_svg, "Skip SVG charts");

  app->add_option("--data", o.data_path, "Dataset directory written by gen-data");
  app->add_option("--dim", o.dim, "Spatial dimension of synthetic data (2 or 3)");
  app->add_option("--side", o.side, "Synthetic image side length");
  app->add_option("--labels", o.num_labels, "Foreground labels in synthetic data");
  app->add_option("--n-train", o.n_train, "Synthetic training samples");
  app->add_option("--n-test", o.n_test, "Synthetic test samples");
  app->add_option("--data-seed", o.data_seed, "Synthetic data seed");
  app->add_option("--mode", o.mode, "Synthetic mode (positional, multi_organ)");

  app->add_option("--family", o.family, "unet, lunet or scaled");
  app->add_option("--n-f", o.n_f, "Top-level channels per conv");
  app->add_option("--levels", o.levels, "Unet levels");
  app->add_option("--convs-per-block", o.convs_per_block, "Convolutions per block");
  app->add_option("--scale-percent", o.scale_percent, "Width scale for family scaled");
  app->add_option("--kernel", o.kernel, "Odd kernel size");
  app->add_option("--norm", o.norm, "Instance normalization (true/false)");

  app->add_option("--lr", o.lr, "ADAM learning rate");
  app->add_option("--batch-size", o.batch_size, "Minibatch size");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--loss", o.loss, "soft_dice or cross_entropy");

  if (!with_prune) return;
  app->add_option("--strategy", o.strategy, "stamp, stamp_layer_random or widest_block");
  app->add_option("--scaling", o.scaling, "Criterion scaling (per_element, per_layer)");
  app->add_option("--recovery-epochs", o.recovery_epochs, "Epochs between removals");
  app->add_option("--base-p", o.base_p, "Base targeted-dropout probability");
  app->add_option("--criterion-batches", o.criterion_batches, "Batches in the ranking slice");
  app->add_option("--warmup-epochs", o.warmup_epochs, "Dense epochs before pruning starts");
  app->add_option("--snapshots", o.snapshots, "Snapshot percents, comma separated")->delimiter(',');
  app->add_option("--stop-percent", o.stop_percent, "Stop once this share of channels remains");
  app->add_option("--histogram-percent", o.histogram_percent, "Share remaining at the criterion dump");
}

ex::ExperimentConfig resolve(const Overrides& o) {
  ex::ExperimentConfig c;
  if (o.config) {
    c = ex::load_config(*o.config);
    if (o.profile) throw lunet::ConfigError("--profile and --config are exclusive; set profile inside the file");
  } else if (o.profile) {
    c = ex::profile(*o.profile);
  } else {
    c = ex::profile("synthetic-default");
  }
  if (o.name) c.name = *o.name;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.no_svg) c.svg = false;
  if (o.data_path) c.data.path = *o.data_path;
  auto& s = c.data.synth;
  if (o.dim) s.dim = *o.dim;
  if (o.side) s.side = *o.side;
  if (o.num_labels) s.num_labels = *o.num_labels;
  if (o.n_train) s.n_train = *o.n_train;
  if (o.n_test) s.n_test = *o.n_test;
  if (o.data_seed) s.seed = *o.data_seed;
  if (o.mode) {
    if (*o.mode == "positional") s.mode = lunet::data::ContextMode::positional;
    else if (*o.mode == "multi_organ") s.mode = lunet::data::ContextMode::multi_organ;
    else throw lunet::ConfigError("unknown data mode '" + *o.mode + "'");
  }
  if (o.family) c.arch.family = lunet::parse_family(*o.family);
  if (o.n_f) c.arch.n_f = *o.n_f;
  if (o.levels) c.arch.levels = *o.levels;
  if (o.convs_per_block) c.arch.convs_per_block = *o.convs_per_block;
  if (o.scale_percent) c.arch.scale_percent = *o.scale_percent;
  if (o.kernel) c.arch.kernel = *o.kernel;
  if (o.norm) c.arch.norm = *o.norm;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.loss) {
    if (*o.loss == "soft_dice") c.train.loss = lunet::ops::LossKind::soft_dice;
    else if (*o.loss == "cross_entropy") c.train.loss = lunet::ops::LossKind::cross_entropy;
    else throw lunet::ConfigError("unknown loss '" + *o.loss + "'");
  }
  auto& p = c.prune;
  if (o.strategy) p.stamp.strategy = lunet::pruning::parse_strategy(*o.strategy);
  if (o.scaling) p.stamp.scaling = lunet::pruning::parse_criterion_scaling(*o.scaling);
  if (o.recovery_epochs) p.stamp.recovery_epochs = *o.recovery_epochs;
  if (o.base_p) p.stamp.base_p = *o.base_p;
  if (o.criterion_batches) p.stamp.criterion_batches = *o.criterion_batches;
  if (o.warmup_epochs) p.warmup_epochs = *o.warmup_epochs;
  if (!o.snapshots.empty()) p.snapshot_percents = o.snapshots;
  if (o.stop_percent) p.stop_percent = *o.stop_percent;
  if (o.histogram_percent) p.histogram_percent = *o.histogram_percent;
  ex::apply_environment(c);
  return c;
}

struct SpecOptions {
  std::optional<std::string> spec_file;
  std::string family = "unet";
  int n_f = 4;
  int levels = 5;
  int convs_per_block = 2;
  int dim = 3;
  int in_channels = 1;
  int outputs = 1;
  std::optional<double> scale_percent;
  int kernel = 3;
  bool norm = false;
};

void add_spec_options(CLI::App* app, SpecOptions& s) {
  app->add_option("--spec", s.spec_file, "Spec file (overrides the architecture flags)")->check(CLI::ExistingFile);
  app->add_option("--family", s.family, "unet, lunet or scaled")->capture_default_str();
  app->add_option("--n-f", s.n_f, "Top-level channels per conv")->capture_default_str();
  app->add_option("--levels", s.levels, "Unet levels")->capture_default_str();
  app->add_option("--convs-per-block", s.convs_per_block, "Convolutions per block")->capture_default_str();
  app->add_option("--dim", s.dim, "Spatial dimension")->capture_default_str();
  app->add_option("--in-channels", s.in_channels, "Input channels")->capture_default_str();
  app->add_option("--outputs", s.outputs, "Output channels of the final conv")->capture_default_str();
  app->add_option("--scale-percent", s.scale_percent, "Width scale for family scaled");
  app->add_option("--kernel", s.kernel, "Odd kernel size")->capture_default_str();
  app->add_flag("--norm", s.norm, "Count instance-norm parameters");
}

lunet::ArchSpec resolve_spec(const SpecOptions& s) {
  if (s.spec_file) return lunet::io::read_spec(std::filesystem::path(*s.spec_file));
  return lunet::make_spec(lunet::parse_family(s.family), s.n_f, s.levels, s.convs_per_block, s.dim, s.in_channels,
                          s.outputs, s.scale_percent, s.kernel, s.norm);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unet/LUnet training and gradual channel pruning"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, prune_o, reinit_o;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset to disk");
  add_experiment_options(gen, gen_o, false);
  gen->add_option("--out", gen_out, "Dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train fixed architectures over all seeds");
  add_experiment_options(train, train_o, false);

  auto* prune = app.add_subcommand("prune", "Gradual channel pruning over all seeds");
  add_experiment_options(prune, prune_o, true);

  std::string from;
  double percent = 100.0;
  auto* reinit = app.add_subcommand("reinit", "Retrain pruning snapshots from random initialization");
  add_experiment_options(reinit, reinit_o, false);
  reinit->add_option("--from", from, "Output directory of a prune run")->required()->check(CLI::ExistingDirectory);
  reinit->add_option("--percent", percent, "Snapshot percent (100 = original spec)")->capture_default_str();

  SpecOptions sched_s, count_s;
  std::optional<std::int64_t> removals;
  auto* schedule = app.add_subcommand("schedule", "Print the widest-block width schedule");
  add_spec_options(schedule, sched_s);
  schedule->add_option("--removals", removals, "Removals to simulate (default: until exhausted)");

  auto* count = app.add_subcommand("count", "Print N_p, N_ch and N_f of a spec");
  add_spec_options(count, count_s);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Collate summary.csv files into a table");
  report->add_option("dir", report_dir, "Directory to scan")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ex::cmd_gen_data(resolve(gen_o), gen_out);
    } else if (*train) {
      const auto cfg = resolve(train_o);
      const auto out = ex::cmd_train(cfg);
      std::cout << cfg.name << "  N_ch " << out.counts.n_channels << "  N_p " << out.counts.n_params << "  Dice "
                << ex::format_dice(out.dice.median, out.dice.mad) << "\n";
    } else if (*prune) {
      const auto cfg = resolve(prune_o);
      const auto out = ex::cmd_prune(cfg);
      std::cout << cfg.name << "  max test Dice " << ex::format_dice(out.dice.median, out.dice.mad, true) << "\n";
    } else if (*reinit) {
      const auto cfg = resolve(reinit_o);
      const auto out = ex::cmd_reinit(from, percent, cfg);
      std::cout << cfg.name << " reinit " << percent << "%  Dice " << ex::format_dice(out.dice.median, out.dice.mad)
                << "\n";
    } else if (*schedule) {
      const auto spec = resolve_spec(sched_s);
      const auto c = lunet::count(spec);
      std::cout << ex::cmd_schedule(spec, removals.value_or(c.n_channels - spec.prunable_convs()));
    } else if (*count) {
      std::cout << ex::cmd_count(resolve_spec(count_s));
    } else if (*report) {
      std::cout << ex::cmd_report(report_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
