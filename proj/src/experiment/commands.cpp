#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lunet/csv.hpp"
#include "lunet/error.hpp"
#include "lunet/experiment.hpp"
#include "lunet/spec_io.hpp"
#include "lunet/svg.hpp"

namespace lunet::experiment {

namespace {

constexpr std::uint64_t kReinitSeedOffset = 0x7f4a7c15ULL;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

std::string percent_tag(double p) {
  if (p == std::floor(p)) return std::to_string(static_cast<long long>(p));
  return fmt_double(p);
}

std::int64_t median_int(std::vector<std::int64_t> v) {
  std::vector<double> d(v.begin(), v.end());
  return static_cast<std::int64_t>(std::llround(training::aggregate(d).median));
}

training::TrainConfig seeded(training::TrainConfig t, std::uint64_t seed) {
  t.seed = seed;
  return t;
}

void write_svg(const fs::path& path, const svg::LineChart& chart) { write_text(path, svg::render(chart)); }

// Runs one training job per seed on `specs[i]` and writes run CSVs.
TrainOutcome train_runs(const ExperimentConfig& cfg, const data::SplitDataset& ds, const std::vector<ArchSpec>& specs,
                        const std::vector<std::uint64_t>& model_seeds, const std::string& name) {
  TrainOutcome out;
  out.spec = specs.front();
  out.counts = count(out.spec);
  std::vector<double> finals;
  std::vector<std::int64_t> n_p, n_ch;
  std::vector<double> n_f;
  svg::LineChart chart{name + ": test Dice", "epoch", "Dice", {}};
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    UnetModel model(specs[i], model_seeds[i]);
    auto result = training::train(model, ds.train, ds.test, seeded(cfg.train, model_seeds[i]));
    auto csv = open_out(cfg.output_dir / ("run_seed" + std::to_string(cfg.seeds[i]) + ".csv"));
    training::write_run_csv(csv, result);
    if (cfg.svg) {
      svg::Series s{"seed " + std::to_string(cfg.seeds[i]), {}, {}};
      for (const auto& r : result.history) {
        s.x.push_back(r.epoch);
        s.y.push_back(r.test_dice);
      }
      chart.series.push_back(std::move(s));
    }
    std::cerr << name << " seed " << cfg.seeds[i] << ": final Dice " << fmt_double(result.final_dice)
              << (result.diverged ? " (diverged)" : "") << "\n";
    finals.push_back(result.final_dice);
    const Counts c = count(specs[i]);
    n_p.push_back(c.n_params);
    n_ch.push_back(c.n_channels);
    n_f.push_back(top_width(specs[i]));
    out.runs.push_back(std::move(result));
  }
  if (cfg.svg) write_svg(cfg.output_dir / "dice.svg", chart);
  out.dice = training::aggregate(finals);

  SummaryRow row;
  row.name = name;
  row.kind = "fixed";
  row.family = to_string(cfg.arch.family);
  row.n_f = static_cast<int>(std::llround(training::aggregate(n_f).median));
  row.n_f_initial = row.n_f;
  row.n_ch = median_int(n_ch);
  row.n_p = median_int(n_p);
  row.dice_median = out.dice.median;
  row.dice_mad = out.dice.mad;
  row.seeds = static_cast<int>(cfg.seeds.size());
  write_summary(cfg.output_dir / "summary.csv", row);
  return out;
}

void write_criterion_csv(const fs::path& path, const ArchSpec& spec, const pruning::CriterionReport& report,
                         const pruning::PruneEvent& event) {
  auto out = open_out(path);
  out << "# step " << event.step << ", pct_channels_remaining " << fmt_double(event.pct_channels_remaining) << "\n";
  out << "block,part,level,conv,channel,value\n";
  for (const auto& e : report.entries) {
    const int b = e.id.block;
    const char* part = spec.is_encoder(b) ? "encoder" : spec.is_bottleneck(b) ? "bottleneck" : "decoder";
    out << b << "," << part << "," << spec.level_of(b) << "," << e.id.conv << "," << e.id.channel << ","
        << fmt_double(e.value) << "\n";
  }
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ds = load_data(cfg);
  const ArchSpec spec = arch_spec(cfg, ds.train.dim, 1, ds.train.model_outputs());
  fs::create_directories(cfg.output_dir);
  io::write_spec(cfg.output_dir / "spec.ini", spec);
  std::vector<ArchSpec> specs(cfg.seeds.size(), spec);
  return train_runs(cfg, ds, specs, cfg.seeds, cfg.name);
}

PruneOutcome cmd_prune(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ds = load_data(cfg);
  PruneOutcome out;
  out.spec = arch_spec(cfg, ds.train.dim, 1, ds.train.model_outputs());
  fs::create_directories(cfg.output_dir);
  io::write_spec(cfg.output_dir / "spec.ini", out.spec);

  std::vector<double> max_dice;
  std::vector<std::int64_t> n_p, n_ch;
  std::vector<double> n_f;
  svg::LineChart dice_chart{cfg.name + ": test Dice during pruning", "% channels remaining", "Dice", {}, true};

  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path dir = cfg.output_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    UnetModel model(out.spec, seed);
    const auto train_cfg = seeded(cfg.train, seed);
    if (cfg.prune.warmup_epochs > 0) {
      auto warm_cfg = train_cfg;
      warm_cfg.epochs = cfg.prune.warmup_epochs;
      const auto warm = training::train(model, ds.train, ds.test, warm_cfg);
      auto csv = open_out(dir / "warmup.csv");
      training::write_run_csv(csv, warm);
    }

    pruning::StampConfig stamp = cfg.prune.stamp;
    stamp.seed = seed;
    bool hist_written = false;
    pruning::StampCallbacks cb;
    cb.on_step = [&](const pruning::PruneEvent& e, const pruning::CriterionReport& report, const UnetModel&) {
      if (!hist_written && e.pct_channels_remaining <= cfg.prune.histogram_percent) {
        write_criterion_csv(dir / "criterion_hist.csv", out.spec, report, e);
        hist_written = true;
      }
    };
    if (cfg.prune.stop_percent > 0.0)
      cb.should_stop = [&](const pruning::PruneLog& log) {
        return log.events.back().pct_channels_remaining <= cfg.prune.stop_percent;
      };
    auto log = pruning::stamp_loop(model, ds.train, ds.test, train_cfg, stamp, cb);
    std::cerr << cfg.name << " seed " << seed << ": " << log.events.size() << " removals, "
              << pruning::to_string(log.termination) << "\n";

    {
      auto csv = open_out(dir / "prune_log.csv");
      pruning::write_log_csv(csv, log);
    }
    {
      auto csv = open_out(dir / "dice_curve.csv");
      csv << "step,channels_remaining,pct_channels_remaining,n_params,dice\n";
      for (const auto& e : log.events)
        csv << e.step << "," << e.channels_remaining << "," << fmt_double(e.pct_channels_remaining) << ","
            << e.n_params << "," << (e.dice ? fmt_double(*e.dice) : "") << "\n";
    }
    {
      auto csv = open_out(dir / "widths.csv");
      pruning::write_widths_csv(csv, log, out.spec);
    }
    {
      auto csv = open_out(dir / "snapshots.csv");
      csv << "percent,step,channels_remaining,n_params,dice\n";
      for (double p : cfg.prune.snapshot_percents) {
        const auto widths = log.widths_at_percent(p);
        if (!widths) continue;
        ArchSpec snap = out.spec;
        std::size_t k = 0;
        for (auto& block : snap.widths)
          for (int& w : block) w = (*widths)[k++];
        const std::string tag = percent_tag(p);
        auto scsv = open_out(dir / ("snapshot_" + tag + ".csv"));
        pruning::write_snapshot_csv(scsv, snap, *widths);
        io::write_spec(dir / ("snapshot_" + tag + ".ini"), snap);
        const auto idx = log.event_at_percent(p);
        const Counts c = count(snap);
        csv << tag << "," << (idx ? log.events[*idx].step : 0) << "," << c.n_channels << "," << c.n_params << ","
            << (idx && log.events[*idx].dice ? fmt_double(*log.events[*idx].dice) : "") << "\n";
      }
    }
    write_text(dir / "termination.txt", pruning::to_string(log.termination) + "\n" + log.note + "\n");

    if (cfg.svg) {
      svg::Series s{"seed " + std::to_string(seed), {}, {}};
      for (const auto& e : log.events)
        if (e.dice) {
          s.x.push_back(e.pct_channels_remaining);
          s.y.push_back(*e.dice);
        }
      dice_chart.series.push_back(s);
      svg::LineChart widths_chart{cfg.name + " seed " + std::to_string(seed) + ": channels per conv", "step",
                                  "channels", {}};
      for (int li = 0; li < out.spec.prunable_convs(); ++li) {
        svg::Series w{pruning::layer_name(out.spec, li), {0.0}, {static_cast<double>(log.initial_widths[li])}};
        for (const auto& e : log.events) {
          w.x.push_back(e.step);
          w.y.push_back(e.widths[static_cast<std::size_t>(li)]);
        }
        widths_chart.series.push_back(std::move(w));
      }
      write_svg(dir / "widths.svg", widths_chart);
    }

    // Max test Dice over the run and the model size at that point.
    const pruning::PruneEvent* best = nullptr;
    for (const auto& e : log.events)
      if (e.dice && (!best || *e.dice > *best->dice)) best = &e;
    if (best) {
      max_dice.push_back(*best->dice);
      n_p.push_back(best->n_params);
      n_ch.push_back(best->channels_remaining);
      n_f.push_back(best->widths.front());
    }
    out.logs.push_back(std::move(log));
  }
  if (cfg.svg) write_svg(cfg.output_dir / "dice_curve.svg", dice_chart);
  if (max_dice.empty()) throw Error("no pruning run produced a finite test Dice");
  out.dice = training::aggregate(max_dice);

  SummaryRow row;
  row.name = cfg.name;
  row.kind = "pruning";
  row.family = pruning::to_string(cfg.prune.stamp.strategy);
  row.n_f = static_cast<int>(std::llround(training::aggregate(n_f).median));
  row.n_f_initial = top_width(out.spec);
  row.n_ch = median_int(n_ch);
  row.n_p = median_int(n_p);
  row.dice_median = out.dice.median;
  row.dice_mad = out.dice.mad;
  row.seeds = static_cast<int>(cfg.seeds.size());
  write_summary(cfg.output_dir / "summary.csv", row);
  return out;
}

TrainOutcome cmd_reinit(const fs::path& prune_dir, double percent, const ExperimentConfig& cfg) {
  cfg.validate();
  if (!(percent > 0.0 && percent <= 100.0)) throw ConfigError("reinit percent must lie in (0, 100]");
  std::vector<ArchSpec> specs;
  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path path = percent == 100.0
                              ? prune_dir / "spec.ini"
                              : prune_dir / ("seed_" + std::to_string(seed)) / ("snapshot_" + percent_tag(percent) + ".ini");
    if (!fs::exists(path)) throw Error("missing snapshot " + path.string());
    specs.push_back(io::read_spec(path));
  }
  const auto ds = load_data(cfg);
  for (const auto& s : specs)
    if (s.num_labels != ds.train.model_outputs() || s.dim != ds.train.dim)
      throw ConfigError("snapshot spec does not match the dataset");
  fs::create_directories(cfg.output_dir);
  std::vector<std::uint64_t> fresh;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    io::write_spec(cfg.output_dir / ("spec_seed" + std::to_string(cfg.seeds[i]) + ".ini"), specs[i]);
    fresh.push_back(cfg.seeds[i] + kReinitSeedOffset);
  }
  return train_runs(cfg, ds, specs, fresh, cfg.name + "-reinit" + percent_tag(percent));
}

void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.data.synth.validate();
  data::save(data::generate(cfg.data.synth), out);
}

std::string cmd_schedule(const ArchSpec& spec, std::int64_t removals) {
  spec.validate();
  const auto rows = pruning::widest_schedule(spec, removals);
  std::ostringstream os;
  os << "step";
  for (int li = 0; li < spec.prunable_convs(); ++li) os << "," << pruning::layer_name(spec, li);
  os << "\n";
  for (std::size_t s = 0; s < rows.size(); ++s) {
    os << s;
    for (int w : rows[s]) os << "," << w;
    os << "\n";
  }
  return os.str();
}

std::string cmd_count(const ArchSpec& spec) {
  const Counts c = count(spec);
  std::ostringstream os;
  os << "N_p " << c.n_params << "\nN_ch " << c.n_channels << "\nN_f " << top_width(spec) << "\n";
  return os.str();
}

}  // namespace lunet::experiment
