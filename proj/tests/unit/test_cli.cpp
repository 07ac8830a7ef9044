#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lunet/error.hpp"
#include "lunet/experiment.hpp"
#include "lunet/spec_io.hpp"

using namespace lunet;
using namespace lunet::experiment;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

ExperimentConfig small(const fs::path& out) {
  ExperimentConfig c = profile("synthetic-default");
  c.name = "small";
  c.data.synth.side = 16;
  c.data.synth.n_train = 6;
  c.data.synth.n_test = 3;
  c.arch.levels = 2;
  c.arch.n_f = 2;
  c.train.epochs = 1;
  c.train.batch_size = 3;
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("profiles map to the documented settings") {
  const auto h = profile("harp200");
  CHECK(h.data.synth.dim == 3);
  CHECK(h.data.synth.side == 64);
  CHECK(h.data.synth.n_train == 200);
  CHECK(h.data.synth.n_test == 70);
  CHECK(h.train.batch_size == 16);
  CHECK(h.prune.stamp.recovery_epochs == 5);
  CHECK(h.arch.levels == 5);
  CHECK(h.arch.convs_per_block == 2);
  CHECK(h.arch.n_f == 4);
  CHECK(h.train.learning_rate == 0.01);
  CHECK(h.prune.stamp.base_p == 0.05);
  const auto l = profile("harp50");
  CHECK(l.data.synth.n_train == 50);
  CHECK(l.data.synth.n_test == 220);
  const auto s = profile("synthetic-default");
  CHECK(s.data.synth.dim == 2);
  CHECK(s.data.synth.side == 64);
  CHECK(s.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK_THROWS_AS(profile("nope"), ConfigError);
  for (const auto& n : profile_names()) CHECK_NOTHROW(profile(n).validate());
}

TEST_CASE("config file parsing and round trip") {
  const auto dir = fresh_dir("lunet_cfg");
  fs::create_directories(dir);
  write_file(dir / "a.ini",
             "[experiment]\nprofile=harp50\nname=lowdata\nseeds=4,5\n"
             "[arch]\nfamily=lunet\nn_f=8\n[train]\nepochs=7\nloss=cross_entropy\n"
             "[prune]\nstrategy=widest_block\nsnapshots=80,40\n");
  const auto c = load_config(dir / "a.ini");
  CHECK(c.name == "lowdata");
  CHECK(c.data.synth.n_test == 220);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.arch.family == Family::lunet);
  CHECK(c.arch.n_f == 8);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.loss == ops::LossKind::cross_entropy);
  CHECK(c.prune.stamp.strategy == pruning::Strategy::widest_block);
  CHECK(c.prune.snapshot_percents == std::vector<double>{80, 40});

  write_file(dir / "b.ini", config_to_string(c));
  const auto c2 = load_config(dir / "b.ini");
  CHECK(config_to_string(c2) == config_to_string(c));

  write_file(dir / "bad.ini", "[arch]\nn_f=four\n");
  CHECK_THROWS_AS(load_config(dir / "bad.ini"), ConfigError);
  write_file(dir / "bad2.ini", "[prune]\nstrategy=magic\n");
  CHECK_THROWS_AS(load_config(dir / "bad2.ini"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "absent.ini"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config invariants") {
  auto c = small("x");
  c.seeds = {1, 1, 2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small("x");
  c.data.path = "/definitely/not/here";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small("x");
  c.arch.scale_percent = 50;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("output directory override from the environment") {
  auto c = small("x");
  ::setenv("LUNET_OUTPUT_DIR", "/tmp/elsewhere", 1);
  apply_environment(c);
  ::unsetenv("LUNET_OUTPUT_DIR");
  CHECK(c.output_dir == "/tmp/elsewhere");
}

TEST_CASE("missing dataset path fails without outputs") {
  const auto out = fresh_dir("lunet_cli_missing");
  auto c = small(out);
  c.data.path = out / "no_such_dataset";
  CHECK_THROWS_AS(cmd_train(c), ConfigError);
  CHECK(!fs::exists(out));
}

TEST_CASE("three seeds give three run files and one summary") {
  const auto out = fresh_dir("lunet_cli_train");
  auto c = small(out);
  c.arch.family = Family::lunet;
  const auto r = cmd_train(c);
  CHECK(r.runs.size() == 3);
  for (int s : {1, 2, 3}) CHECK(fs::exists(out / ("run_seed" + std::to_string(s) + ".csv")));
  const auto row = read_summary(out / "summary.csv");
  CHECK(row.kind == "fixed");
  CHECK(row.n_f == 2);
  CHECK(row.n_ch == count(r.spec).n_channels);
  CHECK(row.n_p == count(r.spec).n_params);
  CHECK(row.dice_median == r.dice.median);
  CHECK(row.dice_mad == r.dice.mad);
  CHECK(row.seeds == 3);
  fs::remove_all(out);
}

TEST_CASE("dataset written by gen-data trains the same as in-memory data") {
  const auto root = fresh_dir("lunet_cli_gendata");
  auto c = small(root / "mem");
  c.seeds = {1};
  cmd_gen_data(c, root / "ds");
  const auto mem = cmd_train(c);
  c.data.path = root / "ds";
  c.output_dir = root / "disk";
  const auto disk = cmd_train(c);
  CHECK(slurp(root / "mem" / "run_seed1.csv") == slurp(root / "disk" / "run_seed1.csv"));
  fs::remove_all(root);
}

TEST_CASE("prune outputs, snapshots and reinit") {
  const auto root = fresh_dir("lunet_cli_prune");
  auto c = small(root / "stamp");
  c.prune.warmup_epochs = 1;
  c.prune.histogram_percent = 90;
  const auto p = cmd_prune(c);
  const auto n_ch = count(p.spec).n_channels;
  for (const char* f : {"prune_log.csv", "dice_curve.csv", "widths.csv", "snapshots.csv", "criterion_hist.csv",
                        "warmup.csv", "widths.svg"})
    CHECK(fs::exists(root / "stamp" / "seed_1" / f));
  CHECK(fs::exists(root / "stamp" / "dice_curve.svg"));

  const auto snap = csv_rows(root / "stamp" / "seed_2" / "snapshot_50.csv");
  int total = 0;
  for (std::size_t i = 1; i < snap.size(); ++i) total += std::stoi(snap[i].back());
  CHECK(total == n_ch / 2);

  const auto hist = csv_rows(root / "stamp" / "seed_1" / "criterion_hist.csv");
  CHECK(hist.front() == std::vector<std::string>{"block", "part", "level", "conv", "channel", "value"});

  const auto row = read_summary(root / "stamp" / "summary.csv");
  CHECK(row.kind == "pruning");
  CHECK(row.dice_median == p.dice.median);

  auto rc = c;
  rc.output_dir = root / "reinit50";
  const auto r = cmd_reinit(root / "stamp", 50, rc);
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    const auto seed = c.seeds[i];
    const ArchSpec snap_spec = io::read_spec(root / "stamp" / ("seed_" + std::to_string(seed)) / "snapshot_50.ini");
    UnetModel m(snap_spec, 0);
    CHECK(r.runs[i].n_params == m.n_params());
    const auto idx = p.logs[i].event_at_percent(50);
    REQUIRE(idx);
    CHECK(p.logs[i].events[*idx].n_params == m.n_params());
  }
  CHECK_THROWS(cmd_reinit(root / "stamp", 10, rc));

  rc.output_dir = root / "reinit100";
  const auto full = cmd_reinit(root / "stamp", 100, rc);
  CHECK(full.spec == p.spec);
  CHECK(full.counts.n_params == count(p.spec).n_params);

  const std::string table = cmd_report(root);
  std::istringstream ts(table);
  std::string header, l1, l2, l3;
  std::getline(ts, header);
  std::getline(ts, l1);
  std::getline(ts, l2);
  std::getline(ts, l3);
  CHECK(l1.find("small-reinit100") == 0);
  CHECK(l3.find("small-reinit50") == 0);
  CHECK(l2.find("≤") != std::string::npos);
  CHECK(l1.find("≤") == std::string::npos);
  CHECK(l1.find(format_dice(full.dice.median, full.dice.mad)) != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("widest-block trajectories do not depend on the seed") {
  const auto root = fresh_dir("lunet_cli_widest");
  auto c = small(root);
  c.prune.stamp.strategy = pruning::Strategy::widest_block;
  cmd_prune(c);
  const auto w1 = csv_rows(root / "seed_1" / "widths.csv");
  for (const char* s : {"seed_2", "seed_3"}) CHECK(csv_rows(root / s / "widths.csv") == w1);
  fs::remove_all(root);
}

TEST_CASE("stamp and random-in-layer share a schema but pick differently") {
  const auto root = fresh_dir("lunet_cli_schema");
  auto c = small(root / "a");
  c.seeds = {1};
  cmd_prune(c);
  c.prune.stamp.strategy = pruning::Strategy::stamp_layer_random;
  c.output_dir = root / "b";
  cmd_prune(c);
  const auto a = csv_rows(root / "a" / "seed_1" / "prune_log.csv");
  const auto b = csv_rows(root / "b" / "seed_1" / "prune_log.csv");
  CHECK(a.front() == b.front());
  CHECK(a.size() == b.size());
  bool differ = false;
  for (std::size_t i = 1; i < a.size(); ++i)
    differ |= !std::equal(a[i].begin() + 1, a[i].begin() + 4, b[i].begin() + 1);
  CHECK(differ);
  fs::remove_all(root);
}

TEST_CASE("report ordering, markers and errors") {
  const auto root = fresh_dir("lunet_cli_report");
  fs::create_directories(root / "u");
  fs::create_directories(root / "l");
  fs::create_directories(root / "s");
  write_summary(root / "u" / "summary.csv", {"unet", "fixed", "unet", 4, 4, 176, 30601, 0.9, 0.01, 3});
  write_summary(root / "l" / "summary.csv", {"lunet", "fixed", "lunet", 4, 4, 56, 1000, 0.91, 0.02, 3});
  write_summary(root / "s" / "summary.csv", {"stamp", "pruning", "stamp", 2, 4, 90, 5000, 0.93, 0.005, 3});
  const std::string t = cmd_report(root);
  const auto pu = t.find("unet "), ps = t.find("stamp"), pl = t.find("lunet");
  CHECK(pu < ps);
  CHECK(ps < pl);
  CHECK(t.find("≤0.930 ± 0.005") != std::string::npos);
  CHECK(t.find("0.910 ± 0.020") != std::string::npos);
  CHECK(t.find("≤0.910") == std::string::npos);
  CHECK(t.find("2 (4)") != std::string::npos);
  CHECK(cmd_report(root) == t);

  const auto empty = fresh_dir("lunet_cli_report_empty");
  fs::create_directories(empty);
  CHECK_THROWS(cmd_report(empty));
  fs::remove_all(root);
  fs::remove_all(empty);
}

TEST_CASE("schedule and count output") {
  const auto s = make_spec(Family::unet, 2, 2, 1, 2, 1, 1);
  CHECK(cmd_schedule(s, 2) == "step,enc0.0,bottleneck.0,dec0.0\n0,2,4,2\n1,2,3,2\n2,2,2,2\n");
  CHECK(cmd_count(s).find("N_p " + std::to_string(count(s).n_params)) == 0);
}

#ifdef LUNET_CLI_PATH
TEST_CASE("command line exit codes") {
  const auto root = fresh_dir("lunet_cli_exe");
  const std::string exe = LUNET_CLI_PATH;
  CHECK(std::system((exe + " count --family lunet > /dev/null").c_str()) == 0);
  CHECK(std::system((exe + " train --data " + (root / "nothing").string() + " -o " + (root / "out").string() +
                     " 2> /dev/null")
                        .c_str()) != 0);
  CHECK(!fs::exists(root / "out"));
  CHECK(std::system((exe + " report " + root.string() + " 2> /dev/null").c_str()) != 0);
  CHECK(std::system((exe + " bogus-verb 2> /dev/null > /dev/null").c_str()) != 0);
}
#endif

}  // TEST_SUITE
