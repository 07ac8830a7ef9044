#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lunet/error.hpp"
#include "lunet/experiment.hpp"

namespace lunet::experiment {

namespace pt = boost::property_tree;

namespace {

template <typename T>
std::vector<T> split_list(const std::string& s, const std::string& key) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw ConfigError("config key '" + key + "' has a malformed entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

// Present keys must convert; absent keys keep the current value.
template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& out) {
  if (tree.get_child_optional(key)) out = tree.get<T>(key);
}

data::ContextMode parse_mode(const std::string& s) {
  if (s == "positional") return data::ContextMode::positional;
  if (s == "multi_organ") return data::ContextMode::multi_organ;
  throw ConfigError("unknown data mode '" + s + "' (expected positional or multi_organ)");
}

std::string mode_name(data::ContextMode m) {
  return m == data::ContextMode::positional ? "positional" : "multi_organ";
}

ops::LossKind parse_loss(const std::string& s) {
  if (s == "soft_dice") return ops::LossKind::soft_dice;
  if (s == "cross_entropy") return ops::LossKind::cross_entropy;
  throw ConfigError("unknown loss '" + s + "' (expected soft_dice or cross_entropy)");
}

std::string loss_name(ops::LossKind k) { return k == ops::LossKind::soft_dice ? "soft_dice" : "cross_entropy"; }

ExperimentConfig harp(std::size_t n_train, std::size_t n_test, const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.data.synth.dim = 3;
  c.data.synth.side = 64;
  c.data.synth.n_train = n_train;
  c.data.synth.n_test = n_test;
  c.arch.levels = 5;
  c.arch.convs_per_block = 2;
  c.arch.n_f = 4;
  c.train.batch_size = 16;
  c.train.learning_rate = 0.01;
  c.train.epochs = 100;
  c.prune.stamp.recovery_epochs = 5;
  return c;
}

ExperimentConfig synthetic(std::size_t n_train, std::size_t n_test, const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.data.synth.dim = 2;
  c.data.synth.side = 64;
  c.data.synth.n_train = n_train;
  c.data.synth.n_test = n_test;
  c.arch.levels = 4;
  c.arch.convs_per_block = 2;
  c.arch.n_f = 4;
  c.train.batch_size = 16;
  c.train.learning_rate = 0.01;
  c.train.epochs = 30;
  c.prune.stamp.recovery_epochs = 1;
  return c;
}

}  // namespace

std::vector<std::string> profile_names() { return {"harp200", "harp50", "synthetic-default", "synthetic-50"}; }

ExperimentConfig profile(const std::string& name) {
  if (name == "harp200") return harp(200, 70, name);
  if (name == "harp50") return harp(50, 220, name);
  if (name == "synthetic-default") return synthetic(200, 70, name);
  if (name == "synthetic-50") return synthetic(50, 220, name);
  throw ConfigError("unknown profile '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment name is empty");
  if (data.path) {
    if (!fs::is_directory(*data.path)) throw ConfigError("dataset path does not exist: " + data.path->string());
  } else {
    data.synth.validate();
  }
  if (arch.n_f < 1) throw ConfigError("n_f must be positive");
  if (arch.levels < 1) throw ConfigError("levels must be positive");
  if (arch.convs_per_block < 1) throw ConfigError("convs_per_block must be positive");
  if (arch.scale_percent && arch.family != Family::scaled)
    throw ConfigError("scale_percent requires family = scaled");
  if (arch.family == Family::scaled && !arch.scale_percent) throw ConfigError("family scaled needs scale_percent");
  train.validate();
  if (prune.stamp.recovery_epochs < 1) throw ConfigError("recovery_epochs must be at least 1");
  if (prune.stamp.base_p < 0.0 || prune.stamp.base_p >= 1.0) throw ConfigError("base_p must lie in [0, 1)");
  if (prune.stamp.criterion_batches < 1) throw ConfigError("criterion_batches must be positive");
  if (prune.warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
  for (double p : prune.snapshot_percents)
    if (!(p > 0.0 && p <= 100.0)) throw ConfigError("snapshot percents must lie in (0, 100]");
  if (prune.stop_percent < 0.0 || prune.stop_percent >= 100.0) throw ConfigError("stop_percent must lie in [0, 100)");
  if (prune.histogram_percent <= 0.0 || prune.histogram_percent > 100.0)
    throw ConfigError("histogram_percent must lie in (0, 100]");
  if (seeds.empty()) throw ConfigError("seeds list is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds must be distinct");
  if (output_dir.empty()) throw ConfigError("output directory is empty");
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"experiment", {"profile", "name", "output_dir", "seeds", "svg"}},
      {"data", {"path", "dim", "side", "num_labels", "n_train", "n_test", "seed", "noise_sigma", "mode"}},
      {"arch", {"family", "n_f", "levels", "convs_per_block", "scale_percent", "kernel", "norm"}},
      {"train", {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "epochs", "deterministic", "loss"}},
      {"prune", {"strategy", "scaling", "recovery_epochs", "base_p", "criterion_batches", "warmup_epochs", "snapshots",
                 "stop_percent", "histogram_percent"}}};
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw ConfigError(path.string() + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError(path.string() + ": unknown key " + section + "." + key);
  }

  try {
    ExperimentConfig c;
    if (auto p = tree.get_optional<std::string>("experiment.profile")) c = profile(*p);
    read(tree, "experiment.name", c.name);
    if (auto o = tree.get_optional<std::string>("experiment.output_dir")) c.output_dir = *o;
    if (auto s = tree.get_optional<std::string>("experiment.seeds"))
      c.seeds = split_list<std::uint64_t>(*s, "experiment.seeds");
    read(tree, "experiment.svg", c.svg);

    if (auto p = tree.get_optional<std::string>("data.path")) {
      fs::path dp(*p);
      c.data.path = dp.is_relative() ? path.parent_path() / dp : dp;
    }
    auto& s = c.data.synth;
    read(tree, "data.dim", s.dim);
    read(tree, "data.side", s.side);
    read(tree, "data.num_labels", s.num_labels);
    read(tree, "data.n_train", s.n_train);
    read(tree, "data.n_test", s.n_test);
    read(tree, "data.seed", s.seed);
    read(tree, "data.noise_sigma", s.noise_sigma);
    if (auto m = tree.get_optional<std::string>("data.mode")) s.mode = parse_mode(*m);

    auto& a = c.arch;
    if (auto f = tree.get_optional<std::string>("arch.family")) a.family = parse_family(*f);
    read(tree, "arch.n_f", a.n_f);
    read(tree, "arch.levels", a.levels);
    read(tree, "arch.convs_per_block", a.convs_per_block);
    if (tree.get_child_optional("arch.scale_percent")) a.scale_percent = tree.get<double>("arch.scale_percent");
    read(tree, "arch.kernel", a.kernel);
    read(tree, "arch.norm", a.norm);

    auto& t = c.train;
    read(tree, "train.learning_rate", t.learning_rate);
    read(tree, "train.beta1", t.beta1);
    read(tree, "train.beta2", t.beta2);
    read(tree, "train.epsilon", t.epsilon);
    read(tree, "train.batch_size", t.batch_size);
    read(tree, "train.epochs", t.epochs);
    read(tree, "train.deterministic", t.deterministic);
    if (auto l = tree.get_optional<std::string>("train.loss")) t.loss = parse_loss(*l);

    auto& p = c.prune;
    if (auto st = tree.get_optional<std::string>("prune.strategy")) p.stamp.strategy = pruning::parse_strategy(*st);
    if (auto sc = tree.get_optional<std::string>("prune.scaling"))
      p.stamp.scaling = pruning::parse_criterion_scaling(*sc);
    read(tree, "prune.recovery_epochs", p.stamp.recovery_epochs);
    read(tree, "prune.base_p", p.stamp.base_p);
    read(tree, "prune.criterion_batches", p.stamp.criterion_batches);
    read(tree, "prune.warmup_epochs", p.warmup_epochs);
    if (auto sn = tree.get_optional<std::string>("prune.snapshots"))
      p.snapshot_percents = split_list<double>(*sn, "prune.snapshots");
    read(tree, "prune.stop_percent", p.stop_percent);
    read(tree, "prune.histogram_percent", p.histogram_percent);
    return c;
  } catch (const pt::ptree_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_string(const ExperimentConfig& c) {
  pt::ptree tree;
  tree.put("experiment.name", c.name);
  tree.put("experiment.output_dir", c.output_dir.string());
  tree.put("experiment.seeds", join(c.seeds));
  tree.put("experiment.svg", c.svg);
  if (c.data.path) tree.put("data.path", c.data.path->string());
  const auto& s = c.data.synth;
  tree.put("data.dim", s.dim);
  tree.put("data.side", s.side);
  tree.put("data.num_labels", s.num_labels);
  tree.put("data.n_train", s.n_train);
  tree.put("data.n_test", s.n_test);
  tree.put("data.seed", s.seed);
  tree.put("data.noise_sigma", s.noise_sigma);
  tree.put("data.mode", mode_name(s.mode));
  tree.put("arch.family", to_string(c.arch.family));
  tree.put("arch.n_f", c.arch.n_f);
  tree.put("arch.levels", c.arch.levels);
  tree.put("arch.convs_per_block", c.arch.convs_per_block);
  if (c.arch.scale_percent) tree.put("arch.scale_percent", *c.arch.scale_percent);
  tree.put("arch.kernel", c.arch.kernel);
  tree.put("arch.norm", c.arch.norm);
  tree.put("train.learning_rate", c.train.learning_rate);
  tree.put("train.beta1", c.train.beta1);
  tree.put("train.beta2", c.train.beta2);
  tree.put("train.epsilon", c.train.epsilon);
  tree.put("train.batch_size", c.train.batch_size);
  tree.put("train.epochs", c.train.epochs);
  tree.put("train.deterministic", c.train.deterministic);
  tree.put("train.loss", loss_name(c.train.loss));
  tree.put("prune.strategy", pruning::to_string(c.prune.stamp.strategy));
  tree.put("prune.scaling", pruning::to_string(c.prune.stamp.scaling));
  tree.put("prune.recovery_epochs", c.prune.stamp.recovery_epochs);
  tree.put("prune.base_p", c.prune.stamp.base_p);
  tree.put("prune.criterion_batches", c.prune.stamp.criterion_batches);
  tree.put("prune.warmup_epochs", c.prune.warmup_epochs);
  tree.put("prune.snapshots", join(c.prune.snapshot_percents));
  tree.put("prune.stop_percent", c.prune.stop_percent);
  tree.put("prune.histogram_percent", c.prune.histogram_percent);
  std::ostringstream os;
  pt::write_ini(os, tree);
  return os.str();
}

void apply_environment(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("LUNET_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
}

ArchSpec arch_spec(const ExperimentConfig& cfg, int dim, int in_channels, int num_labels) {
  const auto& a = cfg.arch;
  return make_spec(a.family, a.n_f, a.levels, a.convs_per_block, dim, in_channels, num_labels, a.scale_percent,
                   a.kernel, a.norm);
}

data::SplitDataset load_data(const ExperimentConfig& cfg) {
  if (cfg.data.path) return data::load(*cfg.data.path);
  return data::generate(cfg.data.synth);
}

}  // namespace lunet::experiment
