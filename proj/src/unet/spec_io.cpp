#include "lunet/spec_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "lunet/error.hpp"
#include "lunet/tensor_io.hpp"

namespace lunet::io {

namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
    } catch (const std::exception&) {
      throw FormatError("spec key '" + key + "' has a non-integer entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

void write_spec(std::ostream& out, const ArchSpec& spec) {
  pt::ptree tree;
  tree.put("arch.levels", spec.levels);
  tree.put("arch.convs_per_block", spec.convs_per_block);
  tree.put("arch.dim", spec.dim);
  tree.put("arch.in_channels", spec.in_channels);
  tree.put("arch.num_labels", spec.num_labels);
  tree.put("arch.kernel", spec.kernel);
  tree.put("arch.norm", spec.norm_enabled ? "true" : "false");
  for (std::size_t b = 0; b < spec.widths.size(); ++b)
    tree.put("widths.block" + std::to_string(b), join(spec.widths[b]));
  pt::write_ini(out, tree);
}

void write_spec(const std::filesystem::path& path, const ArchSpec& spec) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_spec(out, spec);
}

std::string spec_to_string(const ArchSpec& spec) {
  std::ostringstream os;
  write_spec(os, spec);
  return os.str();
}

ArchSpec read_spec(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
    ArchSpec spec;
    spec.levels = tree.get<int>("arch.levels");
    spec.convs_per_block = tree.get<int>("arch.convs_per_block");
    spec.dim = tree.get<int>("arch.dim");
    spec.in_channels = tree.get<int>("arch.in_channels");
    spec.num_labels = tree.get<int>("arch.num_labels");
    spec.kernel = tree.get<int>("arch.kernel", 3);
    spec.norm_enabled = tree.get<bool>("arch.norm", false);
    for (int b = 0; b < spec.block_count(); ++b) {
      const std::string key = "widths.block" + std::to_string(b);
      spec.widths.push_back(split_ints(tree.get<std::string>(key), key));
    }
    spec.validate();
    return spec;
  } catch (const pt::ptree_error& e) {
    throw FormatError(std::string("malformed spec file: ") + e.what());
  }
}

ArchSpec read_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open spec file " + path.string());
  return read_spec(in);
}

void save_checkpoint(UnetModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_spec(dir / "spec.ini", model.spec());
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    write_tensor(dir / ("param_" + std::to_string(i) + ".lutn"), params[i]->value);
}

UnetModel load_checkpoint(const std::filesystem::path& dir) {
  UnetModel model(read_spec(dir / "spec.ini"), 0);
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto path = dir / ("param_" + std::to_string(i) + ".lutn");
    Tensor t = read_tensor(path);
    if (t.shape() != params[i]->value.shape())
      throw FormatError(path.string() + ": shape " + shape_string(t.shape()) + " does not match spec shape " +
                        shape_string(params[i]->value.shape()));
    *params[i] = Parameter(std::move(t));
  }
  return model;
}

}  // namespace lunet::io
