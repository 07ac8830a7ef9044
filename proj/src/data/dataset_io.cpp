#include <fstream>
#include <iomanip>
#include <sstream>

#include "lunet/dataset.hpp"
#include "lunet/error.hpp"
#include "lunet/tensor_io.hpp"

namespace lunet::data {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader = "lunet-dataset 1";

std::string sample_name(const std::string& split, std::size_t i) {
  std::ostringstream os;
  os << split << "_" << std::setw(5) << std::setfill('0') << i << ".lutn";
  return os.str();
}

Tensor labels_tensor(const Dataset& ds, const Sample& s) {
  std::vector<double> v(s.labels.begin(), s.labels.end());
  return Tensor(ds.spatial_shape(), std::move(v));
}

}  // namespace

void save(const SplitDataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw FormatError("cannot write manifest in " + dir.string());
  manifest << kManifestHeader << "\n";
  manifest << "dim " << ds.train.dim << "\n";
  manifest << "side " << ds.train.side << "\n";
  manifest << "num_labels " << ds.train.num_labels << "\n";
  for (const auto& [split, part] : {std::pair<std::string, const Dataset*>{"train", &ds.train}, {"test", &ds.test}}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      const std::string name = sample_name(split, i);
      io::write_tensor(dir / "images" / name, part->samples[i].image, io::DType::f64);
      io::write_tensor(dir / "labels" / name, labels_tensor(*part, part->samples[i]), io::DType::u8);
      manifest << "sample " << split << " images/" << name << " labels/" << name << "\n";
    }
  }
}

SplitDataset load(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw FormatError("dataset manifest not found: " + manifest_path.string());
  std::string line;
  if (!std::getline(manifest, line) || line != kManifestHeader)
    throw FormatError(manifest_path.string() + ": unrecognized manifest header");
  SplitDataset out;
  int dim = 0, num_labels = 0;
  std::size_t side = 0;
  std::size_t lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "dim") {
      is >> dim;
    } else if (key == "side") {
      is >> side;
    } else if (key == "num_labels") {
      is >> num_labels;
    } else if (key == "sample") {
      std::string split, image, labels;
      if (!(is >> split >> image >> labels) || (split != "train" && split != "test"))
        throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": malformed sample line");
      for (const auto& f : {image, labels})
        if (!fs::exists(dir / f)) throw FormatError("dataset file missing: " + (dir / f).string());
      Sample s;
      s.image = io::read_tensor(dir / image);
      const Tensor lab = io::read_tensor(dir / labels);
      s.labels.assign(lab.data().begin(), lab.data().end());
      (split == "train" ? out.train : out.test).samples.push_back(std::move(s));
    } else {
      throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (is.fail()) throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": bad value");
  }
  if ((dim != 2 && dim != 3) || side == 0 || num_labels < 1)
    throw FormatError(manifest_path.string() + ": missing dim/side/num_labels");
  for (Dataset* part : {&out.train, &out.test}) {
    part->dim = dim;
    part->side = side;
    part->num_labels = num_labels;
    Shape expected{1};
    for (int i = 0; i < dim; ++i) expected.push_back(side);
    for (const auto& s : part->samples) {
      if (s.image.shape() != expected || s.labels.size() != part->voxels())
        throw FormatError(manifest_path.string() + ": sample shape does not match manifest geometry");
      for (auto l : s.labels)
        if (l > num_labels) throw FormatError(manifest_path.string() + ": label id exceeds num_labels");
    }
  }
  if (out.train.samples.empty() || out.test.samples.empty())
    throw FormatError(manifest_path.string() + ": both train and test splits must be non-empty");
  return out;
}

}  // namespace lunet::data
