#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "lunet/dataset.hpp"
#include "lunet/error.hpp"

namespace lunet::data {

std::size_t Dataset::voxels() const {
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= side;
  return n;
}

void SynthSpec::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("synthetic dim must be 2 or 3");
  if (side < 8 || (side & (side - 1)) != 0) throw ConfigError("synthetic side must be a power of two >= 8");
  if (n_train < 1 || n_test < 1) throw ConfigError("n_train and n_test must be >= 1");
  if (num_labels < 1) throw ConfigError("num_labels must be >= 1");
  const int orthants = 1 << dim;
  if (mode == ContextMode::positional && num_labels >= orthants)
    throw ConfigError("positional mode supports at most " + std::to_string(orthants - 1) + " labels in " +
                      std::to_string(dim) + "-D");
  if (mode == ContextMode::multi_organ && static_cast<std::size_t>(num_labels + 3) * 2 > side)
    throw ConfigError("multi_organ mode needs side >= 2 * (num_labels + 3)");
  if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
}

namespace {

constexpr double kBackground = 0.2;
constexpr double kForeground = 0.8;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Canvas {
  int dim;
  std::size_t side;
  std::vector<double> intensity;
  std::vector<std::uint8_t> labels;

  Canvas(int d, std::size_t s) : dim(d), side(s) {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= s;
    intensity.assign(n, kBackground);
    labels.assign(n, 0);
  }

  std::array<double, 3> coords(std::size_t idx) const {
    std::array<double, 3> c{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      c[static_cast<std::size_t>(a)] = static_cast<double>(idx % side) + 0.5;
      idx /= side;
    }
    return c;
  }

  template <class Inside>
  void paint(Inside inside, double value, std::uint8_t label) {
    for (std::size_t i = 0; i < intensity.size(); ++i)
      if (inside(coords(i))) {
        intensity[i] = value;
        labels[i] = label;
      }
  }
};

Sample finish(Canvas& canvas, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  Shape shape{1};
  for (int i = 0; i < canvas.dim; ++i) shape.push_back(canvas.side);
  Tensor image(shape);
  for (std::size_t i = 0; i < canvas.intensity.size(); ++i)
    image[i] = std::clamp(canvas.intensity[i] + (sigma > 0 ? noise(rng) : 0.0), 0.0, 1.0);
  return Sample{std::move(image), std::move(canvas.labels)};
}

Sample positional_sample(const SynthSpec& spec, std::mt19937_64& rng) {
  Canvas canvas(spec.dim, spec.side);
  const double side = static_cast<double>(spec.side);
  const int orthants = 1 << spec.dim;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double radius = side / 8.0 + unit(rng) * side / 32.0;
  auto center_of = [&](int orthant) {
    std::array<double, 3> c{0, 0, 0};
    for (int a = 0; a < spec.dim; ++a) {
      const double origin = ((orthant >> a) & 1) ? side / 2.0 : 0.0;
      c[static_cast<std::size_t>(a)] = origin + side / 4.0 + unit(rng) * side / 16.0;
    }
    return c;
  };
  auto ball = [&](std::array<double, 3> c) {
    return [=, dim = spec.dim](const std::array<double, 3>& p) {
      double d2 = 0;
      for (int a = 0; a < dim; ++a) d2 += (p[a] - c[a]) * (p[a] - c[a]);
      return d2 <= radius * radius;
    };
  };
  // Two distractors in orthants that carry no label.
  std::vector<int> free_orthants(static_cast<std::size_t>(orthants - spec.num_labels));
  std::iota(free_orthants.begin(), free_orthants.end(), spec.num_labels);
  std::shuffle(free_orthants.begin(), free_orthants.end(), rng);
  const std::size_t distractors = std::min<std::size_t>(2, free_orthants.size());
  for (std::size_t i = 0; i < distractors; ++i) canvas.paint(ball(center_of(free_orthants[i])), kForeground, 0);
  for (int l = 1; l <= spec.num_labels; ++l)
    canvas.paint(ball(center_of(l - 1)), kForeground, static_cast<std::uint8_t>(l));
  return finish(canvas, spec.noise_sigma, rng);
}

Sample multi_organ_sample(const SynthSpec& spec, std::mt19937_64& rng) {
  Canvas canvas(spec.dim, spec.side);
  const double side = static_cast<double>(spec.side);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double part = side / static_cast<double>(spec.num_labels + 3);
  // Chain runs along the last axis; the other axes share one jittered centre.
  double x = 1.5 * part + unit(rng) * part / 2.0;
  std::array<double, 3> centre{};
  for (int a = 0; a < spec.dim - 1; ++a) centre[static_cast<std::size_t>(a)] = side / 2.0 + unit(rng) * side / 16.0;
  const auto last = static_cast<std::size_t>(spec.dim - 1);
  for (int l = 1; l <= spec.num_labels; ++l) {
    const double width = part * (1.0 + 0.2 * unit(rng));
    const double half_extent = side / 8.0 * (1.0 + 0.25 * unit(rng));
    const double x0 = x, x1 = x + width;
    const double value = 0.45 + 0.1 * l;
    canvas.paint(
        [&](const std::array<double, 3>& p) {
          if (p[last] < x0 || p[last] >= x1) return false;
          for (std::size_t a = 0; a < last; ++a)
            if (std::abs(p[a] - centre[a]) > half_extent) return false;
          return true;
        },
        value, static_cast<std::uint8_t>(l));
    x = x1;
  }
  return finish(canvas, spec.noise_sigma, rng);
}

Dataset make_split(const SynthSpec& spec, std::size_t count, std::uint64_t split_tag) {
  Dataset ds;
  ds.dim = spec.dim;
  ds.side = spec.side;
  ds.num_labels = spec.num_labels;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(split_tag * 0x100000000ULL + i)));
    ds.samples.push_back(spec.mode == ContextMode::positional ? positional_sample(spec, rng)
                                                               : multi_organ_sample(spec, rng));
  }
  return ds;
}

}  // namespace

SplitDataset generate(const SynthSpec& spec) {
  spec.validate();
  return {make_split(spec, spec.n_train, 1), make_split(spec, spec.n_test, 2)};
}

SampleBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("make_batch: empty index list");
  const std::size_t voxels = ds.voxels();
  const std::size_t classes = static_cast<std::size_t>(ds.num_labels) + 1;
  Shape img_shape{indices.size(), 1};
  Shape tgt_shape{indices.size(), classes};
  for (int i = 0; i < ds.dim; ++i) {
    img_shape.push_back(ds.side);
    tgt_shape.push_back(ds.side);
  }
  SampleBatch batch{Tensor(img_shape), Tensor(tgt_shape)};
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& s = ds.samples.at(indices[b]);
    std::copy(s.image.data().begin(), s.image.data().end(), batch.images.ptr() + b * voxels);
    for (std::size_t v = 0; v < voxels; ++v) batch.targets[(b * classes + s.labels[v]) * voxels + v] = 1.0;
  }
  return batch;
}

Tensor loss_target(const SampleBatch& batch, int model_outputs) {
  if (model_outputs == 1) {
    if (batch.targets.dim(1) != 2)
      throw ShapeError("single-output model needs single-label targets, got " +
                       std::to_string(batch.targets.dim(1) - 1) + " labels");
    return batch.targets.channels(1, 2);
  }
  if (static_cast<std::size_t>(model_outputs) != batch.targets.dim(1))
    throw ShapeError("model predicts " + std::to_string(model_outputs) + " channels but targets have " +
                     std::to_string(batch.targets.dim(1)));
  return batch.targets;
}

}  // namespace lunet::data
