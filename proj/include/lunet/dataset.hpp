#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lunet/tensor.hpp"

namespace lunet::data {

struct Sample {
  Tensor image;                      // [1, S...], values in [0, 1]
  std::vector<std::uint8_t> labels;  // flattened S..., 0 = background
};

struct Dataset {
  int dim = 2;
  std::size_t side = 0;
  int num_labels = 1;  // foreground labels
  std::vector<Sample> samples;

  Shape spatial_shape() const { return Shape(static_cast<std::size_t>(dim), side); }
  std::size_t voxels() const;
  std::size_t size() const { return samples.size(); }
  // Output channels a model needs: 1 (sigmoid) for a single label, else labels + background.
  int model_outputs() const { return num_labels == 1 ? 1 : num_labels + 1; }
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

// images [B, 1, S...]; targets one-hot [B, num_labels + 1, S...] with channel 0 = background.
struct SampleBatch {
  Tensor images;
  Tensor targets;
};

SampleBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

// Target in the layout the model predicts: the foreground channel alone for a
// single-label model, the full one-hot otherwise.
Tensor loss_target(const SampleBatch& batch, int model_outputs);

enum class ContextMode { positional, multi_organ };

struct SynthSpec {
  int dim = 2;
  std::size_t side = 64;
  int num_labels = 1;
  std::size_t n_train = 200;
  std::size_t n_test = 70;
  std::uint64_t seed = 0;
  ContextMode mode = ContextMode::positional;
  double noise_sigma = 0.05;

  void validate() const;
};

// Positional mode: identical balls in different orthants of the volume; only
// the ball in orthant (label - 1) carries label `label`. Multi-organ mode: a
// left-to-right chain of touching boxes, one label per box, jittered as a whole.
SplitDataset generate(const SynthSpec& spec);

// Directory layout: manifest.txt plus images/ and labels/ LUTN files.
void save(const SplitDataset& ds, const std::filesystem::path& dir);
// Loads all files or throws; a partially readable directory yields no dataset.
SplitDataset load(const std::filesystem::path& dir);

}  // namespace lunet::data
