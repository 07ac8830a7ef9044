#pragma once

#include <cstdint>
#include <vector>

#include "lunet/arch_spec.hpp"
#include "lunet/parameter.hpp"
#include "lunet/tape.hpp"

namespace lunet {

struct ConvLayer {
  Parameter weight;  // [Cout, Cin, k...]
  Parameter bias;    // [Cout]
  Parameter gamma;   // [Cout], empty unless norm is enabled
  Parameter beta;
  bool has_norm = false;

  std::size_t out_channels() const { return weight.value.dim(0); }
  std::size_t in_channels() const { return weight.value.dim(1); }
};

// A conv that reads some producer's output, and where that output starts
// inside its input channels.
struct Consumer {
  int layer = -1;  // prunable layer index, or -1 for the output conv
  std::size_t offset = 0;
};

struct ForwardOptions {
  // Per prunable layer, a [B, Cout] multiplier applied after the activation.
  const std::vector<Tensor>* channel_scales = nullptr;
  // Receives each prunable layer's post-activation output (before scaling).
  std::vector<Var>* activations = nullptr;
};

class UnetModel {
 public:
  UnetModel(ArchSpec spec, std::uint64_t seed);

  const ArchSpec& spec() const { return spec_; }

  int layer_count() const { return static_cast<int>(layers_.size()); }
  int layer_index(int block, int conv) const { return block * spec_.convs_per_block + conv; }
  int block_of(int layer) const { return layer / spec_.convs_per_block; }
  int conv_of(int layer) const { return layer % spec_.convs_per_block; }
  ConvLayer& layer(int index) { return layers_.at(index); }
  const ConvLayer& layer(int index) const { return layers_.at(index); }
  ConvLayer& output_layer() { return output_; }
  const ConvLayer& output_layer() const { return output_; }

  // Convs whose input includes the output of `layer`.
  std::vector<Consumer> consumers(int layer) const;
  ConvLayer& consumer_layer(const Consumer& c) { return c.layer < 0 ? output_ : layers_.at(c.layer); }

  std::vector<Parameter*> parameters();

  // Builds the graph for `input` and returns per-voxel probabilities
  // (sigmoid for one output channel, channel softmax otherwise).
  Var forward(Tape& tape, Var input, const ForwardOptions& opt = {});

  // Forward without gradient tracking.
  Tensor predict(const Tensor& input);

  // Re-reads widths from the weight shapes after structured edits.
  void sync_widths();

  std::int64_t n_params() const;

 private:
  ArchSpec spec_;
  std::vector<ConvLayer> layers_;
  ConvLayer output_;
};

// He-initialized network for a validated spec; bitwise deterministic in (spec, seed).
UnetModel build(const ArchSpec& spec, std::uint64_t seed);

// Spec describing the model's current widths.
ArchSpec extract_spec(const UnetModel& model);

}  // namespace lunet
