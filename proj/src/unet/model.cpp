#include "lunet/model.hpp"

#include <cmath>
#include <random>

#include "lunet/error.hpp"
#include "lunet/ops.hpp"

namespace lunet {

Parameter::Parameter(Tensor v) : value(std::move(v)) {
  if (!value.empty()) value.set_requires_grad(true);
}

void Parameter::erase_index(std::size_t axis, std::size_t index) {
  value.erase_index(axis, index);
  if (!first_moment.empty()) first_moment.erase_index(axis, index);
  if (!second_moment.empty()) second_moment.erase_index(axis, index);
}

void Parameter::reset_moments() {
  first_moment = Tensor();
  second_moment = Tensor();
}

namespace {

Shape weight_shape(std::size_t cout, std::size_t cin, int kernel, int dim) {
  Shape s{cout, cin};
  for (int i = 0; i < dim; ++i) s.push_back(static_cast<std::size_t>(kernel));
  return s;
}

ConvLayer make_layer(std::size_t cin, std::size_t cout, int kernel, int dim, bool norm, std::mt19937_64& rng) {
  ConvLayer layer;
  Tensor w(weight_shape(cout, cin, kernel, dim));
  const double fan_in = static_cast<double>(cin) * std::pow(kernel, dim);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : w.data()) v = normal(rng);
  layer.weight = Parameter(std::move(w));
  layer.bias = Parameter(Tensor({cout}, 0.0));
  layer.has_norm = norm;
  if (norm) {
    layer.gamma = Parameter(Tensor({cout}, 1.0));
    layer.beta = Parameter(Tensor({cout}, 0.0));
  }
  return layer;
}

}  // namespace

UnetModel::UnetModel(ArchSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  std::size_t cin = static_cast<std::size_t>(spec_.in_channels);
  for (int b = 0; b < spec_.block_count(); ++b) {
    if (spec_.is_decoder(b)) cin += static_cast<std::size_t>(spec_.widths[2 * spec_.levels - 2 - b].back());
    for (int w : spec_.widths[b]) {
      layers_.push_back(make_layer(cin, static_cast<std::size_t>(w), spec_.kernel, spec_.dim, spec_.norm_enabled, rng));
      cin = static_cast<std::size_t>(w);
    }
  }
  output_ = make_layer(cin, static_cast<std::size_t>(spec_.num_labels), 1, spec_.dim, false, rng);
}

std::vector<Consumer> UnetModel::consumers(int layer) const {
  const int block = block_of(layer);
  const int conv = conv_of(layer);
  const int last_conv = spec_.convs_per_block - 1;
  if (conv < last_conv) return {{layer + 1, 0}};
  if (block == spec_.block_count() - 1) return {{-1, 0}};
  std::vector<Consumer> out;
  if (spec_.is_encoder(block)) {
    // Pooled path into the next encoder (or bottleneck) block.
    out.push_back({layer_index(block + 1, 0), 0});
    // Skip path: first operand of the matching decoder's concat.
    out.push_back({layer_index(2 * spec_.levels - 2 - block, 0), 0});
  } else {
    // Upsampled path, second operand of the next decoder's concat.
    const int next = block + 1;
    const int skip_block = 2 * spec_.levels - 2 - next;
    out.push_back({layer_index(next, 0), static_cast<std::size_t>(spec_.widths[skip_block].back())});
  }
  return out;
}

std::vector<Parameter*> UnetModel::parameters() {
  std::vector<Parameter*> out;
  auto add = [&](ConvLayer& l) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.has_norm) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  };
  for (auto& l : layers_) add(l);
  add(output_);
  return out;
}

Var UnetModel::forward(Tape& tape, Var input, const ForwardOptions& opt) {
  spec_.validate_input(tape.value(input).shape());
  const int pad = (spec_.kernel - 1) / 2;
  std::vector<Var> skips(static_cast<std::size_t>(spec_.levels));
  if (opt.activations) opt.activations->assign(layers_.size(), Var{});
  Var cur = input;
  for (int b = 0; b < spec_.block_count(); ++b) {
    if (b > 0 && !spec_.is_decoder(b)) cur = ops::maxpool2(tape, cur);
    if (spec_.is_decoder(b)) {
      const Var up = ops::upsample_nearest2(tape, cur);
      cur = ops::concat_channels(tape, skips[static_cast<std::size_t>(spec_.level_of(b))], up);
    }
    for (int j = 0; j < spec_.convs_per_block; ++j) {
      const int li = layer_index(b, j);
      ConvLayer& l = layers_[static_cast<std::size_t>(li)];
      cur = ops::conv(tape, cur, tape.parameter(l.weight.value), tape.parameter(l.bias.value),
                      {1, static_cast<std::size_t>(pad)});
      if (l.has_norm)
        cur = ops::instance_norm(tape, cur, tape.parameter(l.gamma.value), tape.parameter(l.beta.value));
      cur = ops::relu(tape, cur);
      if (opt.activations) (*opt.activations)[static_cast<std::size_t>(li)] = cur;
      if (opt.channel_scales) cur = ops::channel_scale(tape, cur, (*opt.channel_scales)[static_cast<std::size_t>(li)]);
    }
    if (spec_.is_encoder(b)) skips[static_cast<std::size_t>(b)] = cur;
  }
  cur = ops::conv(tape, cur, tape.parameter(output_.weight.value), tape.parameter(output_.bias.value));
  return spec_.num_labels == 1 ? ops::sigmoid(tape, cur) : ops::softmax_channels(tape, cur);
}

Tensor UnetModel::predict(const Tensor& input) {
  Tape tape(Tape::Mode::inference);
  const Var out = forward(tape, tape.constant_ref(input));
  return tape.value(out);
}

void UnetModel::sync_widths() {
  for (int li = 0; li < layer_count(); ++li)
    spec_.widths[static_cast<std::size_t>(block_of(li))][static_cast<std::size_t>(conv_of(li))] =
        static_cast<int>(layers_[static_cast<std::size_t>(li)].out_channels());
}

std::int64_t UnetModel::n_params() const {
  std::int64_t n = 0;
  auto add = [&](const ConvLayer& l) {
    n += static_cast<std::int64_t>(l.weight.numel() + l.bias.numel());
    if (l.has_norm) n += static_cast<std::int64_t>(l.gamma.numel() + l.beta.numel());
  };
  for (const auto& l : layers_) add(l);
  add(output_);
  return n;
}

UnetModel build(const ArchSpec& spec, std::uint64_t seed) { return UnetModel(spec, seed); }

ArchSpec extract_spec(const UnetModel& model) { return model.spec(); }

}  // namespace lunet
