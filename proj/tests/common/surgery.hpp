#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lunet/arch_spec.hpp"
#include "lunet/model.hpp"
#include "lunet/pruning.hpp"
#include "lunet/tape.hpp"
#include "oracles.hpp"

namespace oracle {

struct SurgeryCheck {
  double max_diff = 0.0;            // pruned forward vs zero-masked original
  std::int64_t removed = 0;         // reported by remove_channel
  std::int64_t recount_delta = 0;   // count(before) - count(extract_spec(after))
  std::int64_t built_delta = 0;     // n_params before - after
};

// Zeroes output channel `ch` of layer `li` through the channel-scale hook,
// then removes it for real and compares the two forwards on one random input.
inline SurgeryCheck check_surgery(lunet::UnetModel& m, int li, int ch, std::mt19937_64& rng) {
  const auto& s = m.spec();
  const std::size_t side = std::size_t{1} << (s.levels - 1);
  lunet::Shape in{2, static_cast<std::size_t>(s.in_channels)};
  for (int a = 0; a < s.dim; ++a) in.push_back(a == 0 ? side : side * 2);
  const lunet::Tensor x = random_tensor(in, rng);

  std::vector<lunet::Tensor> scales;
  for (int l = 0; l < m.layer_count(); ++l) scales.emplace_back(lunet::Shape{2, m.layer(l).out_channels()}, 1.0);
  for (std::size_t b = 0; b < 2; ++b) scales[static_cast<std::size_t>(li)][b * m.layer(li).out_channels() + ch] = 0.0;
  lunet::Tape tape(lunet::Tape::Mode::inference);
  lunet::ForwardOptions opt;
  opt.channel_scales = &scales;
  const lunet::Tensor masked = tape.value(m.forward(tape, tape.constant_ref(x), opt));

  SurgeryCheck r;
  const auto before = m.n_params();
  const auto counted_before = lunet::count(lunet::extract_spec(m)).n_params;
  r.removed = lunet::pruning::remove_channel(m, {m.block_of(li), m.conv_of(li), ch});
  r.built_delta = before - m.n_params();
  r.recount_delta = counted_before - lunet::count(lunet::extract_spec(m)).n_params;
  const lunet::Tensor pruned = m.predict(x);
  for (std::size_t i = 0; i < pruned.numel(); ++i) r.max_diff = std::max(r.max_diff, std::abs(pruned[i] - masked[i]));
  return r;
}

// Adds a constant to every parameter so biases and norm offsets are nonzero.
inline void shift_parameters(lunet::UnetModel& m, double delta = 0.05) {
  for (auto* p : m.parameters())
    for (double& v : p->value.data()) v += delta;
}

}  // namespace oracle
