#include <algorithm>

#include "lunet/error.hpp"
#include "lunet/pruning.hpp"

namespace lunet::pruning {

double DropoutPlan::probability(ChannelId id) const {
  const auto it = probabilities.find(id);
  return it == probabilities.end() ? 0.0 : it->second;
}

DropoutPlan update_dropout(const CriterionReport& report, double base_p) {
  if (!(base_p >= 0.0 && base_p <= kMaxDropout)) throw ConfigError("base dropout probability must lie in [0, 0.5]");
  std::vector<CriterionEntry> ranked = report.entries;
  std::stable_sort(ranked.begin(), ranked.end(), [](const CriterionEntry& a, const CriterionEntry& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.id < b.id;
  });
  const std::size_t boosted = (ranked.size() + 3) / 4;
  DropoutPlan plan;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    plan.probabilities[ranked[i].id] = i < boosted ? std::min(3.0 * base_p, kMaxDropout) : base_p;
  return plan;
}

std::vector<Tensor> sample_channel_scales(const DropoutPlan& plan, const UnetModel& model, std::size_t batch,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Tensor> scales;
  scales.reserve(static_cast<std::size_t>(model.layer_count()));
  for (int li = 0; li < model.layer_count(); ++li) {
    const std::size_t channels = model.layer(li).out_channels();
    Tensor s({batch, channels}, 1.0);
    for (std::size_t c = 0; c < channels; ++c) {
      const double p = plan.probability({model.block_of(li), model.conv_of(li), static_cast<int>(c)});
      if (p <= 0.0) continue;
      for (std::size_t b = 0; b < batch; ++b) s[b * channels + c] = unit(rng) < p ? 0.0 : 1.0 / (1.0 - p);
    }
    scales.push_back(std::move(s));
  }
  return scales;
}

}  // namespace lunet::pruning
