#include <cmath>

#include "lunet/error.hpp"
#include "lunet/pruning.hpp"

namespace lunet::pruning {

std::string to_string(CriterionScaling s) {
  return s == CriterionScaling::per_element ? "per_element" : "per_layer";
}

CriterionScaling parse_criterion_scaling(const std::string& s) {
  if (s == "per_element") return CriterionScaling::per_element;
  if (s == "per_layer") return CriterionScaling::per_layer;
  throw ConfigError("unknown criterion scaling '" + s + "' (expected per_element or per_layer)");
}

CriterionReport compute_criterion(UnetModel& model, std::span<const Tensor> batches, CriterionScaling scaling,
                                  int batch_id) {
  if (batches.empty()) throw Error("compute_criterion: empty batch list");
  const int layers = model.layer_count();
  std::vector<std::vector<double>> sumsq(static_cast<std::size_t>(layers));
  std::vector<double> elements(static_cast<std::size_t>(layers), 0.0);
  for (int li = 0; li < layers; ++li) sumsq[static_cast<std::size_t>(li)].assign(model.layer(li).out_channels(), 0.0);

  for (const Tensor& batch : batches) {
    Tape tape(Tape::Mode::inference);
    std::vector<Var> acts;
    ForwardOptions opt;
    opt.activations = &acts;
    model.forward(tape, tape.constant_ref(batch), opt);
    for (int li = 0; li < layers; ++li) {
      const Tensor& a = tape.value(acts[static_cast<std::size_t>(li)]);
      if (!a.all_finite()) throw NanError("non-finite activation in layer " + std::to_string(li));
      const std::size_t channels = a.dim(1);
      const std::size_t inner = a.numel() / (a.dim(0) * channels);
      auto& acc = sumsq[static_cast<std::size_t>(li)];
      for (std::size_t b = 0; b < a.dim(0); ++b)
        for (std::size_t c = 0; c < channels; ++c) {
          const double* p = a.ptr() + (b * channels + c) * inner;
          double s = 0.0;
          for (std::size_t i = 0; i < inner; ++i) s += p[i] * p[i];
          acc[c] += s;
        }
      elements[static_cast<std::size_t>(li)] += static_cast<double>(a.dim(0) * inner);
    }
  }

  CriterionReport report;
  report.batch_id = batch_id;
  for (int li = 0; li < layers; ++li) {
    const auto& acc = sumsq[static_cast<std::size_t>(li)];
    std::vector<double> values(acc.size());
    for (std::size_t c = 0; c < acc.size(); ++c)
      values[c] = std::sqrt(acc[c] / elements[static_cast<std::size_t>(li)]);
    if (scaling == CriterionScaling::per_layer) {
      double norm = 0.0;
      for (double v : values) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0)
        for (double& v : values) v /= norm;
    }
    for (std::size_t c = 0; c < values.size(); ++c)
      report.entries.push_back({ChannelId{model.block_of(li), model.conv_of(li), static_cast<int>(c)}, values[c]});
  }
  return report;
}

void erase_from_report(CriterionReport& report, ChannelId id) {
  std::vector<CriterionEntry> kept;
  kept.reserve(report.entries.size());
  for (auto e : report.entries) {
    if (e.id == id) continue;
    if (e.id.block == id.block && e.id.conv == id.conv && e.id.channel > id.channel) --e.id.channel;
    kept.push_back(e);
  }
  report.entries = std::move(kept);
}

}  // namespace lunet::pruning
