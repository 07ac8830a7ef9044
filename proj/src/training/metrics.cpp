#include <algorithm>
#include <ostream>

#include "lunet/csv.hpp"
#include "lunet/error.hpp"
#include "lunet/training.hpp"

namespace lunet::training {

DiceScores dice(std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> target, int num_labels) {
  if (prediction.size() != target.size()) throw ShapeError("dice: label maps differ in size");
  std::vector<std::size_t> inter(static_cast<std::size_t>(num_labels) + 1, 0), psize(inter), tsize(inter);
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const auto p = prediction[i], t = target[i];
    if (p > num_labels || t > num_labels) throw ShapeError("dice: label id exceeds num_labels");
    ++psize[p];
    ++tsize[t];
    if (p == t) ++inter[p];
  }
  DiceScores out;
  for (int l = 1; l <= num_labels; ++l) {
    const auto denom = psize[static_cast<std::size_t>(l)] + tsize[static_cast<std::size_t>(l)];
    out.per_label.push_back(denom == 0 ? 1.0
                                       : 2.0 * static_cast<double>(inter[static_cast<std::size_t>(l)]) /
                                             static_cast<double>(denom));
  }
  for (double d : out.per_label) out.mean += d;
  out.mean /= static_cast<double>(num_labels);
  return out;
}

std::vector<std::uint8_t> label_map(const Tensor& probabilities, std::size_t sample) {
  const std::size_t channels = probabilities.dim(1);
  const std::size_t voxels = probabilities.numel() / (probabilities.dim(0) * channels);
  const double* base = probabilities.ptr() + sample * channels * voxels;
  std::vector<std::uint8_t> out(voxels, 0);
  if (channels == 1) {
    for (std::size_t v = 0; v < voxels; ++v) out[v] = base[v] > 0.5 ? 1 : 0;
    return out;
  }
  for (std::size_t v = 0; v < voxels; ++v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < channels; ++c)
      if (base[c * voxels + v] > base[best * voxels + v]) best = c;
    out[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw Error("aggregate: no values");
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  Summary s;
  s.median = median_of({values.begin(), values.end()});
  std::vector<double> dev;
  for (double v : values) dev.push_back(std::abs(v - s.median));
  s.mad = median_of(std::move(dev));
  return s;
}

void write_run_csv(std::ostream& out, const RunResult& result) {
  const std::size_t labels = result.history.empty() ? 0 : result.history.front().per_label_dice.size();
  out << "epoch,loss,dice";
  if (labels > 1)
    for (std::size_t l = 1; l <= labels; ++l) out << ",dice_" << l;
  out << "\n";
  for (const auto& e : result.history) {
    out << e.epoch << "," << fmt_double(e.train_loss) << "," << fmt_double(e.test_dice);
    if (labels > 1)
      for (double d : e.per_label_dice) out << "," << fmt_double(d);
    out << "\n";
  }
}

}  // namespace lunet::training
