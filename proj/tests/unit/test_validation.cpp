#include <doctest.h>

#include <algorithm>
#include <vector>

#include "lunet/dataset.hpp"
#include "lunet/model.hpp"
#include "lunet/training.hpp"

using namespace lunet;
using namespace lunet::training;

namespace {

data::SplitDataset positional_data() {
  data::SynthSpec s;
  s.dim = 2;
  s.side = 64;
  s.n_train = 200;
  s.n_test = 70;
  s.seed = 11;
  return data::generate(s);
}

TrainConfig smoke_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.003;
  cfg.batch_size = 8;
  cfg.epochs = 30;
  cfg.seed = 3;
  return cfg;
}

// Best mean Dice any global intensity threshold reaches on `ds`, trying both
// polarities. Uses no spatial information at all.
double best_threshold_dice(const data::Dataset& ds) {
  double best = 0.0;
  for (int step = 0; step <= 100; ++step) {
    const double t = step / 100.0;
    for (bool above : {true, false}) {
      double sum = 0.0;
      for (const auto& s : ds.samples) {
        std::vector<std::uint8_t> pred(s.labels.size());
        for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = (s.image[i] > t) == above;
        sum += dice(pred, s.labels, 1).mean;
      }
      best = std::max(best, sum / static_cast<double>(ds.size()));
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("validation") {

TEST_CASE("lunet n_f=8 segments the positional dataset") {
  const auto ds = positional_data();
  UnetModel m(make_spec(Family::lunet, 8, 4, 2, 2, 1, 1), 5);
  const auto r = train(m, ds.train, ds.test, smoke_config());
  MESSAGE("lunet final Dice " << r.final_dice);
  CHECK(r.final_dice >= 0.85);
}

TEST_CASE("position-blind models cannot solve the positional dataset") {
  const auto ds = positional_data();
  const double threshold = best_threshold_dice(ds.test);
  MESSAGE("best intensity threshold Dice " << threshold);
  CHECK(threshold <= 0.7);

  UnetModel blind(make_spec(Family::lunet, 8, 4, 2, 2, 1, 1, std::nullopt, 1), 5);
  const auto r = train(blind, ds.train, ds.test, smoke_config());
  MESSAGE("1x1-kernel lunet max Dice " << r.max_test_dice);
  CHECK(r.max_test_dice <= 0.7);
}

}
