#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "../common/oracles.hpp"
#include "lunet/dataset.hpp"
#include "lunet/error.hpp"
#include "lunet/experiment.hpp"
#include "lunet/training.hpp"

using namespace lunet;
using namespace lunet::training;

namespace {

data::SplitDataset small_data(std::uint64_t seed, std::size_t side = 16, std::size_t n_train = 8) {
  data::SynthSpec s;
  s.dim = 2;
  s.side = side;
  s.n_train = n_train;
  s.n_test = 4;
  s.seed = seed;
  return data::generate(s);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("ADAM leaves parameters alone for zero gradients") {
  Parameter p(Tensor({3}, std::vector<double>{1, -2, 3}));
  Parameter* ps[] = {&p};
  AdamState st;
  TrainConfig cfg;
  for (int i = 0; i < 3; ++i) adam_step(ps, st, cfg);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(p.value[2] == 3.0);
  CHECK(st.step == 3);
}

TEST_CASE("ADAM first step size") {
  Parameter p(Tensor({1}, 0.5));
  p.value.grad()[0] = 1.0;
  Parameter* ps[] = {&p};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(ps, st, cfg);
  const double expected = 0.01 * 1.0 / (1.0 + 1e-8);
  CHECK(std::abs((0.5 - p.value[0]) - expected) < 1e-15);

  Parameter q(Tensor({1}, 0.5));
  q.value.grad()[0] = -3.0;
  Parameter* qs[] = {&q};
  AdamState sq;
  adam_step(qs, sq, cfg);
  CHECK(q.value[0] - 0.5 == doctest::Approx(0.01).epsilon(1e-7));
}

TEST_CASE("dice examples") {
  const std::vector<std::uint8_t> t{0, 1, 1, 1, 1, 0, 0, 0};
  CHECK(dice(t, t, 1).mean == 1.0);
  const std::vector<std::uint8_t> other{1, 0, 0, 0, 0, 1, 1, 1};
  const std::vector<std::uint8_t> a{1, 1, 0, 0, 0, 0, 0, 0}, b{0, 0, 1, 1, 0, 0, 0, 0};
  CHECK(dice(a, b, 1).mean == 0.0);
  const std::vector<std::uint8_t> half{0, 1, 1, 0, 0, 0, 0, 0};
  CHECK(dice(half, t, 1).mean == 2.0 / 3.0);
  const std::vector<std::uint8_t> empty(8, 0);
  CHECK(dice(empty, empty, 1).mean == 1.0);
  CHECK(dice(empty, t, 1).mean == 0.0);
  const std::vector<std::uint8_t> p2{0, 1, 2, 2}, t2{0, 1, 1, 2};
  const auto d2 = dice(p2, t2, 2);
  CHECK(d2.per_label[0] == 2.0 / 3.0);
  CHECK(d2.per_label[1] == 2.0 / 3.0);
  CHECK(d2.mean == 2.0 / 3.0);
  CHECK_THROWS_AS(dice(p2, t, 2), ShapeError);
}

TEST_CASE("dice is symmetric and bounded") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> p(50), q(50);
    for (auto& v : p) v = static_cast<std::uint8_t>(lab(rng));
    for (auto& v : q) v = static_cast<std::uint8_t>(lab(rng));
    const double pq = dice(p, q, 3).mean, qp = dice(q, p, 3).mean;
    CHECK(pq == qp);
    CHECK((pq >= 0.0 && pq <= 1.0));
    CHECK(dice(p, p, 3).mean == 1.0);
  }
}

TEST_CASE("label maps") {
  const Tensor one({2, 1, 1, 3}, std::vector<double>{0.2, 0.5, 0.9, 0.6, 0.1, 0.51});
  CHECK(label_map(one, 0) == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(label_map(one, 1) == std::vector<std::uint8_t>{1, 0, 1});
  const Tensor three({1, 3, 1, 2}, std::vector<double>{0.2, 0.5, 0.7, 0.1, 0.1, 0.4});
  CHECK(label_map(three, 0) == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("aggregate examples") {
  const std::vector<double> v{0.8, 0.9, 1.0};
  const auto s = aggregate(v);
  CHECK(s.median == 0.9);
  CHECK(std::abs(s.mad - 0.1) < 1e-15);
  CHECK(experiment::format_dice(s.median, s.mad) == "0.900 ± 0.100");
  const std::vector<double> single{0.42};
  CHECK(aggregate(single).mad == 0.0);
  CHECK(aggregate(single).median == 0.42);
  CHECK_THROWS(aggregate(std::span<const double>{}));

  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(7);
    for (double& e : x) e = u(rng);
    const auto ref = oracle::median_mad(x);
    const auto got = aggregate(x);
    CHECK(got.median == ref.first);
    CHECK(got.mad == ref.second);
    std::shuffle(x.begin(), x.end(), rng);
    CHECK(aggregate(x).median == got.median);
    CHECK(aggregate(x).mad == got.mad);
  }
  const std::vector<double> even{4, 1, 3, 2};
  CHECK(aggregate(even).median == 2.5);
  CHECK(aggregate(even).mad == 1.0);
}

TEST_CASE("zero epochs give an empty history") {
  const auto ds = small_data(1);
  UnetModel m(make_spec(Family::lunet, 2, 2, 2, 2, 1, 1), 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train(m, ds.train, ds.test, cfg);
  CHECK(r.history.empty());
  CHECK(r.n_params == m.n_params());
}

TEST_CASE("training is bitwise reproducible") {
  const auto ds = small_data(2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 9;
  auto run = [&]() {
    UnetModel m(make_spec(Family::unet, 2, 3, 2, 2, 1, 1), 4);
    const auto r = train(m, ds.train, ds.test, cfg);
    std::ostringstream os;
    write_run_csv(os, r);
    std::vector<double> params;
    for (auto* p : m.parameters()) params.insert(params.end(), p->value.data().begin(), p->value.data().end());
    return std::pair{os.str(), params};
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.substr(0, a.first.find('\n')) == "epoch,loss,dice");
}

TEST_CASE("run CSV carries per-label columns for several labels") {
  RunResult r;
  r.history.push_back({1, 0.5, 0.7, {0.6, 0.8}});
  std::ostringstream os;
  write_run_csv(os, r);
  CHECK(os.str() == "epoch,loss,dice,dice_1,dice_2\n1,0.5,0.7,0.6,0.8\n");
}

TEST_CASE("full-batch loss decreases over the first steps") {
  int good = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto ds = small_data(100 + static_cast<std::uint64_t>(seed), 16, 8);
    UnetModel m(make_spec(Family::unet, 2, 3, 2, 2, 1, 1), static_cast<std::uint64_t>(seed));
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    std::vector<std::size_t> all(ds.train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto batch = data::make_batch(ds.train, all);
    const Tensor target = data::loss_target(batch, 1);
    AdamState st;
    auto params = m.parameters();
    std::vector<double> losses;
    for (int step = 0; step <= 5; ++step) {
      for (auto* p : params) p->value.zero_grad();
      Tape tape;
      const Var l = ops::loss(tape, m.forward(tape, tape.constant_ref(batch.images)), tape.constant_ref(target),
                              cfg.loss);
      losses.push_back(tape.value(l)[0]);
      tape.backward(l);
      adam_step(params, st, cfg);
    }
    good += std::is_sorted(losses.rbegin(), losses.rend());
  }
  CHECK(good >= 9);
}

TEST_CASE("config validation rejects bad values") {
  TrainConfig cfg;
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
