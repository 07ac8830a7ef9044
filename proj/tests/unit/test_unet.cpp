#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "../common/oracles.hpp"
#include "lunet/error.hpp"
#include "lunet/model.hpp"
#include "lunet/pruning.hpp"
#include "lunet/spec_io.hpp"

using namespace lunet;

namespace {

std::vector<int> flat(const ArchSpec& s) {
  std::vector<int> out;
  for (const auto& b : s.widths) out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::int64_t brute_count(UnetModel& m) {
  std::int64_t n = 0;
  for (auto* p : m.parameters()) n += static_cast<std::int64_t>(p->numel());
  return n;
}

}  // namespace

TEST_SUITE("unet") {

TEST_CASE("make_spec families") {
  const ArchSpec u = make_spec(Family::unet, 4, 5, 2, 3, 1, 1);
  CHECK(u.widths.size() == 9);
  for (int b = 0; b < 4; ++b) CHECK(u.widths[b] == std::vector<int>{4 << b, 4 << b});
  CHECK(u.widths[4] == std::vector<int>{64, 64});
  for (int b = 5; b < 9; ++b) CHECK(u.widths[b] == u.widths[8 - b]);

  const ArchSpec l = make_spec(Family::lunet, 4, 5, 2, 3, 1, 1);
  for (int w : flat(l)) CHECK(w == 4);

  const ArchSpec s = make_spec(Family::scaled, 4, 5, 2, 3, 1, 1, 50.0);
  for (int b = 0; b < 5; ++b) CHECK(s.widths[b][0] == (2 << b));

  const ArchSpec tiny = make_spec(Family::scaled, 1, 3, 2, 2, 1, 1, 10.0);
  for (int w : flat(tiny)) CHECK(w >= 1);

  CHECK_THROWS_AS(make_spec(Family::unet, 4, 5, 2, 3, 1, 1, 50.0), SpecError);
  CHECK_THROWS_AS(make_spec(Family::scaled, 4, 5, 2, 3, 1, 1), SpecError);
  CHECK_THROWS_AS(make_spec(Family::scaled, 4, 5, 2, 3, 1, 1, 0.0), SpecError);
  CHECK_THROWS_AS(make_spec(Family::unet, 0, 5, 2, 3, 1, 1), SpecError);
  CHECK_THROWS_AS(make_spec(Family::unet, 4, 1, 2, 3, 1, 1), SpecError);
  CHECK_THROWS_AS(make_spec(Family::unet, 4, 3, 2, 4, 1, 1), SpecError);
}

TEST_CASE("width ratios per family") {
  for (int levels = 2; levels <= 5; ++levels) {
    const ArchSpec u = make_spec(Family::unet, 3, levels, 2, 2, 1, 1);
    for (int b = 0; b < u.block_count(); ++b)
      CHECK(u.widths[b][0] == u.widths[0][0] * (1 << u.level_of(b)));
    const auto lw = flat(make_spec(Family::lunet, 3, levels, 2, 2, 1, 1));
    CHECK(*std::max_element(lw.begin(), lw.end()) == *std::min_element(lw.begin(), lw.end()));
  }
}

TEST_CASE("spec validation") {
  ArchSpec s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  s.widths[1][0] = 0;
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  s.widths[2].pop_back();
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  s.kernel = 2;
  CHECK_THROWS_AS(s.validate(), SpecError);
  s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  CHECK_NOTHROW(s.validate_input({1, 1, 8, 12}));
  CHECK_THROWS_AS(s.validate_input({1, 1, 8, 6}), ShapeError);
  CHECK_THROWS_AS(s.validate_input({1, 2, 8, 8}), ShapeError);
}

TEST_CASE("count examples") {
  // Every conv contributes Cin * Cout * k^d + Cout; a lone 1 -> 1 3x3 conv is 10.
  ArchSpec ones = make_spec(Family::lunet, 1, 2, 1, 2, 1, 1);
  // enc 1->1, bottleneck 1->1, dec (1 + 1)->1, output 1x1 conv 1->1
  CHECK(count(ones).n_params == 10 + 10 + 19 + 2);
  CHECK(count(ones).n_channels == 3);
  ones.norm_enabled = true;
  CHECK(count(ones).n_params == 10 + 10 + 19 + 2 + 3 * 2);

  const auto u = count(make_spec(Family::unet, 4, 5, 2, 3, 1, 1));
  CHECK(u.n_params > 354000 * 0.85);
  CHECK(u.n_params < 354000 * 1.15);
  const auto l = count(make_spec(Family::lunet, 4, 5, 2, 3, 1, 1));
  CHECK(static_cast<double>(u.n_params) / static_cast<double>(l.n_params) > 33.0);
  CHECK(u.n_channels == 2 * (4 + 8 + 16 + 32) * 2 + 2 * 64);
}

TEST_CASE("count equals enumeration of built tensors") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const ArchSpec s = oracle::random_spec(rng);
    UnetModel m(s, static_cast<std::uint64_t>(i));
    CHECK(count(s).n_params == brute_count(m));
    CHECK(m.n_params() == brute_count(m));
    std::int64_t ch = 0;
    for (int li = 0; li < m.layer_count(); ++li) ch += static_cast<std::int64_t>(m.layer(li).out_channels());
    CHECK(count(s).n_channels == ch);
  }
}

TEST_CASE("build is deterministic and seed dependent") {
  const ArchSpec s = make_spec(Family::unet, 2, 3, 2, 2, 1, 2);
  UnetModel a = build(s, 5), b = build(s, 5), c = build(s, 6);
  bool differs = false;
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i]->numel(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
      differs |= pa[i]->value[j] != pc[i]->value[j];
    }
  }
  CHECK(differs);
}

TEST_CASE("He initialization scale and zero bias") {
  const ArchSpec s = make_spec(Family::lunet, 16, 2, 2, 2, 1, 1);
  UnetModel m(s, 1);
  const auto& w = m.layer(1).weight.value;  // Cin = 16, k^d = 9
  double ss = 0.0;
  for (double v : w.data()) ss += v * v;
  const double var = ss / static_cast<double>(w.numel());
  CHECK(var == doctest::Approx(2.0 / (16.0 * 9.0)).epsilon(0.15));
  for (double v : m.layer(1).bias.value.data()) CHECK(v == 0.0);
}

TEST_CASE("forward keeps spatial size and yields num_labels channels") {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 6; ++i) {
    ArchSpec s = oracle::random_spec(rng);
    s.dim = 2;
    UnetModel m(s, 1);
    const std::size_t side = std::size_t{1} << (s.levels - 1);
    const Tensor x = oracle::random_tensor({2, static_cast<std::size_t>(s.in_channels), side * 2, side}, rng);
    const Tensor y = m.predict(x);
    CHECK(y.shape() == Shape{2, static_cast<std::size_t>(s.num_labels), side * 2, side});
    for (double v : y.data()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("HarP-sized 3-D forward keeps the volume shape") {
  UnetModel m(make_spec(Family::unet, 4, 5, 2, 3, 1, 1), 7);
  const Tensor x({1, 1, 64, 64, 64}, 0.5);
  const Tensor y = m.predict(x);
  CHECK(y.shape() == Shape{1, 1, 64, 64, 64});
}

TEST_CASE("consumer wiring matches producer widths") {
  const ArchSpec s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  UnetModel m(s, 0);
  for (int li = 0; li < m.layer_count(); ++li) {
    std::size_t fed = 0;
    for (int src = 0; src < m.layer_count(); ++src)
      for (const auto& c : m.consumers(src))
        if (c.layer == li) fed += m.layer(src).out_channels();
    if (li == 0) fed += static_cast<std::size_t>(s.in_channels);
    CHECK(m.layer(li).in_channels() == fed);
  }
  // encoder block 0 output feeds the next block and the level-0 decoder at offset 0
  const auto enc = m.consumers(m.layer_index(0, 1));
  REQUIRE(enc.size() == 2);
  CHECK(enc[1].layer == m.layer_index(4, 0));
  CHECK(enc[1].offset == 0);
  const auto neck = m.consumers(m.layer_index(2, 1));
  REQUIRE(neck.size() == 1);
  CHECK(neck[0].layer == m.layer_index(3, 0));
  CHECK(neck[0].offset == 4);
  const auto last = m.consumers(m.layer_index(4, 1));
  REQUIRE(last.size() == 1);
  CHECK(last[0].layer == -1);
}

TEST_CASE("extract_spec round trips and tracks pruning") {
  const ArchSpec s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  UnetModel m(s, 3);
  CHECK(extract_spec(m) == s);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const ChannelId v = pruning::select_victim(pruning::Strategy::widest_block, nullptr, m, rng);
    pruning::remove_channel(m, v);
  }
  const ArchSpec after = extract_spec(m);
  const auto before_w = flat(s), after_w = flat(after);
  CHECK(std::accumulate(before_w.begin(), before_w.end(), 0) - std::accumulate(after_w.begin(), after_w.end(), 0) ==
        10);
  UnetModel rebuilt(after, 9);
  auto pa = m.parameters(), pb = rebuilt.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.shape() == pb[i]->value.shape());
}

TEST_CASE("pruned-to-flat model extracts an lunet-shaped spec") {
  const ArchSpec s = make_spec(Family::unet, 2, 3, 2, 2, 1, 1);
  UnetModel m(s, 3);
  std::mt19937_64 rng(5);
  const auto total = count(s).n_channels - s.prunable_convs();
  for (std::int64_t i = 0; i < total; ++i)
    pruning::remove_channel(m, pruning::select_victim(pruning::Strategy::widest_block, nullptr, m, rng));
  const ArchSpec flat_spec = extract_spec(m);
  CHECK(flat_spec == make_spec(Family::lunet, 1, 3, 2, 2, 1, 1));
}

TEST_CASE("spec text round trip and checkpoint") {
  const ArchSpec s = make_spec(Family::scaled, 4, 3, 3, 3, 2, 4, 75.0, 3, true);
  std::stringstream ss(io::spec_to_string(s));
  CHECK(io::read_spec(ss) == s);
  std::stringstream bad("[arch]\nlevels=x\n");
  CHECK_THROWS_AS(io::read_spec(bad), FormatError);
  std::stringstream missing("[arch]\nlevels=3\nconvs_per_block=2\ndim=2\nin_channels=1\nnum_labels=1\n");
  CHECK_THROWS_AS(io::read_spec(missing), FormatError);

  const auto dir = std::filesystem::temp_directory_path() / "lunet_ckpt_test";
  std::filesystem::remove_all(dir);
  UnetModel m(make_spec(Family::unet, 2, 2, 2, 2, 1, 1), 8);
  io::save_checkpoint(m, dir);
  UnetModel back = io::load_checkpoint(dir);
  auto pa = m.parameters(), pb = back.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->numel(); ++j) CHECK(pa[i]->value[j] == pb[i]->value[j]);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
