#include <limits>

#include "lunet/error.hpp"
#include "lunet/pruning.hpp"

namespace lunet::pruning {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::stamp: return "stamp";
    case Strategy::stamp_layer_random: return "stamp_layer_random";
    case Strategy::widest_block: return "widest_block";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "stamp") return Strategy::stamp;
  if (s == "stamp_layer_random") return Strategy::stamp_layer_random;
  if (s == "widest_block") return Strategy::widest_block;
  throw ConfigError("unknown strategy '" + s + "' (expected stamp, stamp_layer_random or widest_block)");
}

namespace {

// Lexicographically smaller key wins a width tie.
struct TieKey {
  int neg_level;
  int decoder;
  int conv;
  auto operator<=>(const TieKey&) const = default;
};

int widest_in(const ArchSpec& spec, const std::vector<int>& flat) {
  int best = -1;
  TieKey best_key{};
  for (int li = 0; li < static_cast<int>(flat.size()); ++li) {
    const int block = li / spec.convs_per_block;
    const TieKey key{-spec.level_of(block), spec.is_decoder(block) ? 1 : 0, li % spec.convs_per_block};
    if (best < 0 || flat[li] > flat[best] || (flat[li] == flat[best] && key < best_key)) {
      best = li;
      best_key = key;
    }
  }
  return best;
}

std::vector<int> flat_widths(const ArchSpec& spec) {
  std::vector<int> flat;
  for (const auto& block : spec.widths) flat.insert(flat.end(), block.begin(), block.end());
  return flat;
}

int random_channel(std::size_t width, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(width) - 1);
  return pick(rng);
}

}  // namespace

int widest_layer(const ArchSpec& spec) { return widest_in(spec, flat_widths(spec)); }

ChannelId select_victim(Strategy strategy, const CriterionReport* report, const UnetModel& model,
                        std::mt19937_64& rng) {
  const ArchSpec& spec = model.spec();
  if (strategy == Strategy::widest_block) {
    const int li = widest_layer(spec);
    const std::size_t width = model.layer(li).out_channels();
    if (width < 2) throw ExhaustedError("every conv is down to one channel");
    return {model.block_of(li), model.conv_of(li), random_channel(width, rng)};
  }
  if (!report) throw Error(to_string(strategy) + " needs a criterion report");
  const CriterionEntry* best = nullptr;
  for (const auto& e : report->entries) {
    const auto& w = spec.widths.at(static_cast<std::size_t>(e.id.block)).at(static_cast<std::size_t>(e.id.conv));
    if (w < 2) continue;
    if (!best || e.value < best->value || (e.value == best->value && e.id < best->id)) best = &e;
  }
  if (!best) throw ExhaustedError("every conv is down to one channel");
  if (strategy == Strategy::stamp) return best->id;
  const int li = model.layer_index(best->id.block, best->id.conv);
  return {best->id.block, best->id.conv, random_channel(model.layer(li).out_channels(), rng)};
}

std::vector<std::vector<int>> widest_schedule(const ArchSpec& spec, std::int64_t total_removals) {
  const Counts counts = count(spec);
  const std::int64_t max_removals = counts.n_channels - spec.prunable_convs();
  if (total_removals < 0 || total_removals > max_removals)
    throw Error("widest_schedule: " + std::to_string(total_removals) + " removals requested, at most " +
                std::to_string(max_removals) + " possible");
  std::vector<int> flat = flat_widths(spec);
  std::vector<std::vector<int>> table{flat};
  for (std::int64_t s = 0; s < total_removals; ++s) {
    --flat[static_cast<std::size_t>(widest_in(spec, flat))];
    table.push_back(flat);
  }
  return table;
}

}  // namespace lunet::pruning
