#include <cmath>
#include <ostream>

#include "lunet/csv.hpp"
#include "lunet/error.hpp"
#include "lunet/pruning.hpp"

namespace lunet::pruning {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::exhausted: return "exhausted";
    case Termination::stopped: return "stopped";
    case Termination::diverged: return "diverged";
  }
  return "?";
}

std::int64_t PruneLog::channels_after(int step) const {
  return step == 0 ? initial_channels : events.at(static_cast<std::size_t>(step - 1)).channels_remaining;
}

void PruneLog::append(PruneEvent e) {
  const std::int64_t prev = events.empty() ? initial_channels : events.back().channels_remaining;
  if (e.channels_remaining != prev - 1)
    throw Error("prune log: channels remaining must drop by exactly one per event");
  if (e.step != static_cast<int>(events.size()) + 1) throw Error("prune log: steps must be consecutive");
  events.push_back(std::move(e));
}

std::optional<std::size_t> PruneLog::event_at_percent(double percent) const {
  const auto target = static_cast<std::int64_t>(std::floor(percent / 100.0 * static_cast<double>(initial_channels)));
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].channels_remaining == target) return i;
  return std::nullopt;
}

std::optional<std::vector<int>> PruneLog::widths_at_percent(double percent) const {
  const auto target = static_cast<std::int64_t>(std::floor(percent / 100.0 * static_cast<double>(initial_channels)));
  if (target == initial_channels) return initial_widths;
  if (auto i = event_at_percent(percent)) return events[*i].widths;
  return std::nullopt;
}

std::optional<double> PruneLog::max_dice() const {
  std::optional<double> best;
  for (const auto& e : events)
    if (e.dice && (!best || *e.dice > *best)) best = e.dice;
  return best;
}

void write_log_csv(std::ostream& out, const PruneLog& log) {
  out << "step,block,conv,channel,strategy,pct_channels_remaining,n_params,dice\n";
  for (const auto& e : log.events) {
    out << e.step << "," << e.removed.block << "," << e.removed.conv << "," << e.removed.channel << ","
        << to_string(e.strategy) << "," << fmt_double(e.pct_channels_remaining) << "," << e.n_params << ","
        << (e.dice ? fmt_double(*e.dice) : "") << "\n";
  }
}

std::string layer_name(const ArchSpec& spec, int layer) {
  const int block = layer / spec.convs_per_block;
  const int conv = layer % spec.convs_per_block;
  const std::string part = spec.is_encoder(block)      ? "enc" + std::to_string(spec.level_of(block))
                           : spec.is_bottleneck(block) ? std::string("bottleneck")
                                                       : "dec" + std::to_string(spec.level_of(block));
  return part + "." + std::to_string(conv);
}

void write_widths_csv(std::ostream& out, const PruneLog& log, const ArchSpec& spec) {
  out << "step,pct_channels_remaining";
  for (int li = 0; li < spec.prunable_convs(); ++li) out << "," << layer_name(spec, li);
  out << "\n";
  auto row = [&](int step, double pct, const std::vector<int>& widths) {
    out << step << "," << fmt_double(pct);
    for (int w : widths) out << "," << w;
    out << "\n";
  };
  row(0, 100.0, log.initial_widths);
  for (const auto& e : log.events) row(e.step, e.pct_channels_remaining, e.widths);
}

void write_snapshot_csv(std::ostream& out, const ArchSpec& spec, const std::vector<int>& widths) {
  out << "block,part,level,conv,width\n";
  for (int li = 0; li < static_cast<int>(widths.size()); ++li) {
    const int block = li / spec.convs_per_block;
    const char* part = spec.is_encoder(block) ? "encoder" : spec.is_bottleneck(block) ? "bottleneck" : "decoder";
    out << block << "," << part << "," << spec.level_of(block) << "," << li % spec.convs_per_block << ","
        << widths[static_cast<std::size_t>(li)] << "\n";
  }
}

}  // namespace lunet::pruning
