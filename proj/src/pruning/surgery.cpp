#include "lunet/error.hpp"
#include "lunet/pruning.hpp"

namespace lunet::pruning {

std::int64_t remove_channel(UnetModel& model, ChannelId id) {
  const ArchSpec& spec = model.spec();
  if (id.block < 0 || id.block >= spec.block_count() || id.conv < 0 || id.conv >= spec.convs_per_block)
    throw Error("remove_channel: no conv at block " + std::to_string(id.block) + ", conv " + std::to_string(id.conv));
  const int li = model.layer_index(id.block, id.conv);
  ConvLayer& layer = model.layer(li);
  const std::size_t cout = layer.out_channels();
  if (id.channel < 0 || static_cast<std::size_t>(id.channel) >= cout)
    throw Error("remove_channel: channel " + std::to_string(id.channel) + " out of range for width " +
                std::to_string(cout));
  if (cout < 2)
    throw LastChannelError("block " + std::to_string(id.block) + " conv " + std::to_string(id.conv) +
                           " has a single channel left");
  const auto channel = static_cast<std::size_t>(id.channel);
  // Consumer offsets refer to the layout before this removal.
  const auto consumers = model.consumers(li);

  std::int64_t removed = static_cast<std::int64_t>(layer.weight.numel() / cout) + 1;
  layer.weight.erase_index(0, channel);
  layer.bias.erase_index(0, channel);
  if (layer.has_norm) {
    layer.gamma.erase_index(0, channel);
    layer.beta.erase_index(0, channel);
    removed += 2;
  }
  for (const Consumer& c : consumers) {
    ConvLayer& target = model.consumer_layer(c);
    const std::size_t per_input = target.weight.numel() / target.in_channels();
    removed += static_cast<std::int64_t>(per_input);
    target.weight.erase_index(1, c.offset + channel);
  }
  model.sync_widths();
  return removed;
}

}  // namespace lunet::pruning
