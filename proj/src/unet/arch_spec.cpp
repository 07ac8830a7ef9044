#include "lunet/arch_spec.hpp"

#include <cmath>

#include "lunet/error.hpp"

namespace lunet {

std::string to_string(Family f) {
  switch (f) {
    case Family::unet: return "unet";
    case Family::lunet: return "lunet";
    case Family::scaled: return "scaled";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "unet") return Family::unet;
  if (s == "lunet") return Family::lunet;
  if (s == "scaled") return Family::scaled;
  throw SpecError("unknown architecture family '" + s + "' (expected unet, lunet or scaled)");
}

std::int64_t ArchSpec::kernel_volume() const {
  std::int64_t v = 1;
  for (int i = 0; i < dim; ++i) v *= kernel;
  return v;
}

void ArchSpec::validate() const {
  if (levels < 2) throw SpecError("levels must be >= 2, got " + std::to_string(levels));
  if (convs_per_block < 1) throw SpecError("convs_per_block must be >= 1");
  if (dim != 2 && dim != 3) throw SpecError("dim must be 2 or 3, got " + std::to_string(dim));
  if (in_channels < 1) throw SpecError("in_channels must be >= 1");
  if (num_labels < 1) throw SpecError("num_labels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw SpecError("kernel must be a positive odd integer");
  if (static_cast<int>(widths.size()) != block_count())
    throw SpecError("expected " + std::to_string(block_count()) + " blocks of widths, got " +
                    std::to_string(widths.size()));
  for (int b = 0; b < block_count(); ++b) {
    if (static_cast<int>(widths[b].size()) != convs_per_block)
      throw SpecError("block " + std::to_string(b) + " lists " + std::to_string(widths[b].size()) +
                      " widths, expected " + std::to_string(convs_per_block));
    for (int w : widths[b])
      if (w < 1) throw SpecError("block " + std::to_string(b) + " has a width below 1");
  }
}

void ArchSpec::validate_input(const Shape& input) const {
  if (input.size() != static_cast<std::size_t>(dim) + 2)
    throw ShapeError("input " + shape_string(input) + " must have " + std::to_string(dim) + " spatial axes");
  if (input[1] != static_cast<std::size_t>(in_channels))
    throw ShapeError("input channels (dimension 1) is " + std::to_string(input[1]) + ", expected " +
                     std::to_string(in_channels));
  const std::size_t factor = std::size_t{1} << (levels - 1);
  for (std::size_t a = 2; a < input.size(); ++a)
    if (input[a] % factor != 0)
      throw ShapeError("spatial dimension " + std::to_string(a) + " of extent " + std::to_string(input[a]) +
                       " is not divisible by " + std::to_string(factor));
}

ArchSpec make_spec(Family family, int n_f, int levels, int convs_per_block, int dim, int in_channels,
                   int num_labels, std::optional<double> scale_percent, int kernel, bool norm_enabled) {
  if (n_f < 1) throw SpecError("n_f must be >= 1");
  if (levels < 2) throw SpecError("levels must be >= 2");
  if (family == Family::scaled) {
    if (!scale_percent || !(*scale_percent > 0.0 && *scale_percent <= 100.0))
      throw SpecError("scaled family requires scale_percent in (0, 100]");
  } else if (scale_percent) {
    throw SpecError("scale_percent is only valid for the scaled family");
  }
  ArchSpec spec;
  spec.levels = levels;
  spec.convs_per_block = convs_per_block;
  spec.dim = dim;
  spec.in_channels = in_channels;
  spec.num_labels = num_labels;
  spec.kernel = kernel;
  spec.norm_enabled = norm_enabled;
  for (int b = 0; b < spec.block_count(); ++b) {
    const int level = spec.level_of(b);
    int width = 0;
    switch (family) {
      case Family::unet: width = n_f << level; break;
      case Family::lunet: width = n_f; break;
      case Family::scaled:
        width = std::max(1, static_cast<int>(std::lround(*scale_percent / 100.0 * (n_f << level))));
        break;
    }
    spec.widths.emplace_back(convs_per_block, width);
  }
  spec.validate();
  return spec;
}

Counts count(const ArchSpec& spec) {
  spec.validate();
  const std::int64_t kv = spec.kernel_volume();
  const std::int64_t norm = spec.norm_enabled ? 2 : 0;
  Counts c;
  std::int64_t cin = spec.in_channels;
  for (int b = 0; b < spec.block_count(); ++b) {
    if (spec.is_decoder(b)) cin += spec.widths[2 * spec.levels - 2 - b].back();
    for (int w : spec.widths[b]) {
      c.n_params += cin * w * kv + w + norm * w;
      c.n_channels += w;
      cin = w;
    }
  }
  c.n_params += cin * spec.num_labels + spec.num_labels;
  return c;
}

int top_width(const ArchSpec& spec) { return spec.widths.front().front(); }

}  // namespace lunet
