#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "lunet/arch_spec.hpp"
#include "lunet/model.hpp"

namespace lunet::io {

// INI-style text: an [arch] section of scalars and a [widths] section with one
// comma-separated list per block.
void write_spec(std::ostream& out, const ArchSpec& spec);
void write_spec(const std::filesystem::path& path, const ArchSpec& spec);
std::string spec_to_string(const ArchSpec& spec);

ArchSpec read_spec(std::istream& in);
ArchSpec read_spec(const std::filesystem::path& path);

// Checkpoint directory: spec.ini plus one LUTN file per parameter tensor.
void save_checkpoint(UnetModel& model, const std::filesystem::path& dir);
UnetModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace lunet::io
