#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "lunet/tensor.hpp"

// LUTN tensor files: "LUTN", u8 dtype, u8 rank, rank x u64 extents, then the
// raw little-endian values.
namespace lunet::io {

enum class DType : std::uint8_t { f64 = 0, f32 = 1, u8 = 2 };

inline constexpr char kTensorMagic[4] = {'L', 'U', 'T', 'N'};

void write_tensor(std::ostream& out, const Tensor& t, DType dtype = DType::f64);
void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::f64);

// Values are widened to double. Throws FormatError on bad magic, unknown
// dtype, or truncated data.
Tensor read_tensor(std::istream& in, const std::string& source = "<stream>");
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace lunet::io
