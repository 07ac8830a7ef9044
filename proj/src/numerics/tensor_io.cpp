#include "lunet/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "lunet/error.hpp"

namespace lunet::io {

namespace {

template <class T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, DType dtype) {
  out.write(kTensorMagic, 4);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (auto e : t.shape()) put<std::uint64_t>(out, e);
  for (double v : t.data()) {
    switch (dtype) {
      case DType::f64: put<double>(out, v); break;
      case DType::f32: put<float>(out, static_cast<float>(v)); break;
      case DType::u8: {
        if (!(v >= 0.0 && v <= 255.0)) throw FormatError("value out of u8 range while writing tensor");
        put<std::uint8_t>(out, static_cast<std::uint8_t>(std::lround(v)));
        break;
      }
    }
  }
  if (!out) throw FormatError("failed writing tensor");
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, t, dtype);
}

Tensor read_tensor(std::istream& in, const std::string& source) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw FormatError(source + ": missing LUTN magic");
  std::uint8_t dtype = 0, rank = 0;
  if (!get(in, dtype) || !get(in, rank)) throw FormatError(source + ": truncated header");
  if (dtype > static_cast<std::uint8_t>(DType::u8))
    throw FormatError(source + ": unknown dtype code " + std::to_string(dtype));
  if (rank == 0) throw FormatError(source + ": rank must be positive");
  Shape shape(rank);
  for (auto& e : shape) {
    std::uint64_t v = 0;
    if (!get(in, v)) throw FormatError(source + ": truncated header");
    if (v == 0 || v > (std::uint64_t{1} << 40)) throw FormatError(source + ": invalid extent");
    e = static_cast<std::size_t>(v);
  }
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) {
    bool ok = false;
    switch (static_cast<DType>(dtype)) {
      case DType::f64: ok = get(in, v); break;
      case DType::f32: {
        float f = 0;
        ok = get(in, f);
        v = f;
        break;
      }
      case DType::u8: {
        std::uint8_t u = 0;
        ok = get(in, u);
        v = u;
        break;
      }
    }
    if (!ok) throw FormatError(source + ": truncated data (expected " + std::to_string(data.size()) + " values)");
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open tensor file " + path.string());
  return read_tensor(in, path.string());
}

}  // namespace lunet::io
