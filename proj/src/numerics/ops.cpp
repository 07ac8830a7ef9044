#include "lunet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lunet/error.hpp"
#include "lunet/kernels.hpp"

namespace lunet::ops {

namespace {

using std::ptrdiff_t;
using std::size_t;

constexpr size_t kChunkColumns = 4096;

size_t spatial_size(const Shape& s) {
  size_t n = 1;
  for (size_t i = 2; i < s.size(); ++i) n *= s[i];
  return n;
}

void require_spatial(const Shape& s, const char* op) {
  if (s.size() != 4 && s.size() != 5)
    throw ShapeError(std::string(op) + ": expected [B, C, S...] with 2 or 3 spatial axes, got " +
                     shape_string(s));
}

// 2-D problems are handled as 3-D with unit depth.
struct ConvGeometry {
  size_t batch, cin, cout;
  ptrdiff_t d, h, w;
  ptrdiff_t kd, kh, kw;
  ptrdiff_t od, oh, ow;
  ptrdiff_t stride, pd, ph, pw;

  size_t in_size() const { return static_cast<size_t>(d * h * w); }
  size_t out_size() const { return static_cast<size_t>(od * oh * ow); }
  size_t kernel_volume() const { return static_cast<size_t>(kd * kh * kw); }
  size_t rows() const { return cin * kernel_volume(); }
  bool direct() const { return kernel_volume() == 1 && stride == 1 && pd == 0 && ph == 0 && pw == 0; }
  size_t lines() const { return static_cast<size_t>(od * oh); }
  size_t lines_per_chunk() const {
    return std::max<size_t>(1, kChunkColumns / static_cast<size_t>(ow));
  }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& wt, const Shape& b, ConvOptions opt) {
  require_spatial(x, "conv");
  if (wt.size() != x.size())
    throw ShapeError("conv: weight rank " + std::to_string(wt.size()) + " does not match input rank " +
                     std::to_string(x.size()));
  if (b.size() != 1 || b[0] != wt[0])
    throw ShapeError("conv: bias shape " + shape_string(b) + " does not match output channels (dimension 0) " +
                     std::to_string(wt[0]));
  if (x[1] != wt[1])
    throw ShapeError("conv: input channels (dimension 1) is " + std::to_string(x[1]) +
                     " but weight expects " + std::to_string(wt[1]));
  if (opt.stride < 1) throw ShapeError("conv: stride must be >= 1");
  ConvGeometry g{};
  g.batch = x[0];
  g.cin = x[1];
  g.cout = wt[0];
  g.stride = static_cast<ptrdiff_t>(opt.stride);
  const auto pad = static_cast<ptrdiff_t>(opt.padding);
  const bool three = x.size() == 5;
  g.d = three ? static_cast<ptrdiff_t>(x[2]) : 1;
  g.h = static_cast<ptrdiff_t>(x[x.size() - 2]);
  g.w = static_cast<ptrdiff_t>(x[x.size() - 1]);
  g.kd = three ? static_cast<ptrdiff_t>(wt[2]) : 1;
  g.kh = static_cast<ptrdiff_t>(wt[wt.size() - 2]);
  g.kw = static_cast<ptrdiff_t>(wt[wt.size() - 1]);
  g.pd = three ? pad : 0;
  g.ph = pad;
  g.pw = pad;
  auto out_extent = [&](ptrdiff_t s, ptrdiff_t k, ptrdiff_t p, size_t axis) {
    if (s + 2 * p < k)
      throw ShapeError("conv: spatial dimension " + std::to_string(axis) + " of extent " +
                       std::to_string(s) + " is smaller than the kernel");
    return (s + 2 * p - k) / g.stride + 1;
  };
  g.od = three ? out_extent(g.d, g.kd, g.pd, 2) : 1;
  g.oh = out_extent(g.h, g.kh, g.ph, x.size() - 2);
  g.ow = out_extent(g.w, g.kw, g.pw, x.size() - 1);
  return g;
}

Shape conv_output_shape(const ConvGeometry& g, size_t rank) {
  if (rank == 5)
    return {g.batch, g.cout, static_cast<size_t>(g.od), static_cast<size_t>(g.oh), static_cast<size_t>(g.ow)};
  return {g.batch, g.cout, static_cast<size_t>(g.oh), static_cast<size_t>(g.ow)};
}

// Valid output columns [lo, hi) for a kernel tap, i.e. 0 <= ox*stride - pad + k < extent.
inline void valid_range(ptrdiff_t out, ptrdiff_t extent, ptrdiff_t stride, ptrdiff_t offset,
                        ptrdiff_t& lo, ptrdiff_t& hi) {
  // offset = k - pad
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const ptrdiff_t last = extent - 1 - offset;
  hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  if (hi < lo) hi = lo;
}

// Lowers output lines [line0, line0 + nlines) of one sample into col (rows x n).
void im2col(const ConvGeometry& g, const double* x, size_t line0, size_t nlines, double* col) {
  const size_t n = nlines * static_cast<size_t>(g.ow);
  size_t row = 0;
  for (size_t ci = 0; ci < g.cin; ++ci) {
    const double* xc = x + ci * g.in_size();
    for (ptrdiff_t kz = 0; kz < g.kd; ++kz)
      for (ptrdiff_t ky = 0; ky < g.kh; ++ky)
        for (ptrdiff_t kx = 0; kx < g.kw; ++kx, ++row) {
          double* dst_row = col + row * n;
          ptrdiff_t lo, hi;
          valid_range(g.ow, g.w, g.stride, kx - g.pw, lo, hi);
          for (size_t l = 0; l < nlines; ++l) {
            const auto line = static_cast<ptrdiff_t>(line0 + l);
            const ptrdiff_t oz = line / g.oh, oy = line % g.oh;
            const ptrdiff_t iz = oz * g.stride - g.pd + kz;
            const ptrdiff_t iy = oy * g.stride - g.ph + ky;
            double* dst = dst_row + l * static_cast<size_t>(g.ow);
            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h) {
              std::fill(dst, dst + g.ow, 0.0);
              continue;
            }
            const double* src = xc + (iz * g.h + iy) * g.w;
            std::fill(dst, dst + lo, 0.0);
            if (g.stride == 1) {
              std::copy(src + lo + kx - g.pw, src + hi + kx - g.pw, dst + lo);
            } else {
              for (ptrdiff_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride - g.pw + kx];
            }
            std::fill(dst + hi, dst + g.ow, 0.0);
          }
        }
  }
}

// Adjoint of im2col: accumulates col into the sample gradient dx.
void col2im(const ConvGeometry& g, const double* col, size_t line0, size_t nlines, double* dx) {
  const size_t n = nlines * static_cast<size_t>(g.ow);
  size_t row = 0;
  for (size_t ci = 0; ci < g.cin; ++ci) {
    double* dxc = dx + ci * g.in_size();
    for (ptrdiff_t kz = 0; kz < g.kd; ++kz)
      for (ptrdiff_t ky = 0; ky < g.kh; ++ky)
        for (ptrdiff_t kx = 0; kx < g.kw; ++kx, ++row) {
          const double* src_row = col + row * n;
          ptrdiff_t lo, hi;
          valid_range(g.ow, g.w, g.stride, kx - g.pw, lo, hi);
          for (size_t l = 0; l < nlines; ++l) {
            const auto line = static_cast<ptrdiff_t>(line0 + l);
            const ptrdiff_t oz = line / g.oh, oy = line % g.oh;
            const ptrdiff_t iz = oz * g.stride - g.pd + kz;
            const ptrdiff_t iy = oy * g.stride - g.ph + ky;
            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h) continue;
            const double* src = src_row + l * static_cast<size_t>(g.ow);
            double* dst = dxc + (iz * g.h + iy) * g.w;
            for (ptrdiff_t ox = lo; ox < hi; ++ox) dst[ox * g.stride - g.pw + kx] += src[ox];
          }
        }
  }
}

void conv_forward_into(const ConvGeometry& g, const double* x, const double* w, const double* b, double* y) {
  const auto& k = kernels::active();
  const size_t out = g.out_size();
  const size_t rows = g.rows();
  const size_t lpc = g.lines_per_chunk();
  std::vector<double> col;
  if (!g.direct()) col.resize(rows * lpc * static_cast<size_t>(g.ow));
  for (size_t s = 0; s < g.batch; ++s) {
    const double* xs = x + s * g.cin * g.in_size();
    double* ys = y + s * g.cout * out;
    for (size_t co = 0; co < g.cout; ++co) std::fill(ys + co * out, ys + (co + 1) * out, b[co]);
    if (g.direct()) {
      k.gemm(g.cout, out, rows, w, rows, 1, xs, out, ys, out);
      continue;
    }
    for (size_t line0 = 0; line0 < g.lines(); line0 += lpc) {
      const size_t nl = std::min(lpc, g.lines() - line0);
      const size_t n = nl * static_cast<size_t>(g.ow);
      im2col(g, xs, line0, nl, col.data());
      k.gemm(g.cout, n, rows, w, rows, 1, col.data(), n, ys + line0 * static_cast<size_t>(g.ow), out);
    }
  }
}

void conv_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy, double* dx,
                   double* dw, double* db) {
  const auto& k = kernels::active();
  const size_t out = g.out_size();
  const size_t rows = g.rows();
  const size_t lpc = g.lines_per_chunk();
  std::vector<double> col, dcol;
  if (!g.direct()) {
    if (dw) col.resize(rows * lpc * static_cast<size_t>(g.ow));
    if (dx) dcol.resize(rows * lpc * static_cast<size_t>(g.ow));
  }
  for (size_t s = 0; s < g.batch; ++s) {
    const double* xs = x + s * g.cin * g.in_size();
    const double* dys = dy + s * g.cout * out;
    if (db)
      for (size_t co = 0; co < g.cout; ++co) {
        double acc = 0.0;
        const double* row = dys + co * out;
        for (size_t i = 0; i < out; ++i) acc += row[i];
        db[co] += acc;
      }
    if (g.direct()) {
      if (dw) k.gemm_abt(g.cout, rows, out, dys, out, xs, out, dw, rows);
      if (dx) k.gemm(rows, out, g.cout, w, 1, rows, dys, out, dx + s * g.cin * g.in_size(), out);
      continue;
    }
    for (size_t line0 = 0; line0 < g.lines(); line0 += lpc) {
      const size_t nl = std::min(lpc, g.lines() - line0);
      const size_t n = nl * static_cast<size_t>(g.ow);
      const double* dyc = dys + line0 * static_cast<size_t>(g.ow);
      if (dw) {
        im2col(g, xs, line0, nl, col.data());
        k.gemm_abt(g.cout, rows, n, dyc, out, col.data(), n, dw, rows);
      }
      if (dx) {
        std::fill(dcol.begin(), dcol.begin() + static_cast<ptrdiff_t>(rows * n), 0.0);
        k.gemm(rows, n, g.cout, w, 1, rows, dyc, out, dcol.data(), n);
        col2im(g, dcol.data(), line0, nl, dx + s * g.cin * g.in_size());
      }
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " does not match " +
                     shape_string(b.shape()));
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NanError(std::string(op) + ": non-finite value in input");
}

}  // namespace

Tensor conv_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvOptions opt) {
  const auto g = conv_geometry(input.shape(), weight.shape(), bias.shape(), opt);
  Tensor y(conv_output_shape(g, input.rank()));
  conv_forward_into(g, input.ptr(), weight.ptr(), bias.ptr(), y.ptr());
  return y;
}

Var conv(Tape& tape, Var input, Var weight, Var bias, ConvOptions opt) {
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const Tensor& b = tape.value(bias);
  const auto g = conv_geometry(x.shape(), w.shape(), b.shape(), opt);
  Tensor y(conv_output_shape(g, x.rank()));
  conv_forward_into(g, x.ptr(), w.ptr(), b.ptr(), y.ptr());
  return tape.record(std::move(y), tape.any_needs_grad({input, weight, bias}),
                     [=](Tape& t, size_t self) {
                       const auto dy = t.grad(self);
                       double* dx = t.needs_grad(input) ? t.grad(input).data() : nullptr;
                       double* dw = t.needs_grad(weight) ? t.grad(weight).data() : nullptr;
                       double* db = t.needs_grad(bias) ? t.grad(bias).data() : nullptr;
                       conv_backward(g, t.value(input).ptr(), t.value(weight).ptr(), dy.data(), dx, dw, db);
                     });
}

Var relu(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  Tensor y(in.shape());
  for (size_t i = 0; i < in.numel(); ++i) y[i] = in[i] < 0.0 ? 0.0 : in[i];  // NaN passes through
  return tape.record(std::move(y), tape.needs_grad(x), [=](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    auto dx = t.grad(x);
    const Tensor& v = t.value(x);
    for (size_t i = 0; i < dy.size(); ++i)
      if (v[i] > 0.0) dx[i] += dy[i];
  });
}

Var maxpool2(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  require_spatial(in.shape(), "maxpool2");
  const bool three = in.rank() == 5;
  for (size_t a = 2; a < in.rank(); ++a)
    if (in.dim(a) % 2 != 0)
      throw ShapeError("maxpool2: spatial dimension " + std::to_string(a) + " has odd extent " +
                       std::to_string(in.dim(a)));
  Shape out_shape = in.shape();
  for (size_t a = 2; a < in.rank(); ++a) out_shape[a] /= 2;
  Tensor y(out_shape);
  std::vector<size_t> argmax(y.numel());
  const size_t planes = in.dim(0) * in.dim(1);
  const size_t D = three ? in.dim(2) : 1, H = in.dim(in.rank() - 2), W = in.dim(in.rank() - 1);
  const size_t OD = three ? D / 2 : 1, OH = H / 2, OW = W / 2;
  const size_t dz_max = three ? 2 : 1;
  size_t o = 0;
  for (size_t p = 0; p < planes; ++p) {
    const size_t base = p * D * H * W;
    for (size_t z = 0; z < OD; ++z)
      for (size_t yy = 0; yy < OH; ++yy)
        for (size_t xx = 0; xx < OW; ++xx, ++o) {
          size_t best = base + ((z * dz_max) * H + 2 * yy) * W + 2 * xx;
          for (size_t dz = 0; dz < dz_max; ++dz)
            for (size_t dy = 0; dy < 2; ++dy)
              for (size_t dx = 0; dx < 2; ++dx) {
                const size_t idx = base + ((z * dz_max + dz) * H + 2 * yy + dy) * W + 2 * xx + dx;
                if (in[idx] > in[best]) best = idx;
              }
          argmax[o] = best;
          y[o] = in[best];
        }
  }
  return tape.record(std::move(y), tape.needs_grad(x), [=, argmax = std::move(argmax)](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    auto dx = t.grad(x);
    for (size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  });
}

Var upsample_nearest2(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  require_spatial(in.shape(), "upsample_nearest2");
  const bool three = in.rank() == 5;
  Shape out_shape = in.shape();
  for (size_t a = 2; a < in.rank(); ++a) out_shape[a] *= 2;
  Tensor y(out_shape);
  const size_t planes = in.dim(0) * in.dim(1);
  const size_t D = three ? in.dim(2) : 1, H = in.dim(in.rank() - 2), W = in.dim(in.rank() - 1);
  const size_t OD = three ? 2 * D : 1, OH = 2 * H, OW = 2 * W;
  const size_t zdiv = three ? 2 : 1;
  // Source index of every output voxel within a plane.
  std::vector<size_t> src(OD * OH * OW);
  for (size_t z = 0, o = 0; z < OD; ++z)
    for (size_t yy = 0; yy < OH; ++yy)
      for (size_t xx = 0; xx < OW; ++xx, ++o) src[o] = ((z / zdiv) * H + yy / 2) * W + xx / 2;
  const size_t in_plane = D * H * W, out_plane = src.size();
  for (size_t p = 0; p < planes; ++p)
    for (size_t o = 0; o < out_plane; ++o) y[p * out_plane + o] = in[p * in_plane + src[o]];
  return tape.record(std::move(y), tape.needs_grad(x),
                     [=, src = std::move(src)](Tape& t, size_t self) {
                       const auto dy = t.grad(self);
                       auto dx = t.grad(x);
                       for (size_t p = 0; p < planes; ++p)
                         for (size_t o = 0; o < out_plane; ++o)
                           dx[p * in_plane + src[o]] += dy[p * out_plane + o];
                     });
}

Var concat_channels(Tape& tape, Var first, Var second) {
  const Tensor& a = tape.value(first);
  const Tensor& b = tape.value(second);
  require_spatial(a.shape(), "concat_channels");
  if (a.rank() != b.rank() || a.dim(0) != b.dim(0))
    throw ShapeError("concat_channels: operands " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ outside the channel axis");
  for (size_t ax = 2; ax < a.rank(); ++ax)
    if (a.dim(ax) != b.dim(ax))
      throw ShapeError("concat_channels: spatial dimension " + std::to_string(ax) + " differs (" +
                       std::to_string(a.dim(ax)) + " vs " + std::to_string(b.dim(ax)) + ")");
  const size_t inner = spatial_size(a.shape());
  const size_t ca = a.dim(1), cb = b.dim(1);
  Shape out_shape = a.shape();
  out_shape[1] = ca + cb;
  Tensor y(out_shape);
  for (size_t s = 0; s < a.dim(0); ++s) {
    std::copy_n(a.ptr() + s * ca * inner, ca * inner, y.ptr() + s * (ca + cb) * inner);
    std::copy_n(b.ptr() + s * cb * inner, cb * inner, y.ptr() + (s * (ca + cb) + ca) * inner);
  }
  const size_t batch = a.dim(0);
  return tape.record(std::move(y), tape.any_needs_grad({first, second}), [=](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    if (t.needs_grad(first)) {
      auto da = t.grad(first);
      for (size_t s = 0; s < batch; ++s)
        for (size_t i = 0; i < ca * inner; ++i) da[s * ca * inner + i] += dy[s * (ca + cb) * inner + i];
    }
    if (t.needs_grad(second)) {
      auto dbv = t.grad(second);
      for (size_t s = 0; s < batch; ++s)
        for (size_t i = 0; i < cb * inner; ++i)
          dbv[s * cb * inner + i] += dy[(s * (ca + cb) + ca) * inner + i];
    }
  });
}

Var sigmoid(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  Tensor y(in.shape());
  for (size_t i = 0; i < in.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-in[i]));
  return tape.record(std::move(y), tape.needs_grad(x), [=](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    auto dx = t.grad(x);
    const Tensor& yv = t.value(Var{self});
    for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
  });
}

Var softmax_channels(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  require_spatial(in.shape(), "softmax_channels");
  const size_t batch = in.dim(0), channels = in.dim(1), inner = spatial_size(in.shape());
  Tensor y(in.shape());
  for (size_t s = 0; s < batch; ++s)
    for (size_t v = 0; v < inner; ++v) {
      const size_t base = s * channels * inner + v;
      double mx = in[base];
      for (size_t c = 1; c < channels; ++c) mx = std::max(mx, in[base + c * inner]);
      double z = 0.0;
      for (size_t c = 0; c < channels; ++c) z += (y[base + c * inner] = std::exp(in[base + c * inner] - mx));
      for (size_t c = 0; c < channels; ++c) y[base + c * inner] /= z;
    }
  return tape.record(std::move(y), tape.needs_grad(x), [=](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    auto dx = t.grad(x);
    const Tensor& yv = t.value(Var{self});
    for (size_t s = 0; s < batch; ++s)
      for (size_t v = 0; v < inner; ++v) {
        const size_t base = s * channels * inner + v;
        double dotp = 0.0;
        for (size_t c = 0; c < channels; ++c) dotp += dy[base + c * inner] * yv[base + c * inner];
        for (size_t c = 0; c < channels; ++c)
          dx[base + c * inner] += yv[base + c * inner] * (dy[base + c * inner] - dotp);
      }
  });
}

Var instance_norm(Tape& tape, Var x, Var gamma, Var beta, double eps) {
  const Tensor& in = tape.value(x);
  const Tensor& ga = tape.value(gamma);
  const Tensor& be = tape.value(beta);
  require_spatial(in.shape(), "instance_norm");
  const size_t batch = in.dim(0), channels = in.dim(1), inner = spatial_size(in.shape());
  if (ga.numel() != channels || be.numel() != channels)
    throw ShapeError("instance_norm: affine parameters must have " + std::to_string(channels) + " entries");
  Tensor y(in.shape());
  std::vector<double> xhat(in.numel()), inv_std(batch * channels);
  for (size_t s = 0; s < batch; ++s)
    for (size_t c = 0; c < channels; ++c) {
      const size_t base = (s * channels + c) * inner;
      double mean = 0.0;
      for (size_t i = 0; i < inner; ++i) mean += in[base + i];
      mean /= static_cast<double>(inner);
      double var = 0.0;
      for (size_t i = 0; i < inner; ++i) var += (in[base + i] - mean) * (in[base + i] - mean);
      var /= static_cast<double>(inner);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[s * channels + c] = is;
      for (size_t i = 0; i < inner; ++i) {
        xhat[base + i] = (in[base + i] - mean) * is;
        y[base + i] = ga[c] * xhat[base + i] + be[c];
      }
    }
  return tape.record(
      std::move(y), tape.any_needs_grad({x, gamma, beta}),
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, size_t self) {
        const auto dy = t.grad(self);
        const Tensor& gv = t.value(gamma);
        double* dx = t.needs_grad(x) ? t.grad(x).data() : nullptr;
        double* dg = t.needs_grad(gamma) ? t.grad(gamma).data() : nullptr;
        double* dbt = t.needs_grad(beta) ? t.grad(beta).data() : nullptr;
        const double m = static_cast<double>(inner);
        for (size_t s = 0; s < batch; ++s)
          for (size_t c = 0; c < channels; ++c) {
            const size_t base = (s * channels + c) * inner;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (size_t i = 0; i < inner; ++i) {
              sum_dy += dy[base + i];
              sum_dy_xhat += dy[base + i] * xhat[base + i];
            }
            if (dg) dg[c] += sum_dy_xhat;
            if (dbt) dbt[c] += sum_dy;
            if (dx) {
              const double scale = gv[c] * inv_std[s * channels + c] / m;
              for (size_t i = 0; i < inner; ++i)
                dx[base + i] += scale * (m * dy[base + i] - sum_dy - xhat[base + i] * sum_dy_xhat);
            }
          }
      });
}

Var channel_scale(Tape& tape, Var x, Tensor scale) {
  const Tensor& in = tape.value(x);
  require_spatial(in.shape(), "channel_scale");
  const size_t batch = in.dim(0), channels = in.dim(1), inner = spatial_size(in.shape());
  if (scale.numel() != batch * channels)
    throw ShapeError("channel_scale: scale must be [B, C] = [" + std::to_string(batch) + ", " +
                     std::to_string(channels) + "], got " + shape_string(scale.shape()));
  Tensor y(in.shape());
  for (size_t p = 0; p < batch * channels; ++p)
    for (size_t i = 0; i < inner; ++i) y[p * inner + i] = in[p * inner + i] * scale[p];
  return tape.record(std::move(y), tape.needs_grad(x),
                     [=, scale = std::move(scale)](Tape& t, size_t self) {
                       const auto dy = t.grad(self);
                       auto dx = t.grad(x);
                       for (size_t p = 0; p < batch * channels; ++p)
                         for (size_t i = 0; i < inner; ++i) dx[p * inner + i] += dy[p * inner + i] * scale[p];
                     });
}

Var sum(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  double acc = 0.0;
  for (double v : in.data()) acc += v;
  return tape.record(Tensor({1}, acc), tape.needs_grad(x), [=](Tape& t, size_t self) {
    const double g = t.grad(self)[0];
    for (double& d : t.grad(x)) d += g;
  });
}

Var square(Tape& tape, Var x) {
  const Tensor& in = tape.value(x);
  Tensor y(in.shape());
  for (size_t i = 0; i < in.numel(); ++i) y[i] = in[i] * in[i];
  return tape.record(std::move(y), tape.needs_grad(x), [=](Tape& t, size_t self) {
    const auto dy = t.grad(self);
    auto dx = t.grad(x);
    const Tensor& v = t.value(x);
    for (size_t i = 0; i < dy.size(); ++i) dx[i] += 2.0 * v[i] * dy[i];
  });
}

Var soft_dice_loss(Tape& tape, Var prediction, Var target) {
  const Tensor& p = tape.value(prediction);
  const Tensor& tg = tape.value(target);
  require_same_shape(p, tg, "soft_dice_loss");
  require_spatial(p.shape(), "soft_dice_loss");
  require_finite(p, "soft_dice_loss");
  require_finite(tg, "soft_dice_loss");
  const size_t batch = p.dim(0), channels = p.dim(1), inner = spatial_size(p.shape());
  std::vector<double> inter(channels, 0.0), psum(channels, 0.0), tsum(channels, 0.0);
  for (size_t s = 0; s < batch; ++s)
    for (size_t c = 0; c < channels; ++c) {
      const size_t base = (s * channels + c) * inner;
      for (size_t i = 0; i < inner; ++i) {
        inter[c] += p[base + i] * tg[base + i];
        psum[c] += p[base + i];
        tsum[c] += tg[base + i];
      }
    }
  double loss = 0.0;
  for (size_t c = 0; c < channels; ++c)
    loss += 1.0 - (2.0 * inter[c] + kDiceEpsilon) / (psum[c] + tsum[c] + kDiceEpsilon);
  loss /= static_cast<double>(channels);
  return tape.record(Tensor({1}, loss), tape.needs_grad(prediction), [=](Tape& t, size_t self) {
    const double g = t.grad(self)[0];
    auto dp = t.grad(prediction);
    const Tensor& tv = t.value(target);
    for (size_t c = 0; c < channels; ++c) {
      const double den = psum[c] + tsum[c] + kDiceEpsilon;
      const double num = 2.0 * inter[c] + kDiceEpsilon;
      const double scale = -g / static_cast<double>(channels) / (den * den);
      for (size_t s = 0; s < batch; ++s) {
        const size_t base = (s * channels + c) * inner;
        for (size_t i = 0; i < inner; ++i) dp[base + i] += scale * (2.0 * tv[base + i] * den - num);
      }
    }
  });
}

Var cross_entropy_loss(Tape& tape, Var prediction, Var target) {
  constexpr double kFloor = 1e-12;
  const Tensor& p = tape.value(prediction);
  const Tensor& tg = tape.value(target);
  require_same_shape(p, tg, "cross_entropy_loss");
  require_spatial(p.shape(), "cross_entropy_loss");
  require_finite(p, "cross_entropy_loss");
  require_finite(tg, "cross_entropy_loss");
  const bool binary = p.dim(1) == 1;
  const double voxels = static_cast<double>(p.numel() / p.dim(1));
  double loss = 0.0;
  for (size_t i = 0; i < p.numel(); ++i) {
    loss -= tg[i] * std::log(std::max(p[i], kFloor));
    if (binary) loss -= (1.0 - tg[i]) * std::log(std::max(1.0 - p[i], kFloor));
  }
  loss /= voxels;
  return tape.record(Tensor({1}, loss), tape.needs_grad(prediction), [=](Tape& t, size_t self) {
    const double g = t.grad(self)[0] / voxels;
    auto dp = t.grad(prediction);
    const Tensor& pv = t.value(prediction);
    const Tensor& tv = t.value(target);
    for (size_t i = 0; i < dp.size(); ++i) {
      double d = -tv[i] / std::max(pv[i], kFloor);
      if (binary) d += (1.0 - tv[i]) / std::max(1.0 - pv[i], kFloor);
      dp[i] += g * d;
    }
  });
}

Var loss(Tape& tape, Var prediction, Var target, LossKind kind) {
  return kind == LossKind::soft_dice ? soft_dice_loss(tape, prediction, target)
                                     : cross_entropy_loss(tape, prediction, target);
}

}  // namespace lunet::ops
