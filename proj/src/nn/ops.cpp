#include "e2d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "e2d/error.hpp"
#include "e2d/simd/kernels.hpp"

namespace e2d::nn {
namespace {

struct SpatialDims {
  std::size_t n, c, h, w;
  bool batched;
};

SpatialDims spatial_dims(const Tensor& t, const char* op) {
  const Shape& s = t.shape();
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  throw ShapeError(std::string(op) + " expects [N,C,H,W] or [C,H,W], got " + shape_string(s));
}

Shape spatial_shape(const SpatialDims& d, std::size_t c, std::size_t h, std::size_t w) {
  return d.batched ? Shape{d.n, c, h, w} : Shape{c, h, w};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dydx) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  Tensor keep_x = x;
  auto values = std::make_shared<std::vector<double>>(out);
  return make_op(x.shape(), std::move(out), {x},
                 [keep_x, values, dydx](std::span<const double> g,
                                        std::span<const std::span<double>> gi) {
                   const auto xin = keep_x.data();
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     gi[0][i] += g[i] * dydx(xin[i], (*values)[i]);
                   }
                 });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void im2col(const double* src, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oy0, std::size_t rows,
            std::size_t wout, double* col) {
  const std::size_t t = rows * wout;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col + ((ci * k + ky) * k + kx) * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto iy = static_cast<std::ptrdiff_t>((oy0 + r) * stride + ky) -
                          static_cast<std::ptrdiff_t>(pad);
          double* drow = dst + r * wout;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(drow, drow + wout, 0.0);
            continue;
          }
          const double* srow = src + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                            static_cast<std::ptrdiff_t>(pad);
            drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : srow[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
                std::size_t stride, std::size_t pad, std::size_t oy0, std::size_t rows,
                std::size_t wout, double* dst) {
  const std::size_t t = rows * wout;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col + ((ci * k + ky) * k + kx) * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto iy = static_cast<std::ptrdiff_t>((oy0 + r) * stride + ky) -
                          static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* drow = dst + (ci * h + static_cast<std::size_t>(iy)) * w;
          const double* srow = src + r * wout;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                            static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

// Upper bound on im2col tile entries (doubles).
constexpr std::size_t kColumnBudget = std::size_t{1} << 17;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  simd::kernels().add(out.size(), a.data().data(), b.data().data(), out.data());
  return make_op(a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, std::span<const std::span<double>> gi) {
                   for (const auto& sink : gi) {
                     if (!sink.empty()) simd::kernels().add(g.size(), sink.data(), g.data(), sink.data());
                   }
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op(a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, std::span<const std::span<double>> gi) {
                   if (!gi[0].empty()) simd::kernels().axpy(g.size(), 1.0, g.data(), gi[0].data());
                   if (!gi[1].empty()) simd::kernels().axpy(g.size(), -1.0, g.data(), gi[1].data());
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  simd::kernels().mul(out.size(), a.data().data(), b.data().data(), out.data());
  Tensor ka = a, kb = b;
  return make_op(a.shape(), std::move(out), {a, b},
                 [ka, kb](std::span<const double> g, std::span<const std::span<double>> gi) {
                   const auto& k = simd::kernels();
                   std::vector<double> tmp(g.size());
                   if (!gi[0].empty()) {
                     k.mul(g.size(), g.data(), kb.data().data(), tmp.data());
                     k.add(g.size(), gi[0].data(), tmp.data(), gi[0].data());
                   }
                   if (!gi[1].empty()) {
                     k.mul(g.size(), g.data(), ka.data().data(), tmp.data());
                     k.add(g.size(), gi[1].data(), tmp.data(), gi[1].data());
                   }
                 });
}

Tensor scale(const Tensor& a, double factor) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_op(a.shape(), std::move(out), {a},
                 [factor](std::span<const double> g, std::span<const std::span<double>> gi) {
                   simd::kernels().axpy(g.size(), factor, g.data(), gi[0].data());
                 });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op(Shape{}, {s}, {a},
                 [](std::span<const double> g, std::span<const std::span<double>> gi) {
                   for (double& v : gi[0]) v += g[0];
                 });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op(std::move(shape), std::move(out), {x},
                 [](std::span<const double> g, std::span<const std::span<double>> gi) {
                   simd::kernels().add(g.size(), gi[0].data(), g.data(), gi[0].data());
                 });
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) throw ShapeError("convolution stride must be positive");
  if (in + 2 * padding < kernel) {
    throw ShapeError("convolution kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  const SpatialDims d = spatial_dims(input, "conv2d");
  const Shape& ws = weight.shape();
  if (ws.size() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv2d weight must be [Cout, Cin, k, k], got " + shape_string(ws));
  }
  if (ws[1] != d.c) {
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(d.c) +
                     " channels, weight expects " + std::to_string(ws[1]));
  }
  const std::size_t cout = ws[0];
  const std::size_t k = ws[2];
  if (bias.defined() && bias.numel() != cout) {
    throw ShapeError("conv2d bias has " + std::to_string(bias.numel()) + " entries, expected " +
                     std::to_string(cout));
  }
  const std::size_t hout = conv_output_size(d.h, k, stride, padding);
  const std::size_t wout = conv_output_size(d.w, k, stride, padding);
  const std::size_t kdim = d.c * k * k;
  const std::size_t plane = hout * wout;
  const std::size_t tile_rows = std::clamp<std::size_t>(kColumnBudget / (kdim * wout), 1, hout);

  std::vector<double> out(d.n * cout * plane);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      const double b = bias.defined() ? bias.data()[co] : 0.0;
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((n * cout + co) * plane), plane, b);
    }
  }

  const auto& kern = simd::kernels();
  std::vector<double> col(kdim * tile_rows * wout);
  const double* src = input.data().data();
  const double* wt = weight.data().data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t oy0 = 0; oy0 < hout; oy0 += tile_rows) {
      const std::size_t rows = std::min(tile_rows, hout - oy0);
      const std::size_t t = rows * wout;
      im2col(src + n * d.c * d.h * d.w, d.c, d.h, d.w, k, stride, padding, oy0, rows, wout,
             col.data());
      kern.gemm(cout, t, kdim, wt, kdim, col.data(), t, out.data() + n * cout * plane + oy0 * wout,
                plane);
    }
  }

  Tensor kin = input, kw = weight;
  return make_op(
      spatial_shape(d, cout, hout, wout), std::move(out), {input, weight, bias},
      [kin, kw, d, cout, k, stride, padding, hout, wout, kdim, plane, tile_rows](
          std::span<const double> g, std::span<const std::span<double>> gi) {
        const auto& kern = simd::kernels();
        const std::span<double> g_in = gi[0], g_w = gi[1], g_b = gi[2];
        if (!g_b.empty()) {
          for (std::size_t n = 0; n < d.n; ++n) {
            for (std::size_t co = 0; co < cout; ++co) {
              const double* row = g.data() + (n * cout + co) * plane;
              double s = 0.0;
              for (std::size_t i = 0; i < plane; ++i) s += row[i];
              g_b[co] += s;
            }
          }
        }
        if (g_in.empty() && g_w.empty()) return;
        std::vector<double> wt_t;
        if (!g_in.empty()) {
          wt_t.resize(kdim * cout);
          transpose(kw.data().data(), cout, kdim, wt_t.data());
        }
        std::vector<double> col(kdim * tile_rows * wout);
        std::vector<double> scratch(kdim * tile_rows * wout);
        const double* src = kin.data().data();
        for (std::size_t n = 0; n < d.n; ++n) {
          for (std::size_t oy0 = 0; oy0 < hout; oy0 += tile_rows) {
            const std::size_t rows = std::min(tile_rows, hout - oy0);
            const std::size_t t = rows * wout;
            const double* gout = g.data() + n * cout * plane + oy0 * wout;
            if (!g_w.empty()) {
              im2col(src + n * d.c * d.h * d.w, d.c, d.h, d.w, k, stride, padding, oy0, rows, wout,
                     col.data());
              transpose(col.data(), kdim, t, scratch.data());
              kern.gemm(cout, kdim, t, gout, plane, scratch.data(), kdim, g_w.data(), kdim);
            }
            if (!g_in.empty()) {
              std::fill_n(col.begin(), kdim * t, 0.0);
              kern.gemm(kdim, t, cout, wt_t.data(), cout, gout, plane, col.data(), t);
              col2im_add(col.data(), d.c, d.h, d.w, k, stride, padding, oy0, rows, wout,
                         g_in.data() + n * d.c * d.h * d.w);
            }
          }
        }
      });
}

Tensor batch_norm(const Tensor& input, Tensor& running_mean, Tensor& running_var,
                  const Tensor& gamma, const Tensor& beta, bool training,
                  BatchNormOptions options) {
  const SpatialDims d = spatial_dims(input, "batch_norm");
  for (const Tensor* t : {static_cast<const Tensor*>(&running_mean), static_cast<const Tensor*>(&running_var), &gamma, &beta}) {
    if (t->numel() != d.c) {
      throw ShapeError("batch_norm parameters must have " + std::to_string(d.c) + " entries");
    }
  }
  const std::size_t plane = d.h * d.w;
  const std::size_t count = d.n * plane;
  const auto x = input.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();

  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(d.c);
  for (std::size_t c = 0; c < d.c; ++c) {
    double mu = 0.0, var = 0.0;
    if (training) {
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = x.data() + (n * d.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mu += p[i];
      }
      mu /= static_cast<double>(count);
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = x.data() + (n * d.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mu) * (p[i] - mu);
      }
      const double unbiased = count > 1 ? var / static_cast<double>(count - 1) : var;
      var /= static_cast<double>(count);
      auto rm = running_mean.mutable_data();
      auto rv = running_var.mutable_data();
      rm[c] = (1.0 - options.momentum) * rm[c] + options.momentum * mu;
      rv[c] = (1.0 - options.momentum) * rv[c] + options.momentum * unbiased;
    } else {
      mu = running_mean.data()[c];
      var = running_var.data()[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + options.eps);
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t off = (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) xhat[off + i] = (x[off + i] - mu) * inv_std[c];
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t off = (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = gm[c] * xhat[off + i] + bt[c];
    }
  }

  Tensor kg = gamma;
  return make_op(
      input.shape(), std::move(out), {input, gamma, beta},
      [kg, d, plane, count, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<const double> g, std::span<const std::span<double>> gi) {
        const auto gm = kg.data();
        for (std::size_t c = 0; c < d.c; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t n = 0; n < d.n; ++n) {
            const std::size_t off = (n * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat[off + i];
            }
          }
          if (!gi[1].empty()) gi[1][c] += sum_gx;
          if (!gi[2].empty()) gi[2][c] += sum_g;
          if (gi[0].empty()) continue;
          const double m = static_cast<double>(count);
          for (std::size_t n = 0; n < d.n; ++n) {
            const std::size_t off = (n * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (training) {
                gi[0][off + i] += gm[c] * inv_std[c] *
                                  (g[off + i] - sum_g / m - xhat[off + i] * sum_gx / m);
              } else {
                gi[0][off + i] += g[off + i] * gm[c] * inv_std[c];
              }
            }
          }
        }
      });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> upsample_taps(std::size_t in) {
  std::vector<Tap> taps(2 * in);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    const auto i0 = std::min(static_cast<std::size_t>(src), in - 1);
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& input) {
  const SpatialDims d = spatial_dims(input, "upsample_bilinear2x");
  if (d.h == 0 || d.w == 0) throw ShapeError("cannot upsample an empty image");
  const std::size_t ho = 2 * d.h, wo = 2 * d.w;
  const auto ty = upsample_taps(d.h);
  const auto tx = upsample_taps(d.w);
  const auto x = input.data();
  std::vector<double> out(d.n * d.c * ho * wo);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const double* src = x.data() + nc * d.h * d.w;
    double* dst = out.data() + nc * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const Tap& b = tx[ox];
        const double top = (1.0 - b.w1) * src[a.i0 * d.w + b.i0] + b.w1 * src[a.i0 * d.w + b.i1];
        const double bot = (1.0 - b.w1) * src[a.i1 * d.w + b.i0] + b.w1 * src[a.i1 * d.w + b.i1];
        dst[oy * wo + ox] = (1.0 - a.w1) * top + a.w1 * bot;
      }
    }
  }
  return make_op(spatial_shape(d, d.c, ho, wo), std::move(out), {input},
                 [d, ho, wo, ty, tx](std::span<const double> g,
                                     std::span<const std::span<double>> gi) {
                   for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
                     const double* go = g.data() + nc * ho * wo;
                     double* dst = gi[0].data() + nc * d.h * d.w;
                     for (std::size_t oy = 0; oy < ho; ++oy) {
                       const Tap& a = ty[oy];
                       for (std::size_t ox = 0; ox < wo; ++ox) {
                         const Tap& b = tx[ox];
                         const double v = go[oy * wo + ox];
                         dst[a.i0 * d.w + b.i0] += (1.0 - a.w1) * (1.0 - b.w1) * v;
                         dst[a.i0 * d.w + b.i1] += (1.0 - a.w1) * b.w1 * v;
                         dst[a.i1 * d.w + b.i0] += a.w1 * (1.0 - b.w1) * v;
                         dst[a.i1 * d.w + b.i1] += a.w1 * b.w1 * v;
                       }
                     }
                   }
                 });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const SpatialDims da = spatial_dims(a, "concat_channels");
  const SpatialDims db = spatial_dims(b, "concat_channels");
  if (da.n != db.n || da.h != db.h || da.w != db.w || da.batched != db.batched) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t plane = da.h * da.w;
  const std::size_t ca = da.c * plane, cb = db.c * plane;
  std::vector<double> out(da.n * (ca + cb));
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(n * ca), ca,
                out.begin() + static_cast<std::ptrdiff_t>(n * (ca + cb)));
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(n * cb), cb,
                out.begin() + static_cast<std::ptrdiff_t>(n * (ca + cb) + ca));
  }
  return make_op(spatial_shape(da, da.c + db.c, da.h, da.w), std::move(out), {a, b},
                 [n = da.n, ca, cb](std::span<const double> g, std::span<const std::span<double>> gi) {
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* src = g.data() + i * (ca + cb);
                     if (!gi[0].empty()) {
                       for (std::size_t j = 0; j < ca; ++j) gi[0][i * ca + j] += src[j];
                     }
                     if (!gi[1].empty()) {
                       for (std::size_t j = 0; j < cb; ++j) gi[1][i * cb + j] += src[ca + j];
                     }
                   }
                 });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end) {
  const SpatialDims d = spatial_dims(x, "slice_channels");
  if (begin >= end || end > d.c) {
    throw ShapeError("slice_channels: bad range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + std::to_string(d.c) + " channels");
  }
  const std::size_t plane = d.h * d.w;
  const std::size_t width = (end - begin) * plane;
  std::vector<double> out(d.n * width);
  for (std::size_t n = 0; n < d.n; ++n) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((n * d.c + begin) * plane), width,
                out.begin() + static_cast<std::ptrdiff_t>(n * width));
  }
  return make_op(spatial_shape(d, end - begin, d.h, d.w), std::move(out), {x},
                 [d, plane, width, begin](std::span<const double> g,
                                          std::span<const std::span<double>> gi) {
                   for (std::size_t n = 0; n < d.n; ++n) {
                     double* dst = gi[0].data() + (n * d.c + begin) * plane;
                     simd::kernels().add(width, dst, g.data() + n * width, dst);
                   }
                 });
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = items.front().shape();
  const std::size_t each = items.front().numel();
  std::vector<double> out;
  out.reserve(each * items.size());
  for (const Tensor& t : items) {
    if (t.shape() != inner) throw ShapeError("stack: mismatched shapes");
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return make_op(std::move(shape), std::move(out), items,
                 [each](std::span<const double> g, std::span<const std::span<double>> gi) {
                   for (std::size_t i = 0; i < gi.size(); ++i) {
                     if (gi[i].empty()) continue;
                     simd::kernels().add(each, gi[i].data(), g.data() + i * each, gi[i].data());
                   }
                 });
}

Tensor select(const Tensor& x, std::size_t index) {
  const Shape& s = x.shape();
  if (s.empty() || index >= s[0]) {
    throw ShapeError("select: index " + std::to_string(index) + " out of range for " +
                     shape_string(s));
  }
  Shape inner(s.begin() + 1, s.end());
  const std::size_t each = shape_numel(inner);
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(index * each),
                          x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * each));
  return make_op(std::move(inner), std::move(out), {x},
                 [each, index](std::span<const double> g, std::span<const std::span<double>> gi) {
                   double* dst = gi[0].data() + index * each;
                   simd::kernels().add(each, dst, g.data(), dst);
                 });
}

}  // namespace e2d::nn
