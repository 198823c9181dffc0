#include "fguap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fguap/errors.hpp"

namespace fguap::ad {

namespace {

Tape& common_tape(const Var& a, const Var& b) {
  Tape& t = a.tape();
  if (&t != &b.tape()) throw std::logic_error("operands live on different tapes");
  return t;
}

std::string mismatch(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
         shape_string(b);
}

void require_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_string(v.dims()));
  }
}

// Elementwise binary op with a caller-supplied local derivative pair.
template <typename Fwd, typename Bwd>
Var binary(const char* op, const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.dims() != y.dims()) throw ShapeError(mismatch(op, x.dims(), y.dims()));
  Tensor out(x.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i], y[i]);
  return tape.record(op, std::move(out), {a, b},
                     [a, b, bwd](Tape& t, const Tensor& g) {
                       Tensor* ga = t.grad_buffer(a);
                       Tensor* gb = t.grad_buffer(b);
                       const Tensor& x = a.value();
                       const Tensor& y = b.value();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         double da = 0.0, db = 0.0;
                         bwd(x[i], y[i], da, db);
                         if (ga) (*ga)[i] += g[i] * da;
                         if (gb) (*gb)[i] += g[i] * db;
                       }
                     });
}

// Range of output positions o in [0, out) whose input coordinate
// o*stride + offset - padding falls inside [0, extent).
struct Span1 {
  std::size_t lo, hi;
};

Span1 valid_range(std::size_t out, std::size_t extent, std::size_t stride,
                  std::size_t offset, std::size_t padding) {
  // o*stride + offset >= padding
  std::size_t lo = 0;
  if (padding > offset) lo = (padding - offset + stride - 1) / stride;
  // o*stride + offset - padding <= extent - 1
  std::size_t hi = 0;
  if (extent + padding > offset) hi = (extent + padding - offset - 1) / stride + 1;
  return {std::min(lo, out), std::min(hi, out)};
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double& da, double& db) { da = 1.0; db = 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double& da, double& db) { da = 1.0; db = -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double& da, double& db) { da = y; db = x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double& da, double& db) {
        da = 1.0 / y;
        db = -x / (y * y);
      });
}

Var add(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  return a.tape().record("add_scalar", std::move(out), {a},
                         [a](Tape& t, const Tensor& g) { t.accumulate_grad(a, g); });
}

Var mul(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.tape().record("mul_scalar", std::move(out), {a},
                         [a, s](Tape& t, const Tensor& g) {
                           Tensor* ga = t.grad_buffer(a);
                           if (!ga) return;
                           for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
                         });
}

Var neg(const Var& a) { return mul(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k) throw ShapeError(mismatch("matmul", x.dims(), y.dims()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = x[i * k + p];
      const double* brow = &y[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return tape.record("matmul", std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, const Tensor& g) {
                       const Tensor& x = a.value();
                       const Tensor& y = b.value();
                       if (Tensor* ga = t.grad_buffer(a)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j)
                               acc += g[i * n + j] * y[p * n + j];
                             (*ga)[i * k + p] += acc;
                           }
                       }
                       if (Tensor* gb = t.grad_buffer(b)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = x[i * k + p];
                             for (std::size_t j = 0; j < n; ++j)
                               (*gb)[p * n + j] += av * g[i * n + j];
                           }
                       }
                     });
}

Var bmm(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t B = x.dim(0), m = x.dim(1), k = x.dim(2), n = y.dim(2);
  if (y.dim(0) != B || y.dim(1) != k) {
    throw ShapeError(mismatch("bmm", x.dims(), y.dims()));
  }
  Tensor out({B, m, n});
  for (std::size_t s = 0; s < B; ++s) {
    const double* xs = &x[s * m * k];
    const double* ys = &y[s * k * n];
    double* os = &out[s * m * n];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = xs[i * k + p];
        for (std::size_t j = 0; j < n; ++j) os[i * n + j] += av * ys[p * n + j];
      }
  }
  return tape.record("bmm", std::move(out), {a, b},
                     [a, b, B, m, k, n](Tape& t, const Tensor& g) {
                       const Tensor& x = a.value();
                       const Tensor& y = b.value();
                       Tensor* ga = t.grad_buffer(a);
                       Tensor* gb = t.grad_buffer(b);
                       for (std::size_t s = 0; s < B; ++s) {
                         const double* xs = &x[s * m * k];
                         const double* ys = &y[s * k * n];
                         const double* gs = &g[s * m * n];
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             if (ga) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < n; ++j)
                                 acc += gs[i * n + j] * ys[p * n + j];
                               (*ga)[s * m * k + i * k + p] += acc;
                             }
                             if (gb) {
                               const double av = xs[i * k + p];
                               double* gbs = &(*gb)[s * k * n + p * n];
                               for (std::size_t j = 0; j < n; ++j)
                                 gbs[j] += av * gs[i * n + j];
                             }
                           }
                       }
                     });
}

namespace {

Tensor transpose_batched(const Tensor& x, std::size_t batch, std::size_t rows,
                         std::size_t cols, Shape out_dims) {
  Tensor out(std::move(out_dims));
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        out[s * rows * cols + j * rows + i] = x[s * rows * cols + i * cols + j];
  return out;
}

}  // namespace

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.value().dim(0), c = a.value().dim(1);
  Tensor out = transpose_batched(a.value(), 1, r, c, {c, r});
  return a.tape().record("transpose", std::move(out), {a},
                         [a, r, c](Tape& t, const Tensor& g) {
                           t.accumulate_grad(a, transpose_batched(g, 1, c, r, {r, c}));
                         });
}

Var transpose_last2(const Var& a) {
  require_rank(a, 3, "transpose_last2");
  const std::size_t B = a.value().dim(0), r = a.value().dim(1), c = a.value().dim(2);
  Tensor out = transpose_batched(a.value(), B, r, c, {B, c, r});
  return a.tape().record("transpose_last2", std::move(out), {a},
                         [a, B, r, c](Tape& t, const Tensor& g) {
                           t.accumulate_grad(a, transpose_batched(g, B, c, r, {B, r, c}));
                         });
}

Var reshape(const Var& a, Shape dims) {
  Tensor out = a.value().reshaped(std::move(dims));
  const Shape original = a.dims();
  return a.tape().record("reshape", std::move(out), {a},
                         [a, original](Tape& t, const Tensor& g) {
                           t.accumulate_grad(a, g.reshaped(original));
                         });
}

Var flatten(const Var& a) {
  if (a.value().rank() < 1) throw ShapeError("flatten: rank-0 input");
  const std::size_t n = a.value().dim(0);
  return reshape(a, {n, a.value().size() / n});
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Tape& tape = common_tape(x, weight);
  common_tape(x, bias);
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  const std::size_t N = xv.dim(0), in = xv.dim(1), out_f = w.dim(0);
  if (w.dim(1) != in) throw ShapeError(mismatch("linear", xv.dims(), w.dims()));
  if (b.dim(0) != out_f) throw ShapeError(mismatch("linear bias", w.dims(), b.dims()));
  Tensor out({N, out_f});
  for (std::size_t n = 0; n < N; ++n) {
    const double* xr = &xv[n * in];
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* wr = &w[o * in];
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out[n * out_f + o] = acc + b[o];
    }
  }
  return tape.record(
      "linear", std::move(out), {x, weight, bias},
      [x, weight, bias, N, in, out_f](Tape& t, const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& w = weight.value();
        if (Tensor* gx = t.grad_buffer(x)) {
          for (std::size_t n = 0; n < N; ++n) {
            double* gxr = &(*gx)[n * in];
            for (std::size_t o = 0; o < out_f; ++o) {
              const double gv = g[n * out_f + o];
              const double* wr = &w[o * in];
              for (std::size_t i = 0; i < in; ++i) gxr[i] += gv * wr[i];
            }
          }
        }
        if (Tensor* gw = t.grad_buffer(weight)) {
          for (std::size_t n = 0; n < N; ++n) {
            const double* xr = &xv[n * in];
            for (std::size_t o = 0; o < out_f; ++o) {
              const double gv = g[n * out_f + o];
              double* gwr = &(*gw)[o * in];
              for (std::size_t i = 0; i < in; ++i) gwr[i] += gv * xr[i];
            }
          }
        }
        if (Tensor* gb = t.grad_buffer(bias)) {
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < out_f; ++o) (*gb)[o] += g[n * out_f + o];
        }
      });
}

Var add_per_sample(const Var& x, const Var& d) {
  Tape& tape = common_tape(x, d);
  const Tensor& xv = x.value();
  const Tensor& dv = d.value();
  if (xv.rank() != dv.rank() + 1 ||
      !std::equal(dv.dims().begin(), dv.dims().end(), xv.dims().begin() + 1)) {
    throw ShapeError(mismatch("add_per_sample", xv.dims(), dv.dims()));
  }
  const std::size_t N = xv.dim(0), stride = dv.size();
  Tensor out = xv;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < stride; ++i) out[n * stride + i] += dv[i];
  return tape.record("add_per_sample", std::move(out), {x, d},
                     [x, d, N, stride](Tape& t, const Tensor& g) {
                       t.accumulate_grad(x, g);
                       if (Tensor* gd = t.grad_buffer(d)) {
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t i = 0; i < stride; ++i)
                             (*gd)[i] += g[n * stride + i];
                       }
                     });
}

namespace {

struct ConvGeom {
  std::size_t N, C, H, W, F, K, OH, OW, stride, pad;
};

ConvGeom conv_geometry(const Tensor& in, const Tensor& k, std::size_t stride,
                       std::size_t padding) {
  if (in.rank() != 4 || k.rank() != 4 || k.dim(1) != in.dim(1) ||
      k.dim(2) != k.dim(3)) {
    throw ShapeError(mismatch("conv2d", in.dims(), k.dims()));
  }
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  ConvGeom g{in.dim(0), in.dim(1), in.dim(2), in.dim(3), k.dim(0), k.dim(2),
             0,         0,         stride,    padding};
  if (g.K > g.H + 2 * padding || g.K > g.W + 2 * padding) {
    throw ShapeError("conv2d: kernel " + shape_string(k.dims()) +
                     " larger than padded input " + shape_string(in.dims()) +
                     " with padding " + std::to_string(padding));
  }
  g.OH = (g.H + 2 * padding - g.K) / stride + 1;
  g.OW = (g.W + 2 * padding - g.K) / stride + 1;
  return g;
}

Var conv2d_impl(const Var& input, const Var& kernel, const Var* bias,
                std::size_t stride, std::size_t padding) {
  Tape& tape = common_tape(input, kernel);
  const Tensor& in = input.value();
  const Tensor& ker = kernel.value();
  const ConvGeom G = conv_geometry(in, ker, stride, padding);
  if (bias) {
    common_tape(input, *bias);
    if (bias->value().rank() != 1 || bias->value().dim(0) != G.F) {
      throw ShapeError(mismatch("conv2d bias", ker.dims(), bias->dims()));
    }
  }
  Tensor out({G.N, G.F, G.OH, G.OW});
  const std::size_t in_plane = G.H * G.W, out_plane = G.OH * G.OW;
  for (std::size_t n = 0; n < G.N; ++n)
    for (std::size_t f = 0; f < G.F; ++f) {
      double* o = &out[(n * G.F + f) * out_plane];
      if (bias) std::fill(o, o + out_plane, bias->value()[f]);
      for (std::size_t c = 0; c < G.C; ++c) {
        const double* src = &in[(n * G.C + c) * in_plane];
        const double* w = &ker[(f * G.C + c) * G.K * G.K];
        for (std::size_t ki = 0; ki < G.K; ++ki) {
          const Span1 rows = valid_range(G.OH, G.H, G.stride, ki, G.pad);
          for (std::size_t kj = 0; kj < G.K; ++kj) {
            const Span1 cols = valid_range(G.OW, G.W, G.stride, kj, G.pad);
            const double wv = w[ki * G.K + kj];
            for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
              const double* srow = src + (oh * G.stride + ki - G.pad) * G.W;
              double* orow = o + oh * G.OW;
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                orow[ow] += wv * srow[ow * G.stride + kj - G.pad];
            }
          }
        }
      }
    }

  std::vector<Var> inputs{input, kernel};
  Var bias_var;
  if (bias) {
    inputs.push_back(*bias);
    bias_var = *bias;
  }
  const bool has_bias = bias != nullptr;
  return tape.record(
      "conv2d", std::move(out), std::move(inputs),
      [input, kernel, bias_var, has_bias, G](Tape& t, const Tensor& g) {
        const Tensor& in = input.value();
        const Tensor& ker = kernel.value();
        Tensor* gin = t.grad_buffer(input);
        Tensor* gk = t.grad_buffer(kernel);
        const std::size_t in_plane = G.H * G.W, out_plane = G.OH * G.OW;
        for (std::size_t n = 0; n < G.N; ++n)
          for (std::size_t f = 0; f < G.F; ++f) {
            const double* go = &g[(n * G.F + f) * out_plane];
            for (std::size_t c = 0; c < G.C; ++c) {
              const std::size_t in_off = (n * G.C + c) * in_plane;
              const std::size_t k_off = (f * G.C + c) * G.K * G.K;
              for (std::size_t ki = 0; ki < G.K; ++ki) {
                const Span1 rows = valid_range(G.OH, G.H, G.stride, ki, G.pad);
                for (std::size_t kj = 0; kj < G.K; ++kj) {
                  const Span1 cols = valid_range(G.OW, G.W, G.stride, kj, G.pad);
                  const double wv = ker[k_off + ki * G.K + kj];
                  double wacc = 0.0;
                  for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
                    const std::size_t row_off =
                        in_off + (oh * G.stride + ki - G.pad) * G.W;
                    const double* grow = go + oh * G.OW;
                    if (gin) {
                      double* dst = &(*gin)[row_off];
                      for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                        dst[ow * G.stride + kj - G.pad] += wv * grow[ow];
                    }
                    if (gk) {
                      const double* srow = &in[row_off];
                      for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                        wacc += grow[ow] * srow[ow * G.stride + kj - G.pad];
                    }
                  }
                  if (gk) (*gk)[k_off + ki * G.K + kj] += wacc;
                }
              }
            }
          }
        if (has_bias) {
          if (Tensor* gb = t.grad_buffer(bias_var)) {
            for (std::size_t n = 0; n < G.N; ++n)
              for (std::size_t f = 0; f < G.F; ++f) {
                const double* go = &g[(n * G.F + f) * out_plane];
                double acc = 0.0;
                for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
                (*gb)[f] += acc;
              }
          }
        }
      });
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias,
           std::size_t stride, std::size_t padding) {
  return conv2d_impl(input, kernel, &bias, stride, padding);
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride,
           std::size_t padding) {
  return conv2d_impl(input, kernel, nullptr, stride, padding);
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape().record("relu", std::move(out), {x},
                         [x](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           const Tensor& v = x.value();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (v[i] > 0.0) (*gx)[i] += g[i];
                         });
}

Var max_pool2d(const Var& x, std::size_t window) {
  require_rank(x, 4, "max_pool2d");
  if (window < 1) throw ArgumentError("max_pool2d: window must be >= 1");
  const Tensor& in = x.value();
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t OH = H / window, OW = W / window;
  if (OH == 0 || OW == 0) {
    throw ShapeError("max_pool2d: window " + std::to_string(window) +
                     " larger than input " + shape_string(in.dims()));
  }
  Tensor out({N, C, OH, OW});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < N * C; ++p) {
    const double* src = &in[p * H * W];
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::size_t best = (oh * window) * W + ow * window;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = (oh * window + i) * W + ow * window + j;
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = (p * OH + oh) * OW + ow;
        out[o] = src[best];
        argmax[o] = p * H * W + best;
      }
  }
  return x.tape().record("max_pool2d", std::move(out), {x},
                         [x, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t i = 0; i < g.size(); ++i)
                             (*gx)[argmax[i]] += g[i];
                         });
}

Var mean_pool(const Var& x) {
  require_rank(x, 3, "mean_pool");
  const std::size_t N = x.value().dim(0), P = x.value().dim(1), D = x.value().dim(2);
  const Tensor& in = x.value();
  Tensor out({N, D});
  const double inv = 1.0 / static_cast<double>(P);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t d = 0; d < D; ++d) out[n * D + d] += in[(n * P + p) * D + d];
    for (std::size_t d = 0; d < D; ++d) out[n * D + d] *= inv;
  }
  return x.tape().record("mean_pool", std::move(out), {x},
                         [x, N, P, D, inv](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t n = 0; n < N; ++n)
                             for (std::size_t p = 0; p < P; ++p)
                               for (std::size_t d = 0; d < D; ++d)
                                 (*gx)[(n * P + p) * D + d] += g[n * D + d] * inv;
                         });
}

namespace {

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
  if (t.rank() < 1) throw ShapeError(std::string(op) + ": rank-0 input");
  const std::size_t cols = t.dims().back();
  return {t.size() / cols, cols};
}

}  // namespace

Var softmax(const Var& x) {
  const auto [rows, cols] = rows_cols(x.value(), "softmax");
  const Tensor& in = x.value();
  Tensor out(in.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = &in[r * cols];
    double* dst = &out[r * cols];
    const double m = *std::max_element(src, src + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (dst[j] = std::exp(src[j] - m));
    for (std::size_t j = 0; j < cols; ++j) dst[j] /= z;
  }
  Tensor y = out;
  return x.tape().record("softmax", std::move(out), {x},
                         [x, y = std::move(y), rows, cols](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < cols; ++j)
                               dot += g[r * cols + j] * y[r * cols + j];
                             for (std::size_t j = 0; j < cols; ++j)
                               (*gx)[r * cols + j] += y[r * cols + j] * (g[r * cols + j] - dot);
                           }
                         });
}

Var log_softmax(const Var& x) {
  const auto [rows, cols] = rows_cols(x.value(), "log_softmax");
  const Tensor& in = x.value();
  Tensor out(in.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = &in[r * cols];
    const double m = *std::max_element(src, src + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(src[j] - m);
    const double lse = m + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = src[j] - lse;
  }
  Tensor y = out;
  return x.tape().record("log_softmax", std::move(out), {x},
                         [x, y = std::move(y), rows, cols](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             double gsum = 0.0;
                             for (std::size_t j = 0; j < cols; ++j) gsum += g[r * cols + j];
                             for (std::size_t j = 0; j < cols; ++j)
                               (*gx)[r * cols + j] +=
                                   g[r * cols + j] - std::exp(y[r * cols + j]) * gsum;
                           }
                         });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.tape().record("sum", Tensor::scalar(acc), {x},
                         [x](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           const double gv = g[0];
                           for (double& v : gx->data()) v += gv;
                         });
}

Var mean(const Var& x) {
  return mul(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {

Var cosine_impl(const char* op, const Var& a, const Var& b, std::size_t rows,
                std::size_t cols, Shape out_dims) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(std::move(out_dims));
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xv = x[r * cols + j], yv = y[r * cols + j];
      dot += xv * yv;
      xx += xv * xv;
      yy += yv * yv;
    }
    if (xx == 0.0 || yy == 0.0) {
      throw DegenerateFeatureError(std::string(op) + ": zero-norm input (row " +
                                   std::to_string(r) + ")");
    }
    na[r] = std::sqrt(xx);
    nb[r] = std::sqrt(yy);
    out[r] = std::clamp(dot / (na[r] * nb[r]), -1.0, 1.0);
  }
  Tensor c = out;
  return tape.record(
      op, std::move(out), {a, b},
      [a, b, rows, cols, na = std::move(na), nb = std::move(nb),
       c = std::move(c)](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        const Tensor& y = b.value();
        Tensor* ga = t.grad_buffer(a);
        Tensor* gb = t.grad_buffer(b);
        for (std::size_t r = 0; r < rows; ++r) {
          const double inv = 1.0 / (na[r] * nb[r]);
          const double ca = c[r] / (na[r] * na[r]);
          const double cb = c[r] / (nb[r] * nb[r]);
          for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t i = r * cols + j;
            if (ga) (*ga)[i] += g[r] * (y[i] * inv - ca * x[i]);
            if (gb) (*gb)[i] += g[r] * (x[i] * inv - cb * y[i]);
          }
        }
      });
}

}  // namespace

Var cosine_similarity(const Var& a, const Var& b) {
  require_rank(a, 1, "cosine_similarity");
  if (a.dims() != b.dims()) {
    throw ShapeError(mismatch("cosine_similarity", a.dims(), b.dims()));
  }
  return cosine_impl("cosine_similarity", a, b, 1, a.value().size(), {});
}

Var cosine_similarity_rows(const Var& a, const Var& b) {
  require_rank(a, 2, "cosine_similarity_rows");
  if (a.dims() != b.dims()) {
    throw ShapeError(mismatch("cosine_similarity_rows", a.dims(), b.dims()));
  }
  const std::size_t rows = a.value().dim(0);
  return cosine_impl("cosine_similarity_rows", a, b, rows, a.value().dim(1), {rows});
}

Var clamp(const Var& x, double lo, double hi) {
  if (!(lo <= hi)) {
    throw ArgumentError("clamp: lower bound " + std::to_string(lo) +
                        " exceeds upper bound " + std::to_string(hi));
  }
  Tensor out = x.value();
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return x.tape().record("clamp", std::move(out), {x},
                         [x, lo, hi](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           const Tensor& v = x.value();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (v[i] >= lo && v[i] <= hi) (*gx)[i] += g[i];
                         });
}

Var pick(const Var& x, std::span<const std::size_t> index) {
  require_rank(x, 2, "pick");
  const std::size_t N = x.value().dim(0), K = x.value().dim(1);
  if (index.size() != N) {
    throw ShapeError("pick: " + std::to_string(index.size()) +
                     " indices for input " + shape_string(x.dims()));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out({N});
  for (std::size_t n = 0; n < N; ++n) {
    if (idx[n] >= K) {
      throw ArgumentError("pick: index " + std::to_string(idx[n]) +
                          " out of range for " + std::to_string(K) + " columns");
    }
    out[n] = x.value()[n * K + idx[n]];
  }
  return x.tape().record("pick", std::move(out), {x},
                         [x, K, idx = std::move(idx)](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t n = 0; n < idx.size(); ++n)
                             (*gx)[n * K + idx[n]] += g[n];
                         });
}

Var patchify(const Var& x, std::size_t patch) {
  require_rank(x, 4, "patchify");
  const Tensor& in = x.value();
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  if (patch == 0 || H % patch != 0 || W % patch != 0) {
    throw ShapeError("patchify: patch " + std::to_string(patch) +
                     " does not tile input " + shape_string(in.dims()));
  }
  const std::size_t PH = H / patch, PW = W / patch, D = C * patch * patch;
  // map[o] = flat input index feeding output element o
  std::vector<std::size_t> map(N * PH * PW * D);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t pr = 0; pr < PH; ++pr)
      for (std::size_t pc = 0; pc < PW; ++pc)
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < patch; ++i)
            for (std::size_t j = 0; j < patch; ++j) {
              const std::size_t o = ((n * PH + pr) * PW + pc) * D +
                                    (c * patch + i) * patch + j;
              map[o] = ((n * C + c) * H + pr * patch + i) * W + pc * patch + j;
            }
  Tensor out({N, PH * PW, D});
  for (std::size_t o = 0; o < map.size(); ++o) out[o] = in[map[o]];
  return x.tape().record("patchify", std::move(out), {x},
                         [x, map = std::move(map)](Tape& t, const Tensor& g) {
                           Tensor* gx = t.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t o = 0; o < map.size(); ++o)
                             (*gx)[map[o]] += g[o];
                         });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
  return neg(mean(pick(log_softmax(logits), labels)));
}

}  // namespace fguap::ad
