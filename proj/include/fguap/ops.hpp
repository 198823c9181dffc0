#pragma once

#include <cstddef>
#include <span>

#include "fguap/autodiff.hpp"

// Differentiable primitives. Every function records exactly one node on the
// tape shared by its inputs. Broadcasting exists only between a tensor and a
// scalar; the few structured broadcasts the models need (row bias, per-sample
// offset) are separate named ops.
namespace fguap::ad {

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

// Tensor-scalar.
Var add(const Var& a, double s);
Var mul(const Var& a, double s);
Var neg(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator+(const Var& a, double s) { return add(a, s); }
inline Var operator-(const Var& a, double s) { return add(a, -s); }
inline Var operator*(const Var& a, double s) { return mul(a, s); }
inline Var operator*(double s, const Var& a) { return mul(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
/// Batched: [B,m,k] x [B,k,n] -> [B,m,n]
Var bmm(const Var& a, const Var& b);
/// 2-D transpose.
Var transpose(const Var& a);
/// Swaps the last two axes of a rank-3 tensor.
Var transpose_last2(const Var& a);
Var reshape(const Var& a, Shape dims);
/// [N, ...] -> [N, prod(...)]
Var flatten(const Var& a);

/// y = x W^T + b for x [N,in], W [out,in], b [out].
Var linear(const Var& x, const Var& weight, const Var& bias);
/// x [N,...] + d, where d has the dims of one sample.
Var add_per_sample(const Var& x, const Var& d);

/// Valid cross-correlation. input [N,C,H,W], kernel [F,C,k,k], bias [F].
Var conv2d(const Var& input, const Var& kernel, const Var& bias,
           std::size_t stride, std::size_t padding);
/// Same without a bias term.
Var conv2d(const Var& input, const Var& kernel, std::size_t stride,
           std::size_t padding);

/// max(x, 0); subgradient 0 at 0.
Var relu(const Var& x);
/// Non-overlapping window max over [N,C,H,W]; trailing rows/cols dropped.
Var max_pool2d(const Var& x, std::size_t window);
/// [N,P,D] -> [N,D], average over axis 1.
Var mean_pool(const Var& x);
/// Softmax along the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

/// Cosine similarity of two 1-D tensors. Throws DegenerateFeatureError when
/// either norm is exactly zero.
Var cosine_similarity(const Var& a, const Var& b);
/// Row-wise cosine similarity for [N,d] inputs -> [N].
Var cosine_similarity_rows(const Var& a, const Var& b);

/// Elementwise clamp to [lo, hi]. Gradient passes where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);

/// out[n] = x[n, index[n]] for x [N,K].
Var pick(const Var& x, std::span<const std::size_t> index);

/// [N,C,H,W] -> [N, (H/p)*(W/p), C*p*p], patches in row-major order.
Var patchify(const Var& x, std::size_t patch);

/// Mean negative log-likelihood of labels under softmax(logits).
Var cross_entropy(const Var& logits, std::span<const std::size_t> labels);

}  // namespace fguap::ad
