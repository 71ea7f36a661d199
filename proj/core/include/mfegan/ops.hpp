#pragma once

#include <span>
#include <vector>

#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

// Differentiable tensor operations.  Every op validates shapes
// (DimensionError), checks its output for NaN/Inf (NumericError) and, when a
// tape is recording and any input is gradient-tracked, appends a backward
// node.  Outputs produced while recording are non-leaf tensors.
namespace mfegan::ops {

// y[b,o] = sum_i x[b,i] * w[i,o] + bias[o];   x:[B,I]  w:[I,O]  bias:[O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// y[b,c,h,w] = x[b,c,h,w] + bias[c];   x:[B,C,H,W]  bias:[C]
Tensor channel_bias(const Tensor& x, const Tensor& bias);

// Cross-correlation with zero padding.  x:[B,Ci,H,W]  k:[Co,Ci,Kh,Kw]
// out spatial = floor((in + 2*pad - kernel) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int pad);

// Transposed convolution (the adjoint of conv2d with the same geometry).
// x:[B,Ci,H,W]  k:[Ci,Co,Kh,Kw];  out spatial = (in-1)*stride - 2*pad + kernel.
// The data gradient of deconv2d is conv2d of the incoming gradient with the
// same kernel, and vice versa.
Tensor deconv2d(const Tensor& x, const Tensor& k, int stride, int pad);

// Per-channel batch normalization over [B,C,H,W].
//   train=true : normalizes by batch statistics (needs >= 2 values per
//                channel, otherwise DataError) and, when update_running is
//                also true, folds them into running_mean/var with the given
//                momentum (unbiased variance).
//   train=false: normalizes by the running statistics.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<float>& running_mean,
                   std::vector<float>& running_var, bool train,
                   bool update_running, float eps = 1e-5f,
                   float momentum = 0.1f);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);

// log(max(x, floor)); the gradient is 1/x where x > floor and 0 in the
// clamped region.
Tensor log_clamped(const Tensor& x, float floor = 1e-12f);

// Row-wise log-softmax over the last axis of a [B,K] tensor, computed with
// the max-subtraction trick (float64 inner accumulation).
Tensor log_softmax(const Tensor& x);

// Inverted dropout: each kept value is scaled by 1/(1-p) so eval needs no
// rescaling.  Call only on the training path; p in [0,1).
Tensor dropout(const Tensor& x, float p, Rng& rng);
// Same arithmetic with a caller-supplied keep mask (entries 0 or 1); used by
// tests that need a pinned mask.
Tensor dropout_with_mask(const Tensor& x, const std::vector<float>& keep,
                         float p);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor mul(const Tensor& a, const Tensor& b);  // same shape, elementwise
Tensor affine(const Tensor& x, float scale, float shift);  // scale*x + shift
Tensor square(const Tensor& x);

inline Tensor one_minus(const Tensor& x) { return affine(x, -1.0f, 1.0f); }
inline Tensor neg(const Tensor& x) { return affine(x, -1.0f, 0.0f); }

Tensor reshape(const Tensor& x, Shape target);

// [B,I] ++ [B,J] -> [B,I+J]
Tensor concat_cols(const Tensor& a, const Tensor& b);
// Columns [start, start+len) of a [B,K] tensor.
Tensor slice_cols(const Tensor& x, int start, int len);
// y[b,0] = x[b, idx[b]];  idx values in [0,K).
Tensor gather_cols(const Tensor& x, std::span<const int> idx);

// Scalar reductions.  Sums are accumulated in float64 and the exact value is
// carried on the scalar output (item_f64()).
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean negative log-likelihood: -(1/B) * sum_b logp[b, target[b]].
// logp:[B,K]; targets in [0,K).
Tensor nll(const Tensor& logp, std::span<const int> targets);

}  // namespace mfegan::ops
