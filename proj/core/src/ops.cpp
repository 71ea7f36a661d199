#include "mfegan/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace mfegan::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using MapC = Eigen::Map<const RowMat>;

bool tracked(const Tensor& t) { return t.defined() && t.requires_grad(); }

// Validates the output, and records the backward node when a tape is active
// and at least one input carries gradient.
void finish(Tensor& out, const char* what, bool any_tracked,
            std::vector<Tensor> pinned, BackwardFn fn) {
  check_finite(out.values(), what);
  Tape* tape = current_tape();
  if (tape && any_tracked) {
    out.impl()->leaf = false;
    out.impl()->requires_grad = true;
    tape->record(out, std::move(pinned), std::move(fn));
  }
}

void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// ---- conv/deconv geometry helpers -----------------------------------------

// Unfolds one [C,H,W] sample into a (C*Kh*Kw) x (OH*OW) row-major matrix of
// padded receptive-field values.
void im2col(const float* src, int C, int H, int W, int Kh, int Kw, int s,
            int p, int OH, int OW, float* col) {
  const std::size_t ohw = static_cast<std::size_t>(OH) * OW;
  float* crow = col;
  for (int c = 0; c < C; ++c) {
    const float* plane = src + static_cast<std::size_t>(c) * H * W;
    for (int kh = 0; kh < Kh; ++kh) {
      for (int kw = 0; kw < Kw; ++kw) {
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * s - p + kh;
          float* dst = crow + static_cast<std::size_t>(oh) * OW;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + OW, 0.0f);
            continue;
          }
          const float* srow = plane + static_cast<std::size_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * s - p + kw;
            dst[ow] = (iw >= 0 && iw < W) ? srow[iw] : 0.0f;
          }
        }
        crow += ohw;
      }
    }
  }
}

// Adjoint of im2col: scatter-adds a column matrix back onto the [C,H,W] grid.
void col2im_add(const float* col, int C, int H, int W, int Kh, int Kw, int s,
                int p, int OH, int OW, float* dst) {
  const std::size_t ohw = static_cast<std::size_t>(OH) * OW;
  const float* crow = col;
  for (int c = 0; c < C; ++c) {
    float* plane = dst + static_cast<std::size_t>(c) * H * W;
    for (int kh = 0; kh < Kh; ++kh) {
      for (int kw = 0; kw < Kw; ++kw) {
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * s - p + kh;
          if (ih < 0 || ih >= H) continue;
          const float* srow = crow + static_cast<std::size_t>(oh) * OW;
          float* drow = plane + static_cast<std::size_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * s - p + kw;
            if (iw >= 0 && iw < W) drow[iw] += srow[ow];
          }
        }
        crow += ohw;
      }
    }
  }
}

int conv_out_extent(int in, int k, int s, int p, const char* what) {
  const int span = in + 2 * p - k;
  if (span < 0) {
    throw DimensionError(std::string(what) + ": kernel " + std::to_string(k) +
                         " exceeds padded input " + std::to_string(in + 2 * p));
  }
  return span / s + 1;
}

}  // namespace

// ---- dense -----------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const int B = x.dim(0), I = x.dim(1), O = w.dim(1);
  if (w.dim(0) != I || bias.dim(0) != O) {
    throw DimensionError("linear: x " + shape_str(x.shape()) + " w " +
                         shape_str(w.shape()) + " bias " +
                         shape_str(bias.shape()) + " do not agree");
  }

  Tensor y = Tensor::zeros({B, O});
  {
    MapC xm(x.data(), B, I), wm(w.data(), I, O);
    MapM ym(y.data(), B, O);
    ym.noalias() = xm * wm;
    for (int b = 0; b < B; ++b) {
      float* row = y.data() + static_cast<std::size_t>(b) * O;
      const float* bp = bias.data();
      for (int o = 0; o < O; ++o) row[o] += bp[o];
    }
  }

  const bool tx = tracked(x), tw = tracked(w), tb = tracked(bias);
  Tensor out = y;
  finish(out, "linear", tx || tw || tb, {x, w, bias},
         [x, w, bias, out, B, I, O, tx, tw, tb](GradStore& store) {
           const float* g = store.grad_of(out);
           MapC gm(g, B, O);
           if (tx) {
             MapM gxm(store.grad_accum(x), B, I);
             MapC wm(w.data(), I, O);
             gxm.noalias() += gm * wm.transpose();
           }
           if (tw) {
             MapM gwm(store.grad_accum(w), I, O);
             MapC xm(x.data(), B, I);
             gwm.noalias() += xm.transpose() * gm;
           }
           if (tb) {
             float* gb = store.grad_accum(bias);
             for (int b = 0; b < B; ++b) {
               const float* row = g + static_cast<std::size_t>(b) * O;
               for (int o = 0; o < O; ++o) gb[o] += row[o];
             }
           }
         });
  return out;
}

Tensor channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 4, "channel_bias");
  require_rank(bias, 1, "channel_bias");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (bias.dim(0) != C) {
    throw DimensionError("channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  Tensor y = Tensor::zeros(x.shape());
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
      const float add = bias.data()[c];
      const float* src = x.data() + base;
      float* dst = y.data() + base;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + add;
    }
  }

  const bool tx = tracked(x), tb = tracked(bias);
  Tensor out = y;
  finish(out, "channel_bias", tx || tb, {x, bias},
         [x, bias, out, B, C, hw, tx, tb](GradStore& store) {
           const float* g = store.grad_of(out);
           if (tx) {
             float* gx = store.grad_accum(x);
             const std::size_t n = static_cast<std::size_t>(B) * C * hw;
             for (std::size_t i = 0; i < n; ++i) gx[i] += g[i];
           }
           if (tb) {
             float* gb = store.grad_accum(bias);
             for (int b = 0; b < B; ++b) {
               for (int c = 0; c < C; ++c) {
                 const float* row = g + (static_cast<std::size_t>(b) * C + c) * hw;
                 double acc = 0.0;
                 for (std::size_t i = 0; i < hw; ++i) acc += row[i];
                 gb[c] += static_cast<float>(acc);
               }
             }
           }
         });
  return out;
}

// ---- convolutions ----------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(k, 4, "conv2d kernel");
  if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
  if (pad < 0) throw ParameterError("conv2d: pad must be >= 0");
  const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = k.dim(0), Kh = k.dim(2), Kw = k.dim(3);
  if (k.dim(1) != Ci) {
    throw DimensionError("conv2d: kernel " + shape_str(k.shape()) +
                         " does not match input channels of " +
                         shape_str(x.shape()));
  }
  const int OH = conv_out_extent(H, Kh, stride, pad, "conv2d");
  const int OW = conv_out_extent(W, Kw, stride, pad, "conv2d");
  const int Kdim = Ci * Kh * Kw;
  const std::size_t ohw = static_cast<std::size_t>(OH) * OW;
  const std::size_t col_sample = static_cast<std::size_t>(Kdim) * ohw;

  Tensor y = Tensor::zeros({B, Co, OH, OW});
  auto col = std::make_shared<std::vector<float>>(col_sample * B);
  {
    MapC km(k.data(), Co, Kdim);
    for (int b = 0; b < B; ++b) {
      float* col_b = col->data() + col_sample * b;
      im2col(x.data() + static_cast<std::size_t>(b) * Ci * H * W, Ci, H, W, Kh,
             Kw, stride, pad, OH, OW, col_b);
      MapC colm(col_b, Kdim, static_cast<int>(ohw));
      MapM ym(y.data() + static_cast<std::size_t>(b) * Co * ohw, Co,
              static_cast<int>(ohw));
      ym.noalias() = km * colm;
    }
  }

  const bool tx = tracked(x), tk = tracked(k);
  Tensor out = y;
  finish(out, "conv2d", tx || tk, {x, k},
         [x, k, out, col, B, Ci, H, W, Co, Kh, Kw, stride, pad, OH, OW, Kdim,
          ohw, col_sample, tx, tk](GradStore& store) {
           const float* g = store.grad_of(out);
           MapC km(k.data(), Co, Kdim);
           std::vector<float> dcol(tx ? col_sample : 0);
           for (int b = 0; b < B; ++b) {
             MapC gm(g + static_cast<std::size_t>(b) * Co * ohw, Co,
                     static_cast<int>(ohw));
             MapC colm(col->data() + col_sample * b, Kdim,
                       static_cast<int>(ohw));
             if (tk) {
               MapM gkm(store.grad_accum(k), Co, Kdim);
               gkm.noalias() += gm * colm.transpose();
             }
             if (tx) {
               MapM dcolm(dcol.data(), Kdim, static_cast<int>(ohw));
               dcolm.noalias() = km.transpose() * gm;
               col2im_add(dcol.data(), Ci, H, W, Kh, Kw, stride, pad, OH, OW,
                          store.grad_accum(x) +
                              static_cast<std::size_t>(b) * Ci * H * W);
             }
           }
         });
  return out;
}

Tensor deconv2d(const Tensor& x, const Tensor& k, int stride, int pad) {
  require_rank(x, 4, "deconv2d");
  require_rank(k, 4, "deconv2d kernel");
  if (stride < 1) throw ParameterError("deconv2d: stride must be >= 1");
  if (pad < 0) throw ParameterError("deconv2d: pad must be >= 0");
  const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = k.dim(1), Kh = k.dim(2), Kw = k.dim(3);
  if (k.dim(0) != Ci) {
    throw DimensionError("deconv2d: kernel " + shape_str(k.shape()) +
                         " does not match input channels of " +
                         shape_str(x.shape()));
  }
  const int OH = (H - 1) * stride - 2 * pad + Kh;
  const int OW = (W - 1) * stride - 2 * pad + Kw;
  if (OH < 1 || OW < 1) {
    throw DimensionError("deconv2d: output extent would be non-positive");
  }
  // Viewed as the adjoint of a convolution whose input is the [Co,OH,OW]
  // output here and whose output is the [Ci,H,W] input here.
  const int Kdim = Co * Kh * Kw;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const std::size_t out_chw = static_cast<std::size_t>(Co) * OH * OW;

  Tensor y = Tensor::zeros({B, Co, OH, OW});
  {
    MapC km(k.data(), Ci, Kdim);
    std::vector<float> col(static_cast<std::size_t>(Kdim) * hw);
    for (int b = 0; b < B; ++b) {
      MapC xm(x.data() + static_cast<std::size_t>(b) * Ci * hw, Ci,
              static_cast<int>(hw));
      MapM colm(col.data(), Kdim, static_cast<int>(hw));
      colm.noalias() = km.transpose() * xm;
      col2im_add(col.data(), Co, OH, OW, Kh, Kw, stride, pad, H, W,
                 y.data() + static_cast<std::size_t>(b) * out_chw);
    }
  }

  const bool tx = tracked(x), tk = tracked(k);
  Tensor out = y;
  finish(out, "deconv2d", tx || tk, {x, k},
         [x, k, out, B, Ci, H, W, Co, Kh, Kw, stride, pad, OH, OW, Kdim, hw,
          out_chw, tx, tk](GradStore& store) {
           const float* g = store.grad_of(out);
           MapC km(k.data(), Ci, Kdim);
           std::vector<float> colg(static_cast<std::size_t>(Kdim) * hw);
           for (int b = 0; b < B; ++b) {
             // Unfold the incoming gradient exactly as the forward-direction
             // convolution would unfold its input.
             im2col(g + static_cast<std::size_t>(b) * out_chw, Co, OH, OW, Kh,
                    Kw, stride, pad, H, W, colg.data());
             MapC colgm(colg.data(), Kdim, static_cast<int>(hw));
             if (tx) {
               MapM gxm(store.grad_accum(x) + static_cast<std::size_t>(b) * Ci * hw,
                        Ci, static_cast<int>(hw));
               gxm.noalias() += km * colgm;
             }
             if (tk) {
               MapC xm(x.data() + static_cast<std::size_t>(b) * Ci * hw, Ci,
                       static_cast<int>(hw));
               MapM gkm(store.grad_accum(k), Ci, Kdim);
               gkm.noalias() += xm * colgm.transpose();
             }
           }
         });
  return out;
}

// ---- batch normalization ---------------------------------------------------

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<float>& running_mean,
                   std::vector<float>& running_var, bool train,
                   bool update_running, float eps, float momentum) {
  require_rank(x, 4, "batchnorm2d");
  require_rank(gamma, 1, "batchnorm2d gamma");
  require_rank(beta, 1, "batchnorm2d beta");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.dim(0) != C || beta.dim(0) != C ||
      static_cast<int>(running_mean.size()) != C ||
      static_cast<int>(running_var.size()) != C) {
    throw DimensionError("batchnorm2d: parameter extents do not match " +
                         std::to_string(C) + " channels");
  }
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const std::size_t n = static_cast<std::size_t>(B) * hw;
  if (train && n < 2) {
    throw DataError("batchnorm2d: training mode needs at least 2 values per "
                    "channel, got " + std::to_string(n));
  }

  auto xhat = std::make_shared<std::vector<float>>(x.numel());
  auto ivar = std::make_shared<std::vector<float>>(C);
  Tensor y = Tensor::zeros(x.shape());

  for (int c = 0; c < C; ++c) {
    double mean = 0.0, var = 0.0;
    if (train) {
      double acc = 0.0;
      for (int b = 0; b < B; ++b) {
        const float* src = x.data() + (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) acc += src[i];
      }
      mean = acc / static_cast<double>(n);
      double acc2 = 0.0;
      for (int b = 0; b < B; ++b) {
        const float* src = x.data() + (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = src[i] - mean;
          acc2 += d * d;
        }
      }
      var = acc2 / static_cast<double>(n);
      if (update_running) {
        const double unbiased = var * static_cast<double>(n) /
                                static_cast<double>(n - 1);
        running_mean[c] = static_cast<float>((1.0 - momentum) * running_mean[c] +
                                             momentum * mean);
        running_var[c] = static_cast<float>((1.0 - momentum) * running_var[c] +
                                            momentum * unbiased);
      }
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const float iv = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*ivar)[c] = iv;
    const float gm = gamma.data()[c], bt = beta.data()[c];
    const float mu = static_cast<float>(mean);
    for (int b = 0; b < B; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
      const float* src = x.data() + base;
      float* xh = xhat->data() + base;
      float* dst = y.data() + base;
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = (src[i] - mu) * iv;
        dst[i] = gm * xh[i] + bt;
      }
    }
  }

  const bool tx = tracked(x), tg = tracked(gamma), tb = tracked(beta);
  Tensor out = y;
  finish(out, "batchnorm2d", tx || tg || tb, {x, gamma, beta},
         [x, gamma, beta, out, xhat, ivar, B, C, hw, n, train, tx, tg,
          tb](GradStore& store) {
           const float* g = store.grad_of(out);
           for (int c = 0; c < C; ++c) {
             double sum_dy = 0.0, sum_dyxh = 0.0;
             for (int b = 0; b < B; ++b) {
               const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
               const float* gr = g + base;
               const float* xh = xhat->data() + base;
               for (std::size_t i = 0; i < hw; ++i) {
                 sum_dy += gr[i];
                 sum_dyxh += static_cast<double>(gr[i]) * xh[i];
               }
             }
             if (tg) store.grad_accum(gamma)[c] += static_cast<float>(sum_dyxh);
             if (tb) store.grad_accum(beta)[c] += static_cast<float>(sum_dy);
             if (tx) {
               const float gm = gamma.data()[c];
               const float iv = (*ivar)[c];
               float* gx = store.grad_accum(x);
               if (train) {
                 const double inv_n = 1.0 / static_cast<double>(n);
                 for (int b = 0; b < B; ++b) {
                   const std::size_t base =
                       (static_cast<std::size_t>(b) * C + c) * hw;
                   const float* gr = g + base;
                   const float* xh = xhat->data() + base;
                   float* dst = gx + base;
                   for (std::size_t i = 0; i < hw; ++i) {
                     const double t = gr[i] - inv_n * sum_dy -
                                      static_cast<double>(xh[i]) * inv_n * sum_dyxh;
                     dst[i] += static_cast<float>(gm * iv * t);
                   }
                 }
               } else {
                 for (int b = 0; b < B; ++b) {
                   const std::size_t base =
                       (static_cast<std::size_t>(b) * C + c) * hw;
                   const float* gr = g + base;
                   float* dst = gx + base;
                   for (std::size_t i = 0; i < hw; ++i) {
                     dst[i] += gm * iv * gr[i];
                   }
                 }
               }
             }
           }
         });
  return out;
}

// ---- pointwise -------------------------------------------------------------

namespace {
Tensor pointwise(const Tensor& x, const char* what, float (*f)(float),
                 std::function<void(const Tensor&, const Tensor&, GradStore&)>
                     backward) {
  Tensor y = Tensor::zeros(x.shape());
  const float* src = x.data();
  float* dst = y.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) dst[i] = f(src[i]);
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, what, tx, {x},
         [x, out, backward](GradStore& store) { backward(x, out, store); });
  return out;
}
}  // namespace

Tensor relu(const Tensor& x) {
  return pointwise(
      x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
      [](const Tensor& x, const Tensor& out, GradStore& store) {
        const float* g = store.grad_of(out);
        float* gx = store.grad_accum(x);
        const float* src = x.data();
        for (std::size_t i = 0; i < x.numel(); ++i) {
          if (src[i] > 0.0f) gx[i] += g[i];
        }
      });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  if (!(slope >= 0.0f) || slope >= 1.0f) {
    throw ParameterError("leaky_relu: slope must be in [0,1)");
  }
  Tensor y = Tensor::zeros(x.shape());
  {
    const float* src = x.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      dst[i] = src[i] > 0.0f ? src[i] : slope * src[i];
    }
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "leaky_relu", tx, {x}, [x, out, slope](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    const float* src = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      gx[i] += src[i] > 0.0f ? g[i] : slope * g[i];
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return pointwise(
      x, "sigmoid", [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](const Tensor& x, const Tensor& out, GradStore& store) {
        const float* g = store.grad_of(out);
        float* gx = store.grad_accum(x);
        const float* yv = out.data();
        for (std::size_t i = 0; i < x.numel(); ++i) {
          gx[i] += g[i] * yv[i] * (1.0f - yv[i]);
        }
      });
}

Tensor exp(const Tensor& x) {
  return pointwise(
      x, "exp", [](float v) { return std::exp(v); },
      [](const Tensor& x, const Tensor& out, GradStore& store) {
        const float* g = store.grad_of(out);
        float* gx = store.grad_accum(x);
        const float* yv = out.data();
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * yv[i];
      });
}

Tensor log_clamped(const Tensor& x, float floor) {
  if (!(floor > 0.0f)) throw ParameterError("log_clamped: floor must be > 0");
  Tensor y = Tensor::zeros(x.shape());
  {
    const float* src = x.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      dst[i] = std::log(src[i] > floor ? src[i] : floor);
    }
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "log_clamped", tx, {x}, [x, out, floor](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    const float* src = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (src[i] > floor) gx[i] += g[i] / src[i];
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax");
  const int B = x.dim(0), K = x.dim(1);
  if (K < 1) throw DimensionError("log_softmax: empty rows");
  Tensor y = Tensor::zeros(x.shape());
  for (int b = 0; b < B; ++b) {
    const float* row = x.data() + static_cast<std::size_t>(b) * K;
    float* dst = y.data() + static_cast<std::size_t>(b) * K;
    float m = row[0];
    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += std::exp(static_cast<double>(row[k]) - m);
    const float lse = m + static_cast<float>(std::log(acc));
    for (int k = 0; k < K; ++k) dst[k] = row[k] - lse;
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "log_softmax", tx, {x}, [x, out, B, K](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    const float* yv = out.data();
    for (int b = 0; b < B; ++b) {
      const std::size_t base = static_cast<std::size_t>(b) * K;
      double sum_g = 0.0;
      for (int k = 0; k < K; ++k) sum_g += g[base + k];
      for (int k = 0; k < K; ++k) {
        gx[base + k] += g[base + k] -
                        std::exp(yv[base + k]) * static_cast<float>(sum_g);
      }
    }
  });
  return out;
}

// ---- dropout ---------------------------------------------------------------

namespace {
Tensor dropout_impl(const Tensor& x, std::vector<float> scale_mask,
                    const char* what) {
  Tensor y = Tensor::zeros(x.shape());
  {
    const float* src = x.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = src[i] * scale_mask[i];
  }
  const bool tx = tracked(x);
  Tensor out = y;
  auto mask = std::make_shared<std::vector<float>>(std::move(scale_mask));
  finish(out, what, tx, {x}, [x, out, mask](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * (*mask)[i];
  });
  return out;
}
}  // namespace

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  if (!(p >= 0.0f) || p >= 1.0f) {
    throw ParameterError("dropout: p must be in [0,1)");
  }
  const float scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() >= p ? scale : 0.0f;
  }
  return dropout_impl(x, std::move(mask), "dropout");
}

Tensor dropout_with_mask(const Tensor& x, const std::vector<float>& keep,
                         float p) {
  if (!(p >= 0.0f) || p >= 1.0f) {
    throw ParameterError("dropout: p must be in [0,1)");
  }
  if (keep.size() != x.numel()) {
    throw DimensionError("dropout: mask size does not match tensor");
  }
  const float scale = 1.0f / (1.0f - p);
  std::vector<float> mask(keep.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep[i] * scale;
  return dropout_impl(x, std::move(mask), "dropout");
}

// ---- arithmetic ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y = Tensor::zeros(a.shape());
  {
    const float* pa = a.data();
    const float* pb = b.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = pa[i] + pb[i];
  }
  if (y.numel() == 1) y.impl()->scalar_f64 = a.item_f64() + b.item_f64();
  const bool ta = tracked(a), tb = tracked(b);
  Tensor out = y;
  finish(out, "add", ta || tb, {a, b}, [a, b, out, ta, tb](GradStore& store) {
    const float* g = store.grad_of(out);
    if (ta) {
      float* ga = store.grad_accum(a);
      for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g[i];
    }
    if (tb) {
      float* gb = store.grad_accum(b);
      for (std::size_t i = 0; i < b.numel(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y = Tensor::zeros(a.shape());
  {
    const float* pa = a.data();
    const float* pb = b.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = pa[i] * pb[i];
  }
  if (y.numel() == 1) y.impl()->scalar_f64 = a.item_f64() * b.item_f64();
  const bool ta = tracked(a), tb = tracked(b);
  Tensor out = y;
  finish(out, "mul", ta || tb, {a, b}, [a, b, out, ta, tb](GradStore& store) {
    const float* g = store.grad_of(out);
    if (ta) {
      float* ga = store.grad_accum(a);
      const float* pb = b.data();
      for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g[i] * pb[i];
    }
    if (tb) {
      float* gb = store.grad_accum(b);
      const float* pa = a.data();
      for (std::size_t i = 0; i < b.numel(); ++i) gb[i] += g[i] * pa[i];
    }
  });
  return out;
}

Tensor affine(const Tensor& x, float scale, float shift) {
  Tensor y = Tensor::zeros(x.shape());
  {
    const float* src = x.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = scale * src[i] + shift;
  }
  if (y.numel() == 1) {
    y.impl()->scalar_f64 = static_cast<double>(scale) * x.item_f64() + shift;
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "affine", tx, {x}, [x, out, scale](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += scale * g[i];
  });
  return out;
}

Tensor square(const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape());
  {
    const float* src = x.data();
    float* dst = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = src[i] * src[i];
  }
  if (y.numel() == 1) {
    const double v = x.item_f64();
    y.impl()->scalar_f64 = v * v;
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "square", tx, {x}, [x, out](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    const float* src = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += 2.0f * src[i] * g[i];
  });
  return out;
}

// ---- shape manipulation ----------------------------------------------------

Tensor reshape(const Tensor& x, Shape target) {
  if (shape_numel(target) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(target));
  }
  Tensor y = Tensor::from(std::move(target),
                          std::vector<float>(x.data(), x.data() + x.numel()));
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "reshape", tx, {x}, [x, out](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: row counts differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int B = a.dim(0), I = a.dim(1), J = b.dim(1);
  Tensor y = Tensor::zeros({B, I + J});
  for (int r = 0; r < B; ++r) {
    float* dst = y.data() + static_cast<std::size_t>(r) * (I + J);
    std::memcpy(dst, a.data() + static_cast<std::size_t>(r) * I,
                sizeof(float) * I);
    std::memcpy(dst + I, b.data() + static_cast<std::size_t>(r) * J,
                sizeof(float) * J);
  }
  const bool ta = tracked(a), tb = tracked(b);
  Tensor out = y;
  finish(out, "concat_cols", ta || tb, {a, b},
         [a, b, out, B, I, J, ta, tb](GradStore& store) {
           const float* g = store.grad_of(out);
           for (int r = 0; r < B; ++r) {
             const float* row = g + static_cast<std::size_t>(r) * (I + J);
             if (ta) {
               float* ga = store.grad_accum(a) + static_cast<std::size_t>(r) * I;
               for (int i = 0; i < I; ++i) ga[i] += row[i];
             }
             if (tb) {
               float* gb = store.grad_accum(b) + static_cast<std::size_t>(r) * J;
               for (int j = 0; j < J; ++j) gb[j] += row[I + j];
             }
           }
         });
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  require_rank(x, 2, "slice_cols");
  const int B = x.dim(0), K = x.dim(1);
  if (start < 0 || len < 1 || start + len > K) {
    throw ParameterError("slice_cols: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") outside of " +
                         std::to_string(K) + " columns");
  }
  Tensor y = Tensor::zeros({B, len});
  for (int r = 0; r < B; ++r) {
    std::memcpy(y.data() + static_cast<std::size_t>(r) * len,
                x.data() + static_cast<std::size_t>(r) * K + start,
                sizeof(float) * len);
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "slice_cols", tx, {x},
         [x, out, B, K, start, len](GradStore& store) {
           const float* g = store.grad_of(out);
           float* gx = store.grad_accum(x);
           for (int r = 0; r < B; ++r) {
             const float* row = g + static_cast<std::size_t>(r) * len;
             float* dst = gx + static_cast<std::size_t>(r) * K + start;
             for (int j = 0; j < len; ++j) dst[j] += row[j];
           }
         });
  return out;
}

Tensor gather_cols(const Tensor& x, std::span<const int> idx) {
  require_rank(x, 2, "gather_cols");
  const int B = x.dim(0), K = x.dim(1);
  if (static_cast<int>(idx.size()) != B) {
    throw DimensionError("gather_cols: need one index per row");
  }
  for (int i : idx) {
    if (i < 0 || i >= K) {
      throw ParameterError("gather_cols: index " + std::to_string(i) +
                           " outside of " + std::to_string(K) + " columns");
    }
  }
  Tensor y = Tensor::zeros({B, 1});
  auto picks = std::make_shared<std::vector<int>>(idx.begin(), idx.end());
  for (int r = 0; r < B; ++r) {
    y.data()[r] = x.data()[static_cast<std::size_t>(r) * K + (*picks)[r]];
  }
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "gather_cols", tx, {x}, [x, out, picks, B, K](GradStore& store) {
    const float* g = store.grad_of(out);
    float* gx = store.grad_accum(x);
    for (int r = 0; r < B; ++r) {
      gx[static_cast<std::size_t>(r) * K + (*picks)[r]] += g[r];
    }
  });
  return out;
}

// ---- reductions ------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  const float* src = x.data();
  for (std::size_t i = 0; i < x.numel(); ++i) acc += src[i];
  Tensor y = Tensor::from({1}, {static_cast<float>(acc)});
  y.impl()->scalar_f64 = acc;
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "sum_all", tx, {x}, [x, out](GradStore& store) {
    const float g = store.grad_of(out)[0];
    float* gx = store.grad_accum(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
  });
  return out;
}

Tensor mean_all(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean_all: empty tensor");
  double acc = 0.0;
  const float* src = x.data();
  for (std::size_t i = 0; i < x.numel(); ++i) acc += src[i];
  const double n = static_cast<double>(x.numel());
  Tensor y = Tensor::from({1}, {static_cast<float>(acc / n)});
  y.impl()->scalar_f64 = acc / n;
  const bool tx = tracked(x);
  Tensor out = y;
  finish(out, "mean_all", tx, {x}, [x, out, n](GradStore& store) {
    const float g = store.grad_of(out)[0] / static_cast<float>(n);
    float* gx = store.grad_accum(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
  });
  return out;
}

Tensor nll(const Tensor& logp, std::span<const int> targets) {
  require_rank(logp, 2, "nll");
  const int B = logp.dim(0), K = logp.dim(1);
  if (static_cast<int>(targets.size()) != B) {
    throw DimensionError("nll: need one target per row");
  }
  for (int t : targets) {
    if (t < 0 || t >= K) {
      throw ParameterError("nll: target " + std::to_string(t) +
                           " outside of " + std::to_string(K) + " classes");
    }
  }
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    acc += logp.data()[static_cast<std::size_t>(b) * K + targets[b]];
  }
  const double loss = -acc / static_cast<double>(B);
  Tensor y = Tensor::from({1}, {static_cast<float>(loss)});
  y.impl()->scalar_f64 = loss;
  auto picks = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  const bool tx = tracked(logp);
  Tensor out = y;
  finish(out, "nll", tx, {logp}, [logp, out, picks, B, K](GradStore& store) {
    const float g = store.grad_of(out)[0] / static_cast<float>(B);
    float* gx = store.grad_accum(logp);
    for (int b = 0; b < B; ++b) {
      gx[static_cast<std::size_t>(b) * K + (*picks)[b]] -= g;
    }
  });
  return out;
}

}  // namespace mfegan::ops
