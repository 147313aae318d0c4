#pragma once

// Convolution primitives: cross-correlation with zero padding, stride 1 or 2
// (ceil output semantics), plus the exact reverse-mode passes. The inner
// contraction runs as an im2col GEMM; everything around it is explicit.
//
// A transposed (upsampling) layer is the adjoint of the strided conv, so the
// same three primitives serve both directions:
//   conv_fwd(x, w)            y = W * col(x)
//   conv_bwd_input(w, up)     gx = col2im(W^T * up)   (also: transposed fwd)
//   conv_bwd_weights(x, up)   gw = up * col(x)^T

#include <cblas.h>

#include <mutex>
#include <span>
#include <vector>

#include "uflow/tensor.hpp"

namespace uflow {

struct ConvLayerSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  bool transposed = false;
  enum class Act { none, leaky_relu } activation = Act::none;

  int pad() const { return (kernel - 1) / 2; }

  void validate() const {
    require(in_channels >= 1 && out_channels >= 1, ErrorCode::BadConfig, "conv: bad channel count");
    require(kernel == 3 || kernel == 5 || kernel == 7, ErrorCode::BadConfig,
            "conv: kernel must be 3, 5 or 7");
    require(stride == 1 || stride == 2, ErrorCode::BadConfig, "conv: stride must be 1 or 2");
  }
};

inline int conv_out_dim(int in, int stride) { return stride == 1 ? in : (in - 1) / 2 + 1; }

namespace detail {

inline void blas_single_thread() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
  blas_single_thread();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
  blas_single_thread();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, lda, b, ldb, beta, c, ldc);
}

// col[(ic*k + ky)*k + kx, oy*ow + ox] = x[n, ic, oy*s + ky - p, ox*s + kx - p]
template <class T>
void im2col(const Tensor4<T>& x, int item, int kernel, int stride, std::vector<T>& col, int oh,
            int ow) {
  int p = (kernel - 1) / 2;
  col.assign(size_t(x.c) * kernel * kernel * oh * ow, T(0));
  size_t row = 0;
  for (int ic = 0; ic < x.c; ++ic) {
    const T* plane = x.plane(item, ic);
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx, ++row) {
        T* dst = col.data() + row * size_t(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - p;
          if (iy < 0 || iy >= x.h) continue;
          const T* src = plane + size_t(iy) * x.w;
          T* drow = dst + size_t(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - p;
            if (ix >= 0 && ix < x.w) drow[ox] = src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col back into the image layout.
template <class T>
void col2im(const std::vector<T>& col, int item, int kernel, int stride, Tensor4<T>& gx, int oh,
            int ow) {
  int p = (kernel - 1) / 2;
  size_t row = 0;
  for (int ic = 0; ic < gx.c; ++ic) {
    T* plane = gx.plane(item, ic);
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx, ++row) {
        const T* src = col.data() + row * size_t(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - p;
          if (iy < 0 || iy >= gx.h) continue;
          T* drow = plane + size_t(iy) * gx.w;
          const T* srow = src + size_t(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - p;
            if (ix >= 0 && ix < gx.w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// weights layout: w[oc][ic][ky][kx], bias one value per output channel.
template <class T>
Tensor4<T> conv_fwd(const Tensor4<T>& x, std::span<const T> w, std::span<const T> b, int out_ch,
                    int kernel, int stride) {
  int oh = conv_out_dim(x.h, stride), ow = conv_out_dim(x.w, stride);
  int kk = x.c * kernel * kernel;
  require(w.size() == size_t(out_ch) * kk, ErrorCode::DimensionMismatch, "conv_fwd: weight size");
  require(b.empty() || b.size() == size_t(out_ch), ErrorCode::DimensionMismatch,
          "conv_fwd: bias size");
  Tensor4<T> y(x.n, out_ch, oh, ow);
  std::vector<T> col;
  for (int item = 0; item < x.n; ++item) {
    detail::im2col(x, item, kernel, stride, col, oh, ow);
    detail::gemm(false, false, out_ch, oh * ow, kk, w.data(), kk, col.data(), oh * ow, T(0),
                 y.plane(item, 0), oh * ow);
  }
  if (!b.empty()) {
    for (int item = 0; item < x.n; ++item)
      for (int oc = 0; oc < out_ch; ++oc) {
        T* plane = y.plane(item, oc);
        for (int i = 0; i < oh * ow; ++i) plane[i] += b[oc];
      }
  }
  return y;
}

// Gradient of conv_fwd with respect to its input; equivalently the forward
// map of a transposed layer (weights seen from the small side).
template <class T>
Tensor4<T> conv_bwd_input(std::span<const T> w, const Tensor4<T>& up, int in_ch, int kernel,
                          int stride, int in_h, int in_w) {
  int oh = up.h, ow = up.w;
  require(conv_out_dim(in_h, stride) == oh && conv_out_dim(in_w, stride) == ow,
          ErrorCode::DimensionMismatch, "conv_bwd_input: dims inconsistent");
  int kk = in_ch * kernel * kernel;
  require(w.size() == size_t(up.c) * kk, ErrorCode::DimensionMismatch,
          "conv_bwd_input: weight size");
  Tensor4<T> gx(up.n, in_ch, in_h, in_w);
  std::vector<T> col(size_t(kk) * oh * ow);
  for (int item = 0; item < up.n; ++item) {
    detail::gemm(true, false, kk, oh * ow, up.c, w.data(), kk, up.plane(item, 0), oh * ow, T(0),
                 col.data(), oh * ow);
    detail::col2im(col, item, kernel, stride, gx, oh, ow);
  }
  return gx;
}

// Gradient of conv_fwd with respect to the weights, accumulated over the
// batch in item order.
template <class T>
std::vector<T> conv_bwd_weights(const Tensor4<T>& x, const Tensor4<T>& up, int kernel,
                                int stride) {
  int oh = up.h, ow = up.w;
  require(conv_out_dim(x.h, stride) == oh && conv_out_dim(x.w, stride) == ow,
          ErrorCode::DimensionMismatch, "conv_bwd_weights: dims inconsistent");
  int kk = x.c * kernel * kernel;
  std::vector<T> gw(size_t(up.c) * kk, T(0));
  std::vector<T> col;
  for (int item = 0; item < x.n; ++item) {
    detail::im2col(x, item, kernel, stride, col, oh, ow);
    detail::gemm(false, true, up.c, kk, oh * ow, up.plane(item, 0), oh * ow, col.data(), oh * ow,
                 T(1), gw.data(), kk);
  }
  return gw;
}

template <class T>
std::vector<T> conv_bwd_bias(const Tensor4<T>& up) {
  std::vector<T> gb(up.c, T(0));
  for (int item = 0; item < up.n; ++item)
    for (int oc = 0; oc < up.c; ++oc) {
      const T* plane = up.plane(item, oc);
      T s = T(0);
      for (int i = 0; i < up.h * up.w; ++i) s += plane[i];
      gb[oc] += s;
    }
  return gb;
}

// Leaky ReLU, slope on the negative side. At exactly 0 the x >= 0 branch
// applies (gradient 1).
template <class T>
void leaky_relu_fwd(Tensor4<T>& x, T slope = T(0.1)) {
  for (auto& v : x.data)
    if (v < T(0)) v *= slope;
}

// Gate recovered from the forward output: y >= 0 iff x >= 0 since slope > 0.
template <class T>
Tensor4<T> leaky_relu_bwd(const Tensor4<T>& up, const Tensor4<T>& y, T slope = T(0.1)) {
  require(up.same_shape(y), ErrorCode::DimensionMismatch, "leaky_relu_bwd: shape mismatch");
  Tensor4<T> gx = up;
  for (size_t i = 0; i < gx.data.size(); ++i)
    if (y.data[i] < T(0)) gx.data[i] *= slope;
  return gx;
}

// Exact 2x bilinear upsampling (pixel-center convention, clamped) and its
// adjoint. Used for the flow feedback paths and the final full-res output.
template <class T>
Tensor4<T> upsample2x_fwd(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, x.h * 2, x.w * 2);
  for (int item = 0; item < x.n; ++item)
    for (int c = 0; c < x.c; ++c) {
      const T* src = x.plane(item, c);
      T* dst = y.plane(item, c);
      for (int oy = 0; oy < y.h; ++oy) {
        double sy = (oy + 0.5) * 0.5 - 0.5;
        if (sy < 0) sy = 0;
        if (sy > x.h - 1) sy = x.h - 1;
        int y0 = int(sy), y1 = y0 + 1 < x.h ? y0 + 1 : y0;
        double fy = sy - y0;
        for (int ox = 0; ox < y.w; ++ox) {
          double sx = (ox + 0.5) * 0.5 - 0.5;
          if (sx < 0) sx = 0;
          if (sx > x.w - 1) sx = x.w - 1;
          int x0 = int(sx), x1 = x0 + 1 < x.w ? x0 + 1 : x0;
          double fx = sx - x0;
          double a = src[size_t(y0) * x.w + x0] * (1 - fx) + src[size_t(y0) * x.w + x1] * fx;
          double b = src[size_t(y1) * x.w + x0] * (1 - fx) + src[size_t(y1) * x.w + x1] * fx;
          dst[size_t(oy) * y.w + ox] = T(a * (1 - fy) + b * fy);
        }
      }
    }
  return y;
}

template <class T>
Tensor4<T> upsample2x_bwd(const Tensor4<T>& up, int in_h, int in_w) {
  require(up.h == in_h * 2 && up.w == in_w * 2, ErrorCode::DimensionMismatch,
          "upsample2x_bwd: dims inconsistent");
  Tensor4<T> gx(up.n, up.c, in_h, in_w);
  for (int item = 0; item < up.n; ++item)
    for (int c = 0; c < up.c; ++c) {
      const T* src = up.plane(item, c);
      T* dst = gx.plane(item, c);
      for (int oy = 0; oy < up.h; ++oy) {
        double sy = (oy + 0.5) * 0.5 - 0.5;
        if (sy < 0) sy = 0;
        if (sy > in_h - 1) sy = in_h - 1;
        int y0 = int(sy), y1 = y0 + 1 < in_h ? y0 + 1 : y0;
        double fy = sy - y0;
        for (int ox = 0; ox < up.w; ++ox) {
          double sx = (ox + 0.5) * 0.5 - 0.5;
          if (sx < 0) sx = 0;
          if (sx > in_w - 1) sx = in_w - 1;
          int x0 = int(sx), x1 = x0 + 1 < in_w ? x0 + 1 : x0;
          double fx = sx - x0;
          T u = src[size_t(oy) * up.w + ox];
          dst[size_t(y0) * in_w + x0] += T(u * (1 - fx) * (1 - fy));
          dst[size_t(y0) * in_w + x1] += T(u * fx * (1 - fy));
          dst[size_t(y1) * in_w + x0] += T(u * (1 - fx) * fy);
          dst[size_t(y1) * in_w + x1] += T(u * fx * fy);
        }
      }
    }
  return gx;
}

// Channel concatenation and its split adjoint.
template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts) {
  int total_c = 0;
  for (const auto* p : parts) {
    require(p->n == parts[0]->n && p->h == parts[0]->h && p->w == parts[0]->w,
            ErrorCode::DimensionMismatch, "concat_channels: spatial dims differ");
    total_c += p->c;
  }
  Tensor4<T> out(parts[0]->n, total_c, parts[0]->h, parts[0]->w);
  for (int item = 0; item < out.n; ++item) {
    int oc = 0;
    for (const auto* p : parts)
      for (int c = 0; c < p->c; ++c, ++oc) {
        const T* src = p->plane(item, c);
        T* dst = out.plane(item, oc);
        for (int i = 0; i < out.h * out.w; ++i) dst[i] = src[i];
      }
  }
  return out;
}

template <class T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& x, const std::vector<int>& counts) {
  int sum = 0;
  for (int c : counts) sum += c;
  require(sum == x.c, ErrorCode::DimensionMismatch, "split_channels: counts mismatch");
  std::vector<Tensor4<T>> out;
  int base = 0;
  for (int c : counts) {
    Tensor4<T> part(x.n, c, x.h, x.w);
    for (int item = 0; item < x.n; ++item)
      for (int k = 0; k < c; ++k) {
        const T* src = x.plane(item, base + k);
        T* dst = part.plane(item, k);
        for (int i = 0; i < x.h * x.w; ++i) dst[i] = src[i];
      }
    out.push_back(std::move(part));
    base += c;
  }
  return out;
}

}  // namespace uflow
