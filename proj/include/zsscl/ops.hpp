#pragma once

#include <algorithm>
#include <cstdint>

#include "zsscl/tensor.hpp"

namespace zsscl {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    if (in + 2 * pad < k) {
        throw DimensionError("conv input extent " + std::to_string(in) + " with pad " +
                             std::to_string(pad) + " is smaller than kernel " + std::to_string(k));
    }
    return (in + 2 * pad - k) / stride + 1;
}

inline int tconv_out_extent(int in, int k, int stride, int pad) {
    int out = (in - 1) * stride - 2 * pad + k;
    if (out <= 0) {
        throw DimensionError("transposed conv output extent is not positive for input extent " +
                             std::to_string(in));
    }
    return out;
}

namespace detail {

// Valid output-column range [c0, c1) for which 0 <= c*stride + base < w.
inline void col_range(int base, int stride, int w, int ow, int& c0, int& c1) {
    c0 = base < 0 ? (-base + stride - 1) / stride : 0;
    c1 = base >= w ? 0 : std::min(ow, (w - 1 - base) / stride + 1);
    if (c1 < c0) c1 = c0;
}

/// Dot product with 16 fixed partial accumulators. The lane split is part
/// of the definition, so results are identical regardless of the target
/// instruction set, and the inner loop vectorizes without reassociation.
template <class Real>
Real dot16(const Real* a, const Real* b, std::int64_t n) {
    Real part[16] = {};
    std::int64_t i = 0;
    for (; i + 16 <= n; i += 16)
        for (int l = 0; l < 16; ++l) part[l] += a[i + l] * b[i + l];
    Real tail = Real(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    Real s = Real(0);
    for (int l = 0; l < 16; ++l) s += part[l];
    return s + tail;
}

/// cols[(ic*k+kh)*k+kw][r*ow+c] = x[ic][r*stride+kh-pad][c*stride+kw-pad],
/// zero where the source index falls outside the plane.
template <class Real>
void im2col(const Real* x, int ci, int h, int w, int k, int stride, int pad,
            int oh, int ow, Real* cols) {
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t P = static_cast<std::int64_t>(oh) * ow;
    for (int ic = 0; ic < ci; ++ic) {
        const Real* xp = x + ic * plane;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                Real* row = cols + (static_cast<std::int64_t>(ic * k + kh) * k + kw) * P;
                const int base = kw - pad;
                int c0, c1;
                col_range(base, stride, w, ow, c0, c1);
                for (int r = 0; r < oh; ++r) {
                    const int ih = r * stride + kh - pad;
                    Real* dst = row + static_cast<std::int64_t>(r) * ow;
                    if (ih < 0 || ih >= h) {
                        for (int c = 0; c < ow; ++c) dst[c] = Real(0);
                        continue;
                    }
                    const Real* src = xp + static_cast<std::int64_t>(ih) * w + base;
                    for (int c = 0; c < c0; ++c) dst[c] = Real(0);
                    if (stride == 1) {
                        for (int c = c0; c < c1; ++c) dst[c] = src[c];
                    } else if (stride == 2) {
                        for (int c = c0; c < c1; ++c) dst[c] = src[2 * static_cast<std::int64_t>(c)];
                    } else {
                        for (int c = c0; c < c1; ++c) dst[c] = src[static_cast<std::int64_t>(c) * stride];
                    }
                    for (int c = c1; c < ow; ++c) dst[c] = Real(0);
                }
            }
        }
    }
}

/// Scatter-add inverse of im2col: x[ic][r*stride+kh-pad][c*stride+kw-pad]
/// += cols[(ic*k+kh)*k+kw][r*ow+c].
template <class Real>
void col2im_add(const Real* cols, int ci, int h, int w, int k, int stride, int pad,
                int oh, int ow, Real* x) {
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t P = static_cast<std::int64_t>(oh) * ow;
    for (int ic = 0; ic < ci; ++ic) {
        Real* xp = x + ic * plane;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const Real* row = cols + (static_cast<std::int64_t>(ic * k + kh) * k + kw) * P;
                const int base = kw - pad;
                int c0, c1;
                col_range(base, stride, w, ow, c0, c1);
                for (int r = 0; r < oh; ++r) {
                    const int ih = r * stride + kh - pad;
                    if (ih < 0 || ih >= h) continue;
                    const Real* src = row + static_cast<std::int64_t>(r) * ow;
                    Real* dst = xp + static_cast<std::int64_t>(ih) * w + base;
                    if (stride == 2) {
                        for (int c = c0; c < c1; ++c) dst[2 * static_cast<std::int64_t>(c)] += src[c];
                    } else {
                        for (int c = c0; c < c1; ++c) dst[static_cast<std::int64_t>(c) * stride] += src[c];
                    }
                }
            }
        }
    }
}

/// C[M x P] += A[M x K] * B[K x P], all rows contiguous. Rank-1 updates
/// unrolled four deep so the hot loop is a chain of fused multiply-adds
/// over unit-stride rows.
template <class Real>
void gemm_axpy(int M, int K, std::int64_t P, const Real* A, const Real* B, Real* C) {
    for (int i = 0; i < M; ++i) {
        Real* __restrict crow = C + i * P;
        const Real* arow = A + static_cast<std::int64_t>(i) * K;
        int q = 0;
        for (; q + 4 <= K; q += 4) {
            const Real a0 = arow[q], a1 = arow[q + 1], a2 = arow[q + 2], a3 = arow[q + 3];
            const Real* __restrict b0 = B + static_cast<std::int64_t>(q) * P;
            const Real* __restrict b1 = b0 + P;
            const Real* __restrict b2 = b1 + P;
            const Real* __restrict b3 = b2 + P;
            for (std::int64_t j = 0; j < P; ++j)
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; q < K; ++q) {
            const Real a0 = arow[q];
            const Real* __restrict b0 = B + static_cast<std::int64_t>(q) * P;
            for (std::int64_t j = 0; j < P; ++j) crow[j] += a0 * b0[j];
        }
    }
}

/// C[M x K] += Y[M x P] * B[K x P]^T: every entry a row-by-row dot product.
template <class Real>
void gemm_dot(int M, int K, std::int64_t P, const Real* Y, const Real* B, Real* C) {
    for (int i = 0; i < M; ++i) {
        const Real* yrow = Y + i * P;
        Real* crow = C + static_cast<std::int64_t>(i) * K;
        for (int q = 0; q < K; ++q) crow[q] += dot16(yrow, B + q * P, P);
    }
}

template <class Real>
std::vector<Real> transpose(const Real* a, int rows, int cols) {
    std::vector<Real> t(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            t[static_cast<std::size_t>(c) * rows + r] = a[static_cast<std::int64_t>(r) * cols + c];
    return t;
}

template <class Real>
void fill_bias_planes(Real* y, int co, std::int64_t plane, const Real* bias) {
    for (int oc = 0; oc < co; ++oc) {
        const Real bv = bias ? bias[oc] : Real(0);
        Real* yp = y + oc * plane;
        for (std::int64_t i = 0; i < plane; ++i) yp[i] = bv;
    }
}

template <class Real>
void sum_planes(const Real* gy, int co, std::int64_t plane, Real* gb) {
    for (int oc = 0; oc < co; ++oc) {
        double acc = 0.0;
        const Real* p = gy + oc * plane;
        for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
        gb[oc] += static_cast<Real>(acc);
    }
}

// y[oc,r,c] = bias[oc] + sum_{ic,kh,kw} x[ic, r*s+kh-p, c*s+kw-p] * wt[oc,ic,kh,kw]
template <class Real>
void conv2d_fwd(const Real* x, int ci, int h, int w,
                const Real* wt, int co, int k, int stride, int pad,
                const Real* bias, Real* y, int oh, int ow) {
    const std::int64_t P = static_cast<std::int64_t>(oh) * ow;
    const int kk = ci * k * k;
    std::vector<Real> cols(static_cast<std::size_t>(kk) * P);
    im2col(x, ci, h, w, k, stride, pad, oh, ow, cols.data());
    fill_bias_planes(y, co, P, bias);
    gemm_axpy(co, kk, P, wt, cols.data(), y);
}

/// All three conv gradients in one pass; accumulates into gx, gw, gb.
template <class Real>
void conv2d_bwd(const Real* gy, int co, int oh, int ow,
                const Real* x, int ci, int h, int w,
                const Real* wt, int k, int stride, int pad,
                Real* gx, Real* gw, Real* gb) {
    const std::int64_t P = static_cast<std::int64_t>(oh) * ow;
    const int kk = ci * k * k;
    std::vector<Real> cols(static_cast<std::size_t>(kk) * P);
    im2col(x, ci, h, w, k, stride, pad, oh, ow, cols.data());
    gemm_dot(co, kk, P, gy, cols.data(), gw);

    std::vector<Real> wt_t = transpose(wt, co, kk);
    std::vector<Real> gcols(static_cast<std::size_t>(kk) * P, Real(0));
    gemm_axpy(kk, co, P, wt_t.data(), gy, gcols.data());
    col2im_add(gcols.data(), ci, h, w, k, stride, pad, oh, ow, gx);

    sum_planes(gy, co, P, gb);
}

// y[oc, r*s+kh-p, c*s+kw-p] += x[ic,r,c] * wt[ic,oc,kh,kw]; plus bias.
template <class Real>
void tconv_fwd(const Real* x, int ci, int h, int w,
               const Real* wt, int co, int k, int stride, int pad,
               const Real* bias, Real* y, int oh, int ow) {
    const std::int64_t P = static_cast<std::int64_t>(h) * w;
    const int kk = co * k * k;
    std::vector<Real> wt_t = transpose(wt, ci, kk);
    std::vector<Real> cols(static_cast<std::size_t>(kk) * P, Real(0));
    gemm_axpy(kk, ci, P, wt_t.data(), x, cols.data());
    fill_bias_planes(y, co, static_cast<std::int64_t>(oh) * ow, bias);
    col2im_add(cols.data(), co, oh, ow, k, stride, pad, h, w, y);
}

/// All three transposed-conv gradients in one pass; accumulates into
/// gx, gw, gb. The output gradient is gathered with conv geometry.
template <class Real>
void tconv_bwd(const Real* gy, int co, int oh, int ow,
               const Real* x, int ci, int h, int w,
               const Real* wt, int k, int stride, int pad,
               Real* gx, Real* gw, Real* gb) {
    const std::int64_t P = static_cast<std::int64_t>(h) * w;
    const int kk = co * k * k;
    std::vector<Real> gcols(static_cast<std::size_t>(kk) * P);
    im2col(gy, co, oh, ow, k, stride, pad, h, w, gcols.data());
    gemm_axpy(ci, kk, P, wt, gcols.data(), gx);
    gemm_dot(ci, kk, P, x, gcols.data(), gw);
    sum_planes(gy, co, static_cast<std::int64_t>(oh) * ow, gb);
}

}  // namespace detail

/// Cross-correlation with bias, kernel k x k. Records nothing; see Tape for
/// the differentiable version.
template <class Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b,
                    int stride, int pad) {
    if (x.rank() != 3) throw DimensionError("conv2d input must be [C,H,W], got " + shape_str(x.shape()));
    if (w.rank() != 4 || w.extent(2) != w.extent(3))
        throw DimensionError("conv2d weight must be [Co,Ci,k,k], got " + shape_str(w.shape()));
    if (w.extent(1) != x.extent(0))
        throw DimensionError("conv2d weight expects " + std::to_string(w.extent(1)) +
                             " input channels, input has " + std::to_string(x.extent(0)));
    if (b.rank() != 1 || b.extent(0) != w.extent(0))
        throw DimensionError("conv2d bias must be [Co], got " + shape_str(b.shape()));
    if (stride < 1) throw UsageError("conv2d stride must be >= 1");
    if (pad < 0) throw UsageError("conv2d pad must be >= 0");
    const int k = w.extent(2);
    const int oh = conv_out_extent(x.extent(1), k, stride, pad);
    const int ow = conv_out_extent(x.extent(2), k, stride, pad);
    Tensor<Real> y{Shape{w.extent(0), oh, ow}};
    detail::conv2d_fwd(x.data(), x.extent(0), x.extent(1), x.extent(2),
                       w.data(), w.extent(0), k, stride, pad, b.data(), y.data(), oh, ow);
    return y;
}

/// Adjoint of conv2d with the same stride/pad. Weight layout is
/// [Ci, Co, k, k], first axis matching the input channels.
template <class Real>
Tensor<Real> conv2d_transpose(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b,
                              int stride, int pad) {
    if (x.rank() != 3) throw DimensionError("conv2d_transpose input must be [C,H,W], got " + shape_str(x.shape()));
    if (w.rank() != 4 || w.extent(2) != w.extent(3))
        throw DimensionError("conv2d_transpose weight must be [Ci,Co,k,k], got " + shape_str(w.shape()));
    if (w.extent(0) != x.extent(0))
        throw DimensionError("conv2d_transpose weight expects " + std::to_string(w.extent(0)) +
                             " input channels, input has " + std::to_string(x.extent(0)));
    if (b.rank() != 1 || b.extent(0) != w.extent(1))
        throw DimensionError("conv2d_transpose bias must be [Co], got " + shape_str(b.shape()));
    if (stride < 1) throw UsageError("conv2d_transpose stride must be >= 1");
    if (pad < 0) throw UsageError("conv2d_transpose pad must be >= 0");
    const int k = w.extent(2);
    const int oh = tconv_out_extent(x.extent(1), k, stride, pad);
    const int ow = tconv_out_extent(x.extent(2), k, stride, pad);
    Tensor<Real> y{Shape{w.extent(1), oh, ow}};
    detail::tconv_fwd(x.data(), x.extent(0), x.extent(1), x.extent(2),
                      w.data(), w.extent(1), k, stride, pad, b.data(), y.data(), oh, ow);
    return y;
}

/// Shared linear map along the channel axis: out[:,h,w] = W * in[:,h,w] + b
/// at every spatial position.
template <class Real>
Tensor<Real> channel_linear(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b) {
    if (x.rank() != 3) throw DimensionError("channel_linear input must be [C,H,W], got " + shape_str(x.shape()));
    if (w.rank() != 2) throw DimensionError("channel_linear weight must be [Co,Ci], got " + shape_str(w.shape()));
    if (w.extent(1) != x.extent(0))
        throw DimensionError("channel_linear weight expects " + std::to_string(w.extent(1)) +
                             " channels, input has " + std::to_string(x.extent(0)));
    if (b.rank() != 1 || b.extent(0) != w.extent(0))
        throw DimensionError("channel_linear bias must be [Co], got " + shape_str(b.shape()));
    const int ci = x.extent(0), co = w.extent(0);
    const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
    Tensor<Real> y{Shape{co, x.extent(1), x.extent(2)}};
    for (int oc = 0; oc < co; ++oc) {
        Real* yp = y.data() + oc * plane;
        const Real bv = b[oc];
        for (std::int64_t i = 0; i < plane; ++i) yp[i] = bv;
        for (int ic = 0; ic < ci; ++ic) {
            const Real wv = w[static_cast<std::int64_t>(oc) * ci + ic];
            const Real* xp = x.data() + ic * plane;
            for (std::int64_t i = 0; i < plane; ++i) yp[i] += wv * xp[i];
        }
    }
    return y;
}

/// Elementwise x if x >= 0 else slope * x.
template <class Real>
Tensor<Real> leaky_rect(const Tensor<Real>& x, Real slope) {
    if (slope < Real(0) || slope > Real(1)) throw UsageError("leaky_rect slope must be in [0,1]");
    Tensor<Real> y{x.shape()};
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) {
        const Real v = x[i];
        y[i] = v >= Real(0) ? v : slope * v;
    }
    return y;
}

/// Sum of squared elementwise differences, accumulated in double.
template <class Real>
Real sq_norm_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b))
        throw DimensionError("sq_norm_diff shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double acc = 0.0;
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return static_cast<Real>(acc);
}

/// Zero the columns (last axis) where keep[col] == 0. Works for any rank-3
/// tensor whose last extent matches the mask length.
template <class Real>
Tensor<Real> mask_columns(const Tensor<Real>& x, const std::vector<std::uint8_t>& keep) {
    if (x.rank() != 3) throw DimensionError("mask_columns input must be [C,H,W], got " + shape_str(x.shape()));
    if (static_cast<int>(keep.size()) != x.extent(2))
        throw DimensionError("mask length " + std::to_string(keep.size()) +
                             " does not match trace count " + std::to_string(x.extent(2)));
    Tensor<Real> y{x.shape()};
    const int w = x.extent(2);
    const std::int64_t rows = x.size() / w;
    for (std::int64_t r = 0; r < rows; ++r) {
        const Real* xr = x.data() + r * w;
        Real* yr = y.data() + r * w;
        for (int c = 0; c < w; ++c) yr[c] = keep[static_cast<std::size_t>(c)] ? xr[c] : Real(0);
    }
    return y;
}

}  // namespace zsscl
